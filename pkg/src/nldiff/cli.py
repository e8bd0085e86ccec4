"""Command-line entry point.

Subcommands
-----------
solve
    Run the configured evolution and export the trajectory.
verify
    Run it and check the a priori estimates; nonzero exit on failure.
denoise
    Treat a PGM image as initial data for the signal-adaptive flow, or
    apply the classical one-pass normalized filter with ``--one-step``.
study contraction | cauchy | refine
    The three convergence and stability experiments.

Exit codes: 0 success, 1 a check failed, 2 configuration or input error,
3 numerical blow-up.  All outputs are deterministic for a fixed config
and seed, so reruns produce byte-identical files.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from .analysis import contraction_study, mollifier_cauchy_study, time_refinement_study, verify_invariants
from .config import build_problem, parse_config, serialize_config
from .errors import (
    AssumptionViolationError,
    ConfigParseError,
    ConfigurationError,
    GridMismatchError,
    KernelValidationError,
    NumericalBlowupError,
    PgmFormatError,
    UndefinedRatioError,
)
from .grid import Field
from .kernels import bilateral_kernel, make_spatial_kernel, zero_reaction
from .operator import _overlap, flow_energy
from .pgm import field_to_image, image_to_field, load_pgm, save_pgm
from .stepper import Problem, SolverConfig, export_trajectory, solve_problem


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)


def _series_csv(columns: dict) -> str:
    names = list(columns)
    rows = [",".join(names)]
    length = len(next(iter(columns.values())))
    for i in range(length):
        rows.append(",".join(format(float(columns[k][i]), ".17g") for k in names))
    return "\n".join(rows) + "\n"


def _load(args):
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _out_dir(args, cfg) -> str:
    out = args.out if args.out else cfg.output.dir
    os.makedirs(out, exist_ok=True)
    return out


def _cmd_solve(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    traj = solve_problem(build_problem(cfg), threads=args.threads)
    paths = export_trajectory(traj, out)
    _write(os.path.join(out, "run_config.txt"), serialize_config(cfg))
    final = traj.final_state.values
    print(f"solved {cfg.solver.steps} steps to t = {cfg.solver.T}")
    print(f"final range [{final.min():.6g}, {final.max():.6g}], "
          f"mass {traj.grid.node_volume * final.sum():.12g}")
    print(f"wrote {len(paths) + 1} files to {out}")
    return 0


def _cmd_verify(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    traj = solve_problem(build_problem(cfg), threads=args.threads)
    report = verify_invariants(traj)
    print(report.to_text())
    _write(os.path.join(out, "report.txt"), report.to_text() + "\n")
    _write(os.path.join(out, "report.csv"), report.to_csv())
    return 0 if report.all_passed else 1


def _one_step_filter(grid, table, u: np.ndarray, h: float) -> np.ndarray:
    """One pass of the classical normalized adaptive filter.

    Weighs each neighbor by the even window exp(-(s/h)^2) of the value
    difference s and renormalizes per node.  The zero offset is in every
    table, so the denominator never vanishes.  This is the filter whose
    odd correction drives the evolution; it does not conserve mass.
    """
    uu = u.reshape(grid.counts)
    num = np.zeros_like(uu)
    den = np.zeros_like(uu)
    inv_h2 = 1.0 / (h * h)
    for k in range(table.offsets.shape[0]):
        dst, src = _overlap(grid.counts, table.offsets[k])
        s = uu[src] - uu[dst]
        w = table.weights[k] * np.exp(-(s * s) * inv_h2)
        num[dst] += w * uu[src]
        den[dst] += w
    return (num / den).ravel()


def _cmd_denoise(args) -> int:
    image = load_pgm(args.image)
    grid, u0 = image_to_field(image)
    out = args.out
    os.makedirs(out, exist_ok=True)
    table = make_spatial_kernel(grid, "gaussian", args.radius)

    if args.one_step:
        result = _one_step_filter(grid, table, u0.values, args.h)
        kernel = bilateral_kernel(args.h)
        e0 = flow_energy(grid, table, kernel, u0)
        e1 = flow_energy(grid, table, kernel, Field(grid, result))
        _write(
            os.path.join(out, "energy_series.csv"),
            _series_csv({"step": [0, 1], "t": [0.0, 0.0], "energy": [e0, e1]}),
        )
        final = Field(grid, result)
    else:
        config = SolverConfig(
            T=args.T,
            steps=args.steps,
            scheme="semi_implicit_w",
            mu_mode="manual",
            mu=0.0,
            record_every=max(1, args.steps),
        )
        problem = Problem(
            grid=grid,
            table=table,
            kernel=bilateral_kernel(args.h),
            reaction=zero_reaction(),
            u0=u0,
            config=config,
        )
        traj = solve_problem(problem, threads=args.threads)
        d = traj.per_step
        _write(
            os.path.join(out, "energy_series.csv"),
            _series_csv({"step": d["step"], "t": d["t"], "energy": d["energy"]}),
        )
        final = traj.final_state

    lo, hi = float(final.values.min()), float(final.values.max())
    print(f"value range before quantization: [{lo:.6g}, {hi:.6g}]"
          + ("" if 0.0 <= lo and hi <= 1.0 else " (will be clamped to [0, 1])"))
    save_pgm(field_to_image(final, clamp=True), os.path.join(out, "denoised.pgm"))
    print(f"wrote {os.path.join(out, 'denoised.pgm')}")
    return 0


def _cmd_study_contraction(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    problem = build_problem(cfg)
    rng = np.random.default_rng(cfg.seed + 1)
    scale = cfg.study.perturb_scale * max(1.0, float(np.max(np.abs(problem.u0.values))))
    bump = rng.uniform(0.0, 1.0, size=problem.grid.node_count)
    u0_b = Field(problem.grid, problem.u0.values + scale * bump)
    report = contraction_study(problem, problem.u0, u0_b, cfg.study.norm)
    print(report.to_text())
    _write(os.path.join(out, "contraction.csv"),
           _series_csv({"t": report.series["t"], "ratio": report.series["ratio"]}))
    _write(os.path.join(out, "contraction_report.csv"), report.to_csv())
    return 0 if report.all_passed else 1


def _cmd_study_cauchy(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    base_cfg = replace(cfg, range=replace(cfg.range, mollify_n=0))
    problem = build_problem(base_cfg)
    result = mollifier_cauchy_study(
        problem, problem.kernel, cfg.study.levels, quad_count=max(257, cfg.range.mollify_quad)
    )
    print(result.report.to_text())
    print(f"fitted level-decay exponent: {result.fitted_exponent:.4f}")
    rows = ["level_i,level_j,l1_distance"]
    for i, ni in enumerate(result.levels):
        for j, nj in enumerate(result.levels):
            if i < j:
                rows.append(f"{ni},{nj},{result.pairwise_l1[i, j]:.17g}")
    _write(os.path.join(out, "cauchy.csv"), "\n".join(rows) + "\n")
    _write(os.path.join(out, "cauchy_report.csv"), result.report.to_csv())
    return 0 if result.report.all_passed else 1


def _cmd_study_refine(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    problem = build_problem(cfg)
    report = time_refinement_study(problem, cfg.study.refine_steps)
    print(report.to_text())
    _write(os.path.join(out, "refine.csv"),
           _series_csv({"tau": report.series["tau"], "error": report.series["error"]}))
    _write(os.path.join(out, "refine_report.csv"), report.to_csv())
    return 0 if report.all_passed else 1


def _add_common(sub, seed_flag=True):
    sub.add_argument("--config", required=True, help="run configuration file")
    sub.add_argument("--out", default="", help="output directory (default: output.dir from the config)")
    sub.add_argument("--threads", type=int, default=1, help="worker threads for the integral operator")
    if seed_flag:
        sub.add_argument("--seed", type=int, default=None, help="override the config seed")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nldiff",
        description="Nonlocal diffusion with signal-adaptive range kernels.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("solve", help="run the evolution and export the trajectory")
    _add_common(p)
    p.set_defaults(handler=_cmd_solve)

    p = subs.add_parser("verify", help="run and check the a priori estimates")
    _add_common(p)
    p.set_defaults(handler=_cmd_verify)

    p = subs.add_parser("denoise", help="smooth a PGM image")
    p.add_argument("--image", required=True, help="input image, PGM (P2 or P5)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--one-step", action="store_true",
                   help="apply the classical normalized filter once instead of the flow")
    p.add_argument("--radius", type=float, default=0.03, help="spatial window radius (image width = 1)")
    p.add_argument("--h", type=float, default=0.1, help="value-difference scale of the window")
    p.add_argument("--T", type=float, default=0.05, help="flow end time")
    p.add_argument("--steps", type=int, default=32, help="flow step count")
    p.add_argument("--threads", type=int, default=1, help="worker threads for the integral operator")
    p.set_defaults(handler=_cmd_denoise)

    p = subs.add_parser("study", help="convergence and stability experiments")
    studies = p.add_subparsers(dest="study", required=True)
    for name, handler in (
        ("contraction", _cmd_study_contraction),
        ("cauchy", _cmd_study_cauchy),
        ("refine", _cmd_study_refine),
    ):
        q = studies.add_parser(name)
        _add_common(q)
        q.set_defaults(handler=handler)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AssumptionViolationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.report is not None:
            for check in exc.report.checks:
                if not check.passed:
                    print(f"  failed: {check.name}: {check.detail}", file=sys.stderr)
        return 2
    except NumericalBlowupError as exc:
        print(f"error: {exc} (step {exc.step}, t = {exc.t:.6g})", file=sys.stderr)
        return 3
    except (
        ConfigurationError,
        GridMismatchError,
        KernelValidationError,
        PgmFormatError,
        UndefinedRatioError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
