"""Run configuration files: strict parsing, defaults, round-tripping.

The format is flat ``key = value`` lines with dotted section prefixes,

    grid.dim = 1
    grid.extents = 0, 1
    grid.counts = 64
    range.family = p_laplacian
    range.p = 3
    solver.T = 0.5
    solver.steps = 1024

Blank lines and '#' comments are ignored.  Parsing is strict: unknown
keys, duplicate keys, malformed values, and missing required keys are all
errors that name the offending line.  Every optional key has a default
that is materialized into the parsed configuration, and serializing a
configuration writes every key back out, so parse(serialize(c)) == c.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigParseError, ConfigurationError
from .grid import Field, build_grid, load_field
from .kernels import (
    REACTION_FAMILIES,
    affine_reaction,
    bilateral_kernel,
    custom_table_reaction,
    linear_decay_reaction,
    linear_kernel,
    logistic_reaction,
    make_spatial_kernel,
    mollify_range_kernel,
    p_laplacian_kernel,
    spatial_exponent_kernel,
    variable_exponent_kernel,
    zero_reaction,
)
from .pgm import image_to_field, load_pgm
from .stepper import Problem, SolverConfig


@dataclass(frozen=True)
class GridSection:
    dim: int = 1
    extents: tuple = (0.0, 1.0)
    counts: tuple = (64,)


@dataclass(frozen=True)
class KernelSection:
    family: str = "gaussian"
    radius: float = 0.1
    table_path: str = ""


@dataclass(frozen=True)
class RangeSection:
    family: str = "linear"
    p: float = 2.0
    h: float = 0.1
    exponent_sigmas: tuple = (0.0, 1.0)
    exponent_values: tuple = (2.0, 2.0)
    mollify_n: int = 0
    mollify_quad: int = 129


@dataclass(frozen=True)
class ReactionSection:
    family: str = "zero"
    rate: float = 0.0
    offset: float = 0.0
    slope: float = 0.0
    capacity: float = 1.0
    table_path: str = ""


@dataclass(frozen=True)
class InitialSection:
    kind: str = "constant"
    value: float = 0.0
    low: float = 0.0
    high: float = 1.0
    path: str = ""


@dataclass(frozen=True)
class StudySection:
    levels: tuple = (4, 8, 16, 32)
    refine_steps: tuple = (512, 1024, 2048, 4096)
    norm: float = 2.0
    perturb_scale: float = 0.05


@dataclass(frozen=True)
class OutputSection:
    dir: str = "out"
    formats: tuple = ("csv",)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 42
    grid: GridSection = GridSection()
    kernel: KernelSection = KernelSection()
    range: RangeSection = RangeSection()
    reaction: ReactionSection = ReactionSection()
    initial: InitialSection = InitialSection()
    solver: SolverConfig = SolverConfig(T=1.0, steps=256)
    study: StudySection = StudySection()
    output: OutputSection = OutputSection()


def _parse_float(text: str) -> float:
    v = float(text)
    if math.isnan(v):
        raise ValueError("nan is not a valid value")
    return v


def _parse_floats(text: str) -> tuple:
    return tuple(_parse_float(p.strip()) for p in text.split(","))


def _parse_int(text: str) -> int:
    return int(text)


def _parse_ints(text: str) -> tuple:
    return tuple(int(p.strip()) for p in text.split(","))


def _parse_str(text: str) -> str:
    return text


def _parse_norm(text: str) -> float:
    return math.inf if text.strip() in ("inf", "infinity") else _parse_float(text)


def _choice(*options):
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return text

    return parse


# key -> (parser, default); defaults mirror the section dataclasses
_SCHEMA = {
    "seed": (_parse_int, 42),
    "grid.dim": (_parse_int, 1),
    "grid.extents": (_parse_floats, (0.0, 1.0)),
    "grid.counts": (_parse_ints, (64,)),
    "kernel.family": (_choice("gaussian", "box", "custom_table"), "gaussian"),
    "kernel.radius": (_parse_float, 0.1),
    "kernel.table_path": (_parse_str, ""),
    "range.family": (
        _choice("linear", "p_laplacian", "variable_exponent", "spatial_exponent", "bilateral_gaussian"),
        "linear",
    ),
    "range.p": (_parse_float, 2.0),
    "range.h": (_parse_float, 0.1),
    "range.exponent_sigmas": (_parse_floats, (0.0, 1.0)),
    "range.exponent_values": (_parse_floats, (2.0, 2.0)),
    "range.mollify_n": (_parse_int, 0),
    "range.mollify_quad": (_parse_int, 129),
    "reaction.family": (_choice(*REACTION_FAMILIES), "zero"),
    "reaction.rate": (_parse_float, 0.0),
    "reaction.offset": (_parse_float, 0.0),
    "reaction.slope": (_parse_float, 0.0),
    "reaction.capacity": (_parse_float, 1.0),
    "reaction.table_path": (_parse_str, ""),
    "initial.kind": (_choice("constant", "random", "step", "field_csv", "pgm"), "constant"),
    "initial.value": (_parse_float, 0.0),
    "initial.low": (_parse_float, 0.0),
    "initial.high": (_parse_float, 1.0),
    "initial.path": (_parse_str, ""),
    "solver.T": (_parse_float, 1.0),
    "solver.steps": (_parse_int, 256),
    "solver.scheme": (_choice("semi_implicit_w", "explicit_euler"), "semi_implicit_w"),
    "solver.mu_mode": (_choice("auto_growth", "auto_linf", "manual"), "auto_growth"),
    "solver.mu": (_parse_float, 0.0),
    "solver.mu_margin": (_parse_float, 0.01),
    "solver.record_every": (_parse_int, 1),
    "study.levels": (_parse_ints, (4, 8, 16, 32)),
    "study.refine_steps": (_parse_ints, (512, 1024, 2048, 4096)),
    "study.norm": (_parse_norm, 2.0),
    "study.perturb_scale": (_parse_float, 0.05),
    "output.dir": (_parse_str, "out"),
    "output.formats": (_parse_str, "csv"),
}

_REQUIRED = ("grid.dim", "grid.extents", "grid.counts", "range.family", "solver.T", "solver.steps")


def parse_config_text(text: str, path: str = "<string>") -> RunConfig:
    """Parse configuration text; see :func:`parse_config` for the format."""
    values = {}
    seen_lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigParseError("expected 'key = value'", line=lineno, path=path)
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _SCHEMA:
            raise ConfigParseError(f"unknown key {key!r}", line=lineno, path=path)
        if key in values:
            raise ConfigParseError(
                f"duplicate key {key!r} (first set on line {seen_lines[key]})",
                line=lineno,
                path=path,
            )
        parser, _ = _SCHEMA[key]
        try:
            values[key] = parser(val)
        except (ValueError, TypeError) as exc:
            raise ConfigParseError(f"bad value for {key}: {exc}", line=lineno, path=path) from exc
        seen_lines[key] = lineno
    missing = [k for k in _REQUIRED if k not in values]
    if missing:
        raise ConfigParseError(f"missing required keys: {', '.join(missing)}", path=path)
    for key, (_, default) in _SCHEMA.items():
        values.setdefault(key, default)
    return _assemble(values, path)


def parse_config(path) -> RunConfig:
    """Parse a configuration file into a fully defaulted :class:`RunConfig`."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigParseError(f"cannot read file: {exc}", path=str(path)) from exc
    return parse_config_text(text, path=str(path))


def _assemble(v: dict, path: str) -> RunConfig:
    dim = v["grid.dim"]
    flat_ext = v["grid.extents"]
    if dim not in (1, 2):
        raise ConfigParseError(f"grid.dim must be 1 or 2, got {dim}", path=path)
    if len(flat_ext) != 2 * dim:
        raise ConfigParseError(
            f"grid.extents needs {2 * dim} numbers for dim {dim}, got {len(flat_ext)}",
            path=path,
        )
    if len(v["grid.counts"]) != dim:
        raise ConfigParseError(
            f"grid.counts needs {dim} entries, got {len(v['grid.counts'])}", path=path
        )
    try:
        solver = SolverConfig(
            T=v["solver.T"],
            steps=v["solver.steps"],
            scheme=v["solver.scheme"],
            mu_mode=v["solver.mu_mode"],
            mu=v["solver.mu"],
            mu_margin=v["solver.mu_margin"],
            record_every=v["solver.record_every"],
        )
    except ConfigurationError as exc:
        raise ConfigParseError(str(exc), path=path) from exc
    return RunConfig(
        seed=v["seed"],
        grid=GridSection(dim=dim, extents=flat_ext, counts=v["grid.counts"]),
        kernel=KernelSection(
            family=v["kernel.family"], radius=v["kernel.radius"], table_path=v["kernel.table_path"]
        ),
        range=RangeSection(
            family=v["range.family"],
            p=v["range.p"],
            h=v["range.h"],
            exponent_sigmas=v["range.exponent_sigmas"],
            exponent_values=v["range.exponent_values"],
            mollify_n=v["range.mollify_n"],
            mollify_quad=v["range.mollify_quad"],
        ),
        reaction=ReactionSection(
            family=v["reaction.family"],
            rate=v["reaction.rate"],
            offset=v["reaction.offset"],
            slope=v["reaction.slope"],
            capacity=v["reaction.capacity"],
            table_path=v["reaction.table_path"],
        ),
        initial=InitialSection(
            kind=v["initial.kind"],
            value=v["initial.value"],
            low=v["initial.low"],
            high=v["initial.high"],
            path=v["initial.path"],
        ),
        solver=solver,
        study=StudySection(
            levels=v["study.levels"],
            refine_steps=v["study.refine_steps"],
            norm=v["study.norm"],
            perturb_scale=v["study.perturb_scale"],
        ),
        output=OutputSection(dir=v["output.dir"], formats=tuple(v["output.formats"].split(","))),
    )


def _fmt_value(val) -> str:
    if isinstance(val, tuple):
        return ", ".join(_fmt_value(x) for x in val)
    if isinstance(val, float):
        return "inf" if math.isinf(val) else repr(val)
    return str(val)


def serialize_config(cfg: RunConfig) -> str:
    """Write a configuration back to text, every key materialized."""
    c = cfg
    values = {
        "seed": c.seed,
        "grid.dim": c.grid.dim,
        "grid.extents": c.grid.extents,
        "grid.counts": c.grid.counts,
        "kernel.family": c.kernel.family,
        "kernel.radius": c.kernel.radius,
        "kernel.table_path": c.kernel.table_path,
        "range.family": c.range.family,
        "range.p": c.range.p,
        "range.h": c.range.h,
        "range.exponent_sigmas": c.range.exponent_sigmas,
        "range.exponent_values": c.range.exponent_values,
        "range.mollify_n": c.range.mollify_n,
        "range.mollify_quad": c.range.mollify_quad,
        "reaction.family": c.reaction.family,
        "reaction.rate": c.reaction.rate,
        "reaction.offset": c.reaction.offset,
        "reaction.slope": c.reaction.slope,
        "reaction.capacity": c.reaction.capacity,
        "reaction.table_path": c.reaction.table_path,
        "initial.kind": c.initial.kind,
        "initial.value": c.initial.value,
        "initial.low": c.initial.low,
        "initial.high": c.initial.high,
        "initial.path": c.initial.path,
        "solver.T": c.solver.T,
        "solver.steps": c.solver.steps,
        "solver.scheme": c.solver.scheme,
        "solver.mu_mode": c.solver.mu_mode,
        "solver.mu": c.solver.mu,
        "solver.mu_margin": c.solver.mu_margin,
        "solver.record_every": c.solver.record_every,
        "study.levels": c.study.levels,
        "study.refine_steps": c.study.refine_steps,
        "study.norm": c.study.norm,
        "study.perturb_scale": c.study.perturb_scale,
        "output.dir": c.output.dir,
        "output.formats": ",".join(c.output.formats),
    }
    lines = [f"{key} = {_fmt_value(values[key])}" for key in _SCHEMA]
    return "\n".join(lines) + "\n"


def _load_kernel_table_csv(path):
    offsets = []
    weights = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            try:
                offsets.append([int(p) for p in parts[:-1]])
                weights.append(float(parts[-1]))
            except ValueError as exc:
                raise ConfigParseError(f"bad kernel table row: {exc}", line=lineno, path=str(path)) from exc
    return np.asarray(offsets), np.asarray(weights)


def _load_reaction_table_csv(path):
    s_vals, f_vals = [], []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            try:
                s_vals.append(float(parts[0]))
                f_vals.append(float(parts[1]))
            except (ValueError, IndexError) as exc:
                raise ConfigParseError(f"bad reaction table row: {exc}", line=lineno, path=str(path)) from exc
    return s_vals, f_vals


def build_initial_state(cfg: RunConfig, grid) -> Field:
    sec = cfg.initial
    n = grid.node_count
    if sec.kind == "constant":
        return Field(grid, np.full(n, sec.value))
    if sec.kind == "random":
        rng = np.random.default_rng(cfg.seed)
        return Field(grid, rng.uniform(sec.low, sec.high, size=n))
    if sec.kind == "step":
        coords = grid.node_coordinates()[:, 0]
        lo, hi = grid.extents[0]
        return Field(grid, np.where(coords < 0.5 * (lo + hi), sec.low, sec.high))
    if sec.kind == "field_csv":
        f = load_field(sec.path)
        if f.grid != grid:
            raise ConfigurationError(
                f"initial field in {sec.path} lives on a different grid than the config"
            )
        return f
    # pgm
    image = load_pgm(sec.path)
    igrid, f = image_to_field(image)
    if igrid != grid:
        raise ConfigurationError(
            f"image {sec.path} implies grid counts {igrid.counts} and extents "
            f"{igrid.extents}; the config grid disagrees"
        )
    return f


def build_problem(cfg: RunConfig) -> Problem:
    """Materialize a :class:`RunConfig` into a runnable :class:`Problem`."""
    dim = cfg.grid.dim
    extents = [
        (cfg.grid.extents[2 * k], cfg.grid.extents[2 * k + 1]) for k in range(dim)
    ]
    grid = build_grid(dim, extents, cfg.grid.counts)

    ks = cfg.kernel
    table_data = _load_kernel_table_csv(ks.table_path) if ks.family == "custom_table" else None
    table = make_spatial_kernel(grid, ks.family, ks.radius, table=table_data)

    u0 = build_initial_state(cfg, grid)

    rs = cfg.range
    if rs.family == "linear":
        kernel = linear_kernel()
    elif rs.family == "p_laplacian":
        kernel = p_laplacian_kernel(rs.p)
    elif rs.family == "variable_exponent":
        kernel = variable_exponent_kernel(rs.exponent_sigmas, rs.exponent_values)
    elif rs.family == "spatial_exponent":
        kernel = spatial_exponent_kernel(rs.exponent_sigmas, rs.exponent_values, u0)
    else:
        kernel = bilateral_kernel(rs.h)
    if rs.mollify_n >= 1:
        kernel = mollify_range_kernel(kernel, rs.mollify_n, rs.mollify_quad)

    fs = cfg.reaction
    if fs.family == "zero":
        reaction = zero_reaction()
    elif fs.family == "linear_decay":
        reaction = linear_decay_reaction(fs.rate)
    elif fs.family == "affine":
        reaction = affine_reaction(fs.offset, fs.slope)
    elif fs.family == "logistic":
        reaction = logistic_reaction(fs.rate, fs.capacity)
    else:
        s_vals, f_vals = _load_reaction_table_csv(fs.table_path)
        reaction = custom_table_reaction(s_vals, f_vals)

    return Problem(
        grid=grid,
        table=table,
        kernel=kernel,
        reaction=reaction,
        u0=u0,
        config=cfg.solver,
        seed=cfg.seed,
    )
