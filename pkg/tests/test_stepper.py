"""Time stepping: scheme collapse, bit-exact recurrence oracles, guards.

Two oracles anchor this module.  A scalar transcription of the damped
update formula, written against a two-node problem whose operator has a
closed form, must reproduce the solver bit for bit.  And on a constant
state the operator vanishes exactly, so the run reduces to a scalar
reaction recursion that can be checked both bit for bit and against the
closed-form logistic solution.
"""

import math
import os

import numpy as np
import pytest

from nldiff import (
    AssumptionViolationError,
    ConfigurationError,
    Field,
    GridMismatchError,
    NumericalBlowupError,
    Problem,
    SolverConfig,
    UndefinedRatioError,
    build_grid,
    export_trajectory,
    linear_kernel,
    logistic_reaction,
    linear_decay_reaction,
    make_spatial_kernel,
    p_laplacian_kernel,
    select_mu,
    solve,
    solve_problem,
    stability_constant_estimate,
    step_explicit_euler,
    step_semi_implicit,
    zero_reaction,
)


def two_node_problem(u0_vals, *, T=0.5, steps=16, mu_mode="manual", mu=0.0,
                     reaction=None, scheme="semi_implicit_w"):
    g = build_grid(1, [(0.0, 1.0)], [2])
    t = make_spatial_kernel(g, "custom_table", table=([[-1], [0], [1]], [1.0, 0.0, 1.0]))
    cfg = SolverConfig(T=T, steps=steps, scheme=scheme, mu_mode=mu_mode, mu=mu)
    return Problem(g, t, linear_kernel(), reaction or zero_reaction(), Field(g, u0_vals), cfg)


# ---------------------------------------------------------------------------
# mu selection and config validation


def test_select_mu_hand_values():
    assert select_mu("auto_growth", c_a=1.0, c_f=0.5, margin=0.01) == 2.51
    assert select_mu("auto_linf", c_f=0.6, k=1.2) == pytest.approx(1.1, rel=1e-15)
    assert select_mu("manual", mu=0.37) == 0.37
    with pytest.raises(ConfigurationError):
        select_mu("auto_linf", c_f=0.6, k=0.0)
    with pytest.raises(ConfigurationError):
        select_mu("auto_linf", c_f=0.6)
    with pytest.raises(ConfigurationError):
        select_mu("no_such_mode")


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(T=0.0, steps=4),
        dict(T=-1.0, steps=4),
        dict(T=1.0, steps=0),
        dict(T=1.0, steps=2.5),
        dict(T=1.0, steps=4, scheme="leapfrog"),
        dict(T=1.0, steps=4, mu_mode="adaptive"),
        dict(T=1.0, steps=4, mu=-0.1),
        dict(T=1.0, steps=4, mu_margin=0.0),
        dict(T=1.0, steps=4, record_every=0),
    ],
)
def test_solver_config_rejects(kwargs):
    with pytest.raises(ConfigurationError):
        SolverConfig(**kwargs)


# ---------------------------------------------------------------------------
# time grid and recording


def test_final_time_is_hit_exactly():
    traj = solve_problem(two_node_problem([0.2, 0.9], T=0.7, steps=7))
    assert traj.times[-1] == 0.7
    assert traj.per_step["t"][0] == 0.0
    assert traj.per_step["step"].size == 8


def test_record_every_thins_but_keeps_endpoint():
    traj = solve_problem(two_node_problem([0.2, 0.9], steps=10), config=SolverConfig(
        T=0.5, steps=10, mu_mode="manual", record_every=4))
    np.testing.assert_array_equal(traj.record_steps, [0, 4, 8, 10])
    assert len(traj.states) == 4
    assert traj.times[-1] == 0.5
    # diagnostics still cover every step
    assert traj.per_step["mass"].size == 11


def test_initial_state_is_recorded_verbatim():
    u0 = [0.30000000000000004, 0.7]
    traj = solve_problem(two_node_problem(u0))
    np.testing.assert_array_equal(traj.states[0].values, u0)


# ---------------------------------------------------------------------------
# scheme collapse and the damped recurrence


def test_mu_zero_collapses_to_explicit_euler_bit_for_bit():
    g = build_grid(1, [(0.0, 1.0)], [24])
    t = make_spatial_kernel(g, "gaussian", 0.1)
    u0 = Field(g, np.random.default_rng(6).uniform(0.1, 0.9, 24))
    r = logistic_reaction(0.4, 2.0)
    semi = solve(g, t, p_laplacian_kernel(2.5), r, u0,
                 SolverConfig(T=0.25, steps=64, scheme="semi_implicit_w", mu_mode="manual"))
    euler = solve(g, t, p_laplacian_kernel(2.5), r, u0,
                  SolverConfig(T=0.25, steps=64, scheme="explicit_euler", mu_mode="manual"))
    assert len(semi.states) == len(euler.states)
    for a, b in zip(semi.states, euler.states):
        np.testing.assert_array_equal(a.values, b.values)
    np.testing.assert_array_equal(semi.per_step["max"], euler.per_step["max"])


def damped_recurrence_oracle(u0, T, steps, mu):
    """The two-node update transcribed directly from the scheme definition."""
    state = np.asarray(u0, dtype=np.float64).copy()
    tau = T / steps
    recorded = []
    for j in range(steps):
        t_j = T * (j / steps)
        ept = math.exp(mu * t_j)
        emt = math.exp(-mu * t_j)
        u = ept * state
        op = np.array([0.5 * (u[1] - u[0]), 0.5 * (u[0] - u[1])])
        rhs = op + np.zeros_like(u)
        recorded.append(u)
        state = (state + (tau * emt) * rhs) / (1.0 + tau * mu)
    recorded.append(math.exp(mu * T) * state)
    return recorded


@pytest.mark.parametrize("mu", [0.0, 0.8])
def test_damped_scheme_matches_scalar_recurrence(mu):
    prob = two_node_problem([0.2, 1.0], T=0.5, steps=16, mu=mu)
    traj = solve_problem(prob)
    want = damped_recurrence_oracle([0.2, 1.0], 0.5, 16, mu)
    assert len(traj.states) == len(want)
    for got, exp in zip(traj.states, want):
        np.testing.assert_array_equal(got.values, exp)


def test_single_step_wrappers_match_solver_formulas():
    g = build_grid(1, [(0.0, 1.0)], [2])
    t = make_spatial_kernel(g, "custom_table", table=([[-1], [0], [1]], [1.0, 0.0, 1.0]))
    w = Field(g, [0.4, 0.9])
    tau, mu, t_j = 0.03125, 0.8, 0.25
    got = step_semi_implicit(g, t, linear_kernel(), zero_reaction(), t_j, tau, mu, w)
    ept, emt = math.exp(mu * t_j), math.exp(-mu * t_j)
    u = ept * w.values
    op = np.array([0.5 * (u[1] - u[0]), 0.5 * (u[0] - u[1])])
    want = (w.values + (tau * emt) * (op + np.zeros(2))) / (1.0 + tau * mu)
    np.testing.assert_array_equal(got.values, want)
    got_e = step_explicit_euler(g, t, linear_kernel(), zero_reaction(), 0.0, tau, w)
    op0 = np.array([0.5 * (w.values[1] - w.values[0]), 0.5 * (w.values[0] - w.values[1])])
    np.testing.assert_array_equal(got_e.values, w.values + tau * (op0 + np.zeros(2)))


# ---------------------------------------------------------------------------
# constant states: pure reaction dynamics


def test_constant_state_follows_scalar_logistic_recursion():
    g = build_grid(1, [(0.0, 1.0)], [16])
    t = make_spatial_kernel(g, "gaussian", 0.1)
    r, cap, T, steps = 0.8, 2.0, 1.0, 1024
    traj = solve(g, t, linear_kernel(), logistic_reaction(r, cap), Field(g, np.full(16, 0.3)),
                 SolverConfig(T=T, steps=steps, mu_mode="manual", record_every=steps))
    x = np.float64(0.3)
    tau = T / steps
    for _ in range(steps):
        x = x + tau * (r * x * (1.0 - x / cap))
    np.testing.assert_array_equal(traj.final_state.values, np.full(16, x))
    # and the closed-form logistic solution is an independent second route
    closed = cap / (1.0 + (cap / 0.3 - 1.0) * math.exp(-r * T))
    assert float(x) == pytest.approx(closed, rel=2e-3)


def test_decay_reaction_constant_state_stays_spatially_flat():
    g = build_grid(2, [(0.0, 1.0), (0.0, 1.0)], [5, 5])
    t = make_spatial_kernel(g, "gaussian", 0.2)
    traj = solve(g, t, p_laplacian_kernel(3.0), linear_decay_reaction(0.5),
                 Field(g, np.full(25, 0.6)), SolverConfig(T=0.5, steps=128, mu_mode="manual"))
    vals = traj.final_state.values
    assert float(np.ptp(vals)) == 0.0
    assert vals[0] == pytest.approx(0.6 * math.exp(-0.25), rel=2e-3)


# ---------------------------------------------------------------------------
# damping certificates


def test_auto_linf_resolves_the_documented_mu():
    prob = two_node_problem([0.2, 1.0], mu_mode="auto_linf",
                            reaction=linear_decay_reaction(0.3))
    traj = solve_problem(prob)
    k = 1.01 * 1.0
    assert traj.constants["k_linf"] == pytest.approx(k, rel=1e-15)
    assert traj.constants["mu"] == pytest.approx(0.3 * (1.0 + k) / k, rel=1e-15)
    cert = math.exp(traj.constants["mu"] * 0.5) * 1.0
    assert float(np.max(traj.per_step["max"])) <= cert * (1.0 + 1e-8)


def test_auto_growth_uses_sampled_constant():
    prob = two_node_problem([0.2, 1.0], mu_mode="auto_growth",
                            reaction=linear_decay_reaction(0.3))
    traj = solve_problem(prob)
    # linear kernel growth samples to 1 exactly, so mu = 2 + 0.3 + margin
    assert traj.constants["c_a"] == pytest.approx(1.0, abs=1e-12)
    assert traj.constants["mu"] == pytest.approx(2.31, rel=1e-12)


def test_mu_overflow_guard():
    with pytest.raises(ConfigurationError, match="overflow"):
        solve_problem(two_node_problem([0.2, 1.0], T=1.0, mu=800.0))


# ---------------------------------------------------------------------------
# guards and failure payloads


def test_nonconformant_data_is_refused_with_report():
    prob = two_node_problem([-0.2, 1.0])
    with pytest.raises(AssumptionViolationError) as exc:
        solve_problem(prob)
    assert "initial state non-negativity" in str(exc.value)
    assert not exc.value.report.all_passed


def test_nonconformant_override_records_the_failure():
    traj = solve_problem(two_node_problem([-0.2, 1.0]), allow_nonconformant=True)
    assert traj.constants["assumptions_ok"] is False


def test_blowup_carries_step_time_and_last_finite_state():
    prob = two_node_problem([0.2, 1.0], T=0.1, steps=8,
                            reaction=linear_decay_reaction(1e80))
    # diagnostics overflow harmlessly on the way out; only the guard matters
    with np.errstate(over="ignore"), pytest.warns(UserWarning, match="positivity bound"):
        with pytest.raises(NumericalBlowupError) as exc:
            solve_problem(prob)
    err = exc.value
    assert 1 <= err.step <= 8
    assert err.t == pytest.approx(0.1 * err.step / 8)
    assert np.all(np.isfinite(err.last_state.values))


def test_tau_restriction_warning_mentions_the_bound():
    g = build_grid(1, [(0.0, 1.0)], [16])
    t = make_spatial_kernel(g, "gaussian", 0.1)
    u0 = Field(g, np.random.default_rng(1).uniform(0.1, 0.9, 16))
    # p < 2 samples an enormous local slope, so any practical tau trips it
    with pytest.warns(UserWarning, match="positivity bound"):
        traj = solve(g, t, p_laplacian_kernel(1.5), zero_reaction(), u0,
                     SolverConfig(T=0.1, steps=4, mu_mode="manual"))
    assert traj.constants["tau"] > traj.constants["tau_positivity_limit"]


def test_initial_state_grid_mismatch():
    prob = two_node_problem([0.2, 1.0])
    other = build_grid(1, [(0.0, 1.0)], [3])
    with pytest.raises(GridMismatchError):
        solve_problem(prob, u0=Field(other, np.zeros(3)))


# ---------------------------------------------------------------------------
# separation ratios


def test_stability_estimate_ratios_and_refusals():
    base = two_node_problem([0.2, 1.0], T=0.5, steps=32)
    a = solve_problem(base)
    b = solve_problem(base, u0=Field(base.grid, [0.35, 0.8]))
    for p in (1, 2, math.inf):
        summ = stability_constant_estimate(a, b, p)
        assert summ.ratios[0] == 1.0
        assert summ.max_ratio <= 1.0 + 1e-12  # monotone kernel, no reaction
        assert summ.fitted_rate <= 0.0
    with pytest.raises(UndefinedRatioError):
        stability_constant_estimate(a, a, 2)
    c = solve_problem(base, config=SolverConfig(T=0.5, steps=16, mu_mode="manual"))
    with pytest.raises(ConfigurationError):
        stability_constant_estimate(a, c, 2)


# ---------------------------------------------------------------------------
# export


def test_export_writes_fields_and_diagnostics(tmp_path):
    prob = two_node_problem([0.2, 1.0], steps=4)
    traj = solve_problem(prob)
    written = export_trajectory(traj, tmp_path)
    names = sorted(os.path.basename(p) for p in written)
    assert names == [
        "diagnostics.csv",
        "field_000000.csv",
        "field_000001.csv",
        "field_000002.csv",
        "field_000003.csv",
        "field_000004.csv",
    ]
    lines = (tmp_path / "diagnostics.csv").read_text(encoding="ascii").splitlines()
    assert lines[0] == "step,t,min,max,mass,energy,linf_bound_cert,positivity_ok"
    assert len(lines) == 6
    # mu = 0: the certificate column is flat at max|u0|, positivity holds
    for row in lines[1:]:
        cols = row.split(",")
        assert float(cols[6]) == 1.0
        assert cols[7] == "1"


def test_export_is_byte_stable(tmp_path):
    prob = two_node_problem([0.2, 1.0], steps=4)
    export_trajectory(solve_problem(prob), tmp_path / "a")
    export_trajectory(solve_problem(prob), tmp_path / "b")
    for name in os.listdir(tmp_path / "a"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
