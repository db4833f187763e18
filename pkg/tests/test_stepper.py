from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from facetflow import (ProblemData, StepFailure, StepperConfig, ValidationError, build_grid, eval_interpolants,
                       picard_map_B, psi_box_bounds, run_rothe, solve_poisson, solve_step)
from facetflow.elliptic import apply_full
from facetflow.grid import laplacian_interior
from facetflow.oracle import newton_step, oracle_case
from facetflow.presets import make_data
from facetflow.stepper import initial_state, secant_edges, step_residual


def _steady(cells=10):
    g = build_grid(1, [1.0], [cells])
    return make_data("steady_unit", g)


# ---------------------------------------------------------------------------
# the fixed-point map


def test_picard_zero_is_fixed_point_of_steady_data():
    data = _steady()
    g = data.grid
    q = g.coords[0] ** 2 / 2
    u, psi = picard_map_B(np.zeros(g.shape), q, data, 0.1)
    np.testing.assert_allclose(u.values, q, atol=1e-14)
    np.testing.assert_allclose(psi.values, 0.0, atol=1e-14)
    u2, psi2 = picard_map_B(np.zeros(g.shape), q, data, 0.1, sigma=0.5)
    np.testing.assert_allclose(u2.values, q, atol=1e-14)
    np.testing.assert_allclose(psi2.values, 0.0, atol=1e-14)


def test_picard_substitution_oracle(rng):
    data, u_prev, tau = oracle_case(rng, cells=6, tau=0.05)
    g = data.grid
    gpsi = data.psi_boundary.copy()
    gpsi[1:-1] = rng.normal(scale=0.3, size=5)
    sigma = 0.7
    u, psi = picard_map_B(gpsi, u_prev, data, tau, sigma=sigma)
    u, psi = u.values, psi.values
    # Poisson step
    assert np.max(np.abs(laplacian_interior(u, g) - np.exp(-gpsi[1:-1]))) <= 1e-10
    # reaction-diffusion step with coefficient frozen at g
    lhs = apply_full(g, secant_edges(gpsi, g), tau, psi)
    assert np.max(np.abs(lhs + sigma * (u - u_prev)[1:-1] / tau)) <= 1e-10 * (1 + np.max(np.abs(lhs)))
    assert np.array_equal(u[[0, -1]], data.b0[[0, -1]])
    assert np.array_equal(psi[[0, -1]], sigma * data.psi_boundary[[0, -1]])


def test_picard_rejects_bad_sigma_and_nonfinite():
    data = _steady(4)
    z = np.zeros(data.grid.shape)
    with pytest.raises(ValueError):
        picard_map_B(z, data.u0, data, 0.1, sigma=0.0)
    with pytest.raises(ValueError):
        picard_map_B(np.full(5, np.inf), data.u0, data, 0.1)


def test_secant_edges_reproduce_laplacian_of_exponential(rng):
    g = build_grid(2, [1.0, 1.0], [5, 4])
    p = rng.normal(size=g.shape)
    p[0, 0] = p[1, 0] + 1e-7  # nearly equal neighbours use the series branch
    div = -apply_full(g, secant_edges(p, g), 0.0, p)
    np.testing.assert_allclose(div, laplacian_interior(np.exp(3 * p), g), rtol=1e-11, atol=1e-9)
    a, b = np.array([[0.2, 0.2 + 3e-5]])[0]
    exact = (math.exp(3 * b) - math.exp(3 * a)) / (b - a)
    assert secant_edges(np.array([a, b, 0.0]), build_grid(1, [1.0], [2]))[0][0] == pytest.approx(exact, rel=1e-9)


# ---------------------------------------------------------------------------
# single steps


def test_solve_step_steady():
    data = _steady()
    st_ = solve_step(data.u0, data, StepperConfig(tau=0.1))
    np.testing.assert_allclose(st_.u.values, data.u0, atol=1e-12)
    np.testing.assert_allclose(st_.psi.values, 0.0, atol=1e-12)
    assert st_.residual <= 1e-10
    assert st_.iters <= 2


def test_solve_step_matches_newton(rng):
    for _ in range(5):
        data, u_prev, tau = oracle_case(rng)
        st_ = solve_step(u_prev, data, StepperConfig(tau=tau))
        u_n, psi_n, res = newton_step(u_prev, data, tau)
        assert res < 1e-10
        assert np.max(np.abs(st_.psi.values - psi_n)) <= 1e-8
        assert np.max(np.abs(st_.u.values - u_n)) <= 1e-8


@pytest.mark.parametrize("omega", [0.3, 0.5, 0.8])
@pytest.mark.parametrize("depth", [0, 5])
def test_step_independent_of_damping_and_mixing(omega, depth):
    data, u_prev, tau = oracle_case(np.random.default_rng(5), tau=0.02)
    ref = solve_step(u_prev, data, StepperConfig(tau=tau))
    cfg = StepperConfig(tau=tau, omega=omega, anderson_depth=depth, fp_max_iter=2000)
    st_ = solve_step(u_prev, data, cfg)
    assert np.max(np.abs(st_.psi.values - ref.psi.values)) <= 1e-8


def test_step_independent_of_warm_start(rng):
    data, u_prev, tau = oracle_case(np.random.default_rng(6), tau=0.02)
    ref = solve_step(u_prev, data, StepperConfig(tau=tau))
    for _ in range(3):
        start = data.psi_boundary.copy()
        start[1:-1] = rng.normal(scale=0.5, size=7)
        st_ = solve_step(u_prev, data, StepperConfig(tau=tau), psi_prev=start)
        assert np.max(np.abs(st_.psi.values - ref.psi.values)) <= 1e-8


def test_homotopy_fallback_reaches_same_state():
    data, u_prev, tau = oracle_case(np.random.default_rng(8), tau=0.02)
    ref = solve_step(u_prev, data, StepperConfig(tau=tau))
    cfg = StepperConfig(tau=tau, fp_max_iter=3, homotopy_stages=4, anderson_depth=5)
    with pytest.raises(StepFailure):
        solve_step(u_prev, data, replace(cfg, homotopy_stages=1))
    st_ = solve_step(u_prev, data, replace(cfg, fp_max_iter=400))
    assert np.max(np.abs(st_.psi.values - ref.psi.values)) <= 1e-8


def test_homotopy_path_used_when_plain_iteration_fails():
    data, u_prev, tau = oracle_case(np.random.default_rng(8), tau=0.02)
    ref = solve_step(u_prev, data, StepperConfig(tau=tau))
    n_plain = ref.iters
    cfg = StepperConfig(tau=tau, fp_max_iter=max(n_plain - 1, 1), homotopy_stages=8)
    try:
        st_ = solve_step(u_prev, data, cfg)
    except StepFailure as exc:
        assert len(exc.residual_history) > cfg.fp_max_iter
        return
    assert st_.homotopy
    assert np.max(np.abs(st_.psi.values - ref.psi.values)) <= 1e-8


def test_step_failure_carries_history():
    data, u_prev, tau = oracle_case(np.random.default_rng(9), tau=0.05)
    with pytest.raises(StepFailure) as info:
        solve_step(u_prev, data, StepperConfig(tau=tau, fp_max_iter=1, anderson_depth=0))
    hist = info.value.residual_history
    assert len(hist) == 2 and all(np.isfinite(hist))
    assert "last residual" in str(info.value)


def test_step_state_invariants(rng):
    data, u_prev, tau = oracle_case(rng)
    st_ = solve_step(u_prev, data, StepperConfig(tau=tau))
    g = data.grid
    assert np.array_equal(st_.rho.values, np.exp(st_.psi.values))
    assert np.all(st_.rho.values > 0)
    assert np.array_equal(st_.u.values[[0, -1]], data.b0[[0, -1]])
    assert np.array_equal(st_.psi.values[[0, -1]], data.psi_boundary[[0, -1]])
    assert step_residual(st_.u.values, st_.psi.values, u_prev, data, tau) == st_.residual
    lap = laplacian_interior(st_.u.values, g)
    assert np.max(np.abs(lap - np.exp(-st_.psi.values[1:-1]))) <= 1e-10


def test_2d_step_converges():
    g = build_grid(2, [1.0, 1.0], [8, 8])
    data = make_data("steady_unit", g)
    x, y = g.coords
    u_prev = data.u0 + 0.01 * np.sin(np.pi * x) * np.sin(np.pi * y)
    st_ = solve_step(u_prev, data, StepperConfig(tau=0.01))
    assert st_.residual < 1e-10
    u_n, psi_n, res = newton_step(u_prev, data, 0.01)
    assert res < 1e-10
    assert np.max(np.abs(st_.psi.values - psi_n)) <= 1e-8


# ---------------------------------------------------------------------------
# box bounds


def test_box_bounds_examples():
    g = build_grid(1, [1.0], [4])
    one = np.ones(g.shape)
    data = ProblemData(g, one, one, 1.0, one + g.coords[0] * (1 - g.coords[0]) * -1.0, one)
    M, L = psi_box_bounds(data, one, one, 0.1)
    assert M == pytest.approx(200.0)
    assert L == 0.0  # no motion and (ln c0)^- = 0

    b1 = np.full(g.shape, math.e**2)
    u0 = math.e**2 * g.coords[0] ** 2 / 2
    d2 = ProblemData(g, u0.copy(), b1, math.e**2, u0, b1)
    M2, _ = psi_box_bounds(d2, np.zeros(g.shape), np.zeros(g.shape), 100.0)
    assert M2 == pytest.approx(2.0)

    d3 = ProblemData(g, u0.copy(), b1, 0.5, u0, b1)
    _, L3 = psi_box_bounds(d3, np.zeros(g.shape), np.zeros(g.shape), 1.0)
    assert L3 == pytest.approx(math.log(2.0))


def test_converged_steps_lie_in_box(rng):
    for _ in range(5):
        data, u_prev, tau = oracle_case(rng)
        st_ = solve_step(u_prev, data, StepperConfig(tau=tau))
        M, L = psi_box_bounds(data, u_prev, st_.u, tau)
        assert -M <= st_.psi.values.min() and st_.psi.values.max() <= L


# ---------------------------------------------------------------------------
# the march and the interpolants


def test_run_rothe_steady():
    data = _steady(16)
    traj = run_rothe(data, 1.0, 7)
    assert traj.j == 7 and traj.tau == pytest.approx(1 / 7)
    for s in traj.states:
        assert np.max(np.abs(s.u.values - data.u0)) <= 1e-10
        assert np.max(np.abs(s.psi.values)) <= 1e-10


def test_run_rothe_single_step_is_solve_step():
    data = make_data("slope_1d", build_grid(1, [1.0], [16]))
    traj = run_rothe(data, 0.001, 1)
    ref = solve_step(data.u0, data, StepperConfig(tau=0.001), psi_prev=initial_state(data).psi, k=1)
    assert len(traj.states) == 2
    assert np.array_equal(traj.states[0].u.values, data.u0)
    np.testing.assert_array_equal(traj.states[1].u.values, ref.u.values)


def test_run_rothe_callback_and_validation():
    data = _steady(8)
    seen = []
    run_rothe(data, 0.1, 3, callback=lambda s: seen.append(s.k))
    assert seen == [0, 1, 2, 3]
    with pytest.raises(ValueError):
        run_rothe(data, 0.1, 0)
    with pytest.raises(ValueError):
        run_rothe(data, -1.0, 2)


def test_initial_state_uses_discrete_laplacian():
    data = make_data("sine_1d", build_grid(1, [1.0], [12]))
    s0 = initial_state(data)
    np.testing.assert_allclose(np.exp(-s0.psi.values[1:-1]), laplacian_interior(data.u0, data.grid), rtol=1e-14)
    assert np.array_equal(s0.psi.values[[0, -1]], data.psi_boundary[[0, -1]])


@pytest.fixture(scope="module")
def short_run():
    return run_rothe(make_data("slope_1d", build_grid(1, [1.0], [16])), 0.002, 4)


def test_interpolants_at_nodes_and_midpoints(short_run):
    tr = short_run
    for k in range(1, tr.j + 1):
        ip = eval_interpolants(tr, k * tr.tau)
        np.testing.assert_allclose(ip["u_tilde"], tr.states[k].u.values, atol=1e-15)
        np.testing.assert_array_equal(ip["u_bar"], tr.states[k].u.values)
        mid = eval_interpolants(tr, (k - 0.5) * tr.tau)
        np.testing.assert_allclose(mid["u_tilde"], 0.5 * (tr.states[k].u.values + tr.states[k - 1].u.values),
                                   atol=1e-15)
        np.testing.assert_array_equal(mid["u_bar"], tr.states[k].u.values)
        np.testing.assert_array_equal(mid["psi_bar"], tr.states[k].psi.values)
    ip0 = eval_interpolants(tr, 0.0)
    np.testing.assert_array_equal(ip0["rho_bar"], tr.states[0].rho.values)
    with pytest.raises(ValueError):
        eval_interpolants(tr, 2 * tr.T)


def test_trajectory_stack_shapes(short_run):
    assert short_run.stack("u").shape == (5, 17)
    np.testing.assert_allclose(short_run.times, [0, 0.0005, 0.001, 0.0015, 0.002])


# ---------------------------------------------------------------------------
# data validation


def test_validation_h2_floor():
    g = build_grid(1, [1.0], [8])
    u0 = g.coords[0] ** 2 / 2
    b1 = np.ones(g.shape)
    with pytest.raises(ValidationError) as info:
        ProblemData(g, u0.copy(), b1, 2.0, u0, b1)
    assert info.value.invariant == "H2" and "node 0" in str(info.value)
    with pytest.raises(ValidationError, match="H2"):
        ProblemData(g, u0.copy(), b1, -1.0, u0, b1)


def test_validation_h3_initial_laplacian():
    g = build_grid(1, [1.0], [8])
    u0 = g.coords[0] ** 2 / 2
    u0[4] += 0.01  # a bump lowers the discrete Laplacian at its own node
    one = np.ones(g.shape)
    with pytest.raises(ValidationError) as info:
        ProblemData(g, u0.copy(), one, 1.0, u0, one)
    assert info.value.invariant == "H3" and "node 4" in str(info.value)


def test_validation_compatibility():
    g = build_grid(1, [1.0], [8])
    u0 = g.coords[0] ** 2 / 2
    one = np.ones(g.shape)
    with pytest.raises(ValidationError) as info:
        ProblemData(g, u0.copy(), one, 1.0, u0, 2 * one)
    assert info.value.invariant == "compatibility"
    with pytest.raises(ValidationError, match="u0 != b0"):
        ProblemData(g, u0 + 1, one, 1.0, u0, one)


def test_validation_h1_shapes_and_finiteness():
    g = build_grid(1, [1.0], [8])
    one = np.ones(g.shape)
    with pytest.raises(ValidationError, match="H1"):
        ProblemData(g, one[:-1], one, 1.0, one, one)
    bad = one.copy()
    bad[3] = np.nan
    with pytest.raises(ValidationError, match="H1"):
        ProblemData(g, bad, one, 1.0, one, one)


def test_stepper_config_validation():
    for kw in ({"tau": 0.0}, {"omega": 0.0}, {"omega": 1.5}, {"fp_tol": 0.0}, {"homotopy_stages": 0},
               {"smoothing_passes": -1}, {"anderson_depth": -1}):
        with pytest.raises(ValueError):
            StepperConfig(**kw)


def test_smoothing_keeps_data_valid():
    data = make_data("sine_1d", build_grid(1, [1.0], [16]))
    sm = data.smoothed(3)
    assert sm is not data
    assert np.array_equal(sm.u0[[0, -1]], data.u0[[0, -1]])
    traj = run_rothe(data, 0.001, 2, StepperConfig(smoothing_passes=2))
    assert traj.states[-1].residual < 1e-10


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), log_tau=st.floats(-3, -1))
def test_step_matches_newton_property(seed, log_tau):
    data, u_prev, tau = oracle_case(np.random.default_rng(seed), tau=10**log_tau)
    st_ = solve_step(u_prev, data, StepperConfig(tau=tau))
    _, psi_n, res = newton_step(u_prev, data, tau)
    assert res < 1e-10
    assert np.max(np.abs(st_.psi.values - psi_n)) <= 1e-8


def test_2d_march_with_cg():
    g = build_grid(2, [1.0, 1.0], [12, 12])
    x, y = g.coords
    lap = 1.0 + 0.3 * np.sin(np.pi * x) * np.sin(np.pi * y)
    b0 = (x * x + y * y) / 4
    u0 = solve_poisson(-lap, b0, g).values
    data = ProblemData(g, b0, lap, 1.0, u0, lap)
    traj = run_rothe(data, 0.002, 4)
    for s in traj.states[1:]:
        assert s.residual < 1e-10
        assert laplacian_interior(s.u.values, g).min() > 0
    # the bump relaxes
    spread = [float(np.ptp(s.rho.values[g.interior])) for s in traj.states]
    assert spread[-1] < spread[0]
