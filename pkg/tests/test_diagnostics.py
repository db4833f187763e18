from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from facetflow import (TestFunction, apriori_report, build_grid, check_lemma21, holder_modulus,
                       interpolant_gap_report, apriori_quantities, run_rothe, weak_residual)
from facetflow.diagnostics import DiagnosticsReport, cubic_interpolant_samples, lemma21_suite, sobolev_scale
from facetflow.presets import make_data, make_test_function

# ratio holder_modulus / sobolev_scale measured once on slope_1d, 8 cells, j = 4
# (0.1729) and rounded up; frozen so later changes cannot quietly loosen it
HOLDER_CONSTANT = 0.2


@pytest.fixture(scope="module")
def steady():
    return run_rothe(make_data("steady_unit", build_grid(1, [1.0], [32])), 0.05, 5)


@pytest.fixture(scope="module")
def generic():
    return run_rothe(make_data("slope_1d", build_grid(1, [1.0], [32])), 0.004, 16)


@pytest.fixture(scope="module")
def rough():
    return run_rothe(make_data("sine_1d", build_grid(1, [1.0], [24])), 0.004, 8)


# ---------------------------------------------------------------------------
# a priori report


def test_steady_report_values(steady):
    rep = apriori_report(steady)
    np.testing.assert_allclose(rep["mass_exp"], 2.0, atol=1e-12)
    np.testing.assert_allclose(rep["dtu_sq"], 0.0, atol=1e-20)
    np.testing.assert_allclose(rep["cum_dtrho_sq"], 0.0, atol=1e-20)
    np.testing.assert_allclose(rep["energy"], rep["energy"][0], atol=1e-13)
    np.testing.assert_allclose(rep["min_rho"], 1.0, atol=1e-12)


def test_report_shape_and_monotone_cumulatives(generic, rough):
    for traj in (generic, rough):
        rep = apriori_report(traj)
        assert len(rep) == traj.j + 1
        assert set(rep.series) == set(DiagnosticsReport.COLUMNS)
        for name in DiagnosticsReport.COLUMNS:
            assert np.all(np.isfinite(rep[name])), name
        for name in DiagnosticsReport.CUMULATIVE:
            assert np.all(np.diff(rep[name]) >= 0), name
        assert np.all(rep["margin_lower"][1:] >= 0) and np.all(rep["margin_upper"][1:] >= 0)
        rows = list(rep.rows())
        assert len(rows) == traj.j + 1 and len(rows[0]) == len(DiagnosticsReport.COLUMNS)


def test_apriori_quantities(generic):
    q = apriori_quantities(apriori_report(generic))
    assert set(q) == {"mass_exp", "lap_exp3psi_sq", "tau_exp3psi_gradpsi_sq",
                      "grad_u_sq", "grad_rho_sq", "neg_psi_term", "dtu_sq",
                      "dtrho_sq", "energy_dissipation"}
    assert all(np.isfinite(v) for v in q.values())


def test_uniform_in_j_on_refinement():
    data = make_data("slope_1d", build_grid(1, [1.0], [32]))
    q16 = apriori_quantities(apriori_report(run_rothe(data, 0.004, 16)))
    q32 = apriori_quantities(apriori_report(run_rothe(data, 0.004, 32)))
    for k in q16:
        assert q32[k] <= 1.2 * q16[k] + 1e-14, k


# ---------------------------------------------------------------------------
# weak residuals


def test_zero_test_function_gives_zero(generic):
    w = weak_residual(generic, make_test_function("zero", generic.grid))
    assert w.value == 0.0
    assert w.satisfied


def test_steady_residual_vanishes(steady):
    for name in ("parabola", "sine_squared"):
        w = weak_residual(steady, make_test_function(name, steady.grid))
        assert abs(w.value) <= 1e-10
        assert w.satisfied


@pytest.mark.parametrize("mode", ["equality_def12", "inequality_thm12"])
def test_exact_identity_and_inequality(generic, rough, mode):
    for traj in (generic, rough):
        for name in ("parabola", "sine_squared"):
            w = weak_residual(traj, make_test_function(name, traj.grid), mode=mode)
            c = w.components
            assert abs(c["identity_defect"]) <= 1e-9 * (1 + abs(c["dissipation"]))
            assert c["dissipation"] >= 0
            assert w.mode == mode
            assert w.satisfied


def test_residual_is_linear_in_xi(generic):
    g = generic.grid
    a, b = make_test_function("parabola", g), make_test_function("sine_squared", g)
    wa, wb = weak_residual(generic, a), weak_residual(generic, b)
    wab = weak_residual(generic, a + b)
    assert wab.value == pytest.approx(wa.value + wb.value, rel=1e-10, abs=1e-12)
    assert (a + b).name == "parabola+sine_squared"


def test_test_function_flags(generic):
    g = generic.grid
    shifted = TestFunction(lambda x, t: x * (1 - x) + 0.1, lambda x, t: (1 - 2 * x,),
                           lambda x, t: -2.0 + 0 * x, name="shifted")
    with pytest.raises(ValueError, match="vanish"):
        weak_residual(generic, shifted)
    negative = TestFunction(lambda x, t: -x * (1 - x), lambda x, t: (2 * x - 1,), lambda x, t: 2.0 + 0 * x,
                            name="neg")
    with pytest.raises(ValueError, match="nonnegative"):
        weak_residual(generic, negative)
    signed = TestFunction(lambda x, t: np.sin(2 * np.pi * x), lambda x, t: (2 * np.pi * np.cos(2 * np.pi * x),),
                          lambda x, t: -4 * np.pi**2 * np.sin(2 * np.pi * x), name="signed", nonnegative=False)
    with pytest.raises(ValueError, match="nonnegative test function"):
        weak_residual(generic, signed)
    w = weak_residual(generic, signed, mode="equality_def12")
    assert abs(w.components["identity_defect"]) <= 1e-9
    with pytest.raises(ValueError, match="mode"):
        weak_residual(generic, make_test_function("parabola", g), mode="strong")
    declared = TestFunction(lambda x, t: x, lambda x, t: (1.0 + 0 * x,), lambda x, t: 0 * x,
                            vanishes_on_lateral_boundary=False)
    with pytest.raises(ValueError):
        weak_residual(generic, declared)


def test_time_dependent_test_function(generic):
    T = generic.T
    xi = TestFunction(lambda x, t: (T - t + 0.01) * x * (1 - x), lambda x, t: ((T - t + 0.01) * (1 - 2 * x),),
                      lambda x, t: -2.0 * (T - t + 0.01) + 0 * x, name="decaying")
    w = weak_residual(generic, xi)
    assert w.satisfied
    assert abs(w.components["identity_defect"]) <= 1e-9


def test_analytic_test_functions_match_finite_differences():
    g = build_grid(2, [1.0, 2.0], [3, 3])
    r = np.random.default_rng(0)
    pts = r.uniform(0.1, 0.9, size=(5, 2)) * np.array([1.0, 2.0])
    eps = 1e-5
    for name in ("parabola", "sine_squared"):
        tf = make_test_function(name, g)
        for x, y in pts:
            f = lambda a, b: tf.xi(np.array(a), np.array(b), 0.0)  # noqa: E731
            gx = (f(x + eps, y) - f(x - eps, y)) / (2 * eps)
            gy = (f(x, y + eps) - f(x, y - eps)) / (2 * eps)
            lap = (f(x + eps, y) + f(x - eps, y) + f(x, y + eps) + f(x, y - eps) - 4 * f(x, y)) / eps**2
            ag = tf.grad(np.array(x), np.array(y), 0.0)
            assert float(ag[0]) == pytest.approx(gx, abs=1e-7)
            assert float(ag[1]) == pytest.approx(gy, abs=1e-7)
            assert float(tf.lap(np.array(x), np.array(y), 0.0)) == pytest.approx(lap, abs=1e-3)


# ---------------------------------------------------------------------------
# Hoelder modulus


def test_holder_constant_field():
    x = np.linspace(0, 1, 11)
    assert holder_modulus(x, np.zeros(11), np.full(11, 3.0)) == 0.0


def test_holder_identity_on_unit_interval():
    x = np.linspace(0, 1, 21)
    assert holder_modulus(x, np.zeros(21), x) <= 1.0
    # |dx| / |dx|^(1/2) peaks at the widest pair
    assert holder_modulus(x, np.zeros(21), x) == pytest.approx(1.0)


def test_holder_conflict_and_shape_errors():
    with pytest.raises(ValueError, match="repeats"):
        holder_modulus([0.0, 0.0], [0.0, 0.0], [1.0, 2.0])
    assert holder_modulus([0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [1.0, 1.0, 2.0]) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        holder_modulus([0.0, 1.0], [0.0], [0.0, 1.0])
    with pytest.raises(ValueError):
        holder_modulus([0.0], [0.0], [0.0])


def test_holder_calibrated_bound(generic, rough):
    for traj in (generic, rough):
        x, t, f = cubic_interpolant_samples(traj)
        assert holder_modulus(x, t, f) <= HOLDER_CONSTANT * sobolev_scale(traj)


def test_holder_exact_time_power():
    # f = t^(1/4) sampled at x = 0 has modulus exactly 1 against |dt|^(1/4)
    t = np.linspace(0, 1, 17)
    assert holder_modulus(np.zeros(17), t, t**0.25) == pytest.approx(1.0, rel=1e-12)


# ---------------------------------------------------------------------------
# elementary inequalities


def test_lemma21_examples():
    l4 = check_lemma21("L4", a=1.0, b=2.0)
    assert l4.holds and l4.lhs == pytest.approx(-3.5) and l4.rhs == pytest.approx(-3.0)
    l1 = check_lemma21("L1", x=[1.0, 2.0], y=[1.0, 2.0])
    assert l1.holds and l1.lhs == 0.0 and l1.rhs == 0.0
    l3 = check_lemma21("L3", s=0.7, t=0.7)
    assert l3.holds and l3.lhs == 0.0 and l3.rhs == 0.0
    l2 = check_lemma21("L2", f=np.exp, F=np.exp, s=1.0, t=-1.0)
    assert l2.holds
    with pytest.raises(ValueError):
        check_lemma21("L4", a=-1.0, b=1.0)
    with pytest.raises(ValueError):
        check_lemma21("L9")


def test_lemma21_reports_genuine_violation():
    # a decreasing f declared increasing must fail somewhere
    r = check_lemma21("L2", f=lambda v: -v, F=lambda v: -v * v / 2, s=np.array([1.0]), t=np.array([-1.0]))
    assert not r.holds


def test_lemma21_suite_zero_failures():
    fails = lemma21_suite(np.random.default_rng(11), 20_000)
    assert fails == {"L1": 0, "L2": 0, "L3": 0, "L4": 0}


@settings(max_examples=200, deadline=None)
@given(a=st.floats(1e-4, 1e3), b=st.floats(1e-4, 1e3))
def test_lemma21_l4_property(a, b):
    assert check_lemma21("L4", a=a, b=b).holds


@settings(max_examples=200, deadline=None)
@given(s=st.floats(-30, 30), t=st.floats(-30, 30))
def test_lemma21_l3_property(s, t):
    assert check_lemma21("L3", s=s, t=t).holds


# ---------------------------------------------------------------------------
# interpolant gaps


def test_single_step_uls_is_equality():
    traj = run_rothe(make_data("slope_1d", build_grid(1, [1.0], [16])), 0.001, 1)
    rep = interpolant_gap_report(traj)
    assert rep.uls_lhs.shape == (1,)
    assert rep.uls_lhs[0] == pytest.approx(rep.uls_rhs[0], rel=1e-14)
    assert rep.uls_ok


def test_steady_gaps_vanish(steady):
    rep = interpolant_gap_report(steady)
    assert np.all(rep.uls_lhs <= 1e-12)
    assert rep.rls_lhs <= 1e-24 and rep.rls_rhs <= 1e-24
    assert rep.cubic_gap <= 1e-12
    assert rep.uls_ok and rep.rls_ok and rep.cubic_ok


def test_gap_relations_generic(generic, rough):
    for traj in (generic, rough):
        rep = interpolant_gap_report(traj)
        assert rep.uls_ok and rep.uls_excess <= 1e-12
        assert rep.rls_ok and rep.rls_identity_error <= 1e-12
        assert rep.cubic_ok
        assert rep.cubic_bound == pytest.approx(rep.holder_constant * traj.tau**0.25)


def test_cubic_gap_bound_shrinks_with_tau():
    data = make_data("slope_1d", build_grid(1, [1.0], [16]))
    gaps = [interpolant_gap_report(run_rothe(data, 0.004, j)).cubic_gap for j in (4, 8, 16)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[0] / gaps[2] >= 2 ** (2 * 0.25)


def test_explicit_holder_constant(generic):
    rep = interpolant_gap_report(generic, holder_constant=0.0)
    assert rep.cubic_bound == 0.0 and not rep.cubic_ok
    assert math.isfinite(interpolant_gap_report(generic).holder_constant)
