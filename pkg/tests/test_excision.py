import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from hyperlab.coefficients import example_coefficient, log_coefficient, separable_coefficient
from hyperlab.errors import HypothesisViolation
from hyperlab.excision import (MajorantSet, PhaseGrid, build_majorants, ellipticity_ratio,
                               excise, fit_tilde_constants, integral_log_bound, log_integral,
                               smooth_step, smooth_step_derivative, sup_log_ratio, tau,
                               transition, transition_derivatives, transition_scalar)
from hyperlab.phasespace import PhaseParams, xi_bracket
from hyperlab.weights import WeightPair, WeightSpec, eval_weight

HALF = WeightSpec.power(0.5)
ONE = WeightSpec.power(1.0)


def unit_field(scale=1.0):
    return separable_coefficient(lambda t: scale * np.ones_like(t), lambda t: np.zeros_like(t), HALF, ONE)


@pytest.mark.parametrize("r, expected", [(0.5, 1.0), (3.0, 0.0), (1.5, 0.5), (1.0, 1.0), (2.0, 0.0)])
def test_smooth_step_examples(r, expected):
    assert smooth_step(r) == pytest.approx(expected, abs=1e-15)


def test_smooth_step_strictly_decreasing_between_one_and_two():
    r = np.linspace(1.05, 1.95, 2001)
    assert np.all(np.diff(smooth_step(r)) < 0)
    assert np.all(np.diff(smooth_step(np.linspace(0, 3, 3001))) <= 0)
    assert np.all(np.isfinite(smooth_step_derivative(np.linspace(0, 3, 10001))))


def test_transition_derivatives_match_mpmath():
    def f(s):
        e = lambda u: mp.e ** (-1 / u)
        return e(s) / (e(s) + e(1 - s))

    for s in (0.1, 0.3, 0.5, 0.77, 0.95):
        d1, d2 = transition_derivatives(s)
        assert d1 == pytest.approx(float(mp.diff(f, mp.mpf(s), 1)), rel=1e-10)
        assert d2 == pytest.approx(float(mp.diff(f, mp.mpf(s), 2)), rel=1e-9, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(s=st.floats(-0.5, 1.5))
def test_scalar_transition_agrees(s):
    v, d1, d2 = transition_scalar(s)
    assert v == pytest.approx(transition(s), abs=1e-15)
    e1, e2 = transition_derivatives(s)
    assert d1 == pytest.approx(e1, rel=1e-12, abs=1e-300)
    assert d2 == pytest.approx(e2, rel=1e-12, abs=1e-300)


@settings(max_examples=100, deadline=None)
@given(s=st.floats(0.0, 1.0))
def test_transition_symmetry(s):
    assert transition(s) + transition(1 - s) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("eps", [1e-3, 1e-1, 1.0])
def test_log_integral_primitive(eps):
    exact = float(mp.quad(lambda t: mp.log(1 + 1 / t), [0, eps]))
    assert log_integral(eps) == pytest.approx(exact, abs=1e-14)
    q = integrate.quad(lambda t: math.log1p(1 / t), 0, eps, epsabs=1e-12, limit=200)[0]
    assert abs(q - exact) <= 1e-8


def test_log_integral_unit():
    assert log_integral(1.0) == pytest.approx(2 * math.log(2), rel=1e-15)


def excised(field=None, k=1.0):
    field = field or example_coefficient(0.5, 0.5)
    p = PhaseParams(field.pair, k=k, N=2.0)
    return field, p, excise(field, p)


def test_excision_branches():
    field, p, at = excised()
    # x = 0, xi = 0, k = 1 gives r = t
    assert at(0.5, 0.0, 0.0) == pytest.approx(1.0, rel=1e-15)
    assert at(4.0, 0.0, 0.0) == pytest.approx(field(4.0, 0.0), rel=1e-15)
    lo, hi = sorted([field(1.5, 0.0), 1.0])
    assert lo <= at(1.5, 0.0, 0.0) <= hi


def test_excision_never_evaluates_a_in_interior():
    def a(t, x):
        t = np.asarray(t)
        assert np.all(t * np.hypot(1, x) > 1 - 1e-12)
        return np.ones_like(t + x)
    field = separable_coefficient(lambda t: np.ones_like(t), lambda t: np.zeros_like(t), HALF, ONE)
    field.a = a
    p = PhaseParams(field.pair)
    at = excise(field, p)
    at(np.geomspace(1e-6, 1, 50), 0.0, 0.0)


@settings(max_examples=100, deadline=None)
@given(t=st.floats(1e-6, 1.0), x=st.floats(-1e3, 1e3), xi=st.floats(-1e3, 1e3))
def test_excised_symbol_lower_bound_and_exterior_identity(t, x, xi):
    field, p, at = excised()
    br2 = xi_bracket(xi) ** 2
    om2 = eval_weight(field.omega, x) ** 2
    v = at(t, x, xi)
    assert v >= min(1.0, 1.0) * om2 * br2 * (1 - 1e-12)
    if t * eval_weight(field.phi, x) * xi_bracket(xi) >= 2:
        assert v == pytest.approx(field(t, x) * br2, rel=1e-14)


def test_tau_examples():
    field, p, _ = excised(unit_field())
    at1 = excise(unit_field(), p)
    at4 = excise(unit_field(4.0), p)
    for t, x, xi in [(1e-3, 0.0, 0.0), (0.7, 3.0, -20.0), (0.2, -40.0, 5.0)]:
        base = eval_weight(HALF, x) * xi_bracket(xi)
        assert tau(at1, t, x, xi) == pytest.approx(base, rel=1e-14)
        if t * eval_weight(ONE, x) * xi_bracket(xi) >= 2:
            assert tau(at4, t, x, xi) == pytest.approx(2 * base, rel=1e-14)


def test_tau_rejects_nonpositive_symbol():
    with pytest.raises(HypothesisViolation):
        tau(lambda t, x, xi: -1.0, 0.1, 0.0, 0.0)


def test_example_ellipticity_ratio():
    field, p, at = excised()
    ts = np.geomspace(1e-6, 1, 40)
    mags = np.concatenate([[0.0], np.geomspace(1e-2, 1e3, 15)])
    xs = np.concatenate([-mags[::-1], mags])
    assert ellipticity_ratio(at, p, ts, xs, mags) >= 1 - 1e-12


def test_majorants_vanish_for_own_replacement():
    field = unit_field()
    m = build_majorants(field, PhaseParams(field.pair), PhaseGrid(n_t=30, n_xi=9))
    assert m.C1 == 0.0


def test_psi0_support():
    field = example_coefficient(0.5, 0.5)
    p = PhaseParams(field.pair)
    m = build_majorants(field, p, PhaseGrid(n_t=30, n_xi=9))
    for x, xi in [(0.0, 0.0), (3.0, 100.0), (-200.0, 7.0)]:
        h = 1 / (eval_weight(field.phi, x) * xi_bracket(xi))
        ts = np.linspace(2 * h, 10 * h, 50)
        assert np.all(m.psi0(ts, x, xi) == 0.0)
        assert np.all(m.psi(np.geomspace(1e-6, 1, 50), x, xi) >= 0)


def test_example_majorants_finite_and_stable():
    field = example_coefficient(0.5, 0.5)
    m = build_majorants(field, PhaseParams(field.pair))
    assert math.isfinite(m.C1) and math.isfinite(m.C2)
    assert m.C1 > 0 and m.C2 > 0 and m.stable
    d = m.to_dict()
    assert d["grid"]["radius"] == 1e3 and d["grid"]["n_t"] == 60


def test_integral_ratio_psi0_unit_point():
    field = unit_field()
    p = PhaseParams(WeightPair(HALF, ONE))
    m = MajorantSet(C1=1.0, C2=0.0, p=p, omega=HALF, T=2.0)
    r = integral_log_bound(m, 0.0, 0.0, T=2.0, which="psi0")
    direct = integrate.quad(lambda t: float(smooth_step(t)) * math.log1p(1 / t), 0, 2,
                            points=[1.0], limit=200)[0] / math.log(2)
    assert r == pytest.approx(direct, rel=1e-8)
    assert math.isfinite(r) and r <= 4


def test_integral_ratio_zero_majorant():
    p = PhaseParams(WeightPair(HALF, ONE))
    m = MajorantSet(C1=0.0, C2=0.0, p=p, omega=HALF, T=1.0)
    assert integral_log_bound(m, 5.0, 5.0) == 0.0


@settings(max_examples=60, deadline=None)
@given(which=st.sampled_from(["psi", "psi0", "psi1", "psi_tilde", "psi0_tilde", "psi1_tilde"]),
       t=st.floats(1e-6, 1.0), x=st.floats(-1e3, 1e3), xi=st.floats(-1e3, 1e3),
       sym=st.booleans())
def test_scalar_integrand_matches_vector_majorant(which, t, x, xi, sym):
    p = PhaseParams(WeightPair(HALF, ONE))
    m = MajorantSet(C1=1.3, C2=0.7, p=p, omega=HALF, T=1.0, symmetric_tilde=sym)
    assert m.integrand(which, x, xi)(t) == pytest.approx(float(getattr(m, which)(t, x, xi)), rel=1e-12)


def test_symmetric_tilde_switch():
    p = PhaseParams(WeightPair(HALF, ONE))
    mixed = MajorantSet(1.0, 1.0, p, HALF, 1.0)
    sym = MajorantSet(1.0, 1.0, p, HALF, 1.0, symmetric_tilde=True)
    # r = 2.5 lies where phi(r) = 0 but phi(r/3) = 1
    assert mixed.psi1_tilde(2.5, 0.0, 0.0) != sym.psi1_tilde(2.5, 0.0, 0.0)
    assert mixed.psi0_tilde(2.5, 0.0, 0.0) == sym.psi0_tilde(2.5, 0.0, 0.0)


def test_tilde_constants_finite():
    field = example_coefficient(0.5, 0.5)
    m = build_majorants(field, PhaseParams(field.pair), PhaseGrid(n_t=30, n_xi=9))
    kap = fit_tilde_constants(m, [0.0, 10.0], [0.0, 10.0])
    assert set(kap) == {"00", "10", "01"}
    assert all(math.isfinite(v) and v >= 0 for v in kap.values())


def test_log_ratio_bounded_for_example():
    field = example_coefficient(0.5, 0.5)
    m = build_majorants(field, PhaseParams(field.pair))
    s1, _ = sup_log_ratio(m, [0.0, 1.0, 10.0, 100.0, 1000.0])
    s2, _ = sup_log_ratio(m, [0.0, 1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1000.0])
    assert math.isfinite(s1) and abs(s2 - s1) <= 0.05 * s1


def test_log_coefficient_majorant_instability_is_flagged():
    # omega / Phi -> 0 at large |x| lets C2 creep up with the grid radius
    field = log_coefficient(HALF, phi=ONE)
    m = build_majorants(field, PhaseParams(field.pair))
    assert not m.stable
