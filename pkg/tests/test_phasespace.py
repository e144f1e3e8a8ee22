import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperlab.errors import ValidationError
from hyperlab.phasespace import (PhaseParams, Zone, classify_zone, planck_h, separatrix_time,
                                 uncertainty_constant, xi_bracket)
from hyperlab.weights import WeightPair, WeightSpec

BR = WeightPair(WeightSpec.power(0.5), WeightSpec.power(1.0))
mag = st.floats(-1e4, 1e4, allow_nan=False)


@pytest.mark.parametrize("xi, k, expected", [(0.0, 1.0, 1.0), (0.0, 2.0, 2.0),
                                             (math.sqrt(3.0), 1.0, 2.0)])
def test_xi_bracket_examples(xi, k, expected):
    assert xi_bracket(xi, k) == pytest.approx(expected, rel=1e-15)


def test_k_below_one_rejected():
    with pytest.raises(ValidationError):
        xi_bracket(1.0, 0.5)
    with pytest.raises(ValidationError):
        PhaseParams(BR, k=0.9)
    with pytest.raises(ValidationError):
        PhaseParams(BR, N=0.0)


def test_planck_examples():
    p = PhaseParams(BR, k=1.0)
    assert planck_h(0.0, 0.0, p) == 1.0
    assert planck_h(math.sqrt(3.0), math.sqrt(3.0), p) == pytest.approx(0.25, rel=1e-15)


def test_uncertainty_bound_is_finite_and_stable():
    p = PhaseParams(BR)
    c1 = uncertainty_constant(p, kappa=0.5, radius=1e3)
    c2 = uncertainty_constant(p, kappa=0.5, radius=1e5)
    assert 0 < c1 < 2.0
    assert c2 == pytest.approx(c1, rel=1e-6)


def test_separatrix_examples():
    # Phi <xi>_k = 4 exactly via the constant weight and k = 4
    p = PhaseParams(WeightPair(WeightSpec.one(), WeightSpec.one()), k=4.0, N=2.0)
    assert separatrix_time(0.0, 0.0, p) == 0.5
    assert separatrix_time(0.0, 0.0, PhaseParams(BR)) == 1.0
    q = PhaseParams(BR, N=2.0)
    assert separatrix_time(3.0, 5.0, q) == pytest.approx(2 * separatrix_time(3.0, 5.0, PhaseParams(BR)))


def test_zone_boundary_belongs_to_interior():
    p = PhaseParams(WeightPair(WeightSpec.one(), WeightSpec.one()), k=4.0, N=2.0)
    assert classify_zone(0.4, 0.0, 0.0, p) is Zone.INTERIOR
    assert classify_zone(0.5, 0.0, 0.0, p) is Zone.INTERIOR
    assert classify_zone(0.6, 0.0, 0.0, p) is Zone.EXTERIOR


def test_negative_time_rejected():
    with pytest.raises(ValidationError):
        classify_zone(-1e-3, 0.0, 0.0, PhaseParams(BR))


@settings(max_examples=200, deadline=None)
@given(t=st.floats(0, 10), s=st.floats(0, 1), x=mag, xi=mag, N=st.floats(0.01, 10))
def test_zones_are_time_monotone(t, s, x, xi, N):
    p = PhaseParams(BR, N=N)
    if classify_zone(t, x, xi, p) is Zone.INTERIOR:
        assert classify_zone(s * t, x, xi, p) is Zone.INTERIOR


@settings(max_examples=200, deadline=None)
@given(x=mag, xi=mag, N=st.floats(0.01, 100), k=st.floats(1, 50))
def test_separatrix_identity(x, xi, N, k):
    p = PhaseParams(BR, k=k, N=N)
    prod = separatrix_time(x, xi, p) * BR.phi(x) * xi_bracket(xi, k)
    assert prod == pytest.approx(N, rel=1e-14)


@settings(max_examples=200, deadline=None)
@given(x=mag, y=mag, xi=mag, eta=mag)
def test_planck_nonincreasing(x, y, xi, eta):
    p = PhaseParams(BR)
    if abs(x) <= abs(y):
        assert planck_h(y, xi, p) <= planck_h(x, xi, p)
    if abs(xi) <= abs(eta):
        assert planck_h(x, eta, p) <= planck_h(x, xi, p)
    assert planck_h(x, xi, p) <= 1.0
