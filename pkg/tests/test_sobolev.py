import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperlab.errors import ValidationError
from hyperlab.sobolev import (GridFunction, SobolevIndex, bessel_potential, gaussian_state,
                              grid_points, l2_norm, monotonicity_violations, random_state,
                              selftest, sobolev_norm)
from hyperlab.weights import WeightSpec

PHI = WeightSpec.power(1.0)


def test_grid_layout():
    x = grid_points(2.0, 8)
    assert x[0] == -2.0 and x[-1] == pytest.approx(1.5)
    g = GridFunction(2.0, np.zeros(8))
    assert g.dx == 0.5
    assert sorted(np.abs(g.xi))[-1] == pytest.approx(math.pi * 4 / 2)


@pytest.mark.parametrize("M", [4, 12, 1000])
def test_bad_sizes_rejected(M):
    with pytest.raises(ValidationError):
        GridFunction(1.0, np.zeros(M))


def test_constant_potential():
    v = GridFunction(5.0, np.full(64, 2.5))
    out = bessel_potential(v, 2.0, k=3.0)
    np.testing.assert_allclose(out.values, 9 * 2.5, rtol=1e-13)


def test_zero_order_is_identity():
    v = random_state(np.random.default_rng(1), 10.0, 256)
    np.testing.assert_array_equal(bessel_potential(v, 0.0).values, v.values)


@settings(max_examples=30, deadline=None)
@given(s1=st.floats(-3, 3), k=st.floats(1, 10), seed=st.integers(0, 2**16))
def test_potential_inverse(s1, k, seed):
    v = random_state(np.random.default_rng(seed), 10.0, 256)
    back = bessel_potential(bessel_potential(v, s1, k), -s1, k)
    np.testing.assert_allclose(back.values, v.values, atol=1e-10 * np.abs(v.values).max())


def test_potential_k_below_one_rejected():
    with pytest.raises(ValidationError):
        bessel_potential(GridFunction(1.0, np.ones(8)), 1.0, k=0.5)


def test_gaussian_norm():
    g = gaussian_state(20.0, 2048)
    assert sobolev_norm(g, SobolevIndex(0, 0)) == pytest.approx(math.pi**0.25, abs=1e-6)


@pytest.mark.parametrize("s1", [1.0, 2.0])
def test_modulated_gaussian_ratio(s1):
    g = gaussian_state(20.0, 2048, xi0=50.0)
    r = sobolev_norm(g, SobolevIndex(s1, 0)) / l2_norm(g)
    assert r == pytest.approx(math.hypot(1, 50) ** s1, rel=0.05)


def test_zero_function_norm():
    v = GridFunction(3.0, np.zeros(64))
    assert sobolev_norm(v, SobolevIndex(2.0, 1.0), 1.0, PHI) == 0.0


def test_weight_increases_norm():
    g = gaussian_state(20.0, 2048)
    assert sobolev_norm(g, SobolevIndex(0, 1), 1.0, PHI) > sobolev_norm(g, SobolevIndex(0, 0))


def test_weight_required_for_decay_index():
    with pytest.raises(ValidationError):
        sobolev_norm(gaussian_state(5.0, 64), SobolevIndex(0, 1))


def test_plancherel():
    v = random_state(np.random.default_rng(3), 15.0, 512)
    fhat = np.fft.fft(v.values)
    spectral = math.sqrt(v.dx * np.sum(np.abs(fhat) ** 2) / v.M)
    assert sobolev_norm(v, SobolevIndex(0, 0)) == pytest.approx(spectral, rel=1e-13)


def test_monotonicity_on_random_states():
    rng = np.random.default_rng(0)
    idx = [SobolevIndex(a, b) for a in (-1.0, 0.0, 1.0) for b in (0.0, 1.0)]
    assert sum(monotonicity_violations(random_state(rng, 20.0, 512), PHI, idx) for _ in range(20)) == 0


@settings(max_examples=30, deadline=None)
@given(k=st.floats(1, 10), kp=st.floats(1, 10), s1=st.floats(-2, 2), seed=st.integers(0, 2**16))
def test_parameter_equivalence(k, kp, s1, seed):
    v = random_state(np.random.default_rng(seed), 10.0, 256)
    s = SobolevIndex(s1, 0.5)
    q = sobolev_norm(v, s, k, PHI) / sobolev_norm(v, s, kp, PHI)
    lo = min(k / kp, kp / k) ** abs(s1)
    hi = max(k / kp, kp / k) ** abs(s1)
    assert lo * (1 - 1e-12) <= q <= hi * (1 + 1e-12)


def test_save_load_round_trip(tmp_path):
    v = random_state(np.random.default_rng(4), 7.0, 128)
    v.meta.update(timestamp=123.0, source="unit")
    v.save(tmp_path / "state")
    w = GridFunction.load(tmp_path / "state")
    assert w.L == 7.0 and w.M == 128
    np.testing.assert_array_equal(w.values, v.values)
    assert w.meta["source"] == "unit" and w.meta["timestamp"] == 123.0
    raw = (tmp_path / "state.bin").read_bytes()
    assert len(raw) == 128 * 16


def test_selftest_small():
    res = selftest(L=20.0, M=2048, n_random=5)
    assert res["gaussian_l2"]["value"] == pytest.approx(res["gaussian_l2"]["expected"], abs=1e-6)
    assert res["monotonicity_violations"] == 0
