import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperlab.fitting import fit_power_law


@settings(max_examples=100, deadline=None)
@given(p=st.floats(-3, 3), c=st.floats(1e-3, 1e3))
def test_exact_power_law_recovered(p, c):
    x = np.geomspace(1e-2, 1e4, 40)
    fit = fit_power_law(x, c * x**p)
    assert fit.exponent == pytest.approx(p, abs=1e-9)
    assert fit.prefactor == pytest.approx(c, rel=1e-8)
    if abs(p) > 0.05:
        assert fit.r2 == pytest.approx(1.0, abs=1e-9)
    assert fit.monotone


def test_zero_data_is_degenerate():
    fit = fit_power_law([1.0, 2.0, 3.0], [0.0, 0.0, 0.0])
    assert fit.degenerate and fit.exponent == 0.0


def test_non_monotone_flagged():
    x = np.geomspace(1, 100, 50)
    fit = fit_power_law(x, 2 + np.sin(x))
    assert not fit.monotone


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        fit_power_law([1.0, 2.0], [1.0])
