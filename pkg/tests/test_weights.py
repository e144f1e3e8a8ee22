import json
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperlab.errors import ValidationError
from hyperlab.weights import (AXIOMS, AxiomSampling, WeightPair, WeightSpec, bracket,
                              check_weight_axioms, eval_weight, weight_derivative)

finite = st.floats(-1e6, 1e6, allow_nan=False)
kappas = st.floats(0.0, 1.0)


def by_name(reports, weight="phi"):
    return {r.axiom: r for r in reports if r.weight in (weight, "pair")}


@pytest.mark.parametrize("kappa, x, expected", [
    (0.5, 0.0, 1.0),
    (1.0, math.sqrt(3.0), 2.0),
    (0.5, 3.0, float(mp.mpf(10) ** 0.25)),
])
def test_eval_weight_examples(kappa, x, expected):
    assert eval_weight(WeightSpec.power(kappa), x) == pytest.approx(expected, rel=1e-14)


def test_constant_weight_is_one_everywhere():
    xs = np.linspace(-1e3, 1e3, 11)
    assert np.all(eval_weight(WeightSpec.one(), xs) == 1.0)
    assert eval_weight(WeightSpec.one(), 5.0) == 1.0


def test_negative_exponent_rejected():
    with pytest.raises(ValidationError):
        WeightSpec.power(-0.1)


def test_unknown_kind_rejected():
    with pytest.raises(ValidationError):
        WeightSpec("cubic", 1.0)


def test_superlinear_exponent_rejected_by_axiom_check():
    pair = WeightPair(WeightSpec.power(0.5), WeightSpec.power(1.5))
    with pytest.raises(ValidationError):
        check_weight_axioms(pair, AxiomSampling(radius=10, n_pairs=100, n_grid=11))


@pytest.mark.parametrize("kappa", [0.25, 0.5, 1.0])
@pytest.mark.parametrize("x", [-7.5, -0.3, 0.0, 1.2, 40.0])
def test_closed_form_derivatives_match_mpmath(kappa, x):
    w = WeightSpec.power(kappa)
    f = lambda s: (1 + s * s) ** (mp.mpf(kappa) / 2)
    for order in (1, 2):
        exact = float(mp.diff(f, mp.mpf(x), order))
        assert weight_derivative(w, x, order) == pytest.approx(exact, rel=1e-12, abs=1e-15)


def test_bracket_pair_passes_all_axioms():
    pair = WeightPair(WeightSpec.power(1.0), WeightSpec.power(1.0))
    reports = check_weight_axioms(pair, AxiomSampling(radius=100.0, n_pairs=10_000))
    assert all(r.passed for r in reports)
    sa = by_name(reports)["sa"]
    assert sa.n_violations == 0 and sa.n_samples >= 2 * 10_000


def test_constant_phi_passes_with_trivial_constants():
    pair = WeightPair(WeightSpec.one(), WeightSpec.one())
    reports = by_name(check_weight_axioms(pair, AxiomSampling(radius=1e3, n_pairs=2000)))
    assert all(r.passed for r in reports.values())
    assert reports["tp"].constants["s"] == 0.0
    assert reports["tp"].constants["C"] == pytest.approx(1.0)
    assert reports["sl"].constants["C"] == pytest.approx(1.0)
    assert reports["Phi"].constants["C"] == 0.0


def test_dominance_failure_reports_witness():
    pair = WeightPair(WeightSpec.power(1.0), WeightSpec.power(0.5))
    rep = by_name(check_weight_axioms(pair, AxiomSampling(radius=100.0, n_pairs=1000)))["dominance"]
    assert not rep.passed
    w = rep.witness
    assert w["x"] != 0.0 and w["lhs"] > w["rhs"]
    assert w["lhs"] == pytest.approx(bracket(w["x"]))
    assert w["rhs"] == pytest.approx(bracket(w["x"]) ** 0.5)


def test_one_report_per_axiom_and_weight():
    pair = WeightPair(WeightSpec.power(0.25), WeightSpec.power(0.5))
    reports = check_weight_axioms(pair, AxiomSampling(radius=10.0, n_pairs=500, n_grid=101))
    names = [(r.weight, r.axiom) for r in reports]
    assert names == [("phi", a) for a in AXIOMS] + [("omega", a) for a in AXIOMS] + [("pair", "dominance")]


def test_report_json_record():
    pair = WeightPair(WeightSpec.power(0.5), WeightSpec.power(0.5))
    rep = check_weight_axioms(pair, AxiomSampling(radius=10.0, n_pairs=200, n_grid=51))[0]
    rec = json.loads(rep.to_json())
    assert {"axiom", "pass", "constants", "witness"} <= set(rec)
    assert {"r", "s", "C"} <= set(rec["constants"])


def test_sampling_is_deterministic():
    pair = WeightPair(WeightSpec.power(0.5), WeightSpec.power(1.0))
    s = AxiomSampling(radius=50.0, n_pairs=500, n_grid=101, seed=7)
    a = [r.to_dict() for r in check_weight_axioms(pair, s)]
    b = [r.to_dict() for r in check_weight_axioms(pair, s)]
    assert a == b


@pytest.mark.parametrize("kappa", [0.25, 0.5, 1.0])
def test_slowly_varying_constant_stabilizes_with_radius(kappa):
    pair = WeightPair(WeightSpec.power(kappa), WeightSpec.power(kappa))
    cs = []
    for radius in (250.0, 500.0, 1000.0):
        rep = by_name(check_weight_axioms(pair, AxiomSampling(radius=radius, n_pairs=4000),
                                          include_omega=False))["sv"]
        cs.append(rep.constants["C"])
    assert np.all(np.isfinite(cs))
    assert abs(cs[-1] - cs[-2]) <= 0.05 * cs[-2]


@pytest.mark.parametrize("kappa", [0.25, 0.5, 1.0])
def test_derivative_constant_stable_under_refinement(kappa):
    pair = WeightPair(WeightSpec.power(kappa), WeightSpec.power(kappa))
    rep = by_name(check_weight_axioms(pair, AxiomSampling(radius=1e3, n_pairs=1000),
                                      include_omega=False))["Phi"]
    c, c2 = rep.constants["C"], rep.constants["C_refined"]
    assert c <= 1.0 + 1e-6
    assert abs(c - c2) <= 1e-5 * c


@settings(max_examples=300, deadline=None)
@given(kappa=kappas, x=finite, y=finite)
def test_subadditivity_property(kappa, x, y):
    w = WeightSpec.power(kappa)
    assert eval_weight(w, x + y) <= (eval_weight(w, x) + eval_weight(w, y)) * (1 + 1e-12)


@settings(max_examples=300, deadline=None)
@given(kappa=kappas, x=finite, a=st.floats(0.0, 1.0))
def test_scaling_below_one(kappa, x, a):
    w = WeightSpec.power(kappa)
    assert a * eval_weight(w, x) <= eval_weight(w, a * x) * (1 + 1e-12)


@settings(max_examples=300, deadline=None)
@given(kappa=kappas, x=st.floats(-1e5, 1e5), a=st.floats(1.0, 100.0))
def test_scaling_above_one(kappa, x, a):
    w = WeightSpec.power(kappa)
    assert eval_weight(w, a * x) <= a * eval_weight(w, x) * (1 + 1e-12)


@settings(max_examples=200, deadline=None)
@given(kappa=kappas, x=finite, y=finite)
def test_weight_at_least_one_and_monotone(kappa, x, y):
    w = WeightSpec.power(kappa)
    assert eval_weight(w, x) >= 1.0
    if abs(x) <= abs(y):
        assert eval_weight(w, x) <= eval_weight(w, y)
