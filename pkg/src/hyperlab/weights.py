"""Weight functions omega and Phi on the real line and sampled checks of the
structural axioms they must satisfy.

Only two families are supported: the bracket power ``<x>**kappa`` with
``kappa`` in [0, 1] and the constant ``1``. Both have closed-form
derivatives, which the tests use as exact oracles for the finite-difference
checks done here.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ValidationError

BRACKET = "bracket"
ONE = "one"

# relative slack for checks that are exact inequalities (rounding only)
EXACT_RTOL = 1e-12
# slack for the finite-difference derivative check
FD_RTOL = 1e-6

AXIOMS = ("sl", "sv", "tp", "sa", "Phi", "scale")


def bracket(x):
    """Japanese bracket ``(1 + x**2)**0.5``."""
    x = np.asarray(x, dtype=float)
    return np.hypot(1.0, x)


@dataclass(frozen=True)
class WeightSpec:
    kind: str = BRACKET
    kappa: float = 1.0

    def __post_init__(self):
        if self.kind not in (BRACKET, ONE):
            raise ValidationError(f"unknown weight kind {self.kind!r}")
        if self.kind == ONE and self.kappa != 0.0:
            object.__setattr__(self, "kappa", 0.0)
        if not np.isfinite(self.kappa) or self.kappa < 0:
            raise ValidationError(f"weight exponent must be >= 0, got {self.kappa}")

    @classmethod
    def power(cls, kappa):
        return cls(BRACKET, float(kappa))

    @classmethod
    def one(cls):
        return cls(ONE, 0.0)

    def __call__(self, x):
        return eval_weight(self, x)

    def derivative(self, x, order=1):
        return weight_derivative(self, x, order)

    def to_dict(self):
        return {"kind": self.kind, "kappa": self.kappa}

    @classmethod
    def from_dict(cls, d):
        return cls(d.get("kind", BRACKET), float(d.get("kappa", 0.0)))

    def __str__(self):
        return "1" if self.kind == ONE else f"<x>^{self.kappa:g}"


def eval_weight(w: WeightSpec, x):
    """Evaluate the weight at ``x`` (scalar or array)."""
    if w.kind == ONE:
        out = np.ones_like(np.asarray(x, dtype=float))
    else:
        out = bracket(x) ** w.kappa
    return out if np.ndim(out) else float(out)


def weight_derivative(w: WeightSpec, x, order=1):
    """Closed-form first or second derivative of the weight."""
    x = np.asarray(x, dtype=float)
    if w.kind == ONE or w.kappa == 0.0:
        out = np.zeros_like(x)
    else:
        k = w.kappa
        b2 = 1.0 + x * x
        if order == 1:
            out = k * x * b2 ** (k / 2 - 1)
        elif order == 2:
            out = k * b2 ** (k / 2 - 1) * (1.0 + (k - 2) * x * x / b2)
        else:
            raise ValueError("only orders 1 and 2 are implemented")
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class WeightPair:
    omega: WeightSpec
    phi: WeightSpec

    def to_dict(self):
        return {"omega": self.omega.to_dict(), "phi": self.phi.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(WeightSpec.from_dict(d["omega"]), WeightSpec.from_dict(d["phi"]))


@dataclass
class AxiomReport:
    axiom: str
    weight: str
    passed: bool
    constants: dict
    witness: dict | None
    n_samples: int
    n_violations: int
    sampling: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class AxiomSampling:
    """Sample set for the axiom checks.

    Pairs are drawn half uniformly on [-radius, radius] and half with
    log-uniform magnitude in [1e-3, radius], so that both the origin and
    the far field are well covered. A deterministic grid is added on top.
    """

    radius: float = 1e3
    n_pairs: int = 10_000
    n_grid: int = 2001
    seed: int = 0

    def to_dict(self):
        return asdict(self)


def _signed_samples(rng, n, radius):
    half = n // 2
    uni = rng.uniform(-radius, radius, size=half)
    mag = np.exp(rng.uniform(np.log(1e-3), np.log(radius), size=n - half))
    sgn = rng.choice([-1.0, 1.0], size=n - half)
    return np.concatenate([uni, sgn * mag])


def _grid(radius, n):
    lin = np.linspace(-radius, radius, n)
    mag = np.geomspace(1e-3, radius, n // 2)
    return np.unique(np.concatenate([lin, mag, -mag, [0.0]]))


def _verdict(name, weight, lhs, rhs, xs, ys, rtol, constants, sampling):
    """Count violations of lhs <= rhs and pick the worst one deterministically."""
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    excess = (lhs - rhs) / np.maximum(np.abs(rhs), 1e-300)
    bad = excess > rtol
    n_bad = int(bad.sum())
    witness = None
    if n_bad:
        idx = np.flatnonzero(bad)
        # largest excess first, smallest |x| breaks ties
        order = np.lexsort((np.abs(xs[idx]), -excess[idx]))
        j = idx[order[0]]
        witness = {
            "x": float(xs[j]),
            "y": None if ys is None else float(ys[j]),
            "lhs": float(lhs[j]),
            "rhs": float(rhs[j]),
        }
    return AxiomReport(
        axiom=name,
        weight=weight,
        passed=n_bad == 0,
        constants=constants,
        witness=witness,
        n_samples=int(lhs.size),
        n_violations=n_bad,
        sampling=sampling,
    )


def _fd_derivatives(w, x, h):
    fp, f0, fm = eval_weight(w, x + h), eval_weight(w, x), eval_weight(w, x - h)
    return (fp - fm) / (2 * h), (fp - 2 * f0 + fm) / (h * h)


def _check_one_weight(w, label, sampling, r=0.5, c_sv=2.0):
    rng = np.random.default_rng(sampling.seed)
    R = sampling.radius
    n = sampling.n_pairs
    s_dict = sampling.to_dict()
    xs = _signed_samples(rng, n, R)
    ys = _signed_samples(rng, n, R)
    grid = _grid(R, sampling.n_grid)
    reports = []

    # (sl): 1 <= Phi(x) <= C (1 + |x|), declared C = 1
    allx = np.concatenate([grid, xs])
    val = eval_weight(w, allx)
    ratio = val / (1 + np.abs(allx))
    lhs = np.concatenate([np.ones_like(val), val])
    rhs = np.concatenate([val, 1 + np.abs(allx)])
    xx = np.concatenate([allx, allx])
    reports.append(_verdict("sl", label, lhs, rhs, xx, None, EXACT_RTOL,
                            {"r": None, "s": None, "C": float(ratio.max())}, s_dict))

    # (sv): |x - y| <= r Phi(y)  =>  Phi(x)/Phi(y) in [1/C, C]
    u = rng.uniform(-1, 1, size=n)
    ysv = np.concatenate([ys, grid])
    usv = np.concatenate([u, np.resize(np.array([-1.0, 1.0, 0.5, -0.5]), grid.size)])
    xsv = ysv + r * eval_weight(w, ysv) * usv
    q = eval_weight(w, xsv) / eval_weight(w, ysv)
    spread = np.maximum(q, 1 / q)
    reports.append(_verdict("sv", label, spread, np.full_like(spread, c_sv), xsv, ysv,
                            EXACT_RTOL, {"r": r, "s": None, "C": float(spread.max())},
                            s_dict))

    # (tp): Phi(x + y) <= C Phi(x) (1 + |y|)^s with s = kappa, declared C = 1
    s = w.kappa
    lhs = eval_weight(w, xs + ys)
    rhs = eval_weight(w, xs) * (1 + np.abs(ys)) ** s
    reports.append(_verdict("tp", label, lhs, rhs, xs, ys, EXACT_RTOL,
                            {"r": None, "s": s, "C": float((lhs / rhs).max())}, s_dict))

    # (sa): |Phi(x) - Phi(y)| <= Phi(x + y) <= Phi(x) + Phi(y)
    px, py, pxy = eval_weight(w, xs), eval_weight(w, ys), eval_weight(w, xs + ys)
    lhs = np.concatenate([pxy, np.abs(px - py)])
    rhs = np.concatenate([px + py, pxy])
    reports.append(_verdict("sa", label, lhs, rhs, np.concatenate([xs, xs]),
                            np.concatenate([ys, ys]), EXACT_RTOL,
                            {"r": None, "s": None, "C": float((lhs / rhs).max())}, s_dict))

    # (Phi): |d^b Phi| <= C Phi <x>^{-b}, b = 1, 2, by central differences
    h = np.maximum(1e-4, 1e-4 * bracket(allx))
    d1, d2 = _fd_derivatives(w, allx, h)
    d1h, d2h = _fd_derivatives(w, allx, h / 2)
    base = eval_weight(w, allx)
    br = bracket(allx)
    r1, r2 = np.abs(d1) * br / base, np.abs(d2) * br**2 / base
    r1h, r2h = np.abs(d1h) * br / base, np.abs(d2h) * br**2 / base
    lhs = np.concatenate([r1, r2])
    reports.append(_verdict("Phi", label, lhs, np.ones_like(lhs),
                            np.concatenate([allx, allx]), None, FD_RTOL,
                            {"r": None, "s": None, "C": float(lhs.max()),
                             "C_refined": float(max(r1h.max(), r2h.max()))}, s_dict))

    # (scale): a Phi(x) <= Phi(a x) for a in [0,1];  Phi(a x) <= a Phi(x) for a > 1
    a_lo = rng.uniform(0, 1, size=n)
    a_hi = rng.uniform(1, 10, size=n)
    lhs = np.concatenate([a_lo * eval_weight(w, xs), eval_weight(w, a_hi * xs)])
    rhs = np.concatenate([eval_weight(w, a_lo * xs), a_hi * eval_weight(w, xs)])
    reports.append(_verdict("scale", label, lhs, rhs, np.concatenate([xs, xs]),
                            np.concatenate([a_lo, a_hi]), EXACT_RTOL,
                            {"r": None, "s": None, "C": 1.0}, s_dict))
    return reports


def check_weight_axioms(pair: WeightPair, sampling: AxiomSampling | None = None,
                        include_omega=True):
    """Sampled check of (sl), (sv), (tp), (sa), (Phi), (scale) and omega <= Phi.

    Returns one report per axiom for Phi, the same six for omega when
    ``include_omega`` is set, and a final dominance report.
    """
    sampling = sampling or AxiomSampling()
    for name, w in (("omega", pair.omega), ("phi", pair.phi)):
        if w.kappa > 1:
            raise ValidationError(f"{name}: exponent {w.kappa} > 1 breaks sub-linearity")
    reports = _check_one_weight(pair.phi, "phi", sampling)
    if include_omega:
        reports += _check_one_weight(pair.omega, "omega", sampling)
    grid = _grid(sampling.radius, sampling.n_grid)
    rng = np.random.default_rng(sampling.seed + 1)
    xs = np.concatenate([grid, _signed_samples(rng, sampling.n_pairs, sampling.radius)])
    om, ph = eval_weight(pair.omega, xs), eval_weight(pair.phi, xs)
    reports.append(_verdict("dominance", "pair", om, ph, xs, None, EXACT_RTOL,
                            {"r": None, "s": None, "C": float((om / ph).max())},
                            sampling.to_dict()))
    return reports
