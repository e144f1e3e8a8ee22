"""Coefficient fields a(t, x) of the model operator and numerical estimates of
the constants in the hypotheses they are assumed to satisfy.

Everything is one-dimensional in x. A field carries its weights (omega, Phi)
and closed-form derivatives where they are known; missing derivatives fall
back to central differences.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .errors import HypothesisViolation, ValidationError
from .fitting import PowerFit, fit_power_law
from .phasespace import xi_bracket
from .weights import WeightPair, WeightSpec, eval_weight, weight_derivative

Fn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def log_blowup(t):
    """``log(1 + 1/t)``."""
    t = np.asarray(t, dtype=float)
    return np.log1p(1.0 / t)


def _d_dt(f, t, x):
    # Richardson-extrapolated central difference, relative step
    t = np.asarray(t, dtype=float)
    h = 1e-3 * t

    def cd(hh):
        return (f(t + hh, x) - f(t - hh, x)) / (2 * hh)

    return (4 * cd(h / 2) - cd(h)) / 3


def _d_dx(f, t, x):
    x = np.asarray(x, dtype=float)
    h = 1e-3 * np.hypot(1.0, x)

    def cd(hh):
        return (f(t, x + hh) - f(t, x - hh)) / (2 * hh)

    return (4 * cd(h / 2) - cd(h)) / 3


@dataclass
class CoefficientField:
    """Principal coefficient a(t, x) on (0, T] x R with optional lower-order
    terms b1(t, x) d/dx + b0(t, x) in the operator."""

    a: Fn
    omega: WeightSpec
    phi: WeightSpec
    T: float = 1.0
    dt: Fn | None = None
    dx: Fn | None = None
    dtx: Fn | None = None
    b1: Fn | None = None
    b0: Fn | None = None
    name: str = "custom"
    time_independent: bool = False
    params: dict = field(default_factory=dict)

    @property
    def pair(self):
        return WeightPair(self.omega, self.phi)

    def __call__(self, t, x):
        return self.a(t, x)

    def d_t(self, t, x):
        return self.dt(t, x) if self.dt else _d_dt(self.a, t, x)

    def d_x(self, t, x):
        return self.dx(t, x) if self.dx else _d_dx(self.a, t, x)

    def d_xx(self, t, x):
        return _d_dx(self.d_x, t, x)

    def d_tx(self, t, x):
        return self.dtx(t, x) if self.dtx else _d_dx(self.d_t, t, x)

    def d_txx(self, t, x):
        return _d_dx(self.d_tx, t, x)

    def symbol(self, t, x, xi, k=1.0):
        """Principal symbol, realized as ``a(t, x) <xi>_k**2``."""
        return self.a(t, x) * xi_bracket(xi, k) ** 2

    def describe(self):
        return {"name": self.name, "T": self.T, "omega": self.omega.to_dict(),
                "phi": self.phi.to_dict(), **self.params}


def example_coefficient(kappa1, kappa2, T=1.0) -> CoefficientField:
    """The model coefficient

    ``<x>^{2 k1} (2 + sin(<x>^{1-k2} + cos x log t) + (2 + cos <x>^{1-k2}) log(1+1/t))``

    with omega = <x>^k1 and Phi = <x>^k2.
    """
    if not (0 <= kappa1 <= kappa2 <= 1 and kappa2 > 0):
        raise ValidationError(
            f"need 0 <= kappa1 <= kappa2 <= 1 and kappa2 > 0, got ({kappa1}, {kappa2})"
        )
    k1, p = float(kappa1), 1.0 - float(kappa2)

    def parts(t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        w = np.hypot(1.0, x)
        W = w ** (2 * k1)
        s = w**p
        arg = s + np.cos(x) * np.log(t)
        L = np.log1p(1.0 / t)
        return t, x, w, W, s, arg, L

    def a(t, x):
        t, x, w, W, s, arg, L = parts(t, x)
        return W * (2 + np.sin(arg) + (2 + np.cos(s)) * L)

    def dt(t, x):
        t, x, w, W, s, arg, L = parts(t, x)
        return W * (np.cos(arg) * np.cos(x) / t - (2 + np.cos(s)) / (t * (1 + t)))

    def dx(t, x):
        t, x, w, W, s, arg, L = parts(t, x)
        dW = 2 * k1 * x * w ** (2 * k1 - 2)
        ds = p * x * w ** (p - 2)
        darg = ds - np.sin(x) * np.log(t)
        A = 2 + np.sin(arg) + (2 + np.cos(s)) * L
        dA = np.cos(arg) * darg - np.sin(s) * ds * L
        return dW * A + W * dA

    def dtx(t, x):
        t, x, w, W, s, arg, L = parts(t, x)
        dW = 2 * k1 * x * w ** (2 * k1 - 2)
        ds = p * x * w ** (p - 2)
        darg = ds - np.sin(x) * np.log(t)
        At = np.cos(arg) * np.cos(x) / t - (2 + np.cos(s)) / (t * (1 + t))
        Atx = (-np.sin(arg) * darg * np.cos(x) / t - np.cos(arg) * np.sin(x) / t
               + np.sin(s) * ds / (t * (1 + t)))
        return dW * At + W * Atx

    return CoefficientField(a=a, dt=dt, dx=dx, dtx=dtx,
                            omega=WeightSpec.power(kappa1), phi=WeightSpec.power(kappa2),
                            T=T, name="example",
                            params={"kappa1": kappa1, "kappa2": kappa2})


def separable_coefficient(g, dg, omega: WeightSpec, phi: WeightSpec | None = None,
                          T=1.0, name="separable", params=None) -> CoefficientField:
    """``a(t, x) = omega(x)**2 g(t)`` with closed-form derivatives."""
    phi = phi or omega

    def a(t, x):
        return eval_weight(omega, x) ** 2 * g(np.asarray(t, dtype=float))

    def dt(t, x):
        return eval_weight(omega, x) ** 2 * dg(np.asarray(t, dtype=float))

    def dx(t, x):
        x = np.asarray(x, dtype=float)
        return 2 * eval_weight(omega, x) * weight_derivative(omega, x) * g(np.asarray(t, dtype=float))

    def dtx(t, x):
        x = np.asarray(x, dtype=float)
        return 2 * eval_weight(omega, x) * weight_derivative(omega, x) * dg(np.asarray(t, dtype=float))

    return CoefficientField(a=a, dt=dt, dx=dx, dtx=dtx, omega=omega, phi=phi, T=T,
                            name=name, params=params or {})


def constant_coefficient(value=1.0, T=1.0) -> CoefficientField:
    if value <= 0:
        raise ValidationError("constant coefficient must be positive")
    f = separable_coefficient(lambda t: np.full_like(t, value, dtype=float),
                              lambda t: np.zeros_like(t, dtype=float),
                              WeightSpec.one(), T=T, name="constant",
                              params={"value": value})
    f.time_independent = True
    return f


def log_coefficient(omega: WeightSpec, scale=1.0, phi=None, T=1.0):
    """``scale * omega(x)**2 log(1 + 1/t)``."""
    return separable_coefficient(lambda t: scale * log_blowup(t),
                                 lambda t: -scale / (t * (1 + t)),
                                 omega, phi, T=T, name="log",
                                 params={"scale": scale})


def oscillating_coefficient(omega: WeightSpec, phi=None, T=1.0):
    """``omega(x)**2 (2 + sin(log(1/t)))``: bounded, with |d_t a| ~ 1/t."""
    return separable_coefficient(lambda t: 2 + np.sin(-np.log(t)),
                                 lambda t: -np.cos(-np.log(t)) / t,
                                 omega, phi, T=T, name="oscillating")


def power_coefficient(power, T=1.0):
    """``a(t) = t**power`` (no x dependence), used for exponent-recovery tests."""
    return separable_coefficient(lambda t: t**power,
                                 lambda t: power * t ** (power - 1),
                                 WeightSpec.one(), T=T, name="power",
                                 params={"power": power})


@dataclass(frozen=True)
class SampleGrid:
    t_min: float = 1e-6
    t_max: float | None = None
    n_t: int = 61
    x_radius: float = 10.0
    n_x: int = 201
    seed: int = 0

    def ts(self, T):
        hi = T if self.t_max is None else min(self.t_max, T)
        return np.geomspace(self.t_min, hi, self.n_t)

    def xs(self):
        return np.linspace(-self.x_radius, self.x_radius, self.n_x)

    def to_dict(self):
        return asdict(self)


def estimate_ellipticity(field: CoefficientField, grid: SampleGrid | None = None,
                         strict=True) -> float:
    """Grid infimum of ``a / omega**2``, the fitted ellipticity constant C0."""
    grid = grid or SampleGrid()
    T_, X_ = np.meshgrid(grid.ts(field.T), grid.xs(), indexing="ij")
    c0 = float(np.min(field.a(T_, X_) / eval_weight(field.omega, X_) ** 2))
    if strict and not c0 > 0:
        err = HypothesisViolation(f"ellipticity fails: inf a/omega^2 = {c0:.6g}")
        err.value = c0
        raise err
    return c0


@dataclass
class LogBlowupResult:
    sup: float
    passed: bool
    sups_by_tmin: dict

    def to_dict(self):
        return asdict(self)


def check_log_blowup(field: CoefficientField, grid: SampleGrid | None = None,
                     refinements=4, growth_tol=0.01) -> LogBlowupResult:
    """Sup of ``a / (omega**2 log(1 + 1/t))`` over t < 1.

    The sup is recomputed while pushing t_min toward 0 by three decades per
    refinement; steady growth across every refinement is read as divergence.
    """
    grid = grid or SampleGrid()
    xs = grid.xs()
    om2 = eval_weight(field.omega, xs) ** 2
    t_hi = min(field.T, 1.0 - 1e-12)
    sups = {}
    for j in range(refinements):
        tmin = grid.t_min * 10.0 ** (-3 * j)
        ts = np.geomspace(tmin, t_hi, grid.n_t + 20 * j)
        T_, X_ = np.meshgrid(ts, xs, indexing="ij")
        r = np.abs(field.a(T_, X_)) / (om2[None, :] * log_blowup(T_))
        sups[tmin] = float(r.max())
    vals = np.array(list(sups.values()))
    growing = bool(np.all(np.diff(vals) > growth_tol * vals[:-1]))
    finite = bool(np.all(np.isfinite(vals)))
    return LogBlowupResult(sup=float(vals.max()), passed=finite and not growing,
                           sups_by_tmin={f"{k:.0e}": v for k, v in sups.items()})


@dataclass
class SingularityReport:
    C0: float
    delta1: float
    delta2: float
    a_fit: PowerFit
    dt_fit: PowerFit
    dtx_fit: PowerFit
    dx_fit: PowerFit
    C_beta: dict
    sing_constants: dict
    log_blowup_sup: float
    log_blowup_passed: bool
    grid: dict

    @property
    def delta(self):
        return max(self.delta1, self.delta2)

    def to_dict(self):
        d = asdict(self)
        d["delta"] = self.delta
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def fit_singularity_orders(field: CoefficientField,
                           grid: SampleGrid | None = None) -> SingularityReport:
    """Fit the t-singularity orders of a and its derivatives.

    Each profile ``G(t) = sup_x |D a(t, x)| Phi^{|beta|} / omega^2`` is
    regressed on log-log axes against 1/t. The first-line order delta1 comes
    from ``d_x a``; delta2 is the excess over 1 of the ``d_x d_t a`` order.
    Fitted orders are clipped at 0; raw fits stay in the report.
    """
    grid = grid or SampleGrid()
    ts, xs = grid.ts(field.T), grid.xs()
    T_, X_ = np.meshgrid(ts, xs, indexing="ij")
    om2 = eval_weight(field.omega, X_) ** 2
    ph = eval_weight(field.phi, X_)

    def prof(vals):
        return np.max(np.abs(vals), axis=1)

    A = prof(field.a(T_, X_) / om2)
    G0 = prof(field.d_t(T_, X_) / om2)
    G1 = prof(field.d_tx(T_, X_) * ph / om2)
    G2 = prof(field.d_txx(T_, X_) * ph**2 / om2)
    S1 = prof(field.d_x(T_, X_) * ph / om2)

    inv_t = 1.0 / ts
    a_fit = fit_power_law(inv_t, A)
    dt_fit = fit_power_law(inv_t, G0)
    dtx_fit = fit_power_law(inv_t, G1)
    dx_fit = fit_power_law(inv_t, S1)
    delta1 = float(np.clip(dx_fit.exponent, 0.0, 1.0))
    delta2 = float(np.clip(dtx_fit.exponent - 1.0, 0.0, 1.0))
    C_beta = {
        "0": float(np.max(ts * G0)),
        "1": float(np.max(ts ** (1 + delta2) * G1)),
    }
    L = log_blowup(ts)
    sing = {str(b): float(np.max(ts * G / L**b)) for b, G in enumerate((G0, G1, G2))}
    lb = check_log_blowup(field, grid)
    return SingularityReport(
        C0=estimate_ellipticity(field, grid, strict=False),
        delta1=delta1, delta2=delta2,
        a_fit=a_fit, dt_fit=dt_fit, dtx_fit=dtx_fit, dx_fit=dx_fit,
        C_beta=C_beta, sing_constants=sing,
        log_blowup_sup=lb.sup, log_blowup_passed=lb.passed, grid=grid.to_dict(),
    )


def check_lower_order(field: CoefficientField, grid: SampleGrid | None = None) -> float:
    """Fitted constant C with ``|b(t, x, xi)| <= C omega(x) <xi>_k``; 0 when absent."""
    if field.b1 is None and field.b0 is None:
        return 0.0
    grid = grid or SampleGrid()
    T_, X_ = np.meshgrid(grid.ts(field.T), grid.xs(), indexing="ij")
    mag = np.zeros_like(T_)
    if field.b1 is not None:
        mag += np.abs(field.b1(T_, X_))
    if field.b0 is not None:
        mag += np.abs(field.b0(T_, X_))
    return float(np.max(mag / eval_weight(field.omega, X_)))


def derivative_discrepancy(field: CoefficientField, n=100, t_min=1e-3, radius=10.0,
                           seed=0) -> float:
    """Max discrepancy between the closed-form d_t a and a finite difference.

    Measured relative to ``|d_t a| + |a| / t`` so that isolated zeros of
    d_t a do not blow the ratio up.
    """
    if field.dt is None:
        return 0.0
    rng = np.random.default_rng(seed)
    t = np.exp(rng.uniform(np.log(t_min), np.log(field.T), n))
    x = rng.uniform(-radius, radius, n)
    exact = field.dt(t, x)
    fd = _d_dt(field.a, t, x)
    scale = np.abs(exact) + np.abs(field.a(t, x)) / t
    return float(np.max(np.abs(exact - fd) / scale))
