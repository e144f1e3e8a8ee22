"""Speed classes, explicit activator speeds and the oscillator cascade
``u_i'' + c(t) lambda_i^2 u_i = 0``.

A speed is any object with vectorized ``value(t)`` and ``derivative(t)``
and a list ``constant_segments(T)`` of intervals where it is exactly
constant; the integrator uses exact rotations there.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate

from .errors import StepBudgetExceeded, ValidationError
from .excision import transition, transition_derivatives, transition_scalar
from .fitting import fit_power_law

# ---------------------------------------------------------------- theta registry


def _theta_log_inv(t):
    return -np.log(t)


def _theta_log_blowup(t):
    return np.log1p(1.0 / np.asarray(t, dtype=float))


def _theta_one(t):
    return np.ones_like(np.asarray(t, dtype=float))


THETAS: dict[str, Callable] = {
    "log(1/t)": _theta_log_inv,
    "log(1+1/t)": _theta_log_blowup,
    "1": _theta_one,
}


def theta_fn(name):
    try:
        return THETAS[name]
    except KeyError:
        raise ValidationError(f"unknown theta {name!r}; known: {sorted(THETAS)}") from None


@dataclass(frozen=True)
class SpeedClass:
    """The class C(mu1, mu2, theta) on (0, T]."""

    mu1: float
    mu2: float
    theta: str = "log(1/t)"
    T: float = 1.0

    def __post_init__(self):
        if not 0 < self.mu1 <= self.mu2:
            raise ValidationError("need 0 < mu1 <= mu2")
        if not self.T > 0:
            raise ValidationError("T must be positive")
        theta_fn(self.theta)

    def theta_at(self, t):
        return theta_fn(self.theta)(np.asarray(t, dtype=float))

    def theta_diverges(self, decades=12, n=201) -> bool:
        """Strictly monotone growth of theta toward 0 on a log grid that at
        least doubles and does not saturate: the rise over the smallest
        third of the decades is at least a fifth of the rise over the
        largest third."""
        ts = np.geomspace(self.T * 10.0 ** (-decades), self.T / 2, n)
        th = self.theta_at(ts)
        if not (np.all(np.isfinite(th)) and np.all(np.diff(th) < 0)):
            return False
        k = n // 3
        near, far = th[0] - th[k], th[-1 - k] - th[-1]
        return bool(th[0] >= 2 * max(th[-1], 1e-300) and near >= 0.2 * far)


# ---------------------------------------------------------------------- speeds


class ConstantSpeed:
    def __init__(self, c):
        if not c > 0:
            raise ValidationError("speed must be positive")
        self.c = float(c)
        self.singular_at_zero = False

    def value(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.c)

    def derivative(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    def constant_segments(self, T):
        return [(0.0, T, self.c)]

    def describe(self):
        return {"kind": "constant", "c": self.c}


class FunctionSpeed:
    """Speed from closed-form callables. ``singular_at_zero`` makes the
    integrator start slightly after t = 0 from a Taylor expansion."""

    def __init__(self, f, df, singular_at_zero=False, name="function"):
        self.f, self.df = f, df
        self.singular_at_zero = singular_at_zero
        self.name = name

    def value(self, t):
        return self.f(np.asarray(t, dtype=float))

    def derivative(self, t):
        return self.df(np.asarray(t, dtype=float))

    def constant_segments(self, T):
        return []

    def describe(self):
        return {"kind": "function", "name": self.name}


def _osc_value(t):
    # undefined at t = 0; NaN there is intended
    with np.errstate(divide="ignore", invalid="ignore"):
        return 2 + np.sin(-np.log(t))


def _osc_derivative(t):
    with np.errstate(divide="ignore", invalid="ignore"):
        return -np.cos(-np.log(t)) / t


def oscillating_speed():
    """``2 + sin(log(1/t))``: in C(1, 3, log(1/t)) near 0 with |c'| = O(1/t)."""
    return FunctionSpeed(_osc_value, _osc_derivative, singular_at_zero=True, name="2+sin(log(1/t))")


class SmoothStepsSpeed:
    """Piecewise-constant levels joined by C-infinity transitions.

    Level ``levels[i]`` holds before ``starts[i]``; the switch to
    ``levels[i+1]`` takes place over ``[starts[i], starts[i] + widths[i]]``.
    Transition windows must not overlap, so the speed stays between
    neighbouring levels.
    """

    def __init__(self, levels, starts, widths):
        self.levels = np.asarray(levels, dtype=float)
        self.starts = np.asarray(starts, dtype=float)
        self.widths = np.asarray(widths, dtype=float)
        if self.levels.size != self.starts.size + 1 or self.starts.size != self.widths.size:
            raise ValidationError("need len(levels) == len(starts) + 1 == len(widths) + 1")
        ends = self.starts + self.widths
        if np.any(self.widths <= 0) or np.any(self.starts[1:] < ends[:-1]):
            raise ValidationError("transition windows must be positive and disjoint")
        if np.any(self.levels <= 0):
            raise ValidationError("levels must be positive")
        self.singular_at_zero = False

    def value(self, t):
        t = np.asarray(t, dtype=float)
        out = np.full_like(t, self.levels[0])
        for i, (s, w) in enumerate(zip(self.starts, self.widths)):
            out = out + (self.levels[i + 1] - self.levels[i]) * transition((t - s) / w)
        return out

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for i, (s, w) in enumerate(zip(self.starts, self.widths)):
            d1, _ = transition_derivatives((t - s) / w)
            out = out + (self.levels[i + 1] - self.levels[i]) * d1 / w
        return out

    def scalar(self, t):
        # windows are disjoint, so at most one transition is active
        j = int(np.searchsorted(self.starts, t, side="right")) - 1
        if j < 0:
            return float(self.levels[0]), 0.0
        w = self.widths[j]
        n0, n1, _ = transition_scalar((t - self.starts[j]) / w)
        jump = self.levels[j + 1] - self.levels[j]
        return float(self.levels[j] + jump * n0), float(jump * n1 / w)

    def constant_segments(self, T):
        edges = [0.0]
        for s, w in zip(self.starts, self.widths):
            edges += [s, s + w]
        edges.append(np.inf)
        segs = []
        for i in range(0, len(edges), 2):
            lo, hi = edges[i], min(edges[i + 1], T)
            if hi > lo:
                segs.append((lo, hi, float(self.levels[i // 2])))
        return segs

    def describe(self):
        return {"kind": "smooth-steps", "levels": self.levels.tolist(),
                "starts": self.starts.tolist(), "widths": self.widths.tolist()}


def random_smooth_steps(rng: np.random.Generator, cls: SpeedClass, n_steps=8, margin=0.05):
    """Random member of ``cls``: levels uniform in the band, switches at
    dyadic times ``T 2^-j`` with widths half the switch time, so |c'| ~ 1/t."""
    lo = cls.mu1 + margin * (cls.mu2 - cls.mu1)
    hi = cls.mu2 - margin * (cls.mu2 - cls.mu1)
    levels = rng.uniform(lo, hi, n_steps + 1)
    starts = cls.T * 0.5 ** np.arange(n_steps, 0, -1)
    return SmoothStepsSpeed(levels, starts, starts / 2)


# ------------------------------------------------------------------ activators


def _floor_root(lam, p):
    """Exact floor(lam**(1/p)) for p in {2, 4}."""
    n = math.isqrt(int(math.floor(lam)))
    return n if p == 2 else math.isqrt(n)


def lambda_marks(lam, gamma):
    """``a = 2 pi floor(lam^{1/4}) / (gamma lam)``, ``b = 2 pi floor(lam^{1/2}) / (gamma lam)``."""
    if not lam > 0 or not gamma > 0:
        raise ValidationError("lambda and gamma must be positive")
    base = 2 * math.pi / (gamma * lam)
    return base * _floor_root(lam, 4), base * _floor_root(lam, 2)


@dataclass(frozen=True)
class ActivatorParams:
    gamma: float
    T1: float
    lam: float
    theta: str = "log(1/t)"
    T: float = 1.0

    def __post_init__(self):
        if not self.gamma > 0 or not self.lam > 0:
            raise ValidationError("gamma and lambda must be positive")
        if not 0 < self.T1 < self.T:
            raise ValidationError("need 0 < T1 < T")
        theta_fn(self.theta)

    @property
    def marks(self):
        return lambda_marks(self.lam, self.gamma)

    @property
    def a(self):
        return self.marks[0]

    @property
    def b(self):
        return self.marks[1]

    @property
    def theta_lam(self):
        return float(min(theta_fn(self.theta)(self.b), math.log(self.lam)))

    @property
    def admissible(self):
        a, b = self.marks
        return 0 < a < 2 * a < b / 2 < b < self.T1

    def validate(self, cls: SpeedClass | None = None):
        if not self.admissible:
            a, b = self.marks
            raise ValidationError(
                f"lambda={self.lam} below admissibility: a={a:.6g}, b={b:.6g}, T1={self.T1}")
        if cls is not None and not cls.mu1 < self.gamma**2 < cls.mu2:
            raise ValidationError("gamma^2 must lie strictly inside (mu1, mu2)")
        return self

    def to_dict(self):
        d = asdict(self)
        d.update(a=self.a, b=self.b, theta_lam=self.theta_lam)
        return d


class Admissibility(NamedTuple):
    first: float
    stable: float


def admissibility_threshold(gamma, T1) -> Admissibility:
    """Where the ordering ``0 < a < 2a < b/2 < b < T1`` holds.

    ``first`` is the smallest admissible lambda; every lambda strictly above
    ``stable`` is admissible. Computed exactly on the pieces where both
    floors are constant: there ``4 floor(lam^{1/4}) < floor(lam^{1/2})`` is
    fixed and ``b < T1`` reads ``lam > 2 pi m / (gamma T1)``.
    """
    if not gamma > 0 or not T1 > 0:
        raise ValidationError("gamma and T1 must be positive")
    m_safe = max(int(math.ceil(2 * math.pi / (gamma * T1))) + 1, 25)
    top = float(m_safe**2)
    cuts = sorted({float(k * k) for k in range(1, m_safe + 1)}
                  | {float(k**4) for k in range(1, int(top**0.25) + 2)})
    cuts = [c for c in cuts if c <= top]
    first, last_bad = math.inf, 0.0
    for p0, p1 in zip(cuts[:-1], cuts[1:]):
        q, m = _floor_root(p0, 4), _floor_root(p0, 2)
        if not (q >= 1 and 4 * q < m):
            last_bad = p1
            continue
        edge = 2 * math.pi * m / (gamma * T1)  # b < T1 iff lam > edge
        if edge >= p0:
            last_bad = max(last_bad, min(p1, edge))
            if edge < p1:
                first = min(first, math.nextafter(edge, math.inf))
        else:
            first = min(first, p0)
    return Admissibility(float(first), float(last_bad))


def _epsilon_parts(t, p: ActivatorParams):
    """epsilon_lambda and its first two derivatives."""
    t = np.asarray(t, dtype=float)
    a, b = p.marks
    th = p.theta_lam
    e0 = np.zeros_like(t)
    e1 = np.zeros_like(t)
    e2 = np.zeros_like(t)
    # only t in (a, b) is used; keep the rest away from overflow
    ts = np.where(t > a / 2, t, 1.0)
    base0, base1, base2 = th / ts, -th / ts**2, 2 * th / ts**3

    rise = (t > a) & (t < 2 * a)
    mid = (t >= 2 * a) & (t <= b / 2)
    fall = (t > b / 2) & (t < b)
    e0 = np.where(mid, base0, e0)
    e1 = np.where(mid, base1, e1)
    e2 = np.where(mid, base2, e2)
    for mask, s, ds in ((rise, (t - a) / a, 1.0 / a), (fall, 2 * (b - t) / b, -2.0 / b)):
        if np.any(mask):
            n0 = transition(np.where(mask, s, 0.5))
            n1, n2 = transition_derivatives(np.where(mask, s, 0.5))
            n1, n2 = n1 * ds, n2 * ds * ds
            e0 = np.where(mask, base0 * n0, e0)
            e1 = np.where(mask, base1 * n0 + base0 * n1, e1)
            e2 = np.where(mask, base2 * n0 + 2 * base1 * n1 + base0 * n2, e2)
    return e0, e1, e2


def epsilon_lambda(t, p: ActivatorParams):
    """``(epsilon_lambda(t), epsilon_lambda'(t))``; zero outside (a, b)."""
    e0, e1, _ = _epsilon_parts(t, p)
    if np.ndim(e0) == 0:
        return float(e0), float(e1)
    return e0, e1


def activator_speed(t, p: ActivatorParams):
    """``(c_lambda(t), c_lambda'(t))`` with plateau ``gamma^2``.

    ``c = g^2 - e/(4 g l) sin(2 g l t) - e'/(8 g^2 l^2) sin^2(g l t)
          - e^2/(64 g^4 l^2) sin^4(g l t)``.
    """
    t = np.asarray(t, dtype=float)
    g, lam = p.gamma, p.lam
    w = g * lam
    e0, e1, e2 = _epsilon_parts(t, p)
    s, c = np.sin(w * t), np.cos(w * t)
    s2, c2 = np.sin(2 * w * t), np.cos(2 * w * t)
    k1, k2, k3 = 1 / (4 * g * lam), 1 / (8 * g**2 * lam**2), 1 / (64 * g**4 * lam**2)
    val = g * g - k1 * e0 * s2 - k2 * e1 * s * s - k3 * e0 * e0 * s**4
    der = (-k1 * (e1 * s2 + 2 * w * e0 * c2)
           - k2 * (e2 * s * s + 2 * w * e1 * s * c)
           - k3 * (2 * e0 * e1 * s**4 + 4 * w * e0 * e0 * s**3 * c))
    if val.ndim == 0:
        return float(val), float(der)
    return val, der


def _activator_scalar(t, p: ActivatorParams, a, b, th):
    """Float-only ``(c, c')``; the ODE right-hand side calls this."""
    g, lam = p.gamma, p.lam
    if t <= a or t >= b:
        return g * g, 0.0
    b0, b1, b2 = th / t, -th / t**2, 2 * th / t**3
    if t < 2 * a:
        n0, n1, n2 = transition_scalar((t - a) / a)
        n1, n2 = n1 / a, n2 / (a * a)
    elif t <= b / 2:
        n0, n1, n2 = 1.0, 0.0, 0.0
    else:
        n0, n1, n2 = transition_scalar(2 * (b - t) / b)
        n1, n2 = -2 * n1 / b, 4 * n2 / (b * b)
    e0, e1, e2 = b0 * n0, b1 * n0 + b0 * n1, b2 * n0 + 2 * b1 * n1 + b0 * n2
    w = g * lam
    s, c = math.sin(w * t), math.cos(w * t)
    s2, c2 = 2 * s * c, c * c - s * s
    k1, k2, k3 = 1 / (4 * g * lam), 1 / (8 * g**2 * lam**2), 1 / (64 * g**4 * lam**2)
    val = g * g - k1 * e0 * s2 - k2 * e1 * s * s - k3 * e0 * e0 * s**4
    der = (-k1 * (e1 * s2 + 2 * w * e0 * c2)
           - k2 * (e2 * s * s + 2 * w * e1 * s * c)
           - k3 * (2 * e0 * e1 * s**4 + 4 * w * e0 * e0 * s**3 * c))
    return val, der


class ActivatorSpeed:
    """``c_lambda`` as a speed object; constant ``gamma^2`` off ``(a, b)``."""

    def __init__(self, p: ActivatorParams):
        self.p = p
        self.singular_at_zero = False
        self._marks = (*p.marks, p.theta_lam)

    def scalar(self, t):
        return _activator_scalar(float(t), self.p, *self._marks)

    def value(self, t):
        return activator_speed(t, self.p)[0]

    def derivative(self, t):
        return activator_speed(t, self.p)[1]

    def constant_segments(self, T):
        a, b = self.p.marks
        g2 = self.p.gamma**2
        segs = [(0.0, min(a, T), g2)]
        if b < T:
            segs.append((b, T, g2))
        return segs

    def active_window(self):
        return self.p.marks

    def describe(self):
        return {"kind": "activator", **self.p.to_dict()}


def activator_exact(t, p: ActivatorParams):
    """Exact solution of ``u'' + c_lambda lam^2 u = 0``, ``u(0)=0, u'(0)=1``.

    ``u = sin(g l t)/(g l) exp(rho)`` with ``rho' = e sin^2(g l t) / (8 g^2)``;
    rho is integrated by adaptive quadrature over whole periods.
    Returns ``(u, u', rho)`` at scalar t.
    """
    g, lam = p.gamma, p.lam
    w = g * lam
    a, b = p.marks
    hi = min(max(t, a), b)
    rho = 0.0
    if hi > a:
        f = lambda s: float(_epsilon_parts(s, p)[0]) * math.sin(w * s) ** 2
        n_per = max(int(math.ceil((hi - a) * w / (2 * math.pi))), 1)
        edges = np.linspace(a, hi, 4 * n_per + 1)
        for lo, up in zip(edges[:-1], edges[1:]):
            rho += integrate.quad(f, lo, up, epsabs=1e-14, epsrel=1e-12, limit=100)[0]
        rho /= 8 * g * g
    e0 = float(_epsilon_parts(t, p)[0])
    s, c = math.sin(w * t), math.cos(w * t)
    scale = math.exp(rho)
    u = s / w * scale
    up = (c + s / w * e0 * s * s / (8 * g * g)) * scale
    return u, up, rho


def activator_energy(p: ActivatorParams):
    """``|u'|^2 + lam^2 |u|^2`` for all t >= b when gamma = 1 is
    ``exp(2 rho(b))``; in general returns the exact energy at b."""
    a, b = p.marks
    u, up, _ = activator_exact(b, p)
    return up * up + p.lam**2 * u * u


def phi_rate(lam, gamma, theta="log(1/t)"):
    """``theta_lam / (32 gamma^2) * log(floor(lam^{1/2}) / floor(lam^{1/4}))``."""
    _, b = lambda_marks(lam, gamma)
    th = min(float(theta_fn(theta)(b)), math.log(lam))
    return th / (32 * gamma**2) * math.log(_floor_root(lam, 2) / _floor_root(lam, 4))


# -------------------------------------------------------- metric and membership


def metric_grid(T, n_log=2000, n_uniform=100_000, t_min_rel=1e-10, windows=()):
    """Composite sampling grid: log-spaced toward 0, uniform on (0, T], and
    5000 uniform points in each extra window."""
    parts = [np.geomspace(T * t_min_rel, T, n_log), np.linspace(0, T, n_uniform + 1)[1:]]
    for lo, hi in windows:
        parts.append(np.linspace(lo, min(hi, T), 5001))
    return np.unique(np.concatenate(parts))


def _windows(*speeds):
    return [s.active_window() for s in speeds if hasattr(s, "active_window")]


def d_C_metric(c1, c2, cls: SpeedClass, grid=None) -> float:
    """``sup|c1 - c2| + sup (t^2 / theta(t)) |c1' - c2'|`` on a sampled grid.

    Where theta(t) <= 0 (e.g. log(1/t) at t = 1) the weight is undefined;
    such points contribute only if the derivatives differ there (then inf).
    """
    ts = metric_grid(cls.T, windows=_windows(c1, c2)) if grid is None else np.asarray(grid)
    dv = np.abs(c1.value(ts) - c2.value(ts))
    dd = np.abs(c1.derivative(ts) - c2.derivative(ts))
    th = cls.theta_at(ts)
    with np.errstate(divide="ignore", invalid="ignore"):
        wt = np.where(dd == 0, 0.0, np.where(th > 0, ts**2 * dd / th, np.inf))
    return float(dv.max() + wt.max())


@dataclass
class MembershipReport:
    passed: bool
    e1: bool
    e2_C: float
    e3: bool
    c_min: float
    c_max: float
    witness_t: float | None = None

    def to_dict(self):
        return asdict(self)


def membership_check(speed, cls: SpeedClass, grid=None) -> MembershipReport:
    """Band (e1), fitted ``C = sup t |c'| / theta`` (e2), theta divergence (e3)."""
    ts = metric_grid(cls.T, n_uniform=20_000, windows=_windows(speed)) if grid is None else np.asarray(grid)
    cv = speed.value(ts)
    dv = np.abs(speed.derivative(ts))
    bad = (cv < cls.mu1) | (cv > cls.mu2) | ~np.isfinite(cv)
    witness = float(ts[np.argmax(bad)]) if bad.any() else None
    th = cls.theta_at(ts)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dv == 0, 0.0, np.where(th > 0, ts * dv / th, np.inf))
    C = float(ratio.max())
    e3 = cls.theta_diverges()
    e1 = not bad.any()
    return MembershipReport(e1 and np.isfinite(C) and e3, e1, C, e3,
                            float(np.nanmin(cv)), float(np.nanmax(cv)), witness)


# ---------------------------------------------------------------- integration


@dataclass
class ModeTrajectory:
    """Samples of ``u_i`` with ``u_i(0) = 0``, ``u_i'(0) = f``.

    ``E = |u'|^2 + lam^2 |u|^2``; ``E_c = |u'|^2 + c lam^2 |u|^2`` is the
    energy whose derivative is ``c' lam^2 |u|^2``.
    """

    lam: float
    t: np.ndarray
    u: np.ndarray
    up: np.ndarray
    c: np.ndarray
    work: np.ndarray  # int c' lam^2 u^2 from the integration start
    t_start: float
    E_c_start: float
    n_steps: int
    f: float = 1.0

    @property
    def E(self):
        return self.up**2 + self.lam**2 * self.u**2

    @property
    def E_c(self):
        return self.up**2 + self.c * self.lam**2 * self.u**2

    def identity_residual(self):
        """Max relative defect of ``E_c(t) - E_c(t_start) - work(t)``."""
        keep = self.t >= self.t_start
        Ec = self.E_c[keep]
        if not Ec.size:
            return 0.0
        d = np.abs(Ec - self.E_c_start - self.work[keep])
        return float(d.max() / max(np.abs(Ec).max(), self.E_c_start))


def _scalar(speed, t):
    if hasattr(speed, "scalar"):
        return speed.scalar(t)
    return float(speed.value(t)), float(speed.derivative(t))


def _rotate(u, up, c, lam, dt):
    w = math.sqrt(c) * lam
    cs, sn = math.cos(w * dt), math.sin(w * dt)
    return u * cs + up / w * sn, -u * w * sn + up * cs


def _segments(speed, T, t_start):
    """Split [t_start, T] into exact-rotation and integration pieces."""
    const = sorted((max(lo, t_start), min(hi, T), c)
                   for lo, hi, c in speed.constant_segments(T) if min(hi, T) > max(lo, t_start))
    pieces, cur = [], t_start
    for lo, hi, c in const:
        if lo > cur:
            pieces.append((cur, lo, None))
        pieces.append((lo, hi, c))
        cur = hi
    if cur < T:
        pieces.append((cur, T, None))
    return pieces


def integrate_mode(speed, lam, T, rtol=1e-10, samples=None, f=1.0,
                   max_steps=2_000_000, steps_per_period=20) -> ModeTrajectory:
    """Integrate ``u'' + c(t) lam^2 u = 0``, ``u(0) = 0``, ``u'(0) = f``.

    Constant pieces are rotated exactly. Elsewhere scipy's DOP853 is driven
    step by step with ``max_step = 2 pi / (sqrt(max c) lam steps_per_period)``
    and dense output at the sample times, alongside the work integral
    ``int c' lam^2 u^2``. Speeds flagged ``singular_at_zero`` start at
    ``t0 = min(1e-6, 1e-3/lam)`` from the Taylor data
    ``u = f (t0 - c lam^2 t0^3/6)``, ``u' = f (1 - c lam^2 t0^2/2)``.
    """
    if rtol < 1e-12:
        raise ValidationError("tolerance must be >= 1e-12")
    lam = float(lam)
    ts = np.linspace(0, T, 2001) if samples is None else np.asarray(samples, dtype=float)
    ts = np.unique(np.clip(ts, 0, T))
    t_start = 0.0
    u, up = 0.0, float(f)
    if speed.singular_at_zero:
        t_start = min(1e-6, 1e-3 / lam, T / 10)
        c0 = float(speed.value(t_start))
        u = f * (t_start - c0 * lam**2 * t_start**3 / 6)
        up = f * (1 - c0 * lam**2 * t_start**2 / 2)
    E_c_start = up * up + float(speed.value(t_start)) * lam * lam * u * u
    out_u = np.full(ts.size, np.nan)
    out_up = np.full(ts.size, np.nan)
    out_w = np.zeros(ts.size)
    pre = ts < t_start
    if pre.any():
        # Taylor data before the start
        tt = ts[pre]
        c0 = float(speed.value(t_start))
        out_u[pre] = f * (tt - c0 * lam**2 * tt**3 / 6)
        out_up[pre] = f * (1 - c0 * lam**2 * tt**2 / 2)
    work = 0.0
    steps = 0
    for lo, hi, c in _segments(speed, T, t_start):
        inside = (ts >= lo) & (ts <= hi)
        if c is not None:
            for j in np.flatnonzero(inside):
                out_u[j], out_up[j] = _rotate(u, up, c, lam, ts[j] - lo)
                out_w[j] = work
            u, up = _rotate(u, up, c, lam, hi - lo)
            continue
        probe = speed.value(np.linspace(lo, hi, 2001))
        c_max = float(np.max(probe))
        max_step = 2 * math.pi / (math.sqrt(c_max) * lam * steps_per_period)

        def rhs(t, y):
            cv, cd = _scalar(speed, t)
            return np.array([y[1], -cv * lam * lam * y[0], cd * lam * lam * y[0] * y[0]])

        scale = abs(f)
        atol = np.array([rtol * 1e-3 * scale / lam, rtol * 1e-3 * scale, rtol * 1e-3 * scale**2])
        solver = integrate.DOP853(rhs, lo, np.array([u, up, work]), hi, rtol=rtol,
                                  atol=atol, max_step=max_step)
        pending = list(np.flatnonzero(inside))
        while solver.status == "running":
            solver.step()
            steps += 1
            if solver.status == "failed":
                raise StepBudgetExceeded(solver.t, max_steps)
            if steps > max_steps:
                raise StepBudgetExceeded(solver.t, max_steps)
            if pending and ts[pending[0]] <= solver.t:
                dense = solver.dense_output()
                while pending and ts[pending[0]] <= solver.t:
                    j = pending.pop(0)
                    out_u[j], out_up[j], out_w[j] = dense(ts[j])
        u, up, work = solver.y
    return ModeTrajectory(lam=lam, t=ts, u=out_u, up=out_up, c=speed.value(ts),
                          work=out_w, t_start=t_start, E_c_start=E_c_start, n_steps=steps, f=float(f))


def gronwall_bound(speed, ts, t_start=0.0):
    """``E_c(t_start) exp(int_{t_start}^t |c'|/c)`` factor at sorted times ``ts``
    (without the initial energy), by adaptive quadrature between samples."""
    def g(s):
        cv, cd = _scalar(speed, s)
        return abs(cd) / cv

    acc, prev, out = 0.0, t_start, []
    for t in ts:
        if t > prev:
            acc += integrate.quad(g, prev, t, limit=400, epsabs=1e-12, epsrel=1e-10)[0]
            prev = t
        out.append(math.exp(acc))
    return np.array(out)


# ---------------------------------------------------------------------- sweeps


CSV_COLUMNS = ["lambda", "phi", "a_lambda", "b_lambda", "theta_lambda", "dC", "infE",
               "logE_T", "logE_over_loglambda", "verdict"]


@dataclass
class LossScanReport:
    rows: list
    trend: str
    manifest: dict = field(default_factory=dict)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(r.get(k)) for k in CSV_COLUMNS])
        return buf.getvalue()

    def to_dict(self):
        return {"rows": self.rows, "trend": self.trend, "manifest": self.manifest}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @property
    def active_rows(self):
        return [r for r in self.rows if r["verdict"] != "skipped"]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parallel_map(fn, items, threads):
    if threads is not None and threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def classify_trend(ratios) -> str:
    """``superpolynomial`` if log E / log lambda strictly increases across the
    sweep, ``polynomial`` otherwise; fewer than two rows is inconclusive."""
    if len(ratios) < 2:
        return "inconclusive"
    return "superpolynomial" if all(b > a for a, b in zip(ratios, ratios[1:])) else "polynomial"


def activator_sweep(gamma, T1, cls: SpeedClass, lams, delta, rtol=1e-10, threads=None,
                    plateau_only=False) -> LossScanReport:
    """Per-lambda activator runs: membership, d_C to the plateau, inf of E
    over ``[delta, T]`` against ``exp(2 phi)``, and log E(T) / log lambda.

    ``plateau_only`` replaces every c_lambda by the constant gamma^2 (the
    no-activation control).
    """
    if not 0 < delta < cls.T:
        raise ValidationError("delta must lie in (0, T)")
    if not cls.mu1 < gamma**2 < cls.mu2:
        raise ValidationError("gamma^2 must lie strictly inside (mu1, mu2)")
    plateau = ConstantSpeed(gamma**2)

    def one(lam):
        p = ActivatorParams(gamma, T1, float(lam), cls.theta, cls.T)
        a, b = p.marks
        row = {"lambda": float(lam), "a_lambda": a, "b_lambda": b}
        if not p.admissible:
            row["verdict"] = "skipped"
            return row
        speed = plateau if plateau_only else ActivatorSpeed(p)
        mem = membership_check(speed, cls)
        phi = phi_rate(lam, gamma, cls.theta)
        ts = np.linspace(delta, cls.T, 401)
        traj = integrate_mode(speed, lam, cls.T, rtol=rtol, samples=ts)
        E = traj.E
        infE = float(E.min())
        logE = float(math.log(E[-1]))
        row.update(phi=phi, theta_lambda=p.theta_lam, dC=d_C_metric(speed, plateau, cls),
                   infE=infE, logE_T=logE, logE_over_loglambda=logE / math.log(lam),
                   M_delta_ratio=infE / math.exp(2 * phi), e2_C=mem.e2_C,
                   membership=mem.passed, identity_residual=traj.identity_residual(),
                   verdict="ok" if mem.passed else "band-violation")
        return row

    rows = _parallel_map(one, sorted(float(x) for x in lams), threads)
    active = [r for r in rows if r["verdict"] != "skipped"]
    trend = classify_trend([r["logE_over_loglambda"] for r in active])
    manifest = {"gamma": gamma, "T1": T1, "mu1": cls.mu1, "mu2": cls.mu2, "theta": cls.theta,
                "T": cls.T, "delta": delta, "rtol": rtol, "plateau_only": plateau_only}
    return LossScanReport(rows, trend, manifest)


@dataclass
class CascadeReport:
    lams: list
    weights: list
    logE: list
    slope: float | None
    table: dict  # m -> list of partial sums, one per truncation
    truncations: list
    verdicts: dict

    def to_dict(self):
        return asdict(self)


def _cascade_verdict(terms, partial, rtol=1e-3):
    """Convergent when the last quarter of the terms adds less than ``rtol``
    of the sum and stays far below the early terms; divergent when the
    terms keep growing past every early term."""
    n = len(terms)
    if n < 8:
        return "inconclusive"
    k = max(n // 4, 2)
    tail, head = terms[-k:], terms[: n - k]
    if partial[-1] > 0 and sum(tail) <= rtol * partial[-1] and max(tail) <= 1e-2 * max(head):
        return "convergent"
    if tail[-1] > max(head) and tail[-1] >= tail[0]:
        return "divergent"
    return "inconclusive"


def cascade_loss_scan(speed_for, lams=None, weights=None, T=1.0, ms=(0,), n_modes=64,
                      truncations=None, rtol=1e-10, threads=None) -> CascadeReport:
    """Truncated sums ``sum_{i<=n} lam_i^{2m} (|u_i'(T)|^2 + lam_i^2 |u_i(T)|^2)``.

    ``speed_for`` is a speed or a callable ``lam -> speed`` (one speed per
    mode). Defaults: ``lam_i = i`` and ``f_i = exp(-sqrt(lam_i))``. The mode
    energies scale with ``f_i^2``, so unit-data runs are rescaled. Also
    reports the fitted exponent of ``E_i(T)`` against ``lam_i``.
    """
    lams = np.arange(1, n_modes + 1, dtype=float) if lams is None else np.asarray(lams, float)
    if np.any(np.diff(lams) < 0) or np.any(lams <= 0):
        raise ValidationError("lambda sequence must be positive and nondecreasing")
    weights = np.exp(-np.sqrt(lams)) if weights is None else np.asarray(weights, float)
    get = speed_for if callable(speed_for) and not hasattr(speed_for, "value") else (lambda lam: speed_for)

    def one(lam):
        return integrate_mode(get(lam), lam, T, rtol=rtol, samples=[T]).E[-1]

    E = np.array(_parallel_map(one, list(lams), threads))
    fit = fit_power_law(lams, E) if lams.size >= 2 and np.ptp(lams) > 0 else None
    truncations = truncations or sorted({max(2, lams.size // 4), lams.size // 2, lams.size})
    table, verdicts = {}, {}
    for m in ms:
        terms = lams ** (2 * m) * weights**2 * E
        partial = np.cumsum(terms)
        table[str(m)] = [float(partial[n - 1]) for n in truncations]
        verdicts[str(m)] = _cascade_verdict(list(terms), list(partial))
    return CascadeReport(lams.tolist(), weights.tolist(), np.log(E).tolist(),
                         None if fit is None else fit.exponent, table, list(truncations), verdicts)
