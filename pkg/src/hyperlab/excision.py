"""Smooth cutoffs, the excised symbol near t = 0, the characteristic root and
the L1-in-time majorants together with their logarithmic integral bounds."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .coefficients import CoefficientField, SampleGrid, log_blowup
from .errors import HypothesisViolation, NumericalFailure
from .phasespace import PhaseParams, xi_bracket
from .weights import eval_weight

# below this argument exp(-1/s) and all its derivatives are < 1e-200
_FLAT = 1.0 / 460.0


def _bump_parts(s):
    """exp(-1/s) with its first two derivatives, flushed to 0 near s = 0."""
    s = np.asarray(s, dtype=float)
    live = s > _FLAT
    ss = np.where(live, s, 1.0)
    e = np.where(live, np.exp(-1.0 / ss), 0.0)
    e1 = np.where(live, e / ss**2, 0.0)
    e2 = np.where(live, e * (1.0 / ss**4 - 2.0 / ss**3), 0.0)
    return e, e1, e2


def transition(s):
    """Canonical C-infinity transition: 0 for s <= 0, 1 for s >= 1,
    ``e(s) / (e(s) + e(1 - s))`` with ``e(s) = exp(-1/s)`` in between."""
    f, _, _ = _bump_parts(s)
    g, _, _ = _bump_parts(1.0 - np.asarray(s, dtype=float))
    out = f / (f + g)
    return out if np.ndim(out) else float(out)


def transition_derivatives(s):
    """First and second derivatives of :func:`transition`, in closed form."""
    s = np.asarray(s, dtype=float)
    f, f1, f2 = _bump_parts(s)
    g, g1, g2 = _bump_parts(1.0 - s)
    g1, g2 = -g1, g2  # chain rule through 1 - s
    den = f + g
    num = f1 * g - f * g1
    d1 = num / den**2
    d2 = (f2 * g - f * g2) / den**2 - 2 * num * (f1 + g1) / den**3
    if np.ndim(d1) == 0:
        return float(d1), float(d2)
    return d1, d2


def transition_scalar(s):
    """:func:`transition` and its two derivatives at a float, pure math."""
    if s <= 0.0:
        return 0.0, 0.0, 0.0
    if s >= 1.0:
        return 1.0, 0.0, 0.0
    r = 1.0 - s
    f = f1 = f2 = g = g1 = g2 = 0.0
    if s > _FLAT:
        f = math.exp(-1.0 / s)
        f1, f2 = f / s**2, f * (1.0 / s**4 - 2.0 / s**3)
    if r > _FLAT:
        g = math.exp(-1.0 / r)
        g1, g2 = -g / r**2, g * (1.0 / r**4 - 2.0 / r**3)
    den = f + g
    num = f1 * g - f * g1
    return f / den, num / den**2, (f2 * g - f * g2) / den**2 - 2 * num * (f1 + g1) / den**3


def smooth_step(r):
    """Cutoff equal to 1 on (-inf, 1], 0 on [2, inf), strictly decreasing between."""
    return transition(2.0 - np.asarray(r, dtype=float))


def smooth_step_derivative(r):
    d1, _ = transition_derivatives(2.0 - np.asarray(r, dtype=float))
    return -d1


def log_integral(eps):
    """Closed form of ``int_0^eps log(1 + 1/t) dt``."""
    eps = np.asarray(eps, dtype=float)
    return eps * np.log1p(1.0 / eps) + np.log1p(eps)


def _zone_arg(t, x, xi, p: PhaseParams):
    return t * eval_weight(p.pair.phi, x) * xi_bracket(xi, p.k)


def excise(field: CoefficientField, p: PhaseParams) -> Callable:
    """Return the excised symbol ``a~(t, x, xi)``.

    ``a~ = phi(r) omega^2 <xi>_k^2 + (1 - phi(r)) a(t, x) <xi>_k^2`` with
    ``r = t Phi(x) <xi>_k``. Where r <= 1 the singular coefficient is
    replaced outright, so a is never evaluated there.
    """

    def atilde(t, x, xi):
        t, x, xi = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t, x, xi)))
        shape = t.shape
        t, x, xi = (v.reshape(-1) for v in (t, x, xi))
        r = _zone_arg(t, x, xi, p)
        cut = smooth_step(r)
        out = cut * eval_weight(field.omega, x) ** 2 * xi_bracket(xi, p.k) ** 2
        live = cut < 1.0
        if np.any(live):
            out[live] += (1 - cut[live]) * field.symbol(t[live], x[live], xi[live], p.k)
        return out.reshape(shape) if shape else float(out[0])

    atilde.field = field
    atilde.params = p
    return atilde


def tau(atilde, t, x, xi):
    """Characteristic root ``sqrt(a~)``; nonpositive a~ is a hypothesis failure."""
    v = np.asarray(atilde(t, x, xi), dtype=float)
    if np.any(v <= 0):
        raise HypothesisViolation("excised symbol is not positive; check ellipticity")
    out = np.sqrt(v)
    return out if out.ndim else float(out)


def ellipticity_ratio(atilde, p: PhaseParams, ts, xs, xis) -> float:
    """Infimum of ``tau / (omega <xi>_k)`` over the tensor grid."""
    T_, X_, XI_ = np.meshgrid(ts, xs, xis, indexing="ij")
    tv = tau(atilde, T_, X_, XI_)
    field = atilde.field
    return float(np.min(tv / (eval_weight(field.omega, X_) * xi_bracket(XI_, p.k))))


@dataclass
class MajorantSet:
    """Majorants psi0, psi1 (and tilde variants) with fitted constants.

    ``symmetric_tilde`` switches the tilde majorant's second term to the
    rescaled cutoff ``phi(r/3)`` as well; by default the mixed form is used.
    """

    C1: float
    C2: float
    p: PhaseParams
    omega: object
    T: float
    kappa: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    stable: bool = True
    symmetric_tilde: bool = False

    def _pieces(self, t, x, xi, scale=1.0):
        t, x, xi = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t, x, xi)))
        r = _zone_arg(t, x, xi, self.p)
        lead = smooth_step(r / scale) * log_blowup(t) * eval_weight(self.omega, x) * xi_bracket(xi, self.p.k)
        return r, lead, t

    def psi0(self, t, x, xi):
        _, lead, _ = self._pieces(t, x, xi)
        return self.C1 * lead

    def psi1(self, t, x, xi):
        r, lead, t = self._pieces(t, x, xi)
        return self.C2 * (lead + (1 - smooth_step(r)) / t)

    def psi(self, t, x, xi):
        return self.psi0(t, x, xi) + self.psi1(t, x, xi)

    def psi0_tilde(self, t, x, xi):
        _, lead, _ = self._pieces(t, x, xi, scale=3.0)
        return self.C1 * lead

    def psi1_tilde(self, t, x, xi):
        r, lead, t = self._pieces(t, x, xi, scale=3.0)
        second = smooth_step(r / 3.0) if self.symmetric_tilde else smooth_step(r)
        return self.C2 * (lead + (1 - second) / t)

    def psi_tilde(self, t, x, xi):
        return self.psi0_tilde(t, x, xi) + self.psi1_tilde(t, x, xi)

    def integrand(self, which, x, xi):
        """Float-only ``t -> which(t, x, xi)`` for quadrature at fixed (x, xi)."""
        om = float(eval_weight(self.omega, x))
        br = float(xi_bracket(xi, self.p.k))
        scale = float(eval_weight(self.p.pair.phi, x)) * br
        tilde = which.endswith("_tilde")
        base = which[: -len("_tilde")] if tilde else which
        c1, c2 = self.C1, self.C2
        sym = self.symmetric_tilde

        def step(r):
            return transition_scalar(2.0 - r)[0]

        def fn(t):
            r = t * scale
            lead = step(r / 3.0 if tilde else r) * math.log1p(1.0 / t) * om * br
            out = 0.0
            if base in ("psi0", "psi"):
                out += c1 * lead
            if base in ("psi1", "psi"):
                second = step(r / 3.0) if (tilde and sym) else step(r)
                out += c2 * (lead + (1.0 - second) / t)
            return out

        return fn

    def breakpoints(self, x, xi):
        """Separatrix times 1, 2, 3, 6 times the Planck function."""
        h = 1.0 / (eval_weight(self.p.pair.phi, x) * xi_bracket(xi, self.p.k))
        return [c * h for c in (1.0, 2.0, 3.0, 6.0)]

    def to_dict(self):
        return {"C1": self.C1, "C2": self.C2, "k": self.p.k, "N": self.p.N, "T": self.T,
                "pair": self.p.pair.to_dict(), "kappa": self.kappa, "grid": self.grid,
                "stable": self.stable, "symmetric_tilde": self.symmetric_tilde}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


@dataclass(frozen=True)
class PhaseGrid:
    """Log grid in (t, x, xi) used to fit majorant constants."""

    t_min: float = 1e-6
    n_t: int = 60
    radius: float = 1e3
    n_xi: int = 13

    def ts(self, T):
        return np.geomspace(self.t_min, T, self.n_t)

    def mags(self):
        return np.concatenate([[0.0], np.geomspace(1e-2, self.radius, self.n_xi - 1)])

    def to_dict(self):
        return asdict(self)


def _fit_constants(field: CoefficientField, p: PhaseParams, ts, xs, xis):
    T_, X_, XI_ = np.meshgrid(ts, xs, xis, indexing="ij")
    r = _zone_arg(T_, X_, XI_, p)
    cut = smooth_step(r)
    dcut = smooth_step_derivative(r)
    om = eval_weight(field.omega, X_)
    br = xi_bracket(XI_, p.k)
    L = log_blowup(T_)
    a = field.a(T_, X_)
    # a - a~ = phi(r) (a - omega^2) <xi>^2
    diff = np.abs(cut * (a - om**2) * br**2)
    shape0 = cut * L * om * br
    live0 = shape0 > 0
    C1 = float(np.max(diff[live0] / (om[live0] * br[live0] * shape0[live0]), initial=0.0))
    # first-order remainder: principal part of d_t tau plus the lower-order symbol
    at = cut * om**2 * br**2 + (1 - cut) * a * br**2
    dat = (dcut * r / T_ * (om**2 - a) * br**2 + (1 - cut) * field.d_t(T_, X_) * br**2)
    dtau = np.abs(dat) / (2 * np.sqrt(at))
    lower = np.zeros_like(dtau)
    if field.b1 is not None:
        lower += np.abs(field.b1(T_, X_)) * np.abs(XI_)
    if field.b0 is not None:
        lower += np.abs(field.b0(T_, X_))
    shape1 = cut * L * om * br + (1 - cut) / T_
    C2 = float(np.max((dtau + lower) / (om * br * shape1)))
    return C1, C2


def build_majorants(field: CoefficientField, p: PhaseParams, grid: PhaseGrid | None = None,
                    T=None, symmetric_tilde=False, stability_rtol=0.1) -> MajorantSet:
    """Fit C1, C2 as grid sups of the excision error and first-order remainder
    over their majorant shapes.

    The fit is repeated on the inner half of the (x, xi) range; a change of
    more than ``stability_rtol`` marks the set unstable.
    """
    grid = grid or PhaseGrid()
    T = field.T if T is None else T
    ts = grid.ts(T)
    mags = grid.mags()
    xs = np.concatenate([-mags[:0:-1], mags])
    C1, C2 = _fit_constants(field, p, ts, xs, mags)
    inner = mags[mags <= np.sqrt(grid.radius) * 1.0001]
    xin = np.concatenate([-inner[:0:-1], inner])
    C1i, C2i = _fit_constants(field, p, ts, xin, inner)
    stable = all(
        abs(full - part) <= stability_rtol * max(abs(full), 1e-300)
        for full, part in ((C1, C1i), (C2, C2i))
    )
    if not np.isfinite(C1) or not np.isfinite(C2):
        raise NumericalFailure("majorant constants are not finite")
    return MajorantSet(C1=C1, C2=C2, p=p, omega=field.omega, T=T, grid=grid.to_dict(),
                       stable=stable, symmetric_tilde=symmetric_tilde)


def _quad_pieces(fn, T, breaks, epsabs=1e-10, epsrel=1e-10):
    pts = sorted({0.0, T, *(b for b in breaks if 0 < b < T)})
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        val, err, *rest = integrate.quad(fn, lo, hi, epsabs=epsabs, epsrel=epsrel,
                                         limit=200, full_output=1)
        if len(rest) > 1 and err > max(epsabs, epsrel * abs(val)) * 100:
            raise NumericalFailure(f"quadrature did not converge on [{lo}, {hi}]")
        total += val
    return total


def integral_log_bound(m: MajorantSet, x, xi, T=None, which="psi") -> float:
    """``int_0^T |psi(t, x, xi)| dt / log(1 + Phi(x) <xi>_k)``.

    Quadrature is split at the separatrix times where the cutoffs switch.
    ``which`` selects the majorant: psi, psi0, psi1, psi_tilde, ...
    """
    T = m.T if T is None else T
    denom = np.log1p(eval_weight(m.p.pair.phi, x) * xi_bracket(xi, m.p.k))
    f = m.integrand(which, x, xi)
    val = _quad_pieces(lambda t: abs(f(t)), T, m.breakpoints(x, xi))
    return val / denom


def _fd_integral(m: MajorantSet, fn, x, xi, var, T):
    # t-integral of |d psi / d var| by central differences in var
    if var == "x":
        h = 1e-5 * np.hypot(1.0, x)
        g = lambda t: abs(float(fn(t, x + h, xi) - fn(t, x - h, xi))) / (2 * h)
    else:
        h = 1e-5 * xi_bracket(xi, m.p.k)
        g = lambda t: abs(float(fn(t, x, xi + h) - fn(t, x, xi - h))) / (2 * h)
    return _quad_pieces(g, T, m.breakpoints(x, xi), epsabs=1e-9, epsrel=1e-8)


def fit_tilde_constants(m: MajorantSet, xs, xis, T=None) -> dict:
    """Fitted kappa constants of the tilde majorant for |alpha| + |beta| <= 1.

    ``kappa['00']`` bounds the integral itself against log(1 + Phi <xi>_k);
    ``kappa['10']`` (xi-derivative) and ``kappa['01']`` (x-derivative) carry the
    extra ``<xi>_k`` and ``Phi`` factors.
    """
    T = m.T if T is None else T
    k00 = k10 = k01 = 0.0
    for x in xs:
        for xi in xis:
            ph = eval_weight(m.p.pair.phi, x)
            br = xi_bracket(xi, m.p.k)
            den = np.log1p(ph * br)
            k00 = max(k00, integral_log_bound(m, x, xi, T, which="psi_tilde"))
            k10 = max(k10, _fd_integral(m, m.psi_tilde, x, xi, "xi", T) * br / den)
            k01 = max(k01, _fd_integral(m, m.psi_tilde, x, xi, "x", T) * ph / den)
    m.kappa = {"00": k00, "10": k10, "01": k01}
    return m.kappa


def sup_log_ratio(m: MajorantSet, mags, T=None, which="psi"):
    """Sup of :func:`integral_log_bound` over the (x, xi) grid ``mags x mags``
    (both signs of x), with the arg-max for provenance."""
    best, arg = -np.inf, None
    xs = np.concatenate([-np.asarray(mags)[::-1], mags])
    for x in xs:
        for xi in mags:
            v = integral_log_bound(m, x, xi, T, which)
            if v > best:
                best, arg = v, (float(x), float(xi))
    return float(best), arg
