"""Least-squares power-law fits on log-log data."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


@dataclass
class PowerFit:
    """Fit of ``y ~ prefactor * x**exponent``.

    ``monotone`` records whether y was monotone in x; non-monotone data is
    still fitted but callers should not trust the exponent blindly.
    ``degenerate`` is set when y vanished identically (exponent reported 0).
    """

    exponent: float
    prefactor: float
    r2: float
    rms_residual: float
    n: int
    monotone: bool
    degenerate: bool = False

    def to_dict(self):
        return asdict(self)


def fit_power_law(x, y, zero_tol=1e-300) -> PowerFit:
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    if x.shape != y.shape or x.size < 2:
        raise ValueError("need at least two (x, y) samples of equal shape")
    if np.all(y <= zero_tol):
        return PowerFit(0.0, 0.0, 1.0, 0.0, x.size, True, degenerate=True)
    keep = (y > zero_tol) & (x > 0)
    lx, ly = np.log(x[keep]), np.log(y[keep])
    order = np.argsort(lx)
    lx, ly = lx[order], ly[order]
    dy = np.diff(ly)
    monotone = bool(np.all(dy >= -1e-12) or np.all(dy <= 1e-12))
    A = np.vstack([lx, np.ones_like(lx)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - (slope * lx + icpt)
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return PowerFit(float(slope), float(np.exp(icpt)), r2,
                    float(np.sqrt((resid**2).mean())), int(lx.size), monotone)
