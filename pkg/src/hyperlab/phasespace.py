"""Frequency bracket, Planck function and the interior/exterior zone split of
the extended phase space [0, T] x R_x x R_xi."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .weights import WeightPair, eval_weight


class Zone(enum.Enum):
    INTERIOR = "interior"
    EXTERIOR = "exterior"


@dataclass(frozen=True)
class PhaseParams:
    pair: WeightPair
    k: float = 1.0
    N: float = 1.0

    def __post_init__(self):
        if not self.k >= 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        if not self.N > 0:
            raise ValidationError(f"N must be > 0, got {self.N}")


def xi_bracket(xi, k=1.0):
    """``(k**2 + xi**2)**0.5``; the parameter k must be at least 1."""
    if not k >= 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    out = np.hypot(k, np.asarray(xi, dtype=float))
    return out if np.ndim(out) else float(out)


def planck_h(x, xi, p: PhaseParams):
    """Planck function ``1 / (Phi(x) <xi>_k)`` of the metric."""
    return 1.0 / (eval_weight(p.pair.phi, x) * xi_bracket(xi, p.k))


def separatrix_time(x, xi, p: PhaseParams):
    return p.N * planck_h(x, xi, p)


def classify_zone(t, x, xi, p: PhaseParams) -> Zone:
    """Interior when ``t <= N h(x, xi)`` (boundary included), else exterior."""
    if t < 0:
        raise ValidationError(f"t must be nonnegative, got {t}")
    return Zone.INTERIOR if t <= separatrix_time(x, xi, p) else Zone.EXTERIOR


def uncertainty_constant(p: PhaseParams, kappa=0.5, radius=1e3, n=201):
    """Grid sup of ``h(x, xi) (1 + |x| + |xi|)**kappa``.

    A finite value is the numerical face of the strong uncertainty principle
    ``h <= C (1 + |x| + |xi|)**(-kappa)``.
    """
    mag = np.concatenate([[0.0], np.geomspace(1e-3, radius, n)])
    X, XI = np.meshgrid(mag, mag, indexing="ij")
    vals = planck_h(X, XI, p) * (1 + X + XI) ** kappa
    return float(vals.max())
