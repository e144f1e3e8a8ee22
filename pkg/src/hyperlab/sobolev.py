"""Periodic grid functions and the weighted Sobolev norms
``||Phi^{s2} <D>_k^{s1} v||_{L^2}`` computed spectrally."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .weights import WeightSpec, eval_weight


@dataclass
class GridFunction:
    """Complex samples on the uniform periodic grid ``x_j = -L + 2 L j / M``."""

    L: float
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        M = self.values.size
        if self.values.ndim != 1 or M < 8 or M & (M - 1):
            raise ValidationError(f"grid size must be a power of two >= 8, got {M}")
        if not self.L > 0:
            raise ValidationError("half-width L must be positive")

    @property
    def M(self):
        return self.values.size

    @property
    def dx(self):
        return 2 * self.L / self.M

    @property
    def x(self):
        return grid_points(self.L, self.M)

    @property
    def xi(self):
        """Angular frequencies ``pi j / L`` in FFT order, j in [-M/2, M/2)."""
        return 2 * np.pi * np.fft.fftfreq(self.M, d=self.dx)

    @classmethod
    def from_function(cls, f, L, M, **meta):
        return cls(L, f(grid_points(L, M)), dict(meta))

    def with_values(self, values):
        return GridFunction(self.L, values, dict(self.meta))

    def save(self, path):
        """Write ``<path>.bin`` (little-endian complex128) and ``<path>.json``."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.values.astype("<c16").tofile(path.with_suffix(".bin"))
        side = {"L": self.L, "M": self.M, "dtype": "<c16",
                "timestamp": self.meta.get("timestamp", time.time()),
                "provenance": {k: v for k, v in self.meta.items() if k != "timestamp"}}
        path.with_suffix(".json").write_text(json.dumps(side, sort_keys=True, indent=2))
        return path.with_suffix(".bin")

    @classmethod
    def load(cls, path):
        path = Path(path)
        side = json.loads(path.with_suffix(".json").read_text())
        vals = np.fromfile(path.with_suffix(".bin"), dtype=side.get("dtype", "<c16"))
        if vals.size != side["M"]:
            raise ValidationError("binary length does not match sidecar M")
        meta = dict(side.get("provenance", {}))
        meta["timestamp"] = side.get("timestamp")
        return cls(float(side["L"]), vals, meta)


def grid_points(L, M):
    return -L + 2 * L * np.arange(M) / M


def l2_norm(v: GridFunction) -> float:
    return float(np.sqrt(v.dx * np.sum(np.abs(v.values) ** 2)))


def bessel_potential(v: GridFunction, s1, k=1.0) -> GridFunction:
    """Apply the Fourier multiplier ``(k**2 + xi**2)**(s1/2)``."""
    if not k >= 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if s1 == 0:
        return v.with_values(v.values.copy())
    mult = (k * k + v.xi**2) ** (s1 / 2)
    return v.with_values(np.fft.ifft(mult * np.fft.fft(v.values)))


@dataclass(frozen=True)
class SobolevIndex:
    s1: float = 0.0
    s2: float = 0.0


def sobolev_norm(v: GridFunction, s: SobolevIndex, k=1.0, phi: WeightSpec | None = None) -> float:
    """``||Phi^{s2} <D>_k^{s1} v||_{L^2}``; the weight acts after the potential."""
    w = bessel_potential(v, s.s1, k)
    if s.s2 != 0:
        if phi is None:
            raise ValidationError("a weight is required when s2 != 0")
        w = w.with_values(eval_weight(phi, w.x) ** s.s2 * w.values)
    return l2_norm(w)


def gaussian_state(L, M, center=0.0, width=1.0, xi0=0.0):
    """``exp(-(x - c)^2 / (2 w^2)) exp(i xi0 x)``; unit-width L2 norm is pi^{1/4}."""
    return GridFunction.from_function(
        lambda x: np.exp(-((x - center) ** 2) / (2 * width**2) + 1j * xi0 * x), L, M,
        kind="gaussian", center=center, width=width, xi0=xi0)


def random_state(rng: np.random.Generator, L, M, n_bumps=3):
    """Random Gaussian mixture with modulations, well inside the box."""
    x = grid_points(L, M)
    v = np.zeros(M, dtype=complex)
    for _ in range(n_bumps):
        c = rng.uniform(-L / 3, L / 3)
        w = rng.uniform(0.3, 2.0)
        xi0 = rng.uniform(-10, 10)
        amp = rng.normal() + 1j * rng.normal()
        v += amp * np.exp(-((x - c) ** 2) / (2 * w * w) + 1j * xi0 * x)
    return GridFunction(L, v, {"kind": "random-mixture"})


def monotonicity_violations(v: GridFunction, phi: WeightSpec, indices, k=1.0, rtol=1e-12):
    """Count ordered index pairs ``s <= s'`` (componentwise) whose norms
    decrease. Both multipliers are >= 1, so none should."""
    norms = [sobolev_norm(v, s, k, phi) for s in indices]
    bad = 0
    for i, s in enumerate(indices):
        for j, t in enumerate(indices):
            if s.s1 <= t.s1 and s.s2 <= t.s2 and norms[i] > norms[j] * (1 + rtol):
                bad += 1
    return bad


def selftest(L=20.0, M=2048, xi0=50.0, s1_list=(1.0, 2.0), k=1.0, n_random=100, seed=0):
    """Gaussian norm, modulated-Gaussian potential ratios and monotonicity
    on random states. Returns a dict of named checks."""
    g = gaussian_state(L, M)
    out = {"gaussian_l2": {"value": l2_norm(g), "expected": float(np.pi**0.25)}}
    mod = gaussian_state(L, M, xi0=xi0)
    base = l2_norm(mod)
    br = float(np.hypot(k, xi0))
    out["bessel_ratio"] = [
        {"s1": s1, "ratio": sobolev_norm(mod, SobolevIndex(s1, 0.0), k) / base,
         "expected": br**s1}
        for s1 in s1_list
    ]
    rng = np.random.default_rng(seed)
    phi = WeightSpec.power(1.0)
    idx = [SobolevIndex(a, b) for a in (-1.0, 0.0, 0.5, 1.0) for b in (0.0, 0.5, 1.0)]
    out["monotonicity_violations"] = sum(
        monotonicity_violations(random_state(rng, L, M), phi, idx, k) for _ in range(n_random))
    out["n_random"] = n_random
    return out
