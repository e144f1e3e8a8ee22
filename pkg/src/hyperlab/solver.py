"""Explicit finite-difference solver for

    u_tt - a(t, x) u_xx + b1(t, x) u_x + b0(t, x) u = f(t, x)

on (0, T] x [-L, L) with periodic boundaries, plus the propagation-speed
constant and the cone-of-dependence check built on top of it.

Time stepping is variable-step leapfrog on a mesh graded toward t = 0,
``t_j = T (j / N)**g``. The coefficient is never evaluated at t = 0: the
first step is the Taylor advance ``u(t_1) = f1 + t_1 f2``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .coefficients import CoefficientField, SampleGrid, log_blowup
from .errors import CFLViolation, HypothesisViolation, NumericalFailure, ValidationError
from .sobolev import GridFunction
from .weights import eval_weight


@dataclass
class CauchyProblem:
    field: CoefficientField
    f1: GridFunction
    f2: GridFunction
    T: float
    rhs: Callable | None = None

    def __post_init__(self):
        if self.f1.M != self.f2.M or self.f1.L != self.f2.L:
            raise ValidationError("initial data must share L and M")
        if not self.T > 0:
            raise ValidationError("T must be positive")

    @property
    def L(self):
        return self.f1.L

    @property
    def M(self):
        return self.f1.M


@dataclass(frozen=True)
class SchemeConfig:
    cfl: float = 0.5
    grading: float = 2.0
    n_steps: int | None = None
    support_threshold: float = 1e-6
    max_steps: int = 5_000_000

    def __post_init__(self):
        if not 0 < self.cfl < 1:
            raise ValidationError("CFL number must lie in (0, 1)")
        if not self.grading >= 1:
            raise ValidationError("grading exponent must be >= 1")


@dataclass(frozen=True)
class ConeSpec:
    x0: float
    t0: float
    gamma: float
    R0: float = 0.1
    bound: str = "integrated"

    def __post_init__(self):
        if not self.t0 > 0:
            raise ValidationError("cone vertex time must be positive")
        if self.bound not in ("integrated", "short"):
            raise ValidationError("bound must be 'integrated' or 'short'")


@dataclass
class Snapshot:
    t: float
    u: GridFunction
    ut: GridFunction


@dataclass
class SolveResult:
    snapshots: list
    times: np.ndarray
    dx: float
    support_lo: np.ndarray | None = None
    support_hi: np.ndarray | None = None
    energy: np.ndarray | None = None

    @property
    def n_steps(self):
        return self.times.size - 1


def graded_mesh(T, n, g=2.0):
    return T * (np.arange(n + 1) / n) ** g


def _sup_a(fld, t, x):
    return float(np.max(fld.a(t, x)))


def _check_cfl(fld, times, x, dx, cfl):
    """Raise on the first node where a neighbouring step exceeds the CFL limit."""
    k = np.diff(times)
    for j in range(1, times.size - 1):
        sa = _sup_a(fld, times[j], x)
        if not sa > 0:
            raise HypothesisViolation(f"coefficient not positive at t={times[j]:.6g}")
        limit = cfl * dx / np.sqrt(sa)
        step = max(abs(k[j - 1]), abs(k[j]))
        if step > limit * (1 + 1e-12):
            raise CFLViolation(times[j], sa, step, limit)


def _snap(times, samples):
    """Move the nearest interior mesh node onto each sample time."""
    times = times.copy()
    used = {0}
    for s in sorted(samples):
        if s <= 0:
            continue
        j = int(np.argmin(np.abs(times - s)))
        if j in used:
            raise ValidationError(f"sample times too close for the mesh near t={s}")
        used.add(j)
        times[j] = s
    if np.any(np.diff(times) <= 0):
        raise ValidationError("sample times collapse the mesh; increase resolution")
    return times


def build_mesh(problem: CauchyProblem, cfg: SchemeConfig, sample_times=()):
    """Graded mesh on [0, T] plus one ghost node past T, CFL-checked."""
    fld, T, g = problem.field, problem.T, cfg.grading
    x = problem.f1.x
    dx = problem.f1.dx
    if cfg.n_steps is not None:
        n = int(cfg.n_steps)
    else:
        # k(t) ~ g T^{1/g} t^{1-1/g} / N must stay below cfl dx / sqrt(sup a(t))
        ts = np.geomspace(T * 1e-9, T, 400)
        need = [g * T ** (1 / g) * t ** (1 - 1 / g) * np.sqrt(_sup_a(fld, t, x)) for t in ts]
        n = max(int(np.ceil(max(need) / (cfg.cfl * dx) * 1.02)), 4)
    for _ in range(60):
        if n > cfg.max_steps:
            raise NumericalFailure(f"mesh needs more than {cfg.max_steps} steps")
        times = graded_mesh(T, n, g)
        times = np.append(times, 2 * times[-1] - times[-2])
        times = _snap(times, [s for s in sample_times if s < T]) if sample_times else times
        try:
            _check_cfl(fld, times, x, dx, cfg.cfl)
            return times
        except CFLViolation:
            if cfg.n_steps is not None:
                raise
            n = int(np.ceil(n * 1.05)) + 1
    raise NumericalFailure("could not build a CFL-stable mesh")


def _laplacian(u, dx):
    return (np.roll(u, -1) - 2 * u + np.roll(u, 1)) / (dx * dx)


def _gradient(u, dx):
    return (np.roll(u, -1) - np.roll(u, 1)) / (2 * dx)


def leapfrog(fld: CoefficientField, x, dx, u_prev, u_curr, nodes, rhs=None,
             on_step=None):
    """Variable-step leapfrog through ``nodes`` (monotone, either direction).

    ``u_prev``, ``u_curr`` live at ``nodes[0]``, ``nodes[1]``. Each update is

        (u+ - u)/k+ - (u - u-)/k- = (k- + k+)/2 * (a u_xx - b1 u_x - b0 u + f)

    which is symmetric under reversing the node sequence. ``on_step`` is
    called as ``on_step(i, u_prev, u_curr, u_next)`` with ``i`` the index of
    the middle node. Returns the last two states.
    """
    for i in range(1, len(nodes) - 1):
        t = nodes[i]
        km, kp = nodes[i] - nodes[i - 1], nodes[i + 1] - nodes[i]
        acc = fld.a(t, x) * _laplacian(u_curr, dx)
        if fld.b1 is not None:
            acc = acc - fld.b1(t, x) * _gradient(u_curr, dx)
        if fld.b0 is not None:
            acc = acc - fld.b0(t, x) * u_curr
        if rhs is not None:
            acc = acc + rhs(t, x)
        v_next = (u_curr - u_prev) / km + 0.5 * (km + kp) * acc
        u_next = u_curr + kp * v_next
        if on_step is not None:
            on_step(i, u_prev, u_curr, u_next)
        u_prev, u_curr = u_curr, u_next
    return u_prev, u_curr


def _support(u):
    nz = np.flatnonzero(u != 0)
    if nz.size == 0:
        return -1, -1
    return int(nz[0]), int(nz[-1])


def solve(problem: CauchyProblem, cfg: SchemeConfig | None = None, sample_times=(),
          track_support=False, record_energy=False) -> SolveResult:
    """Integrate the Cauchy problem and return snapshots at ``sample_times``.

    Velocities at snapshots come from the quadratic through the three
    surrounding mesh values. ``record_energy`` stores the staggered discrete
    energy ``sum |v|^2 / a + sum D+u^{n+1} D+u^n`` (times dx), which leapfrog
    conserves exactly on uniform meshes when a does not depend on t.
    """
    cfg = cfg or SchemeConfig()
    fld = problem.field
    x, dx = problem.f1.x, problem.f1.dx
    samples = sorted(set(float(s) for s in sample_times))
    if any(s < 0 or s > problem.T for s in samples):
        raise ValidationError("sample times must lie in [0, T]")
    times = build_mesh(problem, cfg, samples)
    n_last = times.size - 2  # index of T; the final node is a ghost
    u0 = problem.f1.values.copy()
    u1 = u0 + times[1] * problem.f2.values
    snap_idx = {}
    for s in samples:
        if s > 0:
            snap_idx[int(np.argmin(np.abs(times - s)))] = s
    snapshots = []
    if 0.0 in samples:
        snapshots.append(Snapshot(0.0, problem.f1.with_values(u0.copy()),
                                  problem.f2.with_values(problem.f2.values.copy())))
    lo = np.empty(times.size, dtype=int) if track_support else None
    hi = np.empty(times.size, dtype=int) if track_support else None
    if track_support:
        lo[0], hi[0] = _support(u0)
        lo[1], hi[1] = _support(u1)
    energy = [] if record_energy else None

    def on_step(i, up, uc, un):
        if track_support:
            lo[i + 1], hi[i + 1] = _support(un)
        if record_energy:
            a = fld.a(times[i], x)
            v = (un - uc) / (times[i + 1] - times[i])
            dn = (np.roll(un, -1) - un) / dx
            dc = (np.roll(uc, -1) - uc) / dx
            e = np.sum(np.abs(v) ** 2 / a) + np.real(np.sum(dn * np.conj(dc)))
            energy.append(dx * e)
        if i in snap_idx:
            km, kp = times[i] - times[i - 1], times[i + 1] - times[i]
            vm, vp = (uc - up) / km, (un - uc) / kp
            ut = (kp * vm + km * vp) / (km + kp)
            snapshots.append(Snapshot(float(snap_idx[i]),
                                      problem.f1.with_values(uc.copy()),
                                      problem.f1.with_values(ut)))

    leapfrog(fld, x, dx, u0, u1, times, rhs=problem.rhs, on_step=on_step)
    snapshots.sort(key=lambda s: s.t)
    return SolveResult(snapshots=snapshots, times=times[: n_last + 1], dx=dx,
                       support_lo=lo, support_hi=hi,
                       energy=None if energy is None else np.array(energy))


def support_growth_ok(lo, hi) -> bool:
    """Exact check that each step widens the nonzero support by at most one
    cell beyond the previous two states (the leapfrog stencil)."""
    for n in range(1, len(lo) - 1):
        if lo[n + 1] < 0:
            continue
        prev = []
        if lo[n] >= 0:
            prev.append((lo[n] - 1, hi[n] + 1))
        if lo[n - 1] >= 0:
            prev.append((lo[n - 1], hi[n - 1]))
        if not prev:
            return False  # support appeared from nothing
        if lo[n + 1] < min(p[0] for p in prev) or hi[n + 1] > max(p[1] for p in prev):
            return False
    return True


def compute_gamma(field: CoefficientField, grid: SampleGrid | None = None,
                  divergence_factor=1.5) -> float:
    """Grid sup of ``sqrt(a) / (omega log(1 + 1/t))`` over (0, T] x [-R, R].

    The sup is recomputed with t_min pushed three decades toward 0; growth
    beyond ``divergence_factor`` means the speed is not log-dominated.
    """
    grid = grid or SampleGrid()

    def sup(ts):
        xs = grid.xs()
        T_, X_ = np.meshgrid(ts, xs, indexing="ij")
        r = np.sqrt(field.a(T_, X_)) / (eval_weight(field.omega, X_) * log_blowup(T_))
        return float(np.max(r))

    ts = grid.ts(field.T)
    base = sup(ts)
    deeper = sup(np.geomspace(grid.t_min * 1e-3, ts[-1], grid.n_t + 20))
    if deeper > divergence_factor * base:
        raise NumericalFailure(
            f"speed ratio grows under refinement toward t=0 ({base:.4g} -> {deeper:.4g})"
        )
    return base


def gamma_refinement(field: CoefficientField, grid: SampleGrid | None = None) -> dict:
    """gamma on ``grid`` and on a grid with doubled t and x resolution."""
    grid = grid or SampleGrid()
    g1 = compute_gamma(field, grid)
    fine = SampleGrid(grid.t_min, grid.t_max, 2 * grid.n_t - 1, grid.x_radius,
                      2 * grid.n_x - 1, grid.seed)
    g2 = compute_gamma(field, fine)
    return {"gamma": g1, "gamma_refined": g2, "rel_change": abs(g2 - g1) / g1}


def cone_travel(t, bound="integrated"):
    """Time factor of the support radius.

    ``integrated`` is ``int_0^t log(1 + 1/s) ds = t log(1+1/t) + log(1+t)``, the
    distance covered at speed ``log(1 + 1/s)``; ``short`` is the shorter
    ``t log(1 + 1/t)``.
    """
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        core = np.where(t > 0, t * np.log1p(1.0 / np.where(t > 0, t, 1.0)), 0.0)
    out = core + np.log1p(t) if bound == "integrated" else core
    return out if out.ndim else float(out)


def cone_radius(cone: ConeSpec, omega, t, iters=200):
    """Radius ``R0 + gamma * sup omega * travel(t)`` with the sup of omega
    taken over the disc it defines (fixed point, monotone omega)."""
    travel = cone_travel(t, cone.bound)
    r = cone.R0
    for _ in range(iters):
        slope = cone.gamma * eval_weight(omega, abs(cone.x0) + r)
        r_new = cone.R0 + slope * travel
        if abs(r_new - r) <= 1e-14 * max(1.0, r):
            r = r_new
            break
        r = r_new
    slope = cone.gamma * eval_weight(omega, abs(cone.x0) + r)
    return float(r), float(slope)


@dataclass
class ConeReport:
    times: list
    outside_ratio: list
    radius: list
    slope: list
    max_outside_ratio: float
    max_slope: float
    support_ok: bool | None
    inconclusive: bool = False
    reason: str = ""
    cone: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def cone_check(problem: CauchyProblem, cfg: SchemeConfig | None, cone: ConeSpec,
               sample_times=None) -> ConeReport:
    """Relative L2 mass of the solution outside the dependence cone.

    At each sample time t in (0, t0] the cone disc is
    ``|x - x0| <= R0 + gamma * Omega(t) * travel(t)``; the reported ratio is
    ``||u 1_outside|| / ||u||``.
    """
    cfg = cfg or SchemeConfig()
    if sample_times is None:
        sample_times = np.linspace(0, cone.t0, 11)[1:]
    sample_times = [float(s) for s in sample_times if 0 < s <= cone.t0]
    omega = problem.field.omega
    r_end, _ = cone_radius(cone, omega, cone.t0)
    cdict = asdict(cone)
    if abs(cone.x0) + r_end >= problem.L * 0.95:
        return ConeReport(sample_times, [], [], [], float("nan"), float("nan"), None,
                          True, "cone leaves the periodic box", cdict)
    sub = CauchyProblem(problem.field, problem.f1, problem.f2, cone.t0, problem.rhs)
    try:
        res = solve(sub, cfg, sample_times, track_support=problem.rhs is None)
    except CFLViolation as err:
        return ConeReport(sample_times, [], [], [], float("nan"), float("nan"), None,
                          True, f"numerical speed below physical speed: {err}", cdict)
    x = problem.f1.x
    ratios, radii, slopes = [], [], []
    for snap in res.snapshots:
        r, s = cone_radius(cone, omega, snap.t)
        u2 = np.abs(snap.u.values) ** 2
        total = u2.sum()
        out = u2[np.abs(x - cone.x0) > r].sum()
        ratios.append(float(np.sqrt(out / total)) if total > 0 else 0.0)
        radii.append(r)
        slopes.append(s)
    ok = support_growth_ok(res.support_lo, res.support_hi) if problem.rhs is None else None
    return ConeReport([s.t for s in res.snapshots], ratios, radii, slopes,
                      float(max(ratios, default=0.0)), float(max(slopes, default=0.0)),
                      ok, False, "", cdict)


def smooth_bump(x, center=0.0, radius=0.1):
    """C-infinity bump ``exp(1 - 1/(1 - r^2))`` supported in ``|x - center| < radius``;
    exactly zero outside."""
    r = (np.asarray(x, dtype=float) - center) / radius
    inside = np.abs(r) < 1
    out = np.zeros_like(r)
    out[inside] = np.exp(1 - 1 / (1 - r[inside] ** 2))
    return out
