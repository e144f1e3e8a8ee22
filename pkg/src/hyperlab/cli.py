"""Batch experiment runner.

    hyperlab run <config.json> [--threads N] [--out DIR] [--cfl C] [--grading G]
                 [--snapshots T1,T2,...]
    hyperlab list [--kind KIND]

Exit codes: 0 success, 2 validation, 3 inconclusive, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .activators import (ActivatorParams, ActivatorSpeed, ConstantSpeed, SpeedClass,
                         activator_sweep, cascade_loss_scan, oscillating_speed)
from .coefficients import (SampleGrid, check_log_blowup, constant_coefficient,
                           estimate_ellipticity, example_coefficient, fit_singularity_orders,
                           log_coefficient, oscillating_coefficient, power_coefficient)
from .errors import HyperlabError, Inconclusive, NumericalFailure, ValidationError
from .excision import PhaseGrid, build_majorants, integral_log_bound, log_integral
from .phasespace import PhaseParams
from .schemas import catalog, config_schema
from .sobolev import GridFunction, selftest
from .solver import (CauchyProblem, ConeSpec, SchemeConfig, compute_gamma, cone_check,
                     smooth_bump, solve)
from .weights import AxiomSampling, WeightPair, WeightSpec, check_weight_axioms

EXIT_OK, EXIT_VALIDATION, EXIT_INCONCLUSIVE, EXIT_FAILURE = 0, 2, 3, 4


# --------------------------------------------------------------------- helpers


def _weight(d):
    # a bare bracket means <x>^1
    return WeightSpec.from_dict({"kappa": 1.0, **d})


def build_coefficient(d):
    name, T = d["name"], d.get("T", 1.0)
    need = {"example": ["kappa1", "kappa2"], "log": ["omega"], "oscillating": ["omega"],
            "power": ["power"]}.get(name, [])
    missing = [k for k in need if k not in d]
    if missing:
        raise ValidationError(f"coefficient {name!r} needs {missing}")
    phi = _weight(d["phi"]) if "phi" in d else None
    if name == "example":
        return example_coefficient(d["kappa1"], d["kappa2"], T)
    if name == "log":
        return log_coefficient(_weight(d["omega"]), d.get("scale", 1.0), phi, T)
    if name == "oscillating":
        return oscillating_coefficient(_weight(d["omega"]), phi, T)
    if name == "constant":
        return constant_coefficient(d.get("value", 1.0), T)
    return power_coefficient(d["power"], T)


def build_data(d, L, M):
    if d is None or d["kind"] == "zero":
        return GridFunction(L, np.zeros(M), {"kind": "zero"})
    amp = d.get("amplitude", 1.0)
    c = d.get("center", 0.0)
    if d["kind"] == "bump":
        f = lambda x: amp * smooth_bump(x, c, d.get("radius", 0.1))
    elif d["kind"] == "gaussian":
        w = d.get("width", 1.0)
        f = lambda x: amp * np.exp(-((x - c) ** 2) / (2 * w * w))
    else:
        xi0 = d.get("xi0", 1.0)
        f = lambda x: amp * np.sin(xi0 * x)
    return GridFunction.from_function(f, L, M, **d)


def _write_json(path, obj):
    path.write_text(json.dumps(obj, sort_keys=True, indent=2, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    if hasattr(o, "to_dict"):
        return o.to_dict()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


# --------------------------------------------------------------------- runners


def run_weights_axioms(p, out, seed, opts):
    pair = WeightPair(_weight(p["omega"]), _weight(p["phi"]))
    sampling = AxiomSampling(p.get("radius", 1e3), p.get("n_pairs", 10_000),
                             p.get("n_grid", 2001), seed)
    reports = check_weight_axioms(pair, sampling)
    _write_json(out / "axioms.json", {"pair": pair.to_dict(),
                                      "reports": [r.to_dict() for r in reports]})
    _write_csv(out / "axioms.csv", ["axiom", "weight", "passed", "n_samples", "n_violations"],
               [[r.axiom, r.weight, r.passed, r.n_samples, r.n_violations] for r in reports])
    return EXIT_OK, {"all_passed": all(r.passed for r in reports if r.axiom != "dominance")}


def run_symbol_fit(p, out, seed, opts):
    field = build_coefficient(p["coefficient"])
    grid = SampleGrid(p.get("t_min", 1e-6), None, p.get("n_t", 61), p.get("x_radius", 10.0),
                      p.get("n_x", 201), seed)
    rep = fit_singularity_orders(field, grid)
    lb = check_log_blowup(field, grid, refinements=p.get("refinements", 4))
    c0 = estimate_ellipticity(field, grid, strict=False)
    _write_json(out / "symbol_fit.json", {"report": rep.to_dict(), "log_blowup": lb.to_dict(),
                                          "ellipticity": c0, "field": field.describe()})
    status = EXIT_OK if c0 > 0 else EXIT_FAILURE
    return status, {"C0": c0, "delta": rep.delta, "log_blowup_passed": lb.passed}


def run_excision_bounds(p, out, seed, opts):
    field = build_coefficient(p["coefficient"])
    params = PhaseParams(field.pair, p.get("k", 1.0), p.get("N", 1.0))
    grid = PhaseGrid(p.get("t_min", 1e-6), p.get("n_t", 60), p.get("radius", 1e3), p.get("n_xi", 13))
    m = build_majorants(field, params, grid)
    mags = p.get("ratio_mags", [0.0, 1.0, 10.0, 100.0, 1000.0])
    rows = []
    for x in sorted(set(mags) | {-v for v in mags}):
        for xi in mags:
            rows.append([x, xi, integral_log_bound(m, x, xi)])
    _write_csv(out / "log_ratio.csv", ["x", "xi", "ratio"], rows)
    eps = p.get("log_integral_eps", [1e-3, 1e-1, 1.0])
    _write_csv(out / "log_integral.csv", ["eps", "closed_form"], [[e, float(log_integral(e))] for e in eps])
    sup = max(r[2] for r in rows)
    _write_json(out / "majorants.json", {"majorants": m.to_dict(), "sup_ratio": sup})
    return EXIT_OK, {"C1": m.C1, "C2": m.C2, "sup_ratio": sup, "stable": m.stable}


def run_sobolev_selftest(p, out, seed, opts):
    res = selftest(p.get("L", 20.0), p.get("M", 2048), p.get("xi0", 50.0),
                   tuple(p.get("s1", [1.0, 2.0])), p.get("k", 1.0), p.get("n_random", 100), seed)
    _write_json(out / "sobolev.json", res)
    g = res["gaussian_l2"]
    ok = (abs(g["value"] - g["expected"]) <= 1e-6
          and all(abs(r["ratio"] / r["expected"] - 1) <= 0.05 for r in res["bessel_ratio"])
          and res["monotonicity_violations"] == 0)
    return (EXIT_OK if ok else EXIT_FAILURE), {"passed": ok}


def _scheme(p, opts):
    return SchemeConfig(cfl=opts.get("cfl") or p.get("cfl", 0.5),
                        grading=opts.get("grading") or p.get("grading", 2.0),
                        n_steps=p.get("n_steps"))


def run_solve(p, out, seed, opts):
    field = build_coefficient(p["coefficient"])
    L, M, T = p["L"], p["M"], p["T"]
    f1 = build_data(p["f1"], L, M)
    f2 = build_data(p.get("f2"), L, M)
    samples = opts.get("snapshots") or p.get("snapshots", [T])
    res = solve(CauchyProblem(field, f1, f2, T), _scheme(p, opts), samples)
    files = []
    stamp = 0.0  # fixed so reruns are byte-identical
    for i, s in enumerate(res.snapshots):
        for tag, g in (("u", s.u), ("ut", s.ut)):
            g.meta.update(t=s.t, field=field.name, timestamp=stamp)
            files.append(str(g.save(out / f"snap_{i:03d}_{tag}").name))
    _write_csv(out / "snapshots.csv", ["index", "t", "l2_u", "l2_ut"],
               [[i, s.t, float(np.sqrt(f1.dx) * np.linalg.norm(s.u.values)),
                 float(np.sqrt(f1.dx) * np.linalg.norm(s.ut.values))]
                for i, s in enumerate(res.snapshots)])
    return EXIT_OK, {"n_steps": res.n_steps, "snapshots": files}


def run_cone(p, out, seed, opts):
    field = build_coefficient(p["coefficient"])
    L, M, t0 = p["L"], p["M"], p["t0"]
    R0 = p.get("R0", 0.1)
    x0 = p.get("x0", 0.0)
    gamma = p.get("gamma", "auto")
    if gamma == "auto":
        gamma = compute_gamma(field)
    f1 = GridFunction.from_function(lambda x: smooth_bump(x, x0, R0), L, M)
    f2 = f1.with_values(np.zeros(M))
    cone = ConeSpec(x0, t0, gamma, R0, p.get("bound", "integrated"))
    n = p.get("snapshots", 10)
    times = opts.get("snapshots") or list(np.linspace(0, t0, n + 1)[1:])
    rep = cone_check(CauchyProblem(field, f1, f2, t0), _scheme(p, opts), cone, times)
    _write_json(out / "cone.json", rep.to_dict())
    if rep.inconclusive:
        return EXIT_INCONCLUSIVE, {"reason": rep.reason}
    return EXIT_OK, {"max_outside_ratio": rep.max_outside_ratio, "support_ok": rep.support_ok,
                     "gamma": gamma}


def run_activator_sweep(p, out, seed, opts):
    cls = SpeedClass(p["mu1"], p["mu2"], p["theta"], p.get("T", 1.0))
    rep = activator_sweep(p["gamma"], p["T1"], cls, p["lambdas"], p["delta"],
                          rtol=p.get("rtol", 1e-10), threads=opts.get("threads"),
                          plateau_only=p.get("plateau_only", False))
    (out / "sweep.csv").write_text(rep.to_csv())
    _write_json(out / "sweep.json", rep.to_dict())
    status = EXIT_OK if rep.active_rows else EXIT_INCONCLUSIVE
    return status, {"trend": rep.trend, "n_active": len(rep.active_rows)}


def run_cascade_scan(p, out, seed, opts):
    kind, T = p["speed"], p.get("T", 1.0)
    if kind == "constant":
        speed = ConstantSpeed(p.get("c", 1.0))
    elif kind == "oscillating":
        speed = oscillating_speed()
    else:
        if "gamma" not in p or "T1" not in p:
            raise ValidationError("activator cascade needs gamma and T1")
        g, T1 = p["gamma"], p["T1"]

        def speed(lam):
            ap = ActivatorParams(g, T1, lam, T=T)
            return ActivatorSpeed(ap) if ap.admissible else ConstantSpeed(g * g)
    lams = p.get("lambdas")
    weights = None
    if p.get("weights") == "one":
        n = len(lams) if lams else p.get("n_modes", 64)
        weights = np.ones(n)
    rep = cascade_loss_scan(speed, lams, weights, T, tuple(p.get("ms", [0])),
                            n_modes=p.get("n_modes", 64), rtol=p.get("rtol", 1e-10),
                            threads=opts.get("threads"))
    _write_csv(out / "modes.csv", ["lambda", "weight", "logE_T"],
               list(zip(rep.lams, rep.weights, rep.logE)))
    rows = [[m, n, v] for m, vals in rep.table.items() for n, v in zip(rep.truncations, vals)]
    _write_csv(out / "partial_sums.csv", ["m", "truncation", "partial_sum"], rows)
    _write_json(out / "cascade.json", rep.to_dict())
    status = EXIT_INCONCLUSIVE if "inconclusive" in rep.verdicts.values() else EXIT_OK
    return status, {"verdicts": rep.verdicts, "slope": rep.slope}


RUNNERS = {
    "weights-axioms": run_weights_axioms,
    "symbol-fit": run_symbol_fit,
    "excision-bounds": run_excision_bounds,
    "sobolev-selftest": run_sobolev_selftest,
    "solve": run_solve,
    "cone": run_cone,
    "activator-sweep": run_activator_sweep,
    "cascade-scan": run_cascade_scan,
}


# ------------------------------------------------------------------------ core


def load_config(path):
    """Read and schema-validate a config file; returns (config, raw bytes)."""
    try:
        raw = Path(path).read_bytes()
        cfg = json.loads(raw)
    except (OSError, json.JSONDecodeError) as err:
        raise ValidationError(f"cannot read config: {err}") from None
    validate_config(cfg)
    return cfg, raw


def validate_config(cfg):
    if not isinstance(cfg, dict) or cfg.get("kind") not in RUNNERS:
        raise ValidationError(f"unknown or missing kind; expected one of {list(RUNNERS)}")
    try:
        jsonschema.validate(cfg, config_schema(cfg["kind"]))
    except jsonschema.ValidationError as err:
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ValidationError(f"schema error at {where}: {err.message}") from None


def resolve_out(cfg, cli_out=None):
    """--out, then HYPERLAB_OUT, then the config's ``out``, then ./hyperlab-out/<kind>."""
    base = cli_out or os.environ.get("HYPERLAB_OUT") or cfg.get("out")
    return Path(base) if base else Path("hyperlab-out") / cfg["kind"]


def run(config_path, out=None, threads=None, overrides=None):
    """Run one experiment; returns the exit code. Writes ``manifest.json`` on
    success and ``error.json`` on failure (when the directory is writable)."""
    overrides = dict(overrides or {})
    overrides["threads"] = threads
    out_dir = None
    t0 = time.perf_counter()
    try:
        cfg, raw = load_config(config_path)
        out_dir = resolve_out(cfg, out)
        out_dir.mkdir(parents=True, exist_ok=True)
        status, summary = RUNNERS[cfg["kind"]](cfg["params"], out_dir, cfg.get("seed", 0), overrides)
        manifest = {
            "kind": cfg["kind"],
            "config_sha256": hashlib.sha256(raw).hexdigest(),
            "version": __version__,
            "seed": cfg.get("seed", 0),
            "wall_time_s": time.perf_counter() - t0,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "exit_code": status,
            "summary": summary,
        }
        _write_json(out_dir / "manifest.json", manifest)
        print(json.dumps({"status": status, "out": str(out_dir), **summary},
                         default=_jsonable, sort_keys=True))
        return status
    except ValidationError as err:
        return _fail(EXIT_VALIDATION, err, out_dir)
    except Inconclusive as err:
        return _fail(EXIT_INCONCLUSIVE, err, out_dir)
    except (NumericalFailure, FloatingPointError) as err:
        return _fail(EXIT_FAILURE, err, out_dir)
    except HyperlabError as err:
        return _fail(EXIT_FAILURE, err, out_dir)


def _fail(code, err, out_dir):
    record = {"error": type(err).__name__, "message": str(err), "exit_code": code}
    for attr in ("t", "sup_a", "reached", "budget"):
        if hasattr(err, attr):
            record[attr] = getattr(err, attr)
    print(json.dumps(record, default=_jsonable, sort_keys=True), file=sys.stderr)
    if out_dir is not None:
        try:
            _write_json(out_dir / "error.json", record)
        except OSError:
            pass
    return code


def list_experiments(kind=None):
    cat = catalog()
    if kind is not None:
        cat = [c for c in cat if c["kind"] == kind]
        if not cat:
            raise ValidationError(f"unknown kind {kind!r}")
    return cat


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def main(argv=None):
    ap = argparse.ArgumentParser(prog="hyperlab", description="Numerical laboratory runner.")
    ap.add_argument("--version", action="version", version=f"hyperlab {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--threads", type=int, default=None, help="cap on worker threads")
    r.add_argument("--out", default=None, help="output directory")
    r.add_argument("--cfl", type=float, default=None, help="CFL number (solve, cone)")
    r.add_argument("--grading", type=float, default=None, help="mesh grading exponent")
    r.add_argument("--snapshots", type=_floats, default=None,
                   help="comma-separated snapshot times (solve, cone)")
    ls = sub.add_parser("list", help="print the experiment catalog as JSON")
    ls.add_argument("--kind", default=None)
    args = ap.parse_args(argv)

    if args.cmd == "list":
        try:
            print(json.dumps(list_experiments(args.kind), indent=2, sort_keys=True))
        except ValidationError as err:
            return _fail(EXIT_VALIDATION, err, None)
        return EXIT_OK
    if args.threads is not None and args.threads < 1:
        return _fail(EXIT_VALIDATION, ValidationError("--threads must be >= 1"), None)
    overrides = {"cfl": args.cfl, "grading": args.grading, "snapshots": args.snapshots}
    return run(args.config, args.out, args.threads, overrides)


if __name__ == "__main__":
    sys.exit(main())
