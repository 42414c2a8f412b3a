"""Command-line surface: critical data, summability, relations, checks, fields.

All subcommands read a single JSON config (map coefficients as [re, im]
pairs plus numeric knobs) with flag overrides, write JSON/CSV/PGM outputs,
and exit 0 on success, 1 on a failed check, 2 on usage or config errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from .checks import BumpField, contraction_check, duality_check, neumann_bound_check
from .errors import RuelleOpError
from .gamma import GammaCombination, QuadratureConfig
from .maps import CriticalData, EntireMap, critical_data, normalize, orbit
from .relation import fixed_point_defect, instability_verdict, mobius_transport, relation_coefficients
from .series import poincare_series, resolvent_by_neumann, resolvent_by_system
from .summability import SUMMABLE, classify, classify_value
from .transfer import BranchWindow, apply, apply_direct

USAGE_ERROR = 2
CHECK_FAILURE = 1

ALL_CHECKS = ("oracle", "contraction", "neumann", "defect", "transport", "duality")


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    map: EntireMap
    normalize: bool = True
    radius: float = 40.0
    n_max: int = 300
    escape_radius: float = 1e6
    seed: int = 7
    x_schedule: tuple = (0.9, 0.99, 0.999, 0.9999)
    branch_window: int = 200
    tolerances: dict = field(default_factory=dict)
    d1: complex | None = None
    fixed_pair: tuple | None = None
    out: str | None = None
    raw: dict = field(default_factory=dict)

    def tol(self, name, default):
        v = self.tolerances.get(name, default)
        if v <= 0:
            raise ConfigError(f"tolerance {name} must be positive")
        return float(v)


def _load_config(path, overrides) -> RunConfig:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config not found: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config JSON: {exc}") from exc
    if "map" not in obj:
        raise ConfigError("config needs a 'map' entry with p1/p2/p3 coefficient lists")
    try:
        m = EntireMap.from_json_obj(obj["map"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad map spec: {exc}") from exc
    cfg = RunConfig(
        map=m,
        normalize=bool(obj.get("normalize", True)),
        radius=float(obj.get("radius", 40.0)),
        n_max=int(obj.get("n_max", 300)),
        escape_radius=float(obj.get("escape_radius", 1e6)),
        seed=int(obj.get("seed", 7)),
        x_schedule=tuple(obj.get("x_schedule", (0.9, 0.99, 0.999, 0.9999))),
        branch_window=int(obj.get("branch_window", 200)),
        tolerances=dict(obj.get("tolerances", {})),
        d1=complex(*obj["d1"]) if obj.get("d1") is not None else None,
        fixed_pair=tuple(complex(*q) for q in obj["fixed_pair"]) if obj.get("fixed_pair") else None,
        out=obj.get("out"),
        raw=obj,
    )
    if overrides.radius is not None:
        cfg.radius = overrides.radius
    if overrides.n_max is not None:
        cfg.n_max = overrides.n_max
    if overrides.seed is not None:
        cfg.seed = overrides.seed
    if overrides.out is not None:
        cfg.out = overrides.out
    if getattr(overrides, "x_schedule", None):
        cfg.x_schedule = tuple(float(x) for x in overrides.x_schedule.split(","))
    if cfg.radius <= 0 or cfg.n_max < 0:
        raise ConfigError("radius must be positive and nmax non-negative")
    return cfg


def _working_map(cfg: RunConfig) -> EntireMap:
    if not cfg.normalize:
        return cfg.map
    return normalize(cfg.map, fixed_pair=cfg.fixed_pair)


def _emit(cfg: RunConfig, obj, default_name):
    path = cfg.out or default_name
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
    print(f"wrote {path}")
    return path


def _pick_d1(cfg: RunConfig, m: EntireMap, cd: CriticalData) -> complex:
    if cfg.d1 is not None:
        return cfg.d1
    for rep, _ in cd.value_classes:
        if classify_value(m, rep, n_max=cfg.n_max, escape_radius=cfg.escape_radius).verdict == SUMMABLE:
            return rep
    raise ConfigError("no summable critical value found; supply d1 in the config")


def cmd_critical(cfg: RunConfig) -> int:
    m = _working_map(cfg)
    cd = critical_data(m, cfg.radius)
    _emit(cfg, cd.to_json_obj(), "critical_data.json")
    print(f"{len(cd.entries)} critical entries in radius {cd.radius:.6g}, "
          f"{len(cd.value_classes)} value classes, tail bound {cd.tail_bound:.3g}")
    return 0


def cmd_summability(cfg: RunConfig, points) -> int:
    m = _working_map(cfg)
    tol = cfg.tol("summability", 1e-9)
    if not points:
        cd = critical_data(m, cfg.radius)
        points = [rep for rep, _ in cd.value_classes]
        reports = [classify_value(m, p, cfg.n_max, tol, cfg.escape_radius) for p in points]
    else:
        points = [complex(*[float(t) for t in p.split(",")]) for p in points]
        reports = [classify(m, p, cfg.n_max, tol, cfg.escape_radius) for p in points]
    if len(reports) == 1:
        _emit(cfg, reports[0].to_json_obj(), "summability.json")
    else:
        path = cfg.out or "summability.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["re", "im", "verdict", "series1", "boundedness"])
            for r in reports:
                w.writerow(r.csv_row())
        print(f"wrote {path}")
    for r in reports:
        print(f"{r.point}: {r.verdict} (series1 {r.series1_partial:.6g}, {r.boundedness})")
    return 0


def cmd_relation(cfg: RunConfig, as_csv=False) -> int:
    m = _working_map(cfg)
    cd = critical_data(m, cfg.radius)
    d1 = _pick_d1(cfg, m, cd)
    report = relation_coefficients(cd, d1, tol=cfg.tol("triviality", 1e-6),
                                   series_tol=cfg.tol("series", 1e-11),
                                   n_max=cfg.n_max, escape_radius=cfg.escape_radius)
    verdict = instability_verdict(report)
    if as_csv:
        path = cfg.out or "relation.csv"
        with open(path, "a", newline="") as fh:
            csv.writer(fh).writerow(report.csv_row() + [verdict["verdict"]])
        print(f"appended {path}")
    else:
        _emit(cfg, {"report": report.to_json_obj(), "verdict": verdict}, "relation.json")
    for rc in report.coefficients:
        print(f"class {rc.class_index} (d = {rc.value_rep:.6g}): {rc.value:.8g} (tail {rc.tail:.2g})")
    print(verdict["verdict"])
    return 0


def _run_checks(cfg: RunConfig, names, inject_negate_b=None):
    m = _working_map(cfg)
    cd = critical_data(m, cfg.radius)
    if inject_negate_b is not None:
        cd = cd.with_negated_residue(inject_negate_b)
    d1 = _pick_d1(cfg, m, cd)
    rng = np.random.default_rng(cfg.seed)
    zs = 2.0 * np.exp(2j * math.pi * rng.random(20))
    win = BranchWindow(cfg.branch_window)
    results = []

    def base_point():
        # a real-ish generic base well clear of poles and critical points
        for cand in (0.37 + 0.21j, -0.42 + 0.33j, 0.52 - 0.27j):
            if min(abs(cand - e.c) for e in cd.entries) > 1e-3:
                return cand
        return 0.37 + 0.21j

    a = base_point()
    if "oracle" in names:
        phi = GammaCombination.single(a)
        img = apply(cd, phi)
        tol = cfg.tol("oracle", 1e-6)
        worst = 0.0
        for z in zs:
            direct = apply_direct(m, phi, z, win)
            worst = max(worst, abs(img.eval(z) - direct.value) / abs(direct.value))
        results.append({"name": "oracle", "lhs": worst, "rhs": 0.0,
                        "error_budget": tol, "passed": worst <= tol, "details": {}})
    if "contraction" in names:
        res = contraction_check(cd, GammaCombination.single(a))
        results.append(res.to_json_obj())
    if "neumann" in names:
        for x in (0.5, 0.7, 0.9):
            res = neumann_bound_check(cd, x, a.real)
            results.append(res.to_json_obj())
    if "defect" in names:
        tol = cfg.tol("defect", 1e-6)
        res = fixed_point_defect(cd, d1, zs, window=win, n_max=cfg.n_max,
                                 escape_radius=cfg.escape_radius)
        results.append({"name": "defect", "lhs": res.max_residual, "rhs": 0.0,
                        "error_budget": tol, "passed": res.max_residual <= tol,
                        "details": {"samples": len(res.samples_used)}})
    if "transport" in names:
        tol = cfg.tol("transport", 1e-8)
        orb = orbit(m, d1, min(cfg.n_max, 60), cfg.escape_radius)
        res = mobius_transport(orb, 2 + 1j, zs)
        results.append({"name": "transport", "lhs": res.max_residual, "rhs": 0.0,
                        "error_budget": tol, "passed": res.max_residual <= tol,
                        "details": {"y": [2.0, 1.0]}})
    if "duality" in names:
        mu = BumpField(center=-1.8 + 0.9j, radius=0.5)
        res = duality_check(cd, mu, GammaCombination.single(a))
        results.append(res.to_json_obj())
    return results


def cmd_verify(cfg: RunConfig, checks_arg, inject_negate_b=None) -> int:
    if checks_arg is None:
        names = ALL_CHECKS
    else:
        names = tuple(n for n in checks_arg.split(",") if n)
        unknown = [n for n in names if n not in ALL_CHECKS]
        if unknown:
            raise ConfigError(f"unknown checks {unknown}; available: {ALL_CHECKS}")
    results = _run_checks(cfg, names, inject_negate_b)
    _emit(cfg, results, "verify.json")
    ok = True
    for r in results:
        status = "PASS" if r["passed"] else "FAIL"
        print(f"[{status}] {r['name']}: lhs={r['lhs']:.6g} rhs={r['rhs']:.6g} budget={r['error_budget']:.3g}")
        ok = ok and r["passed"]
    return 0 if ok else CHECK_FAILURE


def cmd_field(cfg: RunConfig, grid_arg, bounds_arg) -> int:
    m = _working_map(cfg)
    cd = critical_data(m, cfg.radius)
    d1 = _pick_d1(cfg, m, cd)
    n = int(grid_arg)
    if n < 2:
        raise ConfigError("grid must be at least 2")
    lo, hi = (float(t) for t in bounds_arg.split(","))
    orb = orbit(m, d1, cfg.n_max, cfg.escape_radius)
    from .relation import truncated_orbit_combination

    # truncate where the orbit-series weights are spent
    n_terms = cfg.n_max
    for k, dv in enumerate(orb.derivs):
        if dv != 0 and math.isfinite(abs(dv)) and 1.0 / abs(dv) < 1e-13:
            n_terms = k
            break
    phi = truncated_orbit_combination(m, d1, n_terms, orbit_data=orb)
    xs = np.linspace(lo, hi, n)
    X, Y = np.meshgrid(xs, xs)
    pts = X + 1j * Y
    with np.errstate(all="ignore"):
        vals = phi.eval(pts)
        logs = np.log10(np.abs(vals))
    base = cfg.out or "field"
    csv_path = base + ".csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re", "im", "value_re", "value_im", "log10_abs"])
        for i in range(n):
            for j in range(n):
                v = vals[i, j]
                w.writerow([repr(float(X[i, j])), repr(float(Y[i, j])), repr(float(v.real)),
                            repr(float(v.imag)), repr(float(logs[i, j]))])
    finite = logs[np.isfinite(logs)]
    lo_c, hi_c = (np.percentile(finite, 2), np.percentile(finite, 98)) if len(finite) else (0, 1)
    span = max(hi_c - lo_c, 1e-12)
    gray = np.clip((logs - lo_c) / span, 0.0, 1.0)
    gray = np.where(np.isfinite(logs), gray, 1.0)  # poles saturate
    pgm_path = base + ".pgm"
    with open(pgm_path, "w") as fh:
        fh.write(f"P2\n{n} {n}\n255\n")
        for i in range(n - 1, -1, -1):
            fh.write(" ".join(str(int(round(255 * g))) for g in gray[i]) + "\n")
    print(f"wrote {csv_path} and {pgm_path} ({n}x{n} nodes)")
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON config with the map and knobs")
    common.add_argument("--out", help="output path (overrides config)")
    common.add_argument("--radius", type=float, help="critical enumeration radius")
    common.add_argument("--nmax", dest="n_max", type=int, help="orbit/series length cap")
    common.add_argument("--x-schedule", dest="x_schedule", help="comma separated damping schedule")
    common.add_argument("--seed", type=int, help="sample seed")
    ap = argparse.ArgumentParser(prog="ruelleop", parents=[common],
                                 description="Transfer-operator calculus for entire sine-family maps")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("critical", parents=[common], help="enumerate critical data, write JSON")
    p_sum = sub.add_parser("summability", parents=[common],
                           help="classify points (default: critical values)")
    p_sum.add_argument("--point", action="append", default=[],
                       help="re,im of a point to classify (repeatable; several emit CSV)")
    p_rel = sub.add_parser("relation", parents=[common],
                           help="relation coefficients and instability verdict")
    p_rel.add_argument("--csv", action="store_true", help="append a CSV row instead of JSON")
    p_ver = sub.add_parser("verify", parents=[common], help="run verification checks")
    p_ver.add_argument("--check", help="comma separated subset of checks (empty = none)")
    p_ver.add_argument("--inject-negate-b", type=int, default=None,
                       help="debug: negate residue of entry N before checking")
    p_fld = sub.add_parser("field", parents=[common],
                           help="raster of the orbit-series field around d1")
    p_fld.add_argument("--grid", default="64", help="nodes per side (endpoints inclusive)")
    p_fld.add_argument("--bounds", default="-3,3", help="lo,hi of the square window")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return USAGE_ERROR if exc.code not in (0, None) else 0
    for name in ("config", "out", "radius", "n_max", "x_schedule", "seed"):
        if not hasattr(args, name):
            setattr(args, name, None)
    try:
        if not args.config:
            raise ConfigError("--config is required")
        cfg = _load_config(args.config, args)
        if args.command == "critical":
            return cmd_critical(cfg)
        if args.command == "summability":
            return cmd_summability(cfg, args.point)
        if args.command == "relation":
            return cmd_relation(cfg, as_csv=args.csv)
        if args.command == "verify":
            return cmd_verify(cfg, getattr(args, "check", None), args.inject_negate_b)
        if args.command == "field":
            return cmd_field(cfg, args.grid, args.bounds)
        raise ConfigError(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (RuelleOpError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CHECK_FAILURE


if __name__ == "__main__":
    sys.exit(main())
