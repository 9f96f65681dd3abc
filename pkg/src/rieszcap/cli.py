"""Command-line front end.

Subcommands:

* ``hits``          simulate hitting locations, write CSV + escape stats
* ``capacity``      end-to-end capacity estimate (or estimate from a CSV)
* ``sweep``         capacity over a list of alpha values, CSV output
* ``coverage``      CI coverage study on a ball with known capacity
* ``subordination`` radius CDFs of disk hits: Brownian 3-d, Cauchy 2-d, exact
* ``ball-exact``    closed-form ball capacity

All commands are deterministic given (flags, seed).  Option precedence is
flags > config file (--config, JSON) > defaults; every output file gets a
sibling ``<name>.manifest.json`` recording the resolved configuration,
seed, versions, and timings.  Outputs are plain CSV/JSON plot data.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__, estimator, geometry, walkers
from .ball_kernels import ball_capacity
from .rng import derive_seed

_SEED_ENV = "RIESZCAP_SEED"


def _default_seed() -> int:
    return int(os.environ.get(_SEED_ENV, "0"))


def _jnum(x):
    """JSON-safe float: None for non-finite values (no bare Infinity)."""
    if x is None:
        return None
    x = float(x)
    return x if np.isfinite(x) else None


def _resolve(args, parser_defaults: dict) -> dict:
    """Apply precedence flags > config file > defaults."""
    cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = json.load(fh)
        unknown = set(cfg) - set(parser_defaults)
        if unknown:
            raise SystemExit(f"config file: unknown keys {sorted(unknown)}")
    resolved = {}
    for key, default in parser_defaults.items():
        flag = getattr(args, key, None)
        resolved[key] = flag if flag is not None else cfg.get(key, default)
    return resolved


def _write_manifest(out_path: str, command: str, resolved: dict,
                    outputs: list, timings: dict) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "config": resolved,
        "outputs": outputs,
        "timings_s": {k: round(v, 3) for k, v in timings.items()},
    }
    path = f"{out_path}.manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _maybe_print_config(args, resolved: dict, command: str) -> None:
    if getattr(args, "print_config", False):
        print(json.dumps({"command": command, **resolved}, indent=2,
                         sort_keys=True))


def _walk_config(shape, resolved: dict) -> walkers.WalkConfig:
    kwargs = dict(alpha=resolved["alpha"], d=shape.dimension,
                  gamma=resolved["gamma"], epsilon=resolved["epsilon"],
                  max_steps=resolved["max_steps"], seed=resolved["seed"])
    if resolved["r_launch"] is not None:
        r_launch = resolved["r_launch"]
        r_escape = resolved["r_escape"] or 2.0 * r_launch
        return walkers.WalkConfig(r_launch=r_launch, r_escape=r_escape, **kwargs)
    config = walkers.WalkConfig.for_shape(shape, **kwargs)
    return config


def _pick_walker(resolved: dict) -> str:
    if resolved.get("walker"):
        return resolved["walker"]
    return "wos" if resolved["alpha"] == 2.0 else "wiob"


def _add_walk_flags(p: argparse.ArgumentParser) -> dict:
    p.add_argument("--alpha", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--walker", choices=walkers._WALKERS)
    p.add_argument("--gamma", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--r-launch", dest="r_launch", type=float)
    p.add_argument("--r-escape", dest="r_escape", type=float)
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    return {"alpha": None, "n": 10000, "walker": None, "gamma": 0.05,
            "epsilon": 1e-6, "r_launch": None, "r_escape": None,
            "max_steps": 10**6, "seed": _default_seed(),
            "workers": os.cpu_count() or 1}


def _add_estimator_flags(p: argparse.ArgumentParser) -> dict:
    p.add_argument("--n1", type=int)
    p.add_argument("--p-tau", dest="p_tau", type=float)
    p.add_argument("--delta", type=float)
    return {"n1": None, "p_tau": 0.995, "delta": 0.05}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with default option values")
    p.add_argument("--print-config", action="store_true",
                   help="print the resolved configuration before running")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_hits(args) -> None:
    defaults = dict(args._defaults)
    resolved = _resolve(args, defaults)
    if resolved["alpha"] is None:
        raise SystemExit("--alpha is required")
    shape = geometry.load_shape(args.shape)
    config = _walk_config(shape, resolved)
    walker = _pick_walker(resolved)
    resolved["walker"] = walker
    _maybe_print_config(args, resolved, "hits")

    t0 = time.perf_counter()
    sink = open(args.path_dump, "w") if args.path_dump else None
    try:
        hs = walkers.collect_hits(config, shape, resolved["n"], walker=walker,
                                  workers=resolved["workers"], path_sink=sink)
    finally:
        if sink:
            sink.close()
    walk_s = time.perf_counter() - t0

    estimator.save_points_csv(args.out, hs.hits)
    outputs = [args.out]
    stats = {
        "paths_run": hs.paths_run, "hits": hs.n_hits, "escapes": hs.escapes,
        "cap_exceeded": hs.cap_exceeded, "hit_fraction": hs.hit_fraction,
        "step_total": hs.step_total, "step_mean": hs.step_mean,
        "step_max": hs.step_max,
    }
    stats_path = args.stats or f"{args.out}.stats.json"
    with open(stats_path, "w") as fh:
        json.dump(stats, fh, indent=2, sort_keys=True)
        fh.write("\n")
    outputs.append(stats_path)
    if args.path_dump:
        outputs.append(args.path_dump)
    _write_manifest(args.out, "hits", resolved, outputs, {"walk": walk_s})
    print(f"wrote {hs.n_hits} hits from {hs.paths_run} paths -> {args.out}")


def _capacity_payload(energy, cap, alpha, d):
    return {
        "alpha": alpha, "d": d, "n": energy.n, "n1": energy.n1,
        "p_tau": energy.p_tau, "tau": _jnum(energy.tau),
        "nu_hat": _jnum(energy.nu_hat), "n3": energy.n3,
        "I1": _jnum(energy.I1_hat), "I2": _jnum(energy.I2_hat),
        "I": _jnum(energy.I_hat), "capacity": cap.value,
        "ci_low": _jnum(cap.ci_low), "ci_high": _jnum(cap.ci_high),
        "infinite_energy": cap.infinite_energy,
    }


def cmd_capacity(args) -> None:
    defaults = dict(args._defaults)
    resolved = _resolve(args, defaults)
    if resolved["alpha"] is None:
        raise SystemExit("--alpha is required")
    _maybe_print_config(args, resolved, "capacity")
    timings = {}

    if args.hits:
        pts = estimator.load_points_csv(args.hits)
        d = pts.shape[1]
        walker = None
    else:
        if not args.shape:
            raise SystemExit("provide a shape file or --hits CSV")
        shape = geometry.load_shape(args.shape)
        d = shape.dimension
        config = _walk_config(shape, resolved)
        walker = _pick_walker(resolved)
        resolved["walker"] = walker
        t0 = time.perf_counter()
        hs = walkers.collect_hits(config, shape, resolved["n"], walker=walker,
                                  workers=resolved["workers"])
        timings["walk"] = time.perf_counter() - t0
        pts = hs.hits

    if len(pts) < 4:
        raise SystemExit(f"insufficient sample: need at least 4 hits, "
                         f"got {len(pts)}")
    est_cfg = estimator.EstimatorConfig(n1=resolved["n1"],
                                        p_tau=resolved["p_tau"],
                                        delta=resolved["delta"])
    t0 = time.perf_counter()
    energy, cap = estimator.estimate_capacity(pts, resolved["alpha"], d, est_cfg)
    timings["estimate"] = time.perf_counter() - t0

    payload = _capacity_payload(energy, cap, resolved["alpha"], d)
    with open(args.out, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(args.out, "capacity", resolved, [args.out], timings)
    print(json.dumps(payload, sort_keys=True))


def cmd_sweep(args) -> None:
    defaults = dict(args._defaults)
    resolved = _resolve(args, defaults)
    alphas = [float(a) for a in resolved["alphas"].split(",")]
    shape = geometry.load_shape(args.shape)
    d = shape.dimension
    _maybe_print_config(args, resolved, "sweep")

    if resolved["normalize"]:
        ref_ball = geometry.ball_same_volume(shape)

    t0 = time.perf_counter()
    rows = []
    for k, alpha in enumerate(alphas):
        sub = dict(resolved, alpha=alpha, seed=derive_seed(resolved["seed"], k),
                   walker=None)
        config = _walk_config(shape, sub)
        walker = _pick_walker(sub)
        hs = walkers.collect_hits(config, shape, sub["n"], walker=walker,
                                  workers=sub["workers"])
        est_cfg = estimator.EstimatorConfig(n1=sub["n1"], p_tau=sub["p_tau"],
                                            delta=sub["delta"])
        energy, cap = estimator.estimate_capacity(hs.hits, alpha, d, est_cfg)
        row = [alpha, cap.value, _jnum(cap.ci_low), _jnum(cap.ci_high)]
        if resolved["normalize"]:
            try:
                row.append(cap.value / ball_capacity(alpha, d, ref_ball.radius))
            except ValueError:
                row.append(None)   # recurrent regime: no reference value
        rows.append(row)

    header = "alpha,capacity,ci_low,ci_high"
    if resolved["normalize"]:
        header += ",relative_capacity"
    with open(args.out, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join("" if v is None else f"{v!r}" for v in row) + "\n")
    _write_manifest(args.out, "sweep", resolved, [args.out],
                    {"total": time.perf_counter() - t0})
    print(f"wrote {len(rows)} sweep rows -> {args.out}")


def cmd_coverage(args) -> None:
    defaults = dict(args._defaults)
    resolved = _resolve(args, defaults)
    if resolved["alpha"] is None:
        raise SystemExit("--alpha is required")
    shape = geometry.load_shape(args.shape)
    if not isinstance(shape, geometry.Ball):
        raise SystemExit("coverage study requires a shape with known exact "
                         "capacity: a single ball")
    d = shape.dimension
    alpha = resolved["alpha"]
    exact = ball_capacity(alpha, d, shape.radius)
    _maybe_print_config(args, resolved, "coverage")

    t0 = time.perf_counter()
    contained = 0
    finite = 0
    for rep in range(resolved["reps"]):
        sub = dict(resolved, seed=derive_seed(resolved["seed"], rep))
        config = _walk_config(shape, sub)
        walker = _pick_walker(sub)
        hs = walkers.collect_hits(config, shape, sub["n"], walker=walker,
                                  workers=sub["workers"])
        est_cfg = estimator.EstimatorConfig(n1=sub["n1"], p_tau=sub["p_tau"],
                                            delta=sub["delta"])
        _, cap = estimator.estimate_capacity(hs.hits, alpha, d, est_cfg)
        if not cap.infinite_energy:
            finite += 1
            if cap.ci_low <= exact <= cap.ci_high:
                contained += 1

    payload = {
        "alpha": alpha, "d": d, "n": resolved["n"], "reps": resolved["reps"],
        "exact_capacity": exact, "finite_estimates": finite,
        "contained": contained, "coverage": contained / resolved["reps"],
        "nominal": 1.0 - resolved["delta"],
    }
    with open(args.out, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(args.out, "coverage", resolved, [args.out],
                    {"total": time.perf_counter() - t0})
    print(json.dumps(payload, sort_keys=True))


def subordination_curves(n: int, seed: int, workers: int = 1):
    """Radius samples for the three disk-hitting distributions.

    Returns (r_wos3d, r_wiob2d): Brownian hits on a thin coin in R^3
    (half-thickness 1e-4, launch 5, escape 8) and Cauchy (alpha=1) hits on
    the unit disk in R^2.  The exact comparison curve is
    CDF(r) = 1 - sqrt(1 - r^2).
    """
    coin = geometry.Cylinder(p0=(-1e-4, 0.0, 0.0), p1=(1e-4, 0.0, 0.0),
                             radius=1.0)
    cfg3 = walkers.WalkConfig(alpha=2.0, d=3, r_launch=5.0, r_escape=8.0,
                              epsilon=1e-4, seed=seed)
    hs3 = walkers.collect_hits(cfg3, coin, n, walker="wos", workers=workers)
    r3 = np.linalg.norm(hs3.hits[:, 1:], axis=1)   # radius ignores the axis

    disk = geometry.Ball(center=(0.0, 0.0), radius=1.0)
    cfg2 = walkers.WalkConfig(alpha=1.0, d=2, r_launch=2.0, r_escape=4.0,
                              epsilon=0.0, seed=derive_seed(seed, 1))
    hs2 = walkers.collect_hits(cfg2, disk, n, walker="wiob", workers=workers)
    r2 = np.linalg.norm(hs2.hits, axis=1)
    return r3, r2


def exact_disk_radius_cdf(r):
    """Radius CDF of the alpha=1 equilibrium measure of the unit disk."""
    r = np.asarray(r, dtype=float)
    return 1.0 - np.sqrt(np.clip(1.0 - r**2, 0.0, None))


def cmd_subordination(args) -> None:
    defaults = dict(args._defaults)
    resolved = _resolve(args, defaults)
    _maybe_print_config(args, resolved, "subordination")
    t0 = time.perf_counter()
    r3, r2 = subordination_curves(resolved["n"], resolved["seed"],
                                  resolved["workers"])
    grid = np.linspace(0.0, 1.0, resolved["grid"])
    cdf3 = np.searchsorted(np.sort(r3), grid, side="right") / r3.size
    cdf2 = np.searchsorted(np.sort(r2), grid, side="right") / r2.size
    with open(args.out, "w") as fh:
        fh.write("r,cdf_wos_3d,cdf_wiob_2d,cdf_exact\n")
        for r, a, b, c in zip(grid, cdf3, cdf2, exact_disk_radius_cdf(grid)):
            fh.write(f"{r!r},{a!r},{b!r},{c!r}\n")
    _write_manifest(args.out, "subordination", resolved, [args.out],
                    {"total": time.perf_counter() - t0})
    print(f"wrote radius CDFs -> {args.out}")


def cmd_ball_exact(args) -> None:
    try:
        value = ball_capacity(args.alpha, args.d, args.radius)
    except ValueError as exc:
        raise SystemExit(str(exc))
    print(f"{value!r}")


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rieszcap",
        description="Monte Carlo Riesz alpha-capacity of compact sets")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("hits", help="simulate hitting locations")
    p.add_argument("shape", help="shape description JSON file")
    defaults = _add_walk_flags(p)
    p.add_argument("--out", required=True, help="output CSV of hit points")
    p.add_argument("--stats", help="escape statistics JSON "
                                   "(default <out>.stats.json)")
    p.add_argument("--path-dump", dest="path_dump",
                   help="CSV dump of every path position")
    _add_common(p)
    p.set_defaults(func=cmd_hits, _defaults=defaults)

    p = sub.add_parser("capacity", help="estimate capacity")
    p.add_argument("shape", nargs="?", help="shape description JSON file")
    p.add_argument("--hits", help="estimate from an existing hit CSV")
    defaults = _add_walk_flags(p)
    defaults.update(_add_estimator_flags(p))
    p.add_argument("--out", required=True, help="output JSON")
    _add_common(p)
    p.set_defaults(func=cmd_capacity, _defaults=defaults)

    p = sub.add_parser("sweep", help="capacity over a list of alphas")
    p.add_argument("shape")
    defaults = _add_walk_flags(p)
    defaults.update(_add_estimator_flags(p))
    p.add_argument("--alphas", help="comma-separated alpha values")
    p.add_argument("--normalize", action="store_true", default=None,
                   help="add capacity / equal-volume-ball capacity column")
    defaults.update({"alphas": "0.5,1.0,1.5", "normalize": False})
    p.add_argument("--out", required=True, help="output CSV")
    _add_common(p)
    p.set_defaults(func=cmd_sweep, _defaults=defaults)

    p = sub.add_parser("coverage", help="CI coverage study on a ball")
    p.add_argument("shape")
    defaults = _add_walk_flags(p)
    defaults.update(_add_estimator_flags(p))
    p.add_argument("--reps", type=int)
    defaults["reps"] = 100
    p.add_argument("--out", required=True, help="output JSON")
    _add_common(p)
    p.set_defaults(func=cmd_coverage, _defaults=defaults)

    p = sub.add_parser("subordination",
                       help="disk-hitting radius CDFs (3-d Brownian vs "
                            "2-d Cauchy vs exact)")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--grid", type=int)
    p.add_argument("--out", required=True, help="output CSV")
    _add_common(p)
    p.set_defaults(func=cmd_subordination,
                   _defaults={"n": 10000, "seed": _default_seed(),
                              "workers": os.cpu_count() or 1, "grid": 201})

    p = sub.add_parser("ball-exact", help="closed-form ball capacity")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--radius", type=float, default=1.0)
    p.set_defaults(func=cmd_ball_exact, _defaults={})

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ValueError, RuntimeError, geometry.ShapeFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
