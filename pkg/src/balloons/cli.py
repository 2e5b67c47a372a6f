"""Command-line interface: ``balloons <command> [options]``.

Every run is fixed by its configuration and seed. Artifacts are staged in a
hidden directory and moved into place only once all of them are written, next
to a ``manifest.json`` holding the configuration, its hash and the library
versions. Passing a manifest back through ``--config`` reproduces the run.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
import argparse
import hashlib
import json
import math
import os
import platform
import shutil
import sys
import tempfile

import numpy as np

from . import balloon as bl
from . import geometry as geo
from . import hyptess as ht
from . import limits as lm
from . import matching as mt
from . import pointproc as pp
from . import treesep as ts
from ._rng import task_seed

COMMANDS = ("simulate", "render", "treesep", "verify-gap", "hyptess", "limsup", "vitali")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str = "simulate"
    space: str = "euclidean"
    dim: int = 2
    window: str = "100"
    intensity: float = 1.0
    seed: int = 0
    seeds: int = 1
    t_grid: str = "0:10:0.5"
    out: str = "out"
    format: str = "json"
    jobs: int = 1
    oracle: bool = False
    t: float = 1.0
    points: str = ""
    d_values: str = "3"
    t_values: str = "1:3"
    n: int = 100000
    depth: int = 8
    pairs: int = 100000
    kind: str = "bounded"
    beta: float = 1.0
    L_values: str = "50,100,200,400"
    balls: int = 10000

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, obj):
        names = {f.name for f in fields(cls)}
        unknown = set(obj) - names
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        return cls(**obj)

    def digest(self):
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


# --- parsing helpers ---------------------------------------------------------

def parse_grid(text):
    """``a:b:step`` -> the grid a, a+step, ... up to b inclusive."""
    try:
        a, b, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise ConfigError(f"t-grid must look like a:b:step, got {text!r}") from None
    if step <= 0 or b < a:
        raise ConfigError("t-grid needs step > 0 and b >= a")
    k = int(math.floor((b - a) / step + 1e-9))
    return [a + i * step for i in range(k + 1)]


def parse_ints(text):
    """``3,5,7`` or the inclusive range ``3:10``."""
    try:
        if ":" in text:
            a, b = text.split(":")
            return list(range(int(a), int(b) + 1))
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise ConfigError(f"expected integers, got {text!r}") from None


def make_space(cfg):
    if cfg.space == "euclidean":
        return geo.Space.euclidean(cfg.dim)
    if cfg.space == "hyperbolic":
        return geo.Space.hyperbolic()
    if cfg.space == "tree":
        return geo.Space.tree(cfg.dim if cfg.dim >= 3 else 3)
    raise ConfigError(f"unknown space {cfg.space!r}")


def make_window(cfg, space):
    """A number is a centred box side (Euclidean) or a ball radius; ``lo:hi`` is a cube."""
    try:
        if space.kind == geo.EUCLIDEAN:
            if ":" in cfg.window:
                lo, hi = (float(x) for x in cfg.window.split(":"))
                return geo.Box.square(lo, hi, space.dim)
            return geo.Box.centered(float(cfg.window), space.dim)
        return geo.Ball(float(cfg.window))
    except ValueError as e:
        raise ConfigError(f"bad window {cfg.window!r}: {e}") from None


def seed_list(cfg):
    if cfg.seeds <= 1:
        return [cfg.seed]
    return [task_seed(cfg.seed, cfg.command, i) for i in range(cfg.seeds)]


def _map(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def _json(obj):
    def conv(o):
        if isinstance(o, (np.integer,)):
            return int(o)
        if isinstance(o, (np.floating,)):
            return float(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(type(o).__name__)
    return json.dumps(obj, sort_keys=True, indent=1, default=conv) + "\n"


# --- commands ----------------------------------------------------------------
# Each returns (artifacts {name: text}, violations).

def _simulate_one(args):
    cfg, seed = args
    space = make_space(cfg)
    ps = pp.sample_poisson(space, make_window(cfg, space), cfg.intensity, seed)
    if cfg.oracle:
        mr = mt.brute_force_matching(ps)
    else:
        mr = mt.greedy_stable_matching(ps)
    mt.certify(ps, mr)
    blocking = mt.verify_stability(ps, mr)
    traj = bl.compute_trajectory(ps, mr)
    rep = bl.cover_report(traj)
    summary = json.loads(bl.summary(ps, traj, rep))
    summary["pairs"] = len(mr)
    summary["certified_pairs"] = int(mr.certified.sum())
    summary["stability_violations"] = len(blocking)
    summary["covered_intervals"] = rep["covered_intervals"]
    return seed, summary, traj.to_csv(), len(blocking)


def cmd_simulate(cfg):
    results = _map(_simulate_one, [(cfg, s) for s in seed_list(cfg)], cfg.jobs)
    out = {"summary.json": _json([r[1] for r in results])}
    if cfg.format == "csv":
        for seed, _, text, _ in results:
            out[f"trajectory_{seed}.csv"] = text
    return out, sum(r[3] for r in results)


def _load_points(cfg, space):
    text = cfg.points
    if os.path.exists(text):
        with open(text) as fh:
            text = fh.read()
    obj = json.loads(text)
    if isinstance(obj, dict):
        return pp.PointSet.from_json(text)
    coords = np.asarray(obj, dtype=float).reshape(len(obj), -1)
    if space.kind == geo.EUCLIDEAN and coords.shape[1] != space.dim:
        space = geo.Space.euclidean(coords.shape[1])
    lo = coords.min(axis=0) - 1.0
    window = (geo.Box(tuple(lo), tuple(coords.max(axis=0) - lo + 1.0))
              if space.kind == geo.EUCLIDEAN else geo.Ball(float(cfg.window)))
    return pp.PointSet(space, window, coords, cfg.seed)


def cmd_render(cfg):
    space = make_space(cfg)
    if cfg.points:
        ps = _load_points(cfg, space)
    else:
        ps = pp.sample_poisson(space, make_window(cfg, space), cfg.intensity, cfg.seed)
    mr = mt.brute_force_matching(ps) if cfg.oracle else mt.greedy_stable_matching(ps)
    blocking = mt.verify_stability(ps, mr)
    return {f"balloons_t{cfg.t:g}.svg": bl.render_svg(ps, mr, cfg.t)}, len(blocking)


def _treesep_one(args):
    cfg, d, seed = args
    g = ts.generate_configuration_model(cfg.n, d, seed)
    doubles = ts.double_edge_count(g)
    rows, bad = [], 0
    for t in parse_ints(cfg.t_values):
        chosen = ts.greedy_max_separated(g, t, seed)
        bad += not ts.is_separated(g, chosen, t)
        rows.append({"d": d, "t": t, "n": cfg.n, "seed": seed,
                     "alpha_star": ts.bound_density(d, t), "margin": ts.gap_margin(d, t),
                     "greedy_density": len(chosen) / cfg.n, "double_edges": doubles})
    return rows, bad


def cmd_treesep(cfg):
    jobs = [(cfg, d, s) for d in parse_ints(cfg.d_values) for s in seed_list(cfg)]
    parts = _map(_treesep_one, jobs, cfg.jobs)
    rows = [r for part, _ in parts for r in part]
    bad = sum(b for _, b in parts)
    cols = ["d", "t", "n", "seed", "alpha_star", "margin", "greedy_density", "double_edges"]
    if cfg.format == "json":
        return {"treesep.json": _json(rows)}, bad
    return {"treesep.csv": ts.rows_to_csv(rows, cols)}, bad


def cmd_verify_gap(cfg):
    rows = ts.gap_table(parse_ints(cfg.d_values), parse_ints(cfg.t_values))
    bad = sum(1 for r in rows if r["feasible"] and not r["margin"] > 0)
    if cfg.format == "json":
        return {"gap.json": _json(rows)}, bad
    return {"gap.csv": ts.rows_to_csv(rows, ["d", "t", "alpha_star", "margin", "feasible"])}, bad


def _hyp_one(args):
    cfg, seed, grid = args
    space = geo.Space.hyperbolic()
    ps = pp.sample_poisson(space, make_window(cfg, space), cfg.intensity, seed)
    mr = mt.greedy_stable_matching(ps)
    mt.certify(ps, mr)
    traj = bl.compute_trajectory(ps, mr)
    rep = ht.transience_bound_report(ps, mr, traj, grid)
    rep["seed"] = seed
    rep["n"] = len(ps)
    return rep


def cmd_hyptess(cfg):
    tess = ht.build_tessellation(cfg.depth)
    consts = ht.verify_constants(tess)
    dist = ht.distortion_check(tess, cfg.pairs, cfg.seed)
    r = ht.truncation_radius()
    report = {
        "depth": cfg.depth, "vertices": tess.n, "truncation_radius": r,
        "core_area": ht.core_area(r), "constants": consts, "distortion": dist,
        "zigzag": [{"ell": ell, "distance": geo.disk_distance(*ht.zigzag_midpoints(tess, ell)[[0, -1]]),
                    "expected": (ell - 1) * ht.A_CONST}
                   for ell in range(2, min(cfg.depth, 10) + 1)],
    }
    violations = dist["violations"]
    # transience runs only when a hyperbolic sample is asked for explicitly
    if cfg.space == "hyperbolic":
        grid = parse_grid(cfg.t_grid)
        runs = _map(_hyp_one, [(cfg, s, grid) for s in seed_list(cfg)], cfg.jobs)
        report["transience"] = runs
        violations += sum(run["violations"] for run in runs)
    out = {"hyptess.json": _json(report)}
    if cfg.format == "svg":
        out["tessellation.svg"] = ht.render_tessellation_svg(ht.build_tessellation(min(cfg.depth, 7)))
    return out, violations


def cmd_limsup(cfg):
    Ls = parse_ints(cfg.L_values)
    kinds = cfg.kind.split(",")
    rows = []
    for kind in kinds:
        rows += lm.trend(kind, Ls, seed_list(cfg), cfg.dim, cfg.beta)
    medians = {kind: lm.median_by_L([r for r in rows if r["field_kind"] == kind]) for kind in kinds}
    if cfg.format == "json":
        return {"limsup.json": _json({"rows": rows, "medians": medians})}, 0
    return {"limsup.csv": lm.trend_csv(rows)}, 0


def _vitali_one(args):
    cfg, seed = args
    bc = lm.random_balls(cfg.balls, seed, d=cfg.dim)
    J = lm.vitali_subcover(bc)
    disjoint, covered, _ = lm.check_subcover(bc, J)
    return {"seed": seed, "kept": len(J), "disjoint": disjoint, "three_cover": covered}


def cmd_vitali(cfg):
    rows = _map(_vitali_one, [(cfg, s) for s in seed_list(cfg)], cfg.jobs)
    bad = sum(1 for r in rows if not (r["disjoint"] and r["three_cover"]))
    return {"vitali.json": _json(rows)}, bad


HANDLERS = {
    "simulate": cmd_simulate, "render": cmd_render, "treesep": cmd_treesep,
    "verify-gap": cmd_verify_gap, "hyptess": cmd_hyptess, "limsup": cmd_limsup,
    "vitali": cmd_vitali,
}


# --- output ------------------------------------------------------------------

def versions():
    import scipy
    try:
        from importlib.metadata import version
        own = version("artifact")
    except Exception:
        own = "unknown"
    return {"python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "artifact": own}


def write_outputs(cfg, artifacts, violations):
    """Stage everything in a temporary directory, then move it into ``cfg.out``."""
    os.makedirs(cfg.out, exist_ok=True)
    stage = tempfile.mkdtemp(prefix=".staging-", dir=cfg.out)
    try:
        digests = {}
        for name, text in artifacts.items():
            data = text.encode()
            digests[name] = hashlib.sha256(data).hexdigest()
            with open(os.path.join(stage, name), "wb") as fh:
                fh.write(data)
        manifest = {"config": cfg.to_dict(), "config_hash": cfg.digest(),
                    "seeds": seed_list(cfg), "versions": versions(),
                    "artifacts": digests, "violations": violations}
        with open(os.path.join(stage, "manifest.json"), "w") as fh:
            fh.write(_json(manifest))
        for name in list(artifacts) + ["manifest.json"]:
            os.replace(os.path.join(stage, name), os.path.join(cfg.out, name))
    finally:
        shutil.rmtree(stage, ignore_errors=True)
    return manifest


def validate(cfg):
    """Parse every field once so a bad value fails before any work is done."""
    if cfg.command not in HANDLERS:
        raise ConfigError(f"unknown command {cfg.command!r}")
    make_window(cfg, make_space(cfg))
    parse_grid(cfg.t_grid)
    for text in (cfg.d_values, cfg.t_values, cfg.L_values):
        if not parse_ints(text):
            raise ConfigError(f"empty integer list {text!r}")
    if cfg.format not in ("csv", "json", "svg"):
        raise ConfigError(f"unknown format {cfg.format!r}")
    if cfg.seeds < 1 or cfg.jobs < 1 or cfg.intensity <= 0:
        raise ConfigError("seeds, jobs and intensity must be positive")


def run(cfg):
    """Run one command; returns the exit status."""
    validate(cfg)
    artifacts, violations = HANDLERS[cfg.command](cfg)
    write_outputs(cfg, artifacts, violations)
    return 0 if violations == 0 else 1


# --- argument parsing ----------------------------------------------------------

FLAG_TYPES = {f.name: f.type for f in fields(RunConfig)}


def build_parser():
    p = argparse.ArgumentParser(prog="balloons", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON config or manifest; flags override it")
        s.add_argument("--space", choices=["euclidean", "hyperbolic", "tree"])
        s.add_argument("--dim", type=int)
        s.add_argument("--window", help="box side, ball radius, or lo:hi")
        s.add_argument("--intensity", type=float)
        s.add_argument("--seed", type=int)
        s.add_argument("--seeds", type=int, help="number of seeds derived from --seed")
        s.add_argument("--t-grid", dest="t_grid", help="a:b:step")
        s.add_argument("--out")
        s.add_argument("--format", choices=["csv", "json", "svg"])
        s.add_argument("--jobs", type=int)
        s.add_argument("--oracle", action="store_const", const=True,
                       help="use the brute-force matcher")
        s.add_argument("--t", type=float, help="render time")
        s.add_argument("--points", help="JSON point list or PointSet file to render")
        s.add_argument("--d", dest="d_values", help="degrees, e.g. 3 or 3:10")
        s.add_argument("--ts", dest="t_values", help="separations, e.g. 1:8")
        s.add_argument("--n", type=int, help="graph size")
        s.add_argument("--depth", type=int, help="tessellation depth")
        s.add_argument("--pairs", type=int, help="distortion sample pairs")
        s.add_argument("--kind", help="field kinds, comma separated")
        s.add_argument("--beta", type=float, help="Pareto tail index")
        s.add_argument("--L", dest="L_values", help="box radii, e.g. 50,100")
        s.add_argument("--balls", type=int, help="balls per Vitali collection")
    return p


def config_from_args(argv):
    ns = build_parser().parse_args(argv)
    base = {}
    if ns.config:
        with open(ns.config) as fh:
            base = json.load(fh)
        base = base.get("config", base)
    flags = {k: v for k, v in vars(ns).items() if v is not None and k != "config"}
    cfg = RunConfig.from_dict({**base, **flags})
    return cfg


def main(argv=None):
    try:
        cfg = config_from_args(sys.argv[1:] if argv is None else argv)
        return run(cfg)
    except (ConfigError, ValueError, NotImplementedError, OSError, TypeError) as e:
        sys.stderr.write(json.dumps({"error": type(e).__name__, "message": str(e)}) + "\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
