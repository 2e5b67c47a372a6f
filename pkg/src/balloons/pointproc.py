"""Point-process generators and well-definedness diagnostics.

Poisson samples are built from independent blocks (Euclidean cubes, hyperbolic
annular sectors, tree levels), each drawn from its own ``(seed, block)`` stream.
The realisation therefore does not depend on the window: two windows sampled
with the same seed agree on their intersection.
"""

from dataclasses import dataclass, field
import json
import math

import numpy as np

from . import geometry as geo
from ._rng import stream

BLOCK_MASS = 256.0  # expected points per sampling block
MAX_EXPECTED_POINTS = 2e7
CHAIN_CAP = 64
ALL_PAIRS_LIMIT = 64
DENSE_LIMIT = 5000


@dataclass(frozen=True, eq=False)
class PointSet:
    space: geo.Space
    window: object
    coords: np.ndarray
    seed: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        c = np.ascontiguousarray(self.coords, dtype=float).reshape(-1, self.space.width)
        geo.check_coords(self.space, c)
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    def same_as(self, other):
        """Same space, window, seed and bit-identical coordinates."""
        return (self.space == other.space and self.window == other.window
                and self.seed == other.seed and np.array_equal(self.coords, other.coords))

    def __len__(self):
        return len(self.coords)

    @property
    def ids(self):
        return np.arange(len(self.coords))

    def to_json(self):
        return json.dumps({
            "space": self.space.describe(),
            "window": self.window.describe(),
            "seed": int(self.seed),
            "points": [[float(f"{v:.17g}") for v in row] for row in self.coords.tolist()],
        })

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        space = geo.Space.from_description(obj["space"])
        coords = np.asarray(obj["points"], dtype=float).reshape(-1, space.width)
        return cls(space, geo.window_from_description(obj["window"]), coords, obj["seed"])


def _euclidean_blocks(window, intensity, seed, d):
    side = (BLOCK_MASS / intensity) ** (1.0 / d)
    lo = np.asarray(window.lower, dtype=float)
    hi = lo + np.asarray(window.sides, dtype=float)
    first = np.floor(lo / side).astype(np.int64)
    last = np.ceil(hi / side).astype(np.int64)
    ranges = [range(a, b) for a, b in zip(first, last)]
    chunks = []
    mass = intensity * side ** d
    for cell in np.array(np.meshgrid(*ranges, indexing="ij")).reshape(d, -1).T:
        rng = stream(seed, "poisson-euclidean", *cell)
        k = rng.poisson(mass)
        pts = (cell + rng.random((k, d))) * side
        chunks.append(pts[np.all((pts >= lo) & (pts < hi), axis=1)])
    return np.concatenate(chunks) if chunks else np.empty((0, d))


def _hyperbolic_blocks(window, intensity, seed):
    chunks = []
    for k in range(int(math.ceil(window.radius))):
        a, b = math.sinh(k / 2.0) ** 2, math.sinh((k + 1) / 2.0) ** 2
        area = 4.0 * math.pi * (b - a)
        sectors = max(1, int(math.ceil(area * intensity / BLOCK_MASS)))
        for j in range(sectors):
            rng = stream(seed, "poisson-hyperbolic", k, j)
            m = rng.poisson(area * intensity / sectors)
            s = 2.0 * np.arcsinh(np.sqrt(a + rng.random(m) * (b - a)))
            theta = 2.0 * math.pi * (j + rng.random(m)) / sectors
            keep = s <= window.radius
            r = np.tanh(s[keep] / 2.0)
            chunks.append(np.stack([r * np.cos(theta[keep]), r * np.sin(theta[keep])], axis=1))
    return np.concatenate(chunks) if chunks else np.empty((0, 2))


def _tree_levels(window, intensity, seed, d):
    starts = geo.level_starts(d)
    chunks = []
    for k in range(1, int(math.ceil(window.radius)) + 1):
        rng = stream(seed, "poisson-tree", k)
        size = geo.level_size(d, k)
        counts = rng.poisson(intensity, size)
        edges = np.repeat(np.arange(size, dtype=np.int64) + starts[k], counts)
        off = rng.random(len(edges))
        keep = off <= window.radius - (k - 1)
        chunks.append(np.stack([edges[keep].astype(float), off[keep]], axis=1))
    return np.concatenate(chunks) if chunks else np.empty((0, 2))


def sample_poisson(space, window, intensity, seed, max_points=MAX_EXPECTED_POINTS):
    """Poisson process of the given intensity restricted to ``window``.

    Refuses windows whose expected point count exceeds ``max_points``.
    """
    if intensity <= 0:
        raise ValueError("intensity must be positive")
    measure = geo.window_measure(space, window)
    if intensity * measure > max_points:
        raise ValueError(f"expected {intensity * measure:.3g} points exceeds the "
                         f"sampling budget of {max_points:.3g}")
    if measure == 0:
        coords = np.empty((0, space.width))
    elif space.kind == geo.EUCLIDEAN:
        coords = _euclidean_blocks(window, intensity, seed, space.dim)
    elif space.kind == geo.HYPERBOLIC:
        coords = _hyperbolic_blocks(window, intensity, seed)
    else:
        coords = _tree_levels(window, intensity, seed, space.dim)
    return PointSet(space, window, coords, seed, {"intensity": intensity})


def sample_binomial(space, window, n, seed):
    """Exactly ``n`` iid uniform points in ``window``."""
    rng = stream(seed, "binomial")
    return PointSet(space, window, geo.sample_uniform(space, window, rng, n), seed)


def sample_perturbed_lattice(p, perturb_sd, window, seed):
    """Bernoulli(p) site percolation on Z^d, each survivor displaced by < 1/2.

    Displacements are isotropic Gaussians with per-coordinate deviation
    ``perturb_sd``, truncated to norm below 1/2 by resampling.
    """
    if not 0 < p <= 1:
        raise ValueError("retention probability must be in (0, 1]")
    if not isinstance(window, geo.Box):
        raise NotImplementedError("perturbed lattices live in Euclidean space only")
    d = len(window.sides)
    lo = np.asarray(window.lower, dtype=float)
    hi = lo + np.asarray(window.sides, dtype=float)
    rng = stream(seed, "perturbed-lattice")
    axes = [np.arange(math.floor(a - 0.5), math.ceil(b + 0.5)) for a, b in zip(lo, hi)]
    sites = np.array(np.meshgrid(*axes, indexing="ij"), dtype=float).reshape(d, -1).T
    sites = sites[rng.random(len(sites)) < p]
    shift = np.zeros_like(sites)
    if perturb_sd > 0:
        todo = np.arange(len(sites))
        for _ in range(64):
            if not len(todo):
                break
            shift[todo] = rng.normal(0.0, perturb_sd, (len(todo), d))
            todo = todo[np.linalg.norm(shift[todo], axis=1) >= 0.5]
        if len(todo):
            norm = np.linalg.norm(shift[todo], axis=1, keepdims=True)
            shift[todo] *= np.nextafter(0.5, 0) / norm
    pts = sites + shift
    pts = pts[np.all((pts >= lo) & (pts < hi), axis=1)]
    ps = PointSet(geo.Space.euclidean(d), window, pts, seed,
                  {"p": p, "perturb_sd": perturb_sd})
    ps.meta["displacement"] = shift
    return ps


def _neighbour_table(ps, k):
    """Per-point neighbour indices and distances, nearest first.

    Tiny sets keep every other point; larger ones the ``k`` nearest.
    """
    n = len(ps)
    if n <= ALL_PAIRS_LIMIT or ps.space.kind != geo.EUCLIDEAN:
        if n > DENSE_LIMIT:
            raise NotImplementedError("large non-Euclidean diagnostics are not supported")
        full = geo.cdist(ps.space, ps.coords)
        np.fill_diagonal(full, np.inf)
        k = n - 1 if n <= ALL_PAIRS_LIMIT else min(k, n - 1)
        idx = np.argpartition(full, k - 1, axis=1)[:, :k] if k < n - 1 else \
            np.tile(np.arange(n), (n, 1))
        d = np.take_along_axis(full, idx, axis=1)
        order = np.argsort(d, axis=1, kind="stable")
        idx = np.take_along_axis(idx, order, axis=1)[:, :k]
        return idx, np.take_along_axis(full, idx, axis=1)
    from scipy.spatial import cKDTree
    k = min(k, n - 1)
    dd, ii = cKDTree(ps.coords).query(ps.coords, k=k + 1)
    return ii[:, 1:], dd[:, 1:]


def greedy_descending_chain(nbr, gap, cap=CHAIN_CAP):
    """Longest chain of distinct points with strictly decreasing gaps, greedily.

    A walker starts at every point and repeatedly takes the longest admissible
    step (shorter than the previous one, to an unvisited point). Returns the
    number of points on the longest walk, capped at ``cap``.
    """
    n = len(nbr)
    if n == 0:
        return 0
    rows = np.arange(n)
    path = np.full((n, cap), -1, dtype=np.int64)
    path[:, 0] = rows
    cur = rows.copy()
    last = np.full(n, np.inf)
    live = rows
    length = 1
    while length < cap and len(live):
        cn = nbr[cur[live]]
        cg = gap[cur[live]]
        ok = cg < last[live, None]
        ok &= ~(cn[:, :, None] == path[live, None, :length]).any(axis=2)
        cg = np.where(ok, cg, -np.inf)
        j = cg.argmax(axis=1)
        moved = np.isfinite(cg[np.arange(len(live)), j])
        live, j = live[moved], j[moved]
        if not len(live):
            break
        cur[live] = nbr[cur[live], j]
        last[live] = gap[path[live, length - 1], j]
        path[live, length] = cur[live]
        length += 1
    return length


def exact_descending_chain(dist):
    """Exhaustive search over a full distance matrix; for tiny sets only."""
    n = len(dist)
    best = 1 if n else 0

    def go(u, g, seen, depth):
        nonlocal best
        best = max(best, depth)
        for w in range(n):
            if w not in seen and dist[u, w] < g:
                go(w, dist[u, w], seen | {w}, depth + 1)

    for u in range(n):
        go(u, np.inf, {u}, 1)
    return best


def diagnostics(ps, tol=1e-12, m=10000, k=16):
    """Minimum gap, near-equidistant pair-of-pairs count, longest descending chain.

    Distances come from all pairs when the set is tiny and from the
    ``k``-nearest-neighbour graph otherwise. The equidistance scan counts pairs
    of pairs, among the ``m`` smallest pair distances, that agree within ``tol``.
    """
    n = len(ps)
    if n < 2:
        raise ValueError("need at least two points")
    nbr, gap = _neighbour_table(ps, k)
    i = np.repeat(np.arange(n), nbr.shape[1])
    j = nbr.reshape(-1)
    dist = gap.reshape(-1)[i < j]
    if len(dist) > m:
        dist = dist[np.argpartition(dist, m - 1)[:m]]
    small = np.sort(dist)
    upper = np.searchsorted(small, small + tol, side="left")
    quads = int((upper - np.arange(len(small)) - 1).clip(min=0).sum())
    return {
        "min_gap": float(gap[:, 0].min()),
        "equidistant_quadruples": quads,
        "longest_descending_chain": greedy_descending_chain(nbr, gap),
    }
