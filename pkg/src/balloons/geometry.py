"""Metric/measure backends for the three spaces.

Coordinates are always stored as ``(n, k)`` float arrays:

* Euclidean ``R^d``: the ``d`` Cartesian coordinates.
* Hyperbolic plane: Poincare-disk coordinates ``(x, y)`` with ``x^2 + y^2 < 1``.
* Real ``d``-regular tree: ``(edge, offset)``. Edges are named by the id of their
  child vertex (vertex ids are breadth-first, root = 0) and ``offset`` in
  ``[0, 1]`` is the distance from the parent end of the edge.

The root vertex of the tree and the centre of the disk are the origins.
"""

from dataclasses import dataclass
from collections import namedtuple
import math

import numpy as np
from scipy.special import gamma as _gamma

EUCLIDEAN = "euclidean"
HYPERBOLIC = "hyperbolic"
TREE = "tree"

DISK_EDGE = 1.0 - 1e-12  # points with |z| beyond this are rejected

TreePoint = namedtuple("TreePoint", "edge offset")


@dataclass(frozen=True)
class Space:
    kind: str
    dim: int = 2

    def __post_init__(self):
        if self.kind == EUCLIDEAN and self.dim < 1:
            raise ValueError("Euclidean dimension must be >= 1")
        if self.kind == TREE and self.dim < 3:
            raise ValueError("tree degree must be >= 3")
        if self.kind == HYPERBOLIC and self.dim != 2:
            raise ValueError("only the hyperbolic plane is supported")
        if self.kind not in (EUCLIDEAN, HYPERBOLIC, TREE):
            raise ValueError(f"unknown space kind {self.kind!r}")

    @classmethod
    def euclidean(cls, d=2):
        return cls(EUCLIDEAN, d)

    @classmethod
    def hyperbolic(cls):
        return cls(HYPERBOLIC, 2)

    @classmethod
    def tree(cls, d=3):
        return cls(TREE, d)

    @property
    def width(self):
        """Number of coordinate columns."""
        return self.dim if self.kind == EUCLIDEAN else 2

    def origin(self):
        if self.kind == EUCLIDEAN:
            return np.zeros(self.dim)
        if self.kind == HYPERBOLIC:
            return np.zeros(2)
        return np.array([1.0, 0.0])  # offset 0 on the first root edge

    def describe(self):
        return {"kind": self.kind, "dim": self.dim}

    @classmethod
    def from_description(cls, desc):
        return cls(desc["kind"], int(desc["dim"]))


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``lower + [0, sides)``, Euclidean only."""

    lower: tuple
    sides: tuple

    def __post_init__(self):
        if len(self.lower) != len(self.sides):
            raise ValueError("lower and sides must have equal length")
        if any(s <= 0 for s in self.sides):
            raise ValueError("box sides must be positive")

    @classmethod
    def centered(cls, side, d=2):
        return cls(tuple([-side / 2.0] * d), tuple([float(side)] * d))

    @classmethod
    def square(cls, lo, hi, d=2):
        return cls(tuple([float(lo)] * d), tuple([float(hi - lo)] * d))

    @property
    def upper(self):
        return tuple(a + s for a, s in zip(self.lower, self.sides))

    def describe(self):
        return {"type": "box", "lower": list(self.lower), "sides": list(self.sides)}


@dataclass(frozen=True)
class Ball:
    """Ball of radius ``radius`` about the origin of a hyperbolic or tree space."""

    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("window radius must be positive")

    def describe(self):
        return {"type": "ball", "radius": self.radius}


def window_from_description(desc):
    if desc["type"] == "box":
        return Box(tuple(desc["lower"]), tuple(desc["sides"]))
    return Ball(float(desc["radius"]))


# ---------------------------------------------------------------- tree addressing

def _level_starts(d):
    starts = [0, 1]
    width = d
    while starts[-1] + width < 2**62:
        starts.append(starts[-1] + width)
        width *= d - 1
    return np.array(starts, dtype=np.int64)


_STARTS = {}


def level_starts(d):
    """``starts[k]`` is the id of the first vertex at depth ``k``."""
    if d not in _STARTS:
        _STARTS[d] = _level_starts(d)
    return _STARTS[d]


def level_size(d, k):
    return 1 if k == 0 else d * (d - 1) ** (k - 1)


def vertex_level(d, g):
    g = np.asarray(g, dtype=np.int64)
    return np.searchsorted(level_starts(d), g, side="right") - 1


def vertex_parent(d, g):
    """Parent vertex id (root maps to -1)."""
    g = np.asarray(g, dtype=np.int64)
    starts = level_starts(d)
    k = vertex_level(d, g)
    idx = g - starts[k]
    par = np.where(k >= 2, starts[np.maximum(k - 1, 0)] + idx // (d - 1), 0)
    return np.where(k == 0, -1, par)


def vertex_children(d, g):
    """Children of a single vertex, in address order."""
    g = int(g)
    starts = level_starts(d)
    k = int(vertex_level(d, g))
    if k == 0:
        return list(range(1, d + 1))
    idx = g - int(starts[k])
    base = int(starts[k + 1]) + idx * (d - 1)
    return list(range(base, base + d - 1))


def tree_address(d, g):
    """Root-based path of child indices for vertex ``g`` (root is ``()``)."""
    g = int(g)
    starts = level_starts(d)
    k = int(vertex_level(d, g))
    idx = g - int(starts[k])
    path = []
    for _ in range(k - 1):
        idx, c = divmod(idx, d - 1)
        path.append(c)
    if k >= 1:
        path.append(idx)
    return tuple(reversed(path))


def tree_vertex(d, address):
    """Inverse of :func:`tree_address`."""
    address = tuple(address)
    if not address:
        return 0
    if not 0 <= address[0] < d or any(not 0 <= c < d - 1 for c in address[1:]):
        raise ValueError(f"invalid tree address {address}")
    idx = address[0]
    for c in address[1:]:
        idx = idx * (d - 1) + c
    return int(level_starts(d)[len(address)]) + idx


def lca_level(d, g1, g2):
    """Depth of the lowest common ancestor of two vertex arrays."""
    g1 = np.asarray(g1, dtype=np.int64)
    g2 = np.asarray(g2, dtype=np.int64)
    g1, g2 = np.broadcast_arrays(g1, g2)
    starts = level_starts(d)
    k1 = vertex_level(d, g1)
    k2 = vertex_level(d, g2)
    m = np.minimum(k1, k2)
    i1 = g1 - starts[k1]
    i2 = g2 - starts[k2]
    a1 = i1 // (d - 1) ** (k1 - m)
    a2 = i2 // (d - 1) ** (k2 - m)
    shape = m.shape
    out = m.ravel().copy()
    a1, a2 = a1.ravel(), a2.ravel()
    # climb only the entries whose ancestors still differ
    idx = np.nonzero((a1 != a2) & (out > 0))[0]
    a1, a2 = a1[idx], a2[idx]
    while len(idx):
        out[idx] -= 1
        a1 //= d - 1
        a2 //= d - 1
        keep = (a1 != a2) & (out[idx] > 0)
        idx, a1, a2 = idx[keep], a1[keep], a2[keep]
    return out.reshape(shape)


def vertex_distance(d, g1, g2):
    """Graph distance between tree vertices."""
    k1 = vertex_level(d, g1)
    k2 = vertex_level(d, g2)
    return k1 + k2 - 2 * lca_level(d, g1, g2)


def _ancestor_at(d, g, k, level, missing):
    """Ancestor of each vertex at ``level`` (``missing`` where the vertex is shallower)."""
    starts = level_starts(d)
    shift = np.maximum(k - level, 0)
    anc = starts[level] + (g - starts[k]) // (d - 1) ** shift
    return np.where(k >= level, anc, missing)


def _tree_cdist(d, x, y):
    """Distance matrix from per-point ancestor tables.

    Ancestry is a prefix property, so the depth of the common ancestor of two
    edges is the number of levels at which their ancestors agree.
    """
    e1, e2 = x[:, 0].astype(np.int64), y[:, 0].astype(np.int64)
    k1, k2 = vertex_level(d, e1), vertex_level(d, e2)
    top = int(min(k1.max(initial=0), k2.max(initial=0)))
    j = np.zeros((len(e1), len(e2)), dtype=np.int64)
    for level in range(1, top + 1):
        j += _ancestor_at(d, e1, k1, level, -1)[:, None] == _ancestor_at(d, e2, k2, level, -2)[None, :]
    return _tree_point_distance(d, e1[:, None], x[:, None, 1], e2[None, :], y[None, :, 1], j)


def _tree_point_distance(d, e1, s1, e2, s2, j=None):
    e1 = np.asarray(e1, dtype=np.int64)
    e2 = np.asarray(e2, dtype=np.int64)
    k1 = vertex_level(d, e1)
    k2 = vertex_level(d, e2)
    h1 = k1 - 1 + s1
    h2 = k2 - 1 + s2
    if j is None:
        j = lca_level(d, e1, e2)
    out = h1 + h2 - 2.0 * j
    # one edge is an ancestor (or equal) of the other: the meeting point is the
    # upper point itself rather than the common ancestor vertex
    anc1 = (j == k1)
    anc2 = (j == k2)
    out = np.where(anc1 & ~anc2, h2 - h1, out)
    out = np.where(anc2 & ~anc1, h1 - h2, out)
    out = np.where(anc1 & anc2, np.abs(s1 - s2), out)
    return out


def tree_point_depth(coords, d):
    e = coords[..., 0].astype(np.int64)
    return vertex_level(d, e) - 1 + coords[..., 1]


def tree_nearest_vertex(d, coords):
    """Vertex nearest to each tree point; an edge midpoint goes to the child."""
    e = coords[:, 0].astype(np.int64)
    return np.where(coords[:, 1] < 0.5, vertex_parent(d, e), e)


def tree_vertex_coords(v):
    """Vertices as tree points: the child end of their edge, or the origin."""
    v = np.asarray(v, dtype=np.int64)
    return np.stack([np.maximum(v, 1).astype(float), np.where(v > 0, 1.0, 0.0)], axis=1)


# ---------------------------------------------------------------- hyperbolic helpers

def as_complex(coords):
    coords = np.asarray(coords, dtype=float)
    return coords[..., 0] + 1j * coords[..., 1]


def from_complex(z):
    z = np.asarray(z, dtype=complex)
    return np.stack([z.real, z.imag], axis=-1)


def disk_distance(z, w):
    """Hyperbolic distance between complex disk points (broadcasting)."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    num = np.abs(z - w) ** 2
    den = (1.0 - np.abs(z) ** 2) * (1.0 - np.abs(w) ** 2)
    # arcosh(1 + x) = 2 asinh(sqrt(x / 2)), well conditioned for small x
    return 2.0 * np.arcsinh(np.sqrt(num / den))


def disk_radius(rho):
    """Euclidean modulus of a disk point at hyperbolic distance ``rho`` from 0."""
    return np.tanh(np.asarray(rho, dtype=float) / 2.0)


def hyperbolic_norm(z):
    """Hyperbolic distance from 0 of complex disk points."""
    return 2.0 * np.arctanh(np.abs(np.asarray(z, dtype=complex)))


def recenter(a, z):
    """Disk automorphism sending ``a`` to 0: ``(z - a) / (1 - conj(a) z)``."""
    return (z - a) / (1.0 - np.conj(a) * z)


def uncenter(a, z):
    """Inverse of :func:`recenter`."""
    return (z + a) / (1.0 + np.conj(a) * z)


def hyperbolic_circle(center, rho):
    """Euclidean centre and radius of the hyperbolic circle ``B(center, rho)``."""
    c = np.asarray(center, dtype=complex)
    t = np.tanh(np.asarray(rho, dtype=float) / 2.0)
    c2 = np.abs(c) ** 2
    den = 1.0 - t * t * c2
    return c * (1.0 - t * t) / den, t * (1.0 - c2) / den


def euclidean_reach(center, rho):
    """Largest Euclidean distance from ``center`` to a point of ``B(center, rho)``."""
    c = np.abs(np.asarray(center, dtype=complex))
    t = np.tanh(np.asarray(rho, dtype=float) / 2.0)
    return t * (1.0 - c * c) / (1.0 - t * c)


# ---------------------------------------------------------------- public operations

def _check_same(space, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1] != space.width or y.shape[-1] != space.width:
        raise ValueError("point does not belong to this space")
    return x, y


def as_coords(space, p):
    """Normalise a single point (tuple, complex, TreePoint) to a coordinate row."""
    if space.kind == HYPERBOLIC and (np.iscomplexobj(p) or np.ndim(p) == 0):
        p = from_complex(complex(p))
    arr = np.asarray(p, dtype=float).reshape(-1)
    if arr.shape[0] != space.width:
        raise ValueError(f"point {p!r} does not belong to {space.kind} space")
    check_coords(space, arr[None, :])
    return arr


def check_coords(space, coords):
    """Raise ``ValueError`` for coordinates outside the model."""
    coords = np.asarray(coords, dtype=float)
    if coords.ndim != 2 or coords.shape[1] != space.width:
        raise ValueError("coordinate array has the wrong shape")
    if not np.all(np.isfinite(coords)):
        raise ValueError("non-finite coordinates")
    if space.kind == HYPERBOLIC:
        if np.any(np.hypot(coords[:, 0], coords[:, 1]) > DISK_EDGE):
            raise ValueError("disk point too close to the ideal boundary")
    elif space.kind == TREE:
        if np.any(coords[:, 0] < 1) or np.any(coords[:, 0] != np.round(coords[:, 0])):
            raise ValueError("tree edge ids must be integers >= 1")
        if np.any((coords[:, 1] < 0) | (coords[:, 1] > 1)):
            raise ValueError("tree offsets must lie in [0, 1]")
    return coords


def pairwise(space, x, y):
    """Elementwise distances between broadcastable coordinate arrays."""
    x, y = _check_same(space, x, y)
    if space.kind == EUCLIDEAN:
        return np.sqrt(((x - y) ** 2).sum(axis=-1))
    if space.kind == HYPERBOLIC:
        return disk_distance(as_complex(x), as_complex(y))
    return _tree_point_distance(space.dim, x[..., 0], x[..., 1], y[..., 0], y[..., 1])


def cdist(space, x, y=None):
    """Full distance matrix between two coordinate arrays."""
    x = np.asarray(x, dtype=float)
    y = x if y is None else np.asarray(y, dtype=float)
    if space.kind == EUCLIDEAN:
        from scipy.spatial.distance import cdist as _cd
        return _cd(x, y)
    if space.kind == TREE:
        _check_same(space, x, y)
        return _tree_cdist(space.dim, x, y)
    return pairwise(space, x[:, None, :], y[None, :, :])


def distance(space, x, y):
    """Distance between two points of ``space``."""
    return float(pairwise(space, as_coords(space, x), as_coords(space, y)))


def ball_volume(space, s):
    """Measure of a ball of radius ``s`` (about a vertex, for trees)."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("radius must be nonnegative")
    if space.kind == EUCLIDEAN:
        d = space.dim
        out = math.pi ** (d / 2.0) / _gamma(d / 2.0 + 1.0) * s ** d
    elif space.kind == HYPERBOLIC:
        out = 4.0 * math.pi * np.sinh(s / 2.0) ** 2
    else:
        d = space.dim
        i = np.floor(s)
        full = d * ((d - 1.0) ** i - 1.0) / (d - 2.0)
        out = full + (s - i) * d * (d - 1.0) ** i
    return float(out) if out.ndim == 0 else out


def window_measure(space, window):
    if space.kind == EUCLIDEAN:
        if not isinstance(window, Box) or len(window.sides) != space.dim:
            raise ValueError("Euclidean windows are boxes of matching dimension")
        return float(np.prod(window.sides))
    if not isinstance(window, Ball):
        raise ValueError("hyperbolic and tree windows are balls about the origin")
    return ball_volume(space, window.radius)


def contains(space, window, coords):
    coords = np.asarray(coords, dtype=float)
    if space.kind == EUCLIDEAN:
        lo = np.asarray(window.lower)
        hi = lo + np.asarray(window.sides)
        return np.all((coords >= lo) & (coords < hi), axis=-1)
    if space.kind == HYPERBOLIC:
        return hyperbolic_norm(as_complex(coords)) <= window.radius
    return tree_point_depth(coords, space.dim) <= window.radius


def boundary_distance(space, window, coords):
    """Distance from each point to the complement of the window."""
    coords = np.asarray(coords, dtype=float)
    if space.kind == EUCLIDEAN:
        lo = np.asarray(window.lower)
        hi = lo + np.asarray(window.sides)
        return np.minimum(coords - lo, hi - coords).min(axis=-1)
    if space.kind == HYPERBOLIC:
        return window.radius - hyperbolic_norm(as_complex(coords))
    return window.radius - tree_point_depth(coords, space.dim)


def _sample_tree(d, radius, rng, n):
    top = int(math.ceil(radius))
    levels = np.arange(1, top + 1)
    part = np.minimum(1.0, radius - (levels - 1))
    weights = np.array([level_size(d, k) for k in levels], dtype=float) * part
    k = rng.choice(levels, size=n, p=weights / weights.sum())
    sizes = np.array([level_size(d, kk) for kk in k], dtype=np.int64)
    idx = np.floor(rng.random(n) * sizes).astype(np.int64)
    edge = level_starts(d)[k] + np.minimum(idx, sizes - 1)
    off = rng.random(n) * part[k - 1]
    return np.stack([edge.astype(float), off], axis=1)


def sample_uniform(space, window, rng, size=None):
    """Draw points from the normalised measure restricted to ``window``.

    Returns a single coordinate row when ``size`` is None, else an array.
    """
    n = 1 if size is None else int(size)
    window_measure(space, window)  # validates the window
    if space.kind == EUCLIDEAN:
        lo = np.asarray(window.lower, dtype=float)
        out = lo + rng.random((n, space.dim)) * np.asarray(window.sides, dtype=float)
    elif space.kind == HYPERBOLIC:
        u = rng.random(n)
        s = 2.0 * np.arcsinh(np.sqrt(u) * np.sinh(window.radius / 2.0))
        theta = rng.random(n) * 2.0 * math.pi
        r = np.tanh(s / 2.0)
        out = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)
    else:
        out = _sample_tree(space.dim, window.radius, rng, n)
    return out[0] if size is None else out
