"""Ideal-triangle tessellation of the Poincare disk and its dual 3-regular tree.

The root triangle has ideal corners ``1, w, w^2`` (``w = exp(2 pi i / 3)``).
Reflecting in its three edges generates a group whose orbit of ``0`` is the
vertex set of an embedded 3-regular tree; each vertex sits at the centre of
its triangle. A reflection across an edge is inversion in the geodesic
circle through the edge's ideal endpoints: centre ``2 e^{i theta}``, radius
``sqrt 3``, where ``theta`` points to the edge midpoint.

Vertices use the same breadth-first ids as :mod:`geometry` trees with d = 3,
with children ordered counter-clockwise after the parent.
"""

from dataclasses import dataclass
import json
import math

import numpy as np
from scipy import integrate, optimize

from . import geometry as geo
from ._rng import stream

D = 3
A_CONST = 2 * math.log((1 + math.sqrt(5)) / 2)   # midpoint spacing
CENTER_EDGE = 0.5 * math.log(3)                  # centre to edge distance
MAX_DEPTH = 30
MAX_VERTICES = 1 << 22

EDGE_ANGLES = np.array([math.pi / 3, math.pi, 5 * math.pi / 3])
EDGE_CENTERS = 2.0 * np.exp(1j * EDGE_ANGLES)
EDGE_RADIUS = math.sqrt(3.0)
IDEAL = np.exp(2j * math.pi * np.arange(3) / 3)

# reflection i as z -> M_i(conj z), M_i = [[c, -1], [1, -conj c]]
_GEN = np.array([[[c, -1.0], [1.0, -np.conj(c)]] for c in EDGE_CENTERS])


def reflect(i, z):
    """Inversion in the geodesic circle of root edge ``i``."""
    c = EDGE_CENTERS[i]
    return c + 3.0 / np.conj(np.asarray(z, dtype=complex) - c)


def _apply(M, flag, z):
    z = np.asarray(z, dtype=complex)
    z = np.where(flag, np.conj(z), z)
    return (M[..., 0, 0] * z + M[..., 0, 1]) / (M[..., 1, 0] * z + M[..., 1, 1])


def _child_generators(last, depth):
    """Generators of the children, counter-clockwise after the parent edge.

    Each reflection reverses orientation, so the cyclic order of the
    generators flips with the parity of the word length.
    """
    last = np.asarray(last)
    depth = np.asarray(depth)
    step = np.where(depth % 2 == 0, 1, -1)
    return np.stack([(last + step) % 3, (last + 2 * step) % 3], axis=-1)


@dataclass(frozen=True)
class Tessellation:
    depth: int
    coords: np.ndarray      # complex disk coordinate of every vertex
    matrix: np.ndarray      # (n, 2, 2) Mobius part of the vertex isometry
    flip: np.ndarray        # True when the isometry reverses orientation
    last: np.ndarray        # last generator of the vertex word (-1 at root)
    r: float

    @property
    def n(self):
        return len(self.coords)

    def level(self, v):
        return geo.vertex_level(D, v)

    def triangle(self, v):
        """Ideal corners of the triangle dual to ``v``."""
        return _apply(self.matrix[v], self.flip[v], IDEAL)

    def word(self, v):
        w = []
        v = int(v)
        while v > 0:
            w.append(int(self.last[v]))
            v = int(geo.vertex_parent(D, v))
        return tuple(reversed(w))

    def to_json(self):
        return json.dumps({
            "depth": self.depth,
            "r": self.r,
            "vertices": [{"id": i, "address": list(geo.tree_address(D, i)),
                          "z": [float(z.real), float(z.imag)]}
                         for i, z in enumerate(self.coords)],
        })


def build_tessellation(depth, r=None):
    """All tree vertices up to ``depth`` with their isometries and coordinates."""
    if depth < 0 or depth > MAX_DEPTH:
        raise ValueError(f"depth must be in [0, {MAX_DEPTH}]")
    starts = geo.level_starts(D)
    n = int(starts[depth + 1])
    if n > MAX_VERTICES:
        raise ValueError(f"depth {depth} needs {n} vertices (limit {MAX_VERTICES})")
    M = np.zeros((n, 2, 2), dtype=complex)
    flip = np.zeros(n, dtype=bool)
    last = np.full(n, -1, dtype=np.int64)
    M[0] = np.eye(2)
    for k in range(1, depth + 1):
        lo, hi = int(starts[k]), int(starts[k + 1])
        v = np.arange(lo, hi)
        p = geo.vertex_parent(D, v)
        if k == 1:
            g = v - 1
        else:
            rank = (v - lo) % 2
            g = _child_generators(last[p], k - 1)[np.arange(len(v)), rank]
        # compose parent isometry with the reflection: P o R_g
        G = _GEN[g]
        G = np.where(flip[p][:, None, None], np.conj(G), G)
        Mk = M[p] @ G
        # keep entries of moderate size
        Mk /= np.sqrt(np.abs(np.linalg.det(Mk)))[:, None, None]
        M[lo:hi] = Mk
        flip[lo:hi] = ~flip[p]
        last[lo:hi] = g
    coords = _apply(M, flip, np.zeros(n))
    return Tessellation(depth, coords, M, flip, last, truncation_radius() if r is None else r)


# ------------------------------------------------------------------ projection

def pull_back(z, max_steps=1 << 16, tol=1e-12):
    """Reflect points into the root triangle.

    Returns ``(letters, offsets, z0)``. Word ``i`` is
    ``letters[offsets[i]:offsets[i + 1]]``, the reflections ``g1, g2, ...`` with
    ``z[i] = R_g1 R_g2 ... (z0[i])``; it names the vertex whose triangle holds
    the point. Points on an edge stay on the near side. Words near a cusp get
    long (the triangles fan out around each ideal corner), so they are kept as
    words rather than tree ids.
    """
    z = np.array(z, dtype=complex, ndmin=1)
    n = len(z)
    steps = []
    active = np.arange(n)
    for _ in range(max_steps):
        out = np.abs(z[active, None] - EDGE_CENTERS[None, :]) < EDGE_RADIUS - tol
        moving = out.any(axis=1)
        active = active[moving]
        if not len(active):
            break
        g = np.argmax(out[moving], axis=1)
        z[active] = reflect(g, z[active])
        steps.append((active, g))
    else:
        raise ValueError("point too close to the boundary circle to project")
    lengths = np.zeros(n, dtype=np.int64)
    for k, (idx, _) in enumerate(steps):
        lengths[idx] = k + 1
    offsets = np.r_[0, np.cumsum(lengths)]
    letters = np.empty(offsets[-1], dtype=np.int8)
    for k, (idx, g) in enumerate(steps):
        letters[offsets[idx] + k] = g
    return letters, offsets, z


def word_ids(letters, offsets):
    """Breadth-first vertex ids of words (children counter-clockwise after the parent)."""
    lengths = np.diff(offsets)
    starts = geo.level_starts(D)
    if len(lengths) and lengths.max() >= len(starts) - 1:
        raise ValueError("word too long for a vertex id")
    v = np.zeros(len(lengths), dtype=np.int64)
    last = np.full(len(lengths), -1, dtype=np.int64)
    for k in range(int(lengths.max()) if len(lengths) else 0):
        m = np.nonzero(lengths > k)[0]
        g = letters[offsets[m] + k].astype(np.int64)
        if k == 0:
            v[m] = 1 + g
        else:
            gens = _child_generators(last[m], k)
            rank = np.argmax(gens == g[:, None], axis=1)
            v[m] = starts[k + 1] + (v[m] - starts[k]) * 2 + rank
        last[m] = g
    return v


def select_words(letters, offsets, idx):
    """Sub-collection of words ``idx`` in CSR form."""
    idx = np.asarray(idx, dtype=np.int64)
    lengths = np.diff(offsets)[idx]
    new = np.r_[0, np.cumsum(lengths)]
    pos = np.repeat(offsets[idx] - new[:-1], lengths) + np.arange(new[-1])
    return letters[pos], new


def word_distance(u, w):
    """Tree distance between two words: lengths minus twice the common prefix."""
    u, w = bytes(np.asarray(u, dtype=np.int8)), bytes(np.asarray(w, dtype=np.int8))
    k = 0
    while k < min(len(u), len(w)) and u[k] == w[k]:
        k += 1
    return len(u) + len(w) - 2 * k


def close_pairs(letters, offsets, K):
    """All pairs of words at tree distance at most ``K``, as ``{(i, j): dist}``.

    Two vertices within distance ``K`` share an ancestor at most ``K`` levels
    above each, so grouping words by their short truncations finds them all.
    """
    lengths = np.diff(offsets)
    groups = {}
    for i, l in enumerate(lengths.tolist()):
        b = letters[offsets[i]:offsets[i + 1]].tobytes()
        for k in range(min(K, l) + 1):
            groups.setdefault(b[:l - k], []).append((i, k))
    found = {}
    for members in groups.values():
        if len(members) < 2:
            continue
        for x in range(len(members)):
            i, ki = members[x]
            for j, kj in members[x + 1:]:
                if ki + kj <= K:
                    key = (i, j) if i < j else (j, i)
                    if ki + kj < found.get(key, K + 1):
                        found[key] = ki + kj
    return found


def project_to_tree(tess, x):
    """Nearest tree vertex id of each point and whether it lies in the core.

    The core of the triangle at ``v`` is the part within ``tess.r`` of ``v``.
    Points whose vertex is deeper than the built tessellation are rejected.
    """
    z = x if np.iscomplexobj(x) else geo.as_complex(np.atleast_2d(np.asarray(x, dtype=float)))
    letters, offsets, z0 = pull_back(z)
    if np.any(np.diff(offsets) > tess.depth):
        raise ValueError("point lies outside the built tessellation")
    return word_ids(letters, offsets), geo.hyperbolic_norm(z0) <= tess.r


def tree_distance(v, w):
    """Tree distance between vertex ids."""
    return geo.vertex_distance(D, v, w)


# ---------------------------------------------------------------- constants

def edge_midpoint(tess, v, w):
    """Hyperbolic midpoint of adjacent vertices (the foot on their shared edge)."""
    a, b = tess.coords[v], tess.coords[w]
    rb = geo.recenter(a, b)
    mid = rb / np.abs(rb) * geo.disk_radius(geo.hyperbolic_norm(rb) / 2)
    return geo.uncenter(a, mid)


def verify_constants(tess, v=0):
    """Centre-to-edge and midpoint-to-midpoint distances around vertex ``v``."""
    if tess.depth < 1 + geo.vertex_level(D, v):
        raise ValueError("need the neighbours of v")
    nb = geo.vertex_children(D, v)
    if v:
        nb = [int(geo.vertex_parent(D, v))] + nb[:2]
    mids = [edge_midpoint(tess, v, w) for w in nb[:3]]
    u = tess.coords[v]
    return {
        "dist_center_edge": float(geo.disk_distance(u, mids[0])),
        "dist_midpoints": float(geo.disk_distance(mids[0], mids[1])),
        "all_center_edge": [float(geo.disk_distance(u, m)) for m in mids],
        "all_midpoints": [float(geo.disk_distance(mids[i], mids[(i + 1) % 3]))
                          for i in range(3)],
    }


def zigzag_path(length, start_child=0):
    """Vertex ids of a path from the root turning alternately left and right."""
    path = [0, 1 + start_child]
    turn = 0
    while len(path) < length:
        kids = geo.vertex_children(D, path[-1])
        path.append(kids[turn])
        turn ^= 1
    return path[:length]


def zigzag_midpoints(tess, ell):
    """Midpoints of the first ``ell`` edges along a zig-zag path."""
    path = zigzag_path(ell + 1)
    return np.array([edge_midpoint(tess, a, b) for a, b in zip(path[:-1], path[1:])])


def distortion_constants(r):
    return A_CONST, 2 * r + math.log(3) - A_CONST


# ----------------------------------------------------------------- areas

def _edge_distance(phi):
    """Distance from the centre to the edge along a ray at angle ``phi`` from
    the edge normal, for ``0 <= phi < pi/3``."""
    return np.arctanh(np.minimum(1.0, 1.0 / (2.0 * np.cos(phi))))


def _cross_gap(r):
    """pi/3 minus the angle where the circle of radius r meets the edge.

    Uses sech^2 r directly to avoid cancellation at large r.
    """
    T = math.tanh(r)
    if T <= 0.5:
        return math.pi / 3
    sech2 = 1 / math.cosh(r) ** 2
    return math.asin(min(1.0, sech2 / (T * (math.sqrt(3) + math.sqrt(4 * T * T - 1)))))


def core_area(r):
    """Area of the points of an ideal triangle within ``r`` of its centre."""
    if r <= 0:
        return 0.0
    cr = math.cosh(r)

    def f(w):
        # phi = pi/3 - w^2 removes the inverse square root at the corner;
        # 4cos^2(phi) - 1 is rewritten to stay accurate for small w
        q = w * w
        disc = 2 * math.sin(q) ** 2 + math.sqrt(3) * math.sin(2 * q)
        ce = 2 * math.cos(math.pi / 3 - q) / math.sqrt(disc) if disc > 0 else math.inf
        return (min(cr, ce) - 1.0) * 2 * w

    w_cross = math.sqrt(_cross_gap(r))
    total = 0.0
    for lo, hi in ((0.0, w_cross), (w_cross, math.sqrt(math.pi / 3))):
        if hi > lo:
            val, _ = integrate.quad(f, lo, hi, epsabs=1e-14, epsrel=1e-13, limit=400)
            total += val
    return 6.0 * total


def core_area_closed(r):
    """Closed form of :func:`core_area` (used as a check).

    Up to the crossing angle x the core reaches the edge, and the integral of
    cosh of the edge distance is asin(2 sin x / sqrt 3). Written in terms of
    g = pi/3 - x so it stays accurate when x is close to pi/3.
    """
    if r <= 0:
        return 0.0
    g = _cross_gap(r)
    # 1 - 2 sin(x) / sqrt 3
    one_minus = 2 * math.sin(g / 2) ** 2 + math.sin(g) / math.sqrt(3)
    return math.pi - 12 * math.asin(math.sqrt(one_minus / 2)) + 6 * math.cosh(r) * g


def core_area_cartesian(r):
    """Same area by a double integral of the disk density ``4 / (1-|z|^2)^2``.

    Polar coordinates about the disk centre, Euclidean radius, numeric in both
    variables; independent of :func:`core_area`. Meant for moderate r (up to
    about 4), where the disk density is still well resolved.
    """
    T = math.tanh(r / 2)

    def outer(theta):
        c = math.cos(theta)
        s_edge = 2 * c - math.sqrt(4 * c * c - 1)
        top = min(T, s_edge)
        val, _ = integrate.quad(lambda s: 4 * s / (1 - s * s) ** 2, 0, top,
                                epsabs=1e-14, epsrel=1e-13)
        return val

    brk = math.acos(min(1.0, (T * T + 1) / (4 * T))) if T > 2 - math.sqrt(3) else 0.0
    total = 0.0
    for lo, hi in ((0.0, brk), (brk, math.pi / 3)):
        if hi > lo:
            val, _ = integrate.quad(outer, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=400)
            total += val
    return 6.0 * total


def core_area_monte_carlo(r, samples, seed, chunk=1_000_000):
    """Monte-Carlo estimate of the core area and its standard error.

    Uniform points of the hyperbolic ball ``B(0, r)``; the core is the part
    inside the root triangle.
    """
    space = geo.Space.hyperbolic()
    hits, done, j = 0, 0, 0
    while done < samples:
        m = min(chunk, samples - done)
        p = geo.sample_uniform(space, geo.Ball(r), stream(seed, "core-area", j), m)
        z = geo.as_complex(p)
        inside = np.all(np.abs(z[:, None] - EDGE_CENTERS[None, :]) >= EDGE_RADIUS, axis=1)
        hits += int(inside.sum())
        done += m
        j += 1
    vol = geo.ball_volume(space, r)
    f = hits / samples
    return vol * f, vol * math.sqrt(f * (1 - f) / samples)


_R_CACHE = {}


def truncation_radius(xtol=1e-13):
    """Radius ``r`` with core area pi/2 (half the ideal triangle)."""
    if xtol not in _R_CACHE:
        _R_CACHE[xtol] = optimize.brentq(lambda r: core_area(r) - math.pi / 2,
                                         CENTER_EDGE, 3.0, xtol=xtol, rtol=1e-15)
    return _R_CACHE[xtol]


# ------------------------------------------------------------- sampling cores

def sample_core(tess, vertices, rng):
    """One uniform point of the core of each listed vertex's triangle."""
    vertices = np.asarray(vertices, dtype=np.int64)
    out = np.empty(len(vertices), dtype=complex)
    todo = np.arange(len(vertices))
    space = geo.Space.hyperbolic()
    while len(todo):
        p = geo.as_complex(geo.sample_uniform(space, geo.Ball(tess.r), rng, len(todo)))
        ok = np.all(np.abs(p[:, None] - EDGE_CENTERS[None, :]) >= EDGE_RADIUS, axis=1)
        out[todo[ok]] = p[ok]
        todo = todo[~ok]
    v = vertices
    return _apply(tess.matrix[v], tess.flip[v], out)


def distortion_check(tess, pairs, seed):
    """Sample pairs of core points in random triangles and test the distortion bound.

    Returns (violations, worst slack, max ratio of distance to tree distance).
    """
    rng = stream(seed, "distortion")
    n = tess.n
    a, c = distortion_constants(tess.r)
    v = rng.integers(0, n, pairs)
    w = rng.integers(0, n, pairs)
    x = sample_core(tess, v, rng)
    y = sample_core(tess, w, rng)
    pv, _ = project_to_tree(tess, x)
    pw, _ = project_to_tree(tess, y)
    if np.any(pv != v) or np.any(pw != w):
        raise AssertionError("core sample projected to a different vertex")
    dt = tree_distance(v, w)
    rho = geo.disk_distance(x, y)
    bound = a * dt + c
    return {
        "pairs": pairs,
        "violations": int(np.sum(rho > bound)),
        "min_slack": float(np.min(bound - rho)),
        "a": a,
        "c": c,
    }


# ------------------------------------------------------------- transience

def transience_bound_report(ps, mr, traj, t_grid, core_radius=None, r=None,
                            certified_only=True):
    """Separation of projected active centres, intensity estimates, and R_t / t.

    Only certified active centres are used: those whose pair is certified, at
    times up to the trajectory's certified horizon. The core region is the set
    of triangle cores lying within ``core_radius`` of the origin (default: the
    trajectory's safe radius). With ``certified_only=False`` the finite-window
    matching is used as is at every grid time; active balls are disjoint in any
    stable matching, so the separation claim still applies.
    """
    from .matching import pop_times
    from .balloon import cover_report
    if ps.space.kind != geo.HYPERBOLIC:
        raise ValueError("needs a hyperbolic point set")
    r = truncation_radius() if r is None else r
    a, c = distortion_constants(r)
    T = pop_times(mr)
    cert = np.zeros(len(ps), dtype=bool)
    if mr.certified is not None:
        cert[mr.u[mr.certified]] = True
        cert[mr.v[mr.certified]] = True
    if not certified_only:
        cert[:] = True
    horizon = traj.certified_until if certified_only else math.inf
    if core_radius is not None:
        R_core = core_radius
    else:
        R_core = traj.safe_radius if certified_only else ps.window.radius
    R_core = min(R_core, ps.window.radius)
    live_t = [t for t in t_grid if t <= horizon]
    # only centres that are active and certified at some grid time matter
    cand = np.nonzero(cert & (T > (min(live_t) if live_t else math.inf)))[0]
    letters, offsets, z0 = pull_back(geo.as_complex(ps.coords[cand]))
    lengths = np.diff(offsets)
    in_core = geo.hyperbolic_norm(z0) <= r
    # cores whose vertex lies within R_core - r are entirely inside B(0, R_core)
    tess = build_tessellation(max(1, min(int(np.ceil(R_core / CENTER_EDGE / 2)) + 1, 16)), r)
    core_cells = geo.hyperbolic_norm(tess.coords) <= R_core - r
    core_area = core_cells.sum() * math.pi / 2
    short = np.nonzero(lengths <= tess.depth)[0]
    in_region = np.zeros(len(cand), dtype=bool)
    if len(short):
        in_region[short] = core_cells[word_ids(*select_words(letters, offsets, short))]
    rows = []
    for t in t_grid:
        if t > horizon:
            rows.append({"t": float(t), "certified": False})
            continue
        act = np.nonzero((T[cand] > t) & in_core)[0]
        # t-separated means no two points within distance t; the claim is
        # empty while 2(t - c)/a is negative
        s = math.floor(2 * (t - c) / a)
        K = max(s, 0) + 4
        near = close_pairs(*select_words(letters, offsets, act), K)
        dist = np.fromiter(near.values(), dtype=np.int64, count=len(near))
        rows.append({
            "t": float(t), "certified": True, "separation": s if s >= 0 else None,
            "active_core": len(act),
            # None means every pair is further apart than the search depth K
            "min_tree_distance": int(dist.min()) if len(dist) else None,
            "search_depth": K,
            "violations": int(np.sum(dist <= s)) if s >= 0 else 0,
            "lambda_hat": float(np.sum(in_region[act])) / core_area if core_area else math.nan,
            "envelope_shape": t * 4 ** (-t / a),
        })
    good = [row for row in rows
            if row.get("certified") and row["lambda_hat"] > 0 and row["envelope_shape"] > 0]
    C = max((row["lambda_hat"] / row["envelope_shape"] for row in good), default=math.nan)
    rep = cover_report(traj, t0=2.0)
    return {
        "a": a, "c": c, "r": r,
        "target_constant": math.log(4) / a,
        "core_area": core_area,
        "rows": rows,
        "envelope_C": C,
        "violations": sum(row.get("violations", 0) for row in rows),
        "min_ratio": rep["min_ratio"],
        "certified_until": traj.certified_until,
    }


def render_tessellation_svg(tess, size=600):
    """Figure of the triangles (geodesic arcs) and the embedded tree."""
    from .balloon import svg_document, svg_circle
    els = [svg_circle(0, 0, 1, "#000000", 0.004)]
    for v in range(tess.n):
        corners = tess.triangle(v)
        for i in range(3):
            p, q = corners[i], corners[(i + 1) % 3]
            els.append(_geodesic_path(p, q))
    for v in range(1, tess.n):
        p = int(geo.vertex_parent(D, v))
        els.append(_geodesic_path(tess.coords[p], tess.coords[v], color="#2060c0", width=0.004))
    return svg_document((-1.02, -1.02, 2.04, 2.04), els, size)


def _geodesic_path(p, q, color="#606060", width=0.002):
    """SVG arc for the geodesic from ``p`` to ``q`` (circle orthogonal to the disk)."""
    f = lambda x: f"{x:.6g}"
    cross = (p.real * q.imag - p.imag * q.real)
    if abs(cross) < 1e-12:
        return (f'<line x1="{f(p.real)}" y1="{f(p.imag)}" x2="{f(q.real)}" y2="{f(q.imag)}" '
                f'stroke="{color}" stroke-width="{f(width)}"/>')
    # circle through p, q and their inversions; centre solves two linear equations
    A = np.array([[p.real, p.imag], [q.real, q.imag]])
    bp = (abs(p) ** 2 + 1) / 2
    bq = (abs(q) ** 2 + 1) / 2
    cx, cy = np.linalg.solve(A, [bp, bq])
    rad = math.sqrt(cx * cx + cy * cy - 1)
    sweep = 0 if cross > 0 else 1
    return (f'<path d="M {f(p.real)} {f(p.imag)} A {f(rad)} {f(rad)} 0 0 {sweep} '
            f'{f(q.real)} {f(q.imag)}" fill="none" stroke="{color}" stroke-width="{f(width)}"/>')
