"""Stable matching of a finite point set and its certification.

The matching is built in rounds: every point whose nearest active neighbour
points back at it is matched, the pair is removed, and the process repeats.
Mutually-nearest pairs are always in the (unique, for distinct distances)
stable matching, so this reproduces the greedy closest-pair construction while
doing vectorised nearest-neighbour queries instead of a priority queue. The
round in which a pair forms is its dependency depth: one more than the deepest
pair owning a point within the pair's distance of either endpoint.
"""

from dataclasses import dataclass, field
import heapq
import json

import numpy as np

from . import geometry as geo
from .neighbors import TIE_TOL, dominated_close_rows, nearest_with_best, within

BRUTE_FORCE_LIMIT = 5000


@dataclass
class MatchingResult:
    """Matched pairs ``(u[i], v[i])`` at distance ``dist[i]`` formed in ``round[i]``.

    ``u < v`` for every pair and pairs are listed in removal order (increasing
    distance, ties by ``u``). ``taint_log`` holds ``(id, scale)`` for every
    endpoint of an uncertified pair.
    """
    n: int
    u: np.ndarray
    v: np.ndarray
    dist: np.ndarray
    round: np.ndarray
    unmatched: np.ndarray
    certified: np.ndarray = None
    taint_log: list = field(default_factory=list)

    def __len__(self):
        return len(self.u)

    @property
    def partner(self):
        m = np.full(self.n, -1, dtype=np.int64)
        m[self.u] = self.v
        m[self.v] = self.u
        return m

    @property
    def pair_of(self):
        """Index of the pair containing each point, -1 if unmatched."""
        p = np.full(self.n, -1, dtype=np.int64)
        k = np.arange(len(self.u))
        p[self.u] = k
        p[self.v] = k
        return p

    def pairs(self):
        return set(zip(self.u.tolist(), self.v.tolist()))

    def to_json(self):
        out = {
            "n": int(self.n),
            "pairs": [[int(a), int(b), float(d), int(r)]
                      for a, b, d, r in zip(self.u, self.v, self.dist, self.round)],
            "unmatched": self.unmatched.tolist(),
            "taint_log": [[int(i), float(s)] for i, s in self.taint_log],
        }
        if self.certified is not None:
            out["certified"] = self.certified.astype(int).tolist()
        return json.dumps(out)

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        p = np.asarray(obj["pairs"], dtype=float).reshape(-1, 4)
        cert = obj.get("certified")
        return cls(obj["n"], p[:, 0].astype(np.int64), p[:, 1].astype(np.int64), p[:, 2],
                   p[:, 3].astype(np.int64), np.asarray(obj["unmatched"], dtype=np.int64),
                   None if cert is None else np.asarray(cert, dtype=bool),
                   [(int(i), float(s)) for i, s in obj["taint_log"]])


def _result(n, us, vs, ds, rs):
    u = np.concatenate(us) if us else np.empty(0, dtype=np.int64)
    v = np.concatenate(vs) if vs else np.empty(0, dtype=np.int64)
    d = np.concatenate(ds) if ds else np.empty(0)
    r = np.concatenate(rs) if rs else np.empty(0, dtype=np.int64)
    a, b = np.minimum(u, v), np.maximum(u, v)
    order = np.lexsort((a, d))
    seen = np.zeros(n, dtype=bool)
    seen[a] = True
    seen[b] = True
    return MatchingResult(n, a[order], b[order], d[order], r[order], np.nonzero(~seen)[0])


def _locality_order(space, coords):
    """Permutation that puts nearby points close together in memory."""
    n = len(coords)
    if space.kind == geo.TREE or n < 4096:
        return np.arange(n)
    lo = coords.min(axis=0)
    span = np.maximum(coords.max(axis=0) - lo, 1e-300)
    cells = max(1, int(round((n / 64.0) ** (1.0 / coords.shape[1]))))
    key = np.minimum((cells * (coords - lo) / span).astype(np.int64), cells - 1)
    return np.lexsort(key.T[::-1])


def _as_space_coords(points, space=None):
    if space is None:
        return points.space, points.coords
    if hasattr(points, "coords"):
        return space, points.coords
    if space.kind == geo.HYPERBOLIC and np.iscomplexobj(points):
        points = geo.from_complex(np.asarray(points))
    coords = np.asarray(points, dtype=float).reshape(-1, space.width)
    geo.check_coords(space, coords)
    return space, coords


def greedy_stable_matching(points, space=None, method="index", tol=TIE_TOL):
    """Stable matching of ``points`` (a PointSet, or coordinates plus ``space``).

    ``method="index"`` runs rounds of mutual nearest neighbours on a spatial
    index; ``method="naive"`` does the same with dense distance matrices.
    Duplicate points raise ``ValueError``.
    """
    space, coords = _as_space_coords(points, space)
    n = len(coords)
    if method == "naive":
        if n > BRUTE_FORCE_LIMIT:
            raise ValueError(f"naive matching is limited to {BRUTE_FORCE_LIMIT} points")
    elif method != "index":
        raise ValueError(f"unknown method {method!r}")
    perm = _locality_order(space, coords)
    pts = coords[perm]
    active = np.arange(n)
    us, vs, ds, rs = [], [], [], []
    incremental = method == "index" and space.kind != geo.TREE
    redo = np.ones(n, dtype=bool)
    d = np.full(n, np.inf)
    best = np.full(n, np.inf)
    j = np.full(n, -1, dtype=np.int64)
    rnd = 0
    while len(active) > 1:
        rnd += 1
        sub = pts[active]
        if method == "naive":
            full = geo.cdist(space, sub)
            np.fill_diagonal(full, np.inf)
            best = full.min(axis=1)
            j = np.argmax(full <= best[:, None] + tol, axis=1)
            d = full[np.arange(len(sub)), j]
        elif not incremental or redo.all():
            d, j, best = nearest_with_best(space, sub, tol=tol)
        elif redo.any():
            # removing points cannot change a neighbour that survived and was
            # an untied minimum, so only the other rows are asked again
            rows = np.nonzero(redo)[0]
            d[rows], j[rows], best[rows] = nearest_with_best(space, sub, tol=tol, ids=rows)
        if rnd == 1 and np.any(d <= 0):
            raise ValueError("duplicate points cannot be matched")
        k = np.arange(len(sub))
        mutual = (j[j] == k) & (k < j)
        if not mutual.any():
            # only possible through near-ties; fall back to the closest pair
            a = int(np.argmin(d))
            mutual[min(a, j[a])] = True
            j[min(a, j[a])] = max(a, j[a])
        a = k[mutual]
        b = j[mutual]
        us.append(perm[active[a]])
        vs.append(perm[active[b]])
        ds.append(d[mutual])
        rs.append(np.full(len(a), rnd, dtype=np.int64))
        keep = np.ones(len(sub), dtype=bool)
        keep[a] = False
        keep[b] = False
        newpos = np.full(len(sub), -1, dtype=np.int64)
        newpos[keep] = np.arange(int(keep.sum()))
        j = newpos[j[keep]]
        d, best = d[keep], best[keep]
        redo = (j < 0) | (d > best)
        active = active[keep]
    return _result(n, us, vs, ds, rs)
    return _result(n, us, vs, ds, rs)


def brute_force_matching(points, space=None):
    """Oracle: scan all pairs by increasing distance, accept when both are free.

    Round indices follow their definition directly: one plus the largest round
    among pairs owning a point strictly within the pair distance of an endpoint.
    """
    space, coords = _as_space_coords(points, space)
    n = len(coords)
    if n > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force is limited to {BRUTE_FORCE_LIMIT} points")
    full = geo.cdist(space, coords)
    iu, ju = np.triu_indices(n, 1)
    dd = full[iu, ju]
    if len(dd) and dd.min() <= 0:
        raise ValueError("duplicate points cannot be matched")
    free = np.ones(n, dtype=bool)
    rnd_of = np.zeros(n, dtype=np.int64)
    us, vs, ds, rs = [], [], [], []
    left = n
    # scan pairs in (distance, i, j) order, one distance band at a time; the
    # band is cut at a value so equal distances never straddle two bands
    cand = np.arange(len(dd))
    batch = 8 * n
    while left >= 2 and len(cand):
        if len(cand) > batch:
            th = np.partition(dd[cand], batch - 1)[batch - 1]
            take = dd[cand] <= th
            sel, cand = cand[take], cand[~take]
        else:
            sel, cand = cand, cand[:0]
        sel = sel[np.lexsort((ju[sel], iu[sel], dd[sel]))]
        for e in sel.tolist():
            a, b = iu[e], ju[e]
            if free[a] and free[b]:
                delta = dd[e]
                near = (full[a] < delta) | (full[b] < delta)
                r = 1 + int(rnd_of[near].max(initial=0))
                free[a] = free[b] = False
                rnd_of[a] = rnd_of[b] = r
                us.append([a]), vs.append([b]), ds.append([delta]), rs.append([r])
                left -= 2
        cand = cand[free[iu[cand]] & free[ju[cand]]]
    return _result(n, [np.asarray(x, dtype=np.int64) for x in us],
                   [np.asarray(x, dtype=np.int64) for x in vs],
                   [np.asarray(x, dtype=float) for x in ds],
                   [np.asarray(x, dtype=np.int64) for x in rs])


def pop_times(result):
    """Time at which each balloon pops: half its pair distance, inf if unmatched."""
    t = np.full(result.n, np.inf)
    t[result.u] = result.dist / 2
    t[result.v] = result.dist / 2
    return t


def simulate_contacts(points, space=None):
    """Oracle for pop times: run the balloon dynamics as a contact-event queue.

    Balloons grow at unit rate from every point; when two live balloons touch
    both pop. Returns the pop time of every point.
    """
    space, coords = _as_space_coords(points, space)
    n = len(coords)
    if n > BRUTE_FORCE_LIMIT:
        raise ValueError(f"event simulation is limited to {BRUTE_FORCE_LIMIT} points")
    full = geo.cdist(space, coords)
    heap = [(full[a, b] / 2, a, b) for a in range(n) for b in range(a + 1, n)]
    heapq.heapify(heap)
    popped = np.full(n, np.inf)
    while heap:
        t, a, b = heapq.heappop(heap)
        if np.isinf(popped[a]) and np.isinf(popped[b]):
            popped[a] = popped[b] = t
    return popped


def _kd_candidate_pairs(coords, rows, reach, chunk=1 << 18):
    """Pairs ``(x, y)`` with ``|x - y|`` up to about ``reach[x]`` and ``reach[y] >= reach[x]``.

    A blocking pair is found from its endpoint with the smaller reach, so each
    row only searches points reaching at least as far. Those live in nested
    level sets, each a quarter the size of the one below it.
    """
    from scipy.spatial import cKDTree
    n = len(coords)
    rank = np.empty(n, dtype=np.int64)
    rank[_locality_order(geo.Space.euclidean(coords.shape[1]), coords)] = np.arange(n)
    out = []
    for level, pool in _level_sets(rows, reach):
        pool = pool[np.argsort(rank[pool])]
        level = level[np.argsort(rank[level])]
        tree = cKDTree(coords[pool], balanced_tree=False, compact_nodes=False)
        m = len(pool)
        for c0 in range(0, len(level), chunk):
            todo, k = level[c0:c0 + chunk], 4
            while len(todo):
                kk = min(k, m)
                dd, ii = tree.query(coords[todo], k=kk)
                dd, ii = dd.reshape(len(todo), kk), ii.reshape(len(todo), kk)
                lim = (reach[todo] * (1 + 1e-12))[:, None]
                r, c = np.nonzero(dd <= lim)
                out.append(np.stack([todo[r], pool[ii[r, c]]], axis=1))
                # rows whose k-th neighbour is still inside the reach need more
                more = (dd[:, -1] <= lim[:, 0]) & (kk < m)
                todo, k = todo[more], k * 4
    return np.concatenate(out) if out else np.empty((0, 2), dtype=np.int64)


def _level_sets(rows, reach):
    """Split ``rows`` by increasing reach into levels, each pooled with every
    point reaching at least as far. Pools shrink by a quarter per level."""
    order = rows[np.argsort(reach[rows], kind="stable")]
    lo = 0
    while lo < len(order):
        pool = np.nonzero(reach >= reach[order[lo]])[0]
        hi = min(len(order), max(lo + 1, len(order) - max(1, (len(order) - lo) // 4)))
        yield order[lo:hi], pool
        lo = hi


def _suspect_rows(space, coords, rows, reach, tol):
    """Rows whose nearest point reaching at least as far is inside their reach.

    Every blocking pair has such a row as its shorter-reach endpoint. Pairs
    within 1e-12 (absolute plus relative) of the reach count as ties.
    """
    lim = reach * (1 - 1e-12) - 1e-12 - tol
    return dominated_close_rows(space, coords, rows, reach, lim)


def verify_stability(points, result, space=None, tol=0.0):
    """List blocking pairs ``(x, y)``: closer to each other than to their partners."""
    space, coords = _as_space_coords(points, space)
    n = len(coords)
    reach = np.full(n, np.inf)
    reach[result.u] = result.dist
    reach[result.v] = result.dist
    partner = result.partner
    bad = []
    if len(result.unmatched) > 1:
        um = result.unmatched
        bad.extend((int(um[0]), int(y)) for y in um[1:])
    fin = np.nonzero(np.isfinite(reach))[0]
    if space.kind == geo.EUCLIDEAN and n > 2000:
        cand = _kd_candidate_pairs(coords, fin, reach)
    else:
        cols = np.arange(n)
        if n > 2000:
            # suspects sorted by reach only need partners reaching as far
            fin = _suspect_rows(space, coords, fin, reach, tol)
            fin = fin[np.argsort(reach[fin], kind="stable")]
        cand = []
        step = max(1, min(512, (1 << 23) // max(n, 1)))
        for lo in range(0, len(fin), step):
            rows = fin[lo:lo + step]
            if n > 2000:
                cols = np.nonzero(reach >= reach[rows[0]])[0]
            dm = geo.cdist(space, coords[rows], coords[cols])
            r, c = np.nonzero(dm < reach[rows, None])
            cand.extend(zip(rows[r], cols[c]))
    if len(cand):
        c = np.asarray(cand, dtype=np.int64).reshape(-1, 2)
        c = c[(c[:, 0] != c[:, 1]) & (partner[c[:, 0]] != c[:, 1])]
        if len(c):
            dxy = geo.pairwise(space, coords[c[:, 0]], coords[c[:, 1]])
            blocking = dxy < np.minimum(reach[c[:, 0]], reach[c[:, 1]]) - tol
            c = c[blocking]
            bad.extend({(int(min(a, b)), int(max(a, b))) for a, b in c})
    return sorted(set(bad))


def certify(points, result, window=None, space=None):
    """Flag pairs that are guaranteed to appear in the matching of any extension.

    A pair at distance ``delta`` is certified when both endpoints lie further
    than ``delta`` from the window boundary and no endpoint of an uncertified,
    earlier-round pair lies within ``delta`` of either endpoint. Every point
    closer than ``delta`` to an endpoint belongs to an earlier round, so this
    is enough for the pair to survive any enlargement of the window. Sets
    ``result.certified`` and ``result.taint_log`` and returns the flags.
    """
    if space is None:
        space, coords, window = points.space, points.coords, points.window
    else:
        space, coords = _as_space_coords(points, space)
    bd = geo.boundary_distance(space, window, coords)
    delta_pt = np.full(result.n, np.inf)
    delta_pt[result.u] = result.dist
    delta_pt[result.v] = result.dist
    # endpoints within reach of an uncertified endpoint of an earlier round
    blocked = np.zeros(result.n, dtype=bool)
    cert = np.zeros(len(result), dtype=bool)
    log = []
    if len(result) == 0:
        result.certified, result.taint_log = cert, log
        return cert
    by_round = np.argsort(result.round, kind="stable")
    rounds = result.round[by_round]
    bounds = np.r_[0, np.nonzero(np.diff(rounds))[0] + 1, len(rounds)]
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        k = by_round[lo:hi]
        a, b, dl = result.u[k], result.v[k], result.dist[k]
        ok = (bd[a] > dl) & (bd[b] > dl) & ~blocked[a] & ~blocked[b]
        cert[k] = ok
        taint = np.r_[a[~ok], b[~ok]]
        log.extend(zip(taint.tolist(), np.r_[dl[~ok], dl[~ok]].tolist()))
        if len(taint) and hi < len(rounds):
            later = by_round[hi:]
            rest = np.r_[result.u[later], result.v[later]]
            rest = rest[~blocked[rest]]
            if len(rest):
                blocked[rest] |= within(space, coords[taint], coords[rest], delta_pt[rest])
    result.certified, result.taint_log = cert, log
    return cert
