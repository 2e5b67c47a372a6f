"""Nearest-neighbour queries for the three spaces.

One entry point, :func:`nearest`, answers "which source point is closest to each
query point" exactly, in the metric of the space:

* Euclidean: a kd-tree over the coordinates.
* Hyperbolic: a kd-tree over Poincare-disk coordinates. Euclidean candidates are
  re-ranked by hyperbolic distance and completed with a range query whose
  Euclidean radius provably contains the hyperbolic ball of the best candidate.
* Tree: a two-pass dynamic programme over the vertices (nearest source below
  and above every vertex), then a constant number of candidates per query.

Ties within ``tol`` are broken towards the smaller source index.
"""

import numpy as np
from scipy.spatial import cKDTree

from . import geometry as geo

TIE_TOL = 1e-12

_KD = dict(balanced_tree=False, compact_nodes=False)


def _pick(cand_d, cand_i, tol):
    """Row-wise min over candidate columns, ties towards the smaller index."""
    best = cand_d.min(axis=1)
    ok = cand_d <= best[:, None] + tol
    big = np.iinfo(np.int64).max
    idx = np.where(ok & (cand_i >= 0), cand_i, big).min(axis=1)
    out_d = np.where(ok & (cand_i == idx[:, None]), cand_d, np.inf).min(axis=1)
    idx = np.where(np.isfinite(best), idx, -1)
    return out_d, idx, best


def nearest(space, sources, queries=None, tol=TIE_TOL, ids=None):
    d, i, _ = nearest_with_best(space, sources, queries, tol, ids)
    return d, i


def nearest_with_best(space, sources, queries=None, tol=TIE_TOL, ids=None):
    """Distance to, and index of, the nearest source for every query.

    With ``queries=None`` every source is queried against the others
    (self excluded). With ``ids`` the queries are the sources ``ids``, each
    excluding itself. Missing neighbours are reported as ``(inf, -1)``.
    ``nearest_with_best`` also returns the untied minimum distance.
    """
    sources = np.asarray(sources, dtype=float)
    if ids is not None:
        ids = np.asarray(ids, dtype=np.int64)
        if space.kind == geo.TREE:
            d, i, b = nearest_with_best(space, sources, tol=tol)
            return d[ids], i[ids], b[ids]
        queries = sources[ids]
    elif queries is None:
        ids = np.arange(len(sources))
        queries = sources
    queries = np.asarray(queries, dtype=float)
    exclude = ids is not None
    nq = len(queries)
    if len(sources) - (1 if exclude else 0) <= 0 or nq == 0:
        return np.full(nq, np.inf), np.full(nq, -1, dtype=np.int64), np.full(nq, np.inf)
    if space.kind == geo.EUCLIDEAN:
        return _euclidean(sources, queries, ids, tol)
    if space.kind == geo.HYPERBOLIC:
        return _hyperbolic(sources, queries, ids, tol)
    return _tree(space.dim, sources, queries, exclude, tol)


def _kd_candidates(tree, queries, k, n):
    k = min(k, n)
    dd, ii = tree.query(queries, k=k)
    if k == 1:
        dd, ii = dd[:, None], ii[:, None]
    return dd, ii.astype(np.int64)


def _euclidean(sources, queries, ids, tol):
    n = len(sources)
    tree = cKDTree(sources, **_KD)
    k = 3
    rows = np.arange(len(queries))
    out_d = np.empty(len(queries))
    out_i = np.empty(len(queries), dtype=np.int64)
    out_b = np.empty(len(queries))
    while len(rows):
        dd, ii = _kd_candidates(tree, queries[rows], k, n)
        if ids is not None:
            dd = np.where(ii == ids[rows][:, None], np.inf, dd)
        d, i, b = _pick(dd, ii, tol)
        # a row is settled when the candidate list runs past the tie window
        settled = (dd.shape[1] >= n) | (dd[:, -1] > d + tol)
        out_d[rows[settled]] = d[settled]
        out_i[rows[settled]] = i[settled]
        out_b[rows[settled]] = b[settled]
        rows = rows[~settled]
        k *= 4
    return out_d, out_i, out_b


def _hyperbolic(sources, queries, ids, tol):
    n = len(sources)
    tree = cKDTree(sources, **_KD)
    zs = geo.as_complex(sources)
    zq = geo.as_complex(queries)
    rows = np.arange(len(queries))
    out_d = np.empty(len(queries))
    out_i = np.empty(len(queries), dtype=np.int64)
    out_b = np.empty(len(queries))
    dd, ii = _kd_candidates(tree, queries, 8, n)
    hd = geo.disk_distance(zq[:, None], zs[ii])
    if ids is not None:
        hd = np.where(ii == ids[:, None], np.inf, hd)
    d, i, b = _pick(hd, ii, tol)
    reach = geo.euclidean_reach(zq, d + 2 * tol)
    settled = (dd.shape[1] >= n) | (dd[:, -1] > reach * (1 + 1e-9) + 1e-15)
    out_d[settled] = d[settled]
    out_i[settled] = i[settled]
    out_b[settled] = b[settled]
    for r in np.nonzero(~settled)[0]:
        cand = np.asarray(tree.query_ball_point(queries[r], reach[r] * (1 + 1e-9) + 1e-15),
                          dtype=np.int64)
        if ids is not None:
            cand = cand[cand != ids[r]]
        h = geo.disk_distance(zq[r], zs[cand])
        cd, ci, cb = _pick(h[None, :], cand[None, :], tol)
        out_d[r], out_i[r], out_b[r] = cd[0], ci[0], cb[0]
    return out_d, out_i, out_b


def _lexmin(d1, i1, d2, i2):
    take2 = (d2 < d1) | ((d2 == d1) & (i2 >= 0) & ((i1 < 0) | (i2 < i1)))
    return np.where(take2, d2, d1), np.where(take2, i2, i1)


def _tree(d, sources, queries, exclude, tol):
    starts = geo.level_starts(d)
    se = sources[:, 0].astype(np.int64)
    ss = sources[:, 1]
    qe = queries[:, 0].astype(np.int64)
    qs = queries[:, 1]
    top = int(max(geo.vertex_level(d, se).max(), geo.vertex_level(d, qe).max()))
    nv = int(starts[top + 1])
    inf = np.inf

    order = np.lexsort((np.arange(len(se)), ss, se))
    oe, os_ = se[order], ss[order]
    first = np.r_[True, oe[1:] != oe[:-1]]
    last = np.r_[oe[1:] != oe[:-1], True]

    emin_d = np.full(nv, inf)
    emin_i = np.full(nv, -1, dtype=np.int64)
    emax_d = np.full(nv, inf)
    emax_i = np.full(nv, -1, dtype=np.int64)
    emin_d[oe[first]] = os_[first]
    emin_i[oe[first]] = order[first]
    emax_d[oe[last]] = 1.0 - os_[last]
    emax_i[oe[last]] = order[last]

    # nearest source strictly below each vertex, best two child directions
    dn1_d = np.full(nv, inf)
    dn1_i = np.full(nv, -1, dtype=np.int64)
    dn1_dir = np.full(nv, -1, dtype=np.int64)
    dn2_d = np.full(nv, inf)
    dn2_i = np.full(nv, -1, dtype=np.int64)
    for k in range(top, 0, -1):
        lo, hi = int(starts[k]), int(starts[k + 1])
        cd, ci = _lexmin(emin_d[lo:hi], emin_i[lo:hi], 1.0 + dn1_d[lo:hi], dn1_i[lo:hi])
        width = d if k == 1 else d - 1
        cd = cd.reshape(-1, width)
        ci = ci.reshape(-1, width)
        srt = np.argsort(cd, axis=1, kind="stable")
        rows = np.arange(cd.shape[0])
        plo = int(starts[k - 1])
        par = slice(plo, plo + cd.shape[0])
        dn1_d[par] = cd[rows, srt[:, 0]]
        dn1_i[par] = ci[rows, srt[:, 0]]
        dn1_dir[par] = lo + rows * width + srt[:, 0]
        dn2_d[par] = cd[rows, srt[:, 1]]
        dn2_i[par] = ci[rows, srt[:, 1]]

    # nearest source reached by leaving each vertex through its parent edge
    up_d = np.full(nv, inf)
    up_i = np.full(nv, -1, dtype=np.int64)
    for k in range(1, top + 1):
        lo, hi = int(starts[k]), int(starts[k + 1])
        c = np.arange(lo, hi)
        p = geo.vertex_parent(d, c)
        side = dn1_dir[p] == c
        sd = np.where(side, dn2_d[p], dn1_d[p])
        si = np.where(side, dn2_i[p], dn1_i[p])
        vd, vi = _lexmin(up_d[p], up_i[p], sd, si)
        up_d[lo:hi], up_i[lo:hi] = _lexmin(emax_d[lo:hi], emax_i[lo:hi], 1.0 + vd, vi)

    # candidates for each query
    p = geo.vertex_parent(d, qe)
    side = dn1_dir[p] == qe
    sd = np.where(side, dn2_d[p], dn1_d[p])
    si = np.where(side, dn2_i[p], dn1_i[p])
    vd, vi = _lexmin(up_d[p], up_i[p], sd, si)
    cols_d = [qs + vd, (1.0 - qs) + dn1_d[qe]]
    cols_i = [vi, dn1_i[qe]]

    # same-edge neighbours in sorted order
    ns = len(order)
    if exclude:
        rank = np.empty(ns, dtype=np.int64)
        rank[order] = np.arange(ns)
        neighbours = (rank - 1, rank + 1)
    else:
        # merge queries into the sorted sources; sources sort first on ties
        e_all = np.r_[oe, qe]
        s_all = np.r_[os_, qs]
        q_all = np.r_[np.zeros(ns, dtype=np.int8), np.ones(len(qe), dtype=np.int8)]
        o2 = np.lexsort((q_all, s_all, e_all))
        at = np.arange(len(o2))
        is_src = o2 < ns
        prev = np.maximum.accumulate(np.where(is_src, at, -1))
        nxt = np.minimum.accumulate(np.where(is_src, at, len(o2))[::-1])[::-1]
        where_q = np.empty(len(qe), dtype=np.int64)
        where_q[o2[~is_src] - ns] = at[~is_src]
        pq, nq_ = prev[where_q], nxt[where_q]
        neighbours = (np.where(pq >= 0, o2[np.maximum(pq, 0)], -1),
                      np.where(nq_ < len(o2), o2[np.minimum(nq_, len(o2) - 1)], ns))
    for j in neighbours:
        ok = (j >= 0) & (j < ns)
        jj = np.clip(j, 0, ns - 1)
        ok &= oe[jj] == qe
        if exclude:
            ok &= order[jj] != np.arange(len(qe))
        cols_d.append(np.where(ok, np.abs(os_[jj] - qs), inf))
        cols_i.append(np.where(ok, order[jj], -1))
    return _pick(np.stack(cols_d, axis=1), np.stack(cols_i, axis=1), tol)


def dominated_close_rows(space, coords, rows, key, lim, leaf=32):
    """Candidate rows ``x`` having some ``y != x`` with ``key[y] >= key[x]`` and
    ``d(x, y) < lim[x]``.

    The result is a superset of the true rows. A group is tested against
    every point whose key reaches its smallest key, so flagged groups are
    split by key and tested again until they have at most ``leaf`` rows.
    """
    rows = np.asarray(rows, dtype=np.int64)
    out = []
    stack = [rows[np.argsort(key[rows], kind="stable")]]
    while stack:
        grp = stack.pop()
        if len(grp) <= leaf:
            out.append(grp)
            continue
        pool = np.nonzero(key >= key[grp[0]])[0]
        _, _, best = nearest_with_best(space, coords[pool], ids=np.searchsorted(pool, grp), tol=0.0)
        flag = grp[best < lim[grp]]
        half = len(flag) // 2
        stack.extend(part for part in (flag[:half], flag[half:]) if len(part))
    return np.concatenate(out) if out else rows[:0]


def within(space, sources, queries, radii):
    """True where some source lies within ``radii`` (inclusive) of the query."""
    sources = np.asarray(sources, dtype=float)
    queries = np.asarray(queries, dtype=float)
    radii = np.broadcast_to(np.asarray(radii, dtype=float), (len(queries),))
    if len(sources) == 0 or len(queries) == 0:
        return np.zeros(len(queries), dtype=bool)
    if space.kind == geo.EUCLIDEAN:
        top = float(radii.max())
        if not np.isfinite(top):
            return within(space, sources, queries, np.where(np.isfinite(radii), radii, 0.0)) | \
                np.isinf(radii)
        # one bounded search at the largest radius, then each query's own radius
        d, _ = cKDTree(sources, **_KD).query(queries, k=1, distance_upper_bound=np.nextafter(top, np.inf))
        return d <= radii
    d, _ = nearest(space, sources, queries)
    return d <= radii
