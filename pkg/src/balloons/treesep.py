"""Separated sets in random regular graphs built from coloured matchings.

The graph ``G*(n, d)`` is the union of ``d`` independent uniform perfect
matchings of ``{0..n-1}``; colour ``c`` is matching ``c``. A vertex set is
``t``-separated when every two of its vertices are at graph distance > t.

Exact event probabilities are computed in rational arithmetic. The entropy
comparison ``p(alpha) > H(alpha)`` decides whether ``alpha n``-sized separated
sets exist with vanishing expected count.
"""

from dataclasses import dataclass
from fractions import Fraction
import csv
import io
import math

import numpy as np

from . import geometry as geo
from ._rng import stream

EXACT_LIMIT = 60


@dataclass(frozen=True)
class ColoredMultigraph:
    """``partner[c, v]`` is the neighbour of ``v`` through colour ``c``."""
    partner: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.partner, dtype=np.int64)
        d, n = p.shape
        v = np.arange(n)
        if np.any((p < 0) | (p >= n)) or np.any(np.take_along_axis(p, p, axis=1) != v):
            raise ValueError("each colour must be a perfect matching")
        if np.any(p == v):
            raise ValueError("self-loops are not allowed")
        p.setflags(write=False)
        object.__setattr__(self, "partner", p)

    @property
    def n(self):
        return self.partner.shape[1]

    @property
    def d(self):
        return self.partner.shape[0]

    @property
    def adjacency(self):
        return np.ascontiguousarray(self.partner.T)

    def edges(self):
        """Rows ``(u, v, colour)`` with ``u < v``."""
        rows = []
        for c in range(self.d):
            u = np.arange(self.n)
            v = self.partner[c]
            keep = u < v
            rows.append(np.stack([u[keep], v[keep], np.full(keep.sum(), c)], axis=1))
        return np.concatenate(rows)

    def to_edge_list(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["u", "v", "color"])
        w.writerows(self.edges().tolist())
        return buf.getvalue()

    @classmethod
    def from_matchings(cls, pairs_per_colour, n):
        p = np.full((len(pairs_per_colour), n), -1, dtype=np.int64)
        for c, pairs in enumerate(pairs_per_colour):
            for a, b in pairs:
                p[c, a], p[c, b] = b, a
        return cls(p)


def _random_matchings(rng, n, d, batch=None):
    """Uniform perfect matchings: shuffle and pair consecutive entries."""
    shape = (d, n) if batch is None else (batch, d, n)
    perm = np.argsort(rng.random(shape), axis=-1)
    a, b = perm[..., 0::2], perm[..., 1::2]
    out = np.empty(shape, dtype=np.int64)
    np.put_along_axis(out, a, b, axis=-1)
    np.put_along_axis(out, b, a, axis=-1)
    return out


def generate_configuration_model(n, d, seed):
    if n < 2 or n % 2:
        raise ValueError("n must be even and at least 2")
    rows = [_random_matchings(stream(seed, "configuration-model", c), n, 1)[0]
            for c in range(d)]
    return ColoredMultigraph(np.stack(rows))


def double_edge_count(g):
    """Number of pairs of parallel edges (an edge of multiplicity m counts C(m, 2))."""
    e = g.edges()
    key = e[:, 0] * g.n + e[:, 1]
    _, mult = np.unique(key, return_counts=True)
    return int((mult * (mult - 1) // 2).sum())


def expected_double_edges(n, d):
    """Exact mean of :func:`double_edge_count`: two colours share an edge w.p. 1/(n-1)."""
    return math.comb(d, 2) * (n / 2) / (n - 1)


def tree_ball_size(d, r):
    """Vertices within distance ``r`` of a vertex of the d-regular tree."""
    return 1 + d * ((d - 1) ** r - 1) // (d - 2)


def _walks(partner, roots, depth):
    """Endpoints of non-backtracking walks of length ``depth`` from each root.

    Leaving a vertex by the colour it was entered with would step straight
    back, so that colour is skipped.
    """
    d = partner.shape[0]
    verts = roots[:, None]
    came = np.full(1, -1)
    for _ in range(depth):
        nv, nc = [], []
        for c in range(d):
            sel = np.nonzero(came != c)[0]
            nv.append(partner[c][verts[:, sel]])
            nc.append(np.full(len(sel), c))
        verts = np.concatenate(nv, axis=1)
        came = np.concatenate(nc)
    return verts


def local_tree_fraction(g, r):
    """Fraction of vertices whose radius-``r`` ball is a tree ball of the d-regular tree."""
    n = g.n
    roots = np.arange(n)
    ball = np.concatenate([_walks(g.partner, roots, k) for k in range(r + 1)], axis=1)
    outer = _walks(g.partner, roots, r + 1)
    s = np.sort(ball, axis=1)
    distinct = np.all(s[:, 1:] != s[:, :-1], axis=1)
    # an outward step landing back inside the ball closes a cycle
    key_ball = (roots[:, None] * n + ball).ravel()
    key_out = (roots[:, None] * n + outer).ravel()
    closes = np.isin(key_out, key_ball).reshape(outer.shape).any(axis=1)
    return float(np.mean(distinct & ~closes))


def _ball(adj_list, v, t):
    seen = {v}
    frontier = [v]
    for _ in range(t):
        nxt = []
        for u in frontier:
            for w in adj_list[u]:
                if w >= 0 and w not in seen:
                    seen.add(w)
                    nxt.append(w)
        frontier = nxt
    return seen


def _as_adj(g):
    return g.adjacency if isinstance(g, ColoredMultigraph) else np.asarray(g, dtype=np.int64)


def greedy_max_separated(g, t, seed=0):
    """Maximal t-separated set: visit vertices in random order, keep the free ones."""
    adj = _as_adj(g)
    adj_list = adj.tolist()
    blocked = bytearray(len(adj))
    chosen = []
    for v in stream(seed, "greedy-separated").permutation(len(adj)).tolist():
        if blocked[v]:
            continue
        chosen.append(v)
        for w in _ball(adj_list, v, t):
            blocked[w] = 1
    return np.sort(np.asarray(chosen, dtype=np.int64))


def is_separated(g, vertices, t):
    """Exhaustive BFS check that the set is t-separated."""
    adj_list = _as_adj(g).tolist()
    vs = set(int(v) for v in vertices)
    return all(not (_ball(adj_list, v, t) & vs) - {v} for v in vs)


def _power_graph(adj, t):
    n = len(adj)
    adj_list = adj.tolist()
    nb = [0] * n
    for v in range(n):
        for w in _ball(adj_list, v, t):
            if w != v:
                nb[v] |= 1 << w
    return nb


def _popcount(x):
    return bin(x).count("1")


def _clique_cover_bound(cand, nb):
    """Upper bound on the independence number of ``cand`` by greedy clique cover."""
    count = 0
    rest = cand
    while rest:
        v = (rest & -rest).bit_length() - 1
        clique = 1 << v
        common = nb[v] & rest
        while common:
            w = (common & -common).bit_length() - 1
            clique |= 1 << w
            common &= nb[w]
        rest &= ~clique
        count += 1
    return count


def exact_max_separated(g, t):
    """Largest t-separated set size by branch and bound on the distance power graph."""
    adj = _as_adj(g)
    n = len(adj)
    if n > EXACT_LIMIT:
        raise ValueError(f"exact search is limited to {EXACT_LIMIT} vertices")
    nb = _power_graph(adj, t)
    best = len(greedy_max_separated(adj, t))

    def go(cand, size):
        nonlocal best
        if not cand:
            best = max(best, size)
            return
        if size + _clique_cover_bound(cand, nb) <= best:
            return
        # branch on the candidate with most candidate neighbours
        v, deg = -1, -1
        c = cand
        while c:
            u = (c & -c).bit_length() - 1
            c &= c - 1
            k = _popcount(nb[u] & cand)
            if k > deg:
                v, deg = u, k
        if deg == 0:
            best = max(best, size + _popcount(cand))
            return
        go(cand & ~nb[v] & ~(1 << v), size + 1)
        go(cand & ~(1 << v), size)

    go((1 << n) - 1, 0)
    return best


def local_factor_separated(g, t, seed=0):
    """Vertices whose iid label is the unique minimum of their radius-t ball.

    ``g`` is a coloured multigraph or a padded adjacency array (-1 = no edge).
    """
    adj = _as_adj(g)
    n = len(adj)
    lab = stream(seed, "factor-labels").random(n)
    m = lab.copy()
    for _ in range(t):
        padded = np.r_[m, np.inf]
        m = np.minimum(m, padded[np.where(adj >= 0, adj, n)].min(axis=1))
    return np.nonzero(lab == m)[0]


def tree_ball_adjacency(d, radius):
    """Padded adjacency of the radius-``radius`` ball of the d-regular tree, with depths."""
    starts = geo.level_starts(d)
    nv = int(starts[radius + 1])
    adj = np.full((nv, d), -1, dtype=np.int64)
    v = np.arange(1, nv)
    par = geo.vertex_parent(d, v)
    adj[v, 0] = par
    # children fill the remaining slots in order
    lev = geo.vertex_level(d, v)
    rank = np.where(lev == 1, v - 1, (v - starts[lev]) % (d - 1))
    slot = np.where(par == 0, rank, rank + 1)
    adj[par, slot] = v
    return adj, geo.vertex_level(d, np.arange(nv))


# --------------------------------------------------------------- exact bounds

def bound_density(d, t):
    """Upper bound on the density of t-separated sets: 2t log(d-1) / (d-1)^t."""
    return 2 * t * math.log(d - 1) / (d - 1) ** t


def independence_bound(d):
    """The classical bound for independent sets, 2 log d / d."""
    return 2 * math.log(d) / d


def pairing_count(n):
    """Number of perfect matchings of n points, n! / (2^(n/2) (n/2)!)."""
    if n < 0 or n % 2:
        return 0
    return math.factorial(n) // (2 ** (n // 2) * math.factorial(n // 2))


def falling(m, j):
    if j < 0:
        raise ValueError("negative length")
    if m < j:
        return 0
    return math.perm(m, j)


def _b(d, i):
    return (d * (d - 1) ** i - 2) // (d - 2)


def exact_event_probability(n, d, k, t):
    """Probability, as a Fraction, that ``k`` given vertices carry disjoint tree
    neighbourhoods forcing them to be t-separated.

    For ``t = 2s`` the radius-s balls are disjoint trees. For ``t = 2s - 1`` the
    radius-(s-1) balls are disjoint trees and, colour by colour, their outward
    edges land on distinct fresh vertices. Infeasible parameters give 0.
    """
    if n % 2 or n < 2 or k < 0 or t < 1 or d < 3:
        raise ValueError("need even n >= 2, d >= 3, k >= 0, t >= 1")
    if k == 0:
        return Fraction(1)
    s = (t + 1) // 2
    gamma_n = 2 * k * ((d - 1) ** s - 1) // (d - 2)
    if gamma_n > n:
        return Fraction(0)
    num = 1
    if t % 2 == 0:
        for i in range(s):
            num *= falling(n - k * _b(d, i), k * d * (d - 1) ** i)
    else:
        for i in range(s - 1):
            num *= falling(n - k * _b(d, i), k * d * (d - 1) ** i)
        num *= falling(n - k * _b(d, s - 1), k * (d - 1) ** (s - 1)) ** d
    return Fraction(num) * Fraction(pairing_count(n - gamma_n), pairing_count(n)) ** d


def log_event_probability(n, d, k, t):
    """Floating log of :func:`exact_event_probability` via log-gamma."""
    if k == 0:
        return 0.0
    lf = lambda m, j: math.lgamma(m + 1) - math.lgamma(m - j + 1) if m >= j else -math.inf
    ln = lambda m: (math.lgamma(m + 1) - (m / 2) * math.log(2) - math.lgamma(m / 2 + 1)
                    if m >= 0 else -math.inf)
    s = (t + 1) // 2
    gamma_n = 2 * k * ((d - 1) ** s - 1) // (d - 2)
    out = 0.0
    if t % 2 == 0:
        for i in range(s):
            out += lf(n - k * _b(d, i), k * d * (d - 1) ** i)
    else:
        for i in range(s - 1):
            out += lf(n - k * _b(d, i), k * d * (d - 1) ** i)
        out += d * lf(n - k * _b(d, s - 1), k * (d - 1) ** (s - 1))
    return out + d * (ln(n - gamma_n) - ln(n))


def _walk_layers(partner, k, depth):
    """Non-backtracking walks from 0..k-1: list of (verts, colour in) per depth."""
    B, d, n = partner.shape
    rows = np.arange(B)[:, None]
    verts = np.broadcast_to(np.arange(k), (B, k)).copy()
    came = np.full((B, k), -1)
    layers = [(verts, came)]
    for _ in range(depth):
        nv, nc = [], []
        for c in range(d):
            sel = np.nonzero(came[0] != c)[0]
            nv.append(partner[rows, c, verts[:, sel]])
            nc.append(np.full(len(sel), c))
        verts = np.concatenate(nv, axis=1)
        came = np.broadcast_to(np.concatenate(nc), verts.shape).copy()
        layers.append((verts, came))
    return layers


def _all_distinct(a):
    s = np.sort(a, axis=1)
    return np.all(s[:, 1:] != s[:, :-1], axis=1)


def sample_event(n, d, k, t, samples, seed, chunk=20000):
    """Fraction of sampled ``G*(n, d)`` where the event holds for vertices 0..k-1."""
    s = (t + 1) // 2
    inner = s if t % 2 == 0 else s - 1
    hits = 0
    done = 0
    j = 0
    while done < samples:
        b = min(chunk, samples - done)
        partner = _random_matchings(stream(seed, "event-mc", j), n, d, batch=b)
        layers = _walk_layers(partner, k, inner)
        ball = np.concatenate([v for v, _ in layers], axis=1)
        ok = _all_distinct(ball)
        if t % 2 == 1:
            leaves, came = layers[-1]
            rows = np.arange(b)[:, None]
            for c in range(d):
                sel = np.nonzero(came[0] != c)[0]
                out = partner[rows, c, leaves[:, sel]]
                ok &= _all_distinct(out)
                ok &= ~(out[:, :, None] == ball[:, None, :]).any(axis=(1, 2))
        hits += int(ok.sum())
        done += b
        j += 1
    return hits / samples


@dataclass(frozen=True)
class BoundParams:
    d: int
    t: int
    alpha: float

    @property
    def s(self):
        return (self.t + 1) // 2

    @property
    def even(self):
        return self.t % 2 == 0

    def alpha_i(self, i):
        return self.alpha * (self.d * (self.d - 1) ** i - 2) / (self.d - 2)

    def beta_i(self, i):
        return self.alpha * self.d * (self.d - 1) ** i

    @property
    def gamma(self):
        return 2 * self.alpha * ((self.d - 1) ** self.s - 1) / (self.d - 2)


def entropy(a):
    """Binary entropy in nats."""
    if a <= 0 or a >= 1:
        return 0.0
    return -a * math.log(a) - (1 - a) * math.log(1 - a)


def _xlogx(x):
    return 0.0 if x == 0 else x * math.log(x)


def exponent(params):
    """p(alpha) with P(event) = exp(-n p(alpha) + o(n)); None when infeasible."""
    d, a, s = params.d, params.alpha, params.s
    g = params.gamma
    if params.even:
        a_s = params.alpha_i(s)
        if not (a_s < 1 and g < 1):
            return None
        return -(_xlogx(1 - a) - _xlogx(1 - a_s) + (d / 2) * _xlogx(1 - g))
    a_in = params.alpha_i(s - 1)
    if not (a_in < 1 and g < 1):
        return None
    return -(_xlogx(1 - a) + (d - 1) * _xlogx(1 - a_in) - (d / 2) * _xlogx(1 - g))


def gap_margin(d, t):
    """p(alpha*) - H(alpha*) at alpha* = bound_density(d, t); None if infeasible."""
    a = bound_density(d, t)
    p = exponent(BoundParams(d, t, a))
    if p is None or a >= 1:
        return None
    return p - entropy(a)


def sufficient_condition(d, t):
    """(d-1)^(2s) >= (2/alpha)(1 - log alpha) at alpha*, for even t."""
    if t % 2:
        raise ValueError("stated for even t only")
    a = bound_density(d, t)
    return (d - 1) ** t >= (2 / a) * (1 - math.log(a))


def gap_table(ds=range(3, 11), ts=range(1, 9)):
    rows = []
    for d in ds:
        for t in ts:
            m = gap_margin(d, t)
            rows.append({"d": d, "t": t, "alpha_star": bound_density(d, t),
                         "margin": m, "feasible": m is not None})
    return rows


def sweep(ds, ts, n, seeds):
    """Greedy densities against the bound; rows match the sweep CSV columns."""
    rows = []
    for d in ds:
        for seed in seeds:
            g = generate_configuration_model(n, d, seed)
            for t in ts:
                rows.append({"d": d, "t": t, "alpha_star": bound_density(d, t),
                             "margin": gap_margin(d, t),
                             "greedy_density": len(greedy_max_separated(g, t, seed)) / n,
                             "n": n, "seed": seed})
    return rows


def rows_to_csv(rows, columns):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in columns})
    return buf.getvalue()
