"""Vitali subcovers and finite-size demonstrations of the limsup 0-1 law.

For a stationary ergodic field ``X`` on Z^d, ``limsup X_n / |n|`` is either 0
or infinite. Nothing finite can test that, so the helpers here only show the
two regimes on constructed fields: bounded iid values drift to 0, heavy-tailed
iid values (infinite d-th moment) blow up.
"""

from dataclasses import dataclass
from fractions import Fraction
import csv
import io
import math

import numpy as np
from scipy.spatial import cKDTree

from ._rng import stream

FIELD_KINDS = ("bounded", "pareto", "constant", "square")


@dataclass(frozen=True, eq=False)
class BallCollection:
    centers: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        r = np.asarray(self.radii, dtype=float).reshape(-1)
        if len(c) != len(r):
            raise ValueError("centres and radii differ in length")
        if np.any(~np.isfinite(r)) or np.any(r <= 0):
            raise ValueError("radii must be positive and finite")
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite centre")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "radii", r)

    def __len__(self):
        return len(self.radii)


def random_balls(n, seed, extent=100.0, rmax=5.0, d=2):
    """``n`` balls with uniform centres in ``[0, extent]^d`` and radii in ``(0, rmax]``."""
    rng = stream(seed, "vitali")
    centers = rng.random((n, d)) * extent
    radii = rmax * (1.0 - rng.random(n))
    return BallCollection(centers, radii)


# --- exact comparisons ----------------------------------------------------

def _exact_sign(x, y, s):
    """Sign of |x - y| - s with exact rational arithmetic on the float inputs."""
    if s < 0:
        return 1
    d2 = sum((Fraction(a) - Fraction(b)) ** 2 for a, b in zip(x, y))
    s2 = Fraction(s) ** 2
    return (d2 > s2) - (d2 < s2)


def _compare(ci, cj, s):
    """Vectorised sign of ``|ci - cj| - s``, with exact fallback near zero."""
    ci, cj = np.broadcast_arrays(ci, cj)
    d2 = np.sum((ci - cj) ** 2, axis=-1)
    s2 = np.where(s < 0, -1.0, s * s)
    sign = np.sign(d2 - s2).astype(int)
    unsure = (np.abs(d2 - s2) <= 1e-9 * np.maximum(1.0, np.abs(s2))) & (s >= 0)
    for k in np.nonzero(unsure)[0]:
        sign[k] = _exact_sign(ci[k], cj[k], float(s[k]))
    return sign


def vitali_subcover(bc):
    """Greedy disjoint subcollection, largest radius first.

    A ball is kept when it is disjoint from every ball kept so far (closed
    balls, so touching counts as meeting). Each discarded ball meets a kept
    ball at least as large, hence lies in its threefold blow-up. Returns the
    kept indices in increasing order.
    """
    n = len(bc)
    if n == 0:
        return np.empty(0, dtype=np.int64)
    order = np.lexsort((np.arange(n), -bc.radii))
    kept = np.empty(n, dtype=np.int64)
    m = 0
    for i in order:
        if m:
            k = kept[:m]
            s = bc.radii[k] + bc.radii[i]
            d2 = np.sum((bc.centers[k] - bc.centers[i]) ** 2, axis=1)
            close = np.nonzero(d2 <= s * s * (1 + 1e-9))[0]
            if len(close):
                sign = _compare(bc.centers[k[close]], bc.centers[i][None, :], s[close])
                if np.any(sign <= 0):
                    continue
        kept[m] = i
        m += 1
    return np.sort(kept[:m])


def check_subcover(bc, J, blowup=3):
    """Exact check of the two subcover properties.

    Returns ``(disjoint, covered, witness)``: ``witness[i]`` is a kept ball
    whose ``blowup``-fold enlargement contains ball ``i`` (``-1`` if none).
    """
    J = np.asarray(J, dtype=np.int64)
    n = len(bc)
    witness = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return True, True, witness
    c, r = bc.centers, bc.radii
    rmax = float(r.max())
    disjoint = True
    if len(J) > 1:
        tree = cKDTree(c[J])
        pairs = tree.query_pairs(2 * rmax * (1 + 1e-9), output_type="ndarray")
        if len(pairs):
            a, b = J[pairs[:, 0]], J[pairs[:, 1]]
            disjoint = bool(np.all(_compare(c[a], c[b], r[a] + r[b]) > 0))
    tree = cKDTree(c[J])
    for i in range(n):
        cand = J[tree.query_ball_point(c[i], blowup * rmax * (1 + 1e-9))]
        if not len(cand):
            continue
        # |x_i - x_j| + r_i <= blowup * r_j
        sign = _compare(c[cand], np.broadcast_to(c[i], c[cand].shape), blowup * r[cand] - r[i])
        ok = np.nonzero(sign <= 0)[0]
        if len(ok):
            witness[i] = cand[ok[0]]
    return disjoint, bool(np.all(witness >= 0)), witness


# --- fields and the limsup estimator ----------------------------------------

@dataclass(frozen=True, eq=False)
class Field:
    """Values on lattice cells; ``cells`` is an ``(m, d)`` integer array."""
    cells: np.ndarray
    values: np.ndarray


def _as_field(field):
    if isinstance(field, dict):
        cells = np.array(list(field.keys()), dtype=np.int64)
        return cells.reshape(len(field), -1), np.array(list(field.values()), dtype=float)
    return np.asarray(field.cells, dtype=np.int64), np.asarray(field.values, dtype=float)


def _sup_norms(cells):
    return np.abs(cells).max(axis=1) if cells.size else np.zeros(len(cells), dtype=np.int64)


def _require_box(norms, L, d):
    have = np.bincount(norms[norms <= L], minlength=L + 1)
    want = np.array([(2 * k + 1) ** d - max(2 * k - 1, 0) ** d for k in range(L + 1)])
    if np.any(have[1:] < want[1:]):
        raise ValueError(f"field is not defined on the whole box of radius {L}")


def limsup_estimator(field, L):
    """max of X_n / |n| over cells with 0 < |n| <= L, sup norm."""
    if L < 1:
        raise ValueError("L must be at least 1")
    cells, values = _as_field(field)
    norms = _sup_norms(cells)
    _require_box(norms, int(L), cells.shape[1])
    m = (norms > 0) & (norms <= L)
    return float(np.max(values[m] / norms[m]))


def shell_estimator(field, L):
    """max of X_n / |n| over the dyadic shell L/2 < |n| <= L.

    The plain estimator is pinned by the cells next to the origin; the shell
    maximum tracks the tail supremum that the limsup is about.
    """
    if L < 1:
        raise ValueError("L must be at least 1")
    cells, values = _as_field(field)
    norms = _sup_norms(cells)
    _require_box(norms, int(L), cells.shape[1])
    m = (norms > L / 2) & (norms <= L)
    return float(np.max(values[m] / norms[m]))


def tail_criterion(beta, d):
    """Whether an iid Pareto(beta) field on Z^d has an infinite limsup.

    The limsup of X_n / |n| is infinite exactly when E X^d is infinite, which for
    P(X >= x) = x^(-beta) happens iff beta <= d.
    """
    if beta <= 0:
        raise ValueError("tail index must be positive")
    return "infinite" if beta <= d else "finite"


def lattice_box(L, d):
    axes = [np.arange(-L, L + 1)] * d
    return np.array(np.meshgrid(*axes, indexing="ij")).reshape(d, -1).T


def iid_field(kind, L, d, seed, beta=1.0):
    """Field on ``[-L, L]^d``.

    ``bounded``: uniform on [0, 1]; ``pareto``: P(X >= x) = x^(-beta) for
    x >= 1; ``constant``: 1; ``square``: |n|^2. Values at a cell do not
    depend on ``L``, so fields for growing ``L`` are nested.
    """
    if kind not in FIELD_KINDS:
        raise ValueError(f"unknown field kind {kind!r}")
    cells = lattice_box(L, d)
    norms = _sup_norms(cells)
    if kind == "constant":
        return Field(cells, np.ones(len(cells)))
    if kind == "square":
        return Field(cells, norms.astype(float) ** 2)
    values = np.empty(len(cells))
    # one stream per sup-norm shell, cells in lexicographic order within it
    order = np.lexsort(cells.T[::-1])
    order = order[np.argsort(norms[order], kind="stable")]
    bounds = np.searchsorted(norms[order], np.arange(L + 2))
    for k in range(L + 1):
        idx = order[bounds[k]:bounds[k + 1]]
        u = stream(seed, f"field-{kind}", k).random(len(idx))
        values[idx] = u if kind == "bounded" else (1.0 - u) ** (-1.0 / beta)
    return Field(cells, values)


def trend(kind, Ls, seeds, d=2, beta=1.0, estimator=shell_estimator):
    """Rows ``{L, estimate, seed, field_kind}`` for each seed and each ``L``."""
    rows = []
    top = max(Ls)
    for seed in seeds:
        f = iid_field(kind, top, d, seed, beta)
        for L in Ls:
            rows.append({"L": int(L), "estimate": estimator(f, L),
                         "seed": int(seed), "field_kind": kind})
    return rows


def median_by_L(rows):
    Ls = sorted({r["L"] for r in rows})
    return {L: float(np.median([r["estimate"] for r in rows if r["L"] == L])) for L in Ls}


def is_monotone(values, increasing):
    v = np.asarray(list(values))
    diff = np.diff(v)
    return bool(np.all(diff > 0) if increasing else np.all(diff < 0))


def trend_csv(rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["L", "estimate", "seed", "field_kind"],
                       lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({**r, "estimate": repr(r["estimate"])})
    return buf.getvalue()


def cell_bracket(field, min_norm=2):
    """Bounds on max ``X / |x|`` over the points behind a cell-maximum field.

    A point ``x`` in cell ``n + [0, 1)^d`` has ``|n| - 1 <= |x| <= |n| + 1`` in
    the sup norm, so over cells with ``|n| >= min_norm`` the point-level ratio
    lies between the two returned values.
    """
    if min_norm < 2:
        raise ValueError("cells next to the origin have no upper bound")
    cells, values = _as_field(field)
    norms = _sup_norms(cells)
    m = (norms >= min_norm) & (values > 0)
    if not m.any():
        return 0.0, 0.0
    return (float(np.max(values[m] / (norms[m] + 1))),
            float(np.max(values[m] / (norms[m] - 1))))
