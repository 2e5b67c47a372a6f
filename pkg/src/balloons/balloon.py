"""Balloon-process observables built on the stable matching.

A balloon around ``x`` grows at unit speed and pops at ``T_x``, half the
distance to its stable partner. ``R_t`` is the distance from the origin to the
nearest centre still inflated at time ``t``; the origin is covered at time
``t`` exactly when ``R_t <= t``.
"""

from dataclasses import dataclass
import csv
import io
import json
import math

import numpy as np

from . import geometry as geo
from .matching import pop_times
from .neighbors import dominated_close_rows, nearest


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-constant ``R_t``: ``R[k]`` holds on ``[t[k], t[k+1])``.

    The last piece runs to infinity. ``certified_until`` is the conservative
    horizon; ``strict_until`` is the same rule with the safe radius halved.
    """
    t: np.ndarray
    R: np.ndarray
    certified_until: float
    strict_until: float
    origin: np.ndarray
    safe_radius: float = math.inf

    def value(self, s):
        """``R_s`` for scalar or array ``s``."""
        k = np.searchsorted(self.t, s, side="right") - 1
        return self.R[k]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "R", "certified"])
        for t, r in zip(self.t, self.R):
            w.writerow([repr(float(t)), repr(float(r)), int(t <= self.certified_until)])
        return buf.getvalue()


def _horizon(t, R, safe):
    """sup{s : R_s + 2s < safe} for a piecewise-constant trajectory."""
    for k in range(len(t)):
        if R[k] + 2 * t[k] >= safe:
            return float(t[k])
        stop = (safe - R[k]) / 2
        if k + 1 == len(t) or stop < t[k + 1]:
            return float(stop)
    return float(t[-1])


def compute_trajectory(ps, mr, origin=None):
    """Trajectory of ``R_t`` seen from ``origin`` (default: the space's origin).

    The safe radius is the distance from the origin to the window boundary or
    to the nearest taint (endpoint of an uncertified pair, or the unmatched
    point), whichever is closer. ``R_t`` is trusted while ``R_t + 2t`` stays
    below it.
    """
    space = ps.space
    o = space.origin() if origin is None else geo.as_coords(space, origin)[0]
    if not geo.contains(space, ps.window, o[None])[0]:
        raise ValueError("origin lies outside the window")
    T = pop_times(mr)
    rho = geo.pairwise(space, np.broadcast_to(o, ps.coords.shape), ps.coords) \
        if len(ps) else np.empty(0)
    order = np.lexsort((np.arange(len(ps)), rho))
    Ts, rs = T[order], rho[order]
    # record pop times along the distance order give the breakpoints
    prev = np.maximum.accumulate(np.r_[0.0, Ts])[:-1]
    rec = np.nonzero((Ts > prev) | (np.arange(len(Ts)) == 0))[0]
    t = np.r_[0.0, Ts[rec[:-1]]] if len(rec) else np.zeros(1)
    R = rs[rec] if len(rec) else np.full(1, np.inf)
    if len(rec) and np.isfinite(Ts[rec[-1]]):
        t = np.r_[t, Ts[rec[-1]]]
        R = np.r_[R, np.inf]
    safe = float(geo.boundary_distance(space, ps.window, o[None])[0])
    if mr.certified is not None:
        taint = np.r_[mr.u[~mr.certified], mr.v[~mr.certified], mr.unmatched]
    else:
        taint = np.arange(len(ps))
    if len(taint):
        safe = min(safe, float(geo.pairwise(
            space, np.broadcast_to(o, (len(taint), space.width)), ps.coords[taint]).min()))
    return Trajectory(t, R, _horizon(t, R, safe), _horizon(t, R, safe / 2), o, safe)


def cover_report(traj, t0=1.0, until=None):
    """Covered intervals and the minimum of ``R_t / t`` on ``[t0, horizon]``.

    On a piece ``[a, b)`` with value ``R`` the infimum of ``R / t`` is ``R / b``
    (approached from the left, or attained when ``b`` is the horizon).
    """
    cu = traj.certified_until if until is None else until
    ends = np.r_[traj.t[1:], np.inf]
    covered = []
    best, arg = math.inf, None
    for a, b, r in zip(traj.t, ends, traj.R):
        if a > cu:
            break
        hi = min(b, cu)
        lo = max(a, r)
        if lo < hi or (lo == hi == cu and r <= cu):
            if covered and covered[-1][1] == lo:
                covered[-1] = (covered[-1][0], hi)
            else:
                covered.append((float(lo), float(hi)))
        if hi > t0 or (hi == t0 == cu):
            if hi > 0 and r / hi < best:
                best, arg = float(r / hi), float(hi)
    report = {
        "covered_intervals": covered,
        "min_ratio": best if arg is not None else None,
        "argmin_t": arg,
        "t0": t0,
        "certified_until": cu,
        "empty": cu < t0,
    }
    return report


def max_t_over_R(ps, mr, origin=None, t0=0.0, t1=math.inf):
    """sup of ``t / R_t`` over ``(t0, t1]`` straight from pop times.

    Point ``x`` is active up to ``T_x``, so it witnesses ``t / R_t >=
    min(T_x, t1) / rho(o, x)``; the supremum is the best such witness.
    """
    space = ps.space
    o = space.origin() if origin is None else geo.as_coords(space, origin)[0]
    T = np.minimum(pop_times(mr), t1)
    rho = geo.pairwise(space, np.broadcast_to(o, ps.coords.shape), ps.coords)
    ok = T > t0
    if not ok.any():
        return 0.0, -1
    val = np.where(ok, T / rho, -np.inf)
    k = int(np.argmax(val))
    return float(val[k]), k


def tree_separation_report(ps, mr, traj):
    """Separation of projected active centres on a tree over the certified range.

    Active balls are disjoint and projecting to the nearest vertex moves each
    centre by at most 1/2, so the projections of the certified centres active
    at time ``t >= 1/2`` should be pairwise more than ``2t - 1`` apart. Between
    pops the active set is fixed, so the binding time for a centre ``x`` is
    just before ``min(T_x, horizon)``; only pairs with ``T_y >= T_x`` matter.
    """
    space = ps.space
    if space.kind != geo.TREE:
        raise ValueError("needs a tree point set")
    H = traj.certified_until
    T = pop_times(mr)
    cert = np.zeros(len(ps), dtype=bool)
    if mr.certified is not None:
        cert[mr.u[mr.certified]] = True
        cert[mr.v[mr.certified]] = True
    live = np.nonzero(cert & (T > 0.5))[0]
    if H < 0.5 or len(live) < 2:
        return {"checked": 0, "violations": 0, "pairs": [], "horizon": H}
    vert = geo.tree_nearest_vertex(space.dim, ps.coords[live])
    pts = geo.tree_vertex_coords(vert)
    key = T[live]
    # vertex distances are integers; "more than 2H - 1" is "at least floor(2H - 1) + 1"
    lim = np.where(key <= H, 2 * key - 1, math.floor(2 * H - 1) + 1.0)
    rows = dominated_close_rows(space, pts, np.arange(len(live)), key, lim)
    bad = set()
    for x in rows.tolist():
        pool = np.nonzero(key >= key[x])[0]
        pool = pool[pool != x]
        dv = geo.cdist(space, pts[[x]], pts[pool])[0]
        for y in pool[dv < lim[x]].tolist():
            bad.add((int(min(live[x], live[y])), int(max(live[x], live[y]))))
    return {"checked": int(len(live)), "violations": len(bad), "pairs": sorted(bad), "horizon": H}


@dataclass(frozen=True)
class LatticeField:
    """``X_n``: the largest pop time over points in the unit cell ``n + [0,1)^d``."""
    cells: np.ndarray
    values: np.ndarray
    certified: np.ndarray

    def as_dict(self):
        return {tuple(int(v) for v in c): float(x) for c, x in zip(self.cells, self.values)}


def lattice_field(ps, mr, box_extent=None, t_max=math.inf):
    """Pop-time field on the unit cells of the window (or of ``box_extent``).

    A cell is certified when every point in it belongs to a certified pair.
    Pop times are clipped at ``t_max``.
    """
    if ps.space.kind != geo.EUCLIDEAN:
        raise NotImplementedError("the lattice field is defined for Euclidean space only")
    box = ps.window if box_extent is None else box_extent
    lo = np.ceil(np.asarray(box.lower, dtype=float) - 1e-12).astype(np.int64)
    hi = np.floor(np.asarray(box.upper, dtype=float) + 1e-12).astype(np.int64)
    d = ps.space.dim
    axes = [np.arange(a, b) for a, b in zip(lo, hi)]
    cells = np.array(np.meshgrid(*axes, indexing="ij")).reshape(d, -1).T
    shape = tuple(int(b - a) for a, b in zip(lo, hi))
    values = np.zeros(shape)
    good = np.ones(shape, dtype=bool)
    if len(ps) and all(shape):
        T = np.minimum(pop_times(mr), t_max)
        cert_pt = np.zeros(len(ps), dtype=bool)
        if mr.certified is not None:
            cert_pt[mr.u[mr.certified]] = True
            cert_pt[mr.v[mr.certified]] = True
        idx = np.floor(ps.coords).astype(np.int64) - lo
        inside = np.all((idx >= 0) & (idx < np.array(shape)), axis=1)
        flat = np.ravel_multi_index(idx[inside].T, shape)
        vf = values.reshape(-1)
        np.maximum.at(vf, flat, T[inside])
        gf = good.reshape(-1)
        np.logical_and.at(gf, flat, cert_pt[inside])
    return LatticeField(cells, values.reshape(-1), good.reshape(-1))


def active_balls_disjoint(ps, mr, t):
    """True when the balls ``B(x, t)`` around centres active at ``t`` are disjoint."""
    act = pop_times(mr) > t
    if act.sum() < 2:
        return True
    d, _ = nearest(ps.space, ps.coords[act])
    return bool(np.all(d > 2 * t))


def summary(ps, traj, report):
    return json.dumps({
        "seed": int(ps.seed),
        "space": ps.space.describe(),
        "window": ps.window.describe(),
        "n": len(ps),
        "min_ratio": report["min_ratio"],
        "argmin_t": report["argmin_t"],
        "certified_until": traj.certified_until,
        "strict_until": traj.strict_until,
    }, sort_keys=True)


# --- SVG ------------------------------------------------------------------

GRAY = "#9a9a9a"
BLUE = "#2060c0"


def _f(x):
    return f"{x:.6g}"


def svg_document(view, elements, size=600):
    """Wrap SVG elements; ``view`` is ``(xmin, ymin, width, height)`` in model units.

    The y axis is flipped so model coordinates read the usual way up.
    """
    x0, y0, w, h = view
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
            f'width="{size}" height="{_f(size * h / w)}" '
            f'viewBox="{_f(x0)} {_f(-(y0 + h))} {_f(w)} {_f(h)}">\n')
    body = '<g transform="scale(1,-1)">\n' + "".join(e + "\n" for e in elements) + "</g>\n"
    return head + body + "</svg>\n"


def svg_circle(cx, cy, r, color, width, fill="none", opacity=1.0):
    return (f'<circle cx="{_f(cx)}" cy="{_f(cy)}" r="{_f(r)}" fill="{fill}" '
            f'fill-opacity="{_f(opacity)}" stroke="{color}" stroke-width="{_f(width)}"/>')


def svg_line(x1, y1, x2, y2, color, width):
    return (f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" '
            f'stroke="{color}" stroke-width="{_f(width)}"/>')


def render_svg(ps, mr, t, style=None):
    """Balloons at time ``t``: active ones blue at radius ``t``, popped ones gray
    at their pop radius, with a segment joining each popped pair."""
    style = dict(style or {})
    space = ps.space
    if not (space.kind == geo.HYPERBOLIC or (space.kind == geo.EUCLIDEAN and space.dim == 2)):
        raise NotImplementedError("rendering needs a two-dimensional space")
    T = pop_times(mr)
    if space.kind == geo.EUCLIDEAN:
        lo = np.asarray(ps.window.lower, dtype=float)
        sides = np.asarray(ps.window.sides, dtype=float)
        pad = float(style.get("pad", t))
        view = (lo[0] - pad, lo[1] - pad, sides[0] + 2 * pad, sides[1] + 2 * pad)

        def circle(i, r):
            return ps.coords[i, 0], ps.coords[i, 1], r
    else:
        view = (-1.02, -1.02, 2.04, 2.04)
        z = geo.as_complex(ps.coords)

        def circle(i, r):
            c, rad = geo.hyperbolic_circle(z[i], r)
            return c.real, c.imag, rad
    lw = float(style.get("stroke", view[2] / 600))
    els = []
    if space.kind == geo.HYPERBOLIC:
        els.append(svg_circle(0, 0, 1, "#000000", lw))
    for i in range(len(ps)):
        if T[i] <= t:
            els.append(svg_circle(*circle(i, T[i]), GRAY, lw))
    done = T[mr.u] <= t
    for a, b in zip(mr.u[done], mr.v[done]):
        (xa, ya, _), (xb, yb, _) = circle(a, 0.0), circle(b, 0.0)
        els.append(svg_line(xa, ya, xb, yb, GRAY, lw))
    for i in range(len(ps)):
        if T[i] > t:
            els.append(svg_circle(*circle(i, t), BLUE, lw, fill=BLUE, opacity=0.25))
    return svg_document(view, els, int(style.get("size", 600)))
