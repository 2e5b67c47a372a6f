"""
Recurrence in the plane, window by window
=========================================

In the plane the origin keeps being covered: liminf R_t / t is zero. A finite
window only certifies R_t up to some horizon, and the minimum of R_t / t over
that horizon drifts down as the window grows. The acceptance suite runs this
at L up to 2000 with 30 seeds; here it is scaled down.
"""

import math

import numpy as np

from balloons import balloon as bl
from balloons import geometry as geo
from balloons import matching as mt
from balloons import pointproc as pp

plane = geo.Space.euclidean(2)
Ls = [100, 200, 400]
seeds = range(8)

# the same seed gives nested windows of one realisation
table = {L: [] for L in Ls}
for seed in seeds:
    for L in Ls:
        ps = pp.sample_poisson(plane, geo.Box.centered(float(L)), 1.0, seed)
        m = mt.greedy_stable_matching(ps)
        mt.certify(ps, m)
        tr = bl.compute_trajectory(ps, m)
        r = bl.cover_report(tr, t0=1.0)["min_ratio"]
        table[L].append(math.inf if r is None else r)

for L in Ls:
    print(f"L = {L:4d}: median min R_t/t = {np.median(table[L]):.4f}")
