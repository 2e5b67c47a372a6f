"""
Transience on a tree and in the hyperbolic plane
================================================

On the 3-regular tree the nearest live balloon recedes at nearly speed 2, and
projecting live centres to the nearest vertex gives well separated sets. The
hyperbolic plane is handled through an ideal-triangle tessellation whose dual
graph is the same tree.
"""

import math

import numpy as np

from balloons import balloon as bl
from balloons import geometry as geo
from balloons import hyptess as hy
from balloons import matching as mt
from balloons import pointproc as pp

# the tree: R_t against 2t on the certified range
tree = geo.Space.tree(3)
ps = pp.sample_poisson(tree, geo.Ball(14.0), 1.0, seed=2)
m = mt.greedy_stable_matching(ps)
mt.certify(ps, m)
tr = bl.compute_trajectory(ps, m)
live = tr.t <= tr.certified_until
for t, R in zip(tr.t[live], tr.R[live]):
    print(f"t = {t:5.3f}  R_t = {R:6.3f}  2t = {2 * t:6.3f}")
sep = bl.tree_separation_report(ps, m, tr)
print(f"separation violations: {sep['violations']} over {sep['checked']} centres")

# the tessellation and its constants
tess = hy.build_tessellation(8)
c = hy.verify_constants(tess, 5)
print(f"centre to edge {c['dist_center_edge']:.12f} vs log(3)/2 = {0.5 * math.log(3):.12f}")
print(f"midpoint spacing {c['dist_midpoints']:.12f} vs a = {hy.A_CONST:.12f}")

# the truncated core of each triangle has half the triangle's area
r = hy.truncation_radius()
print(f"r = {r:.10f}, core area {hy.core_area(r):.12f}, pi/2 = {math.pi / 2:.12f}")

# tree distance controls hyperbolic distance up to an additive constant
rep = hy.distortion_check(tess, 20000, seed=0)
print(f"distortion: a = {rep['a']:.4f}, c = {rep['c']:.4f}, violations {rep['violations']}")

# a small hyperbolic window: its certified horizon is short
hps = pp.sample_poisson(geo.Space.hyperbolic(), geo.Ball(8.0), 1.0, seed=3)
hm = mt.greedy_stable_matching(hps)
mt.certify(hps, hm)
htr = bl.compute_trajectory(hps, hm)
print(f"{len(hps)} disk points, certified until t = {htr.certified_until:.2f}")
