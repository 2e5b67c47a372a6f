"""
Balloons on a planar Poisson process
====================================

Balloons grow at unit speed around the points of a Poisson process and pop
in pairs on first contact. The pairs are exactly the stable matching, so
everything below is computed from the matching alone.
"""

import sys
from pathlib import Path

import numpy as np

from balloons import balloon as bl
from balloons import geometry as geo
from balloons import matching as mt
from balloons import pointproc as pp

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output")
out.mkdir(exist_ok=True)

# a 40 x 40 window around the origin, intensity 1
plane = geo.Space.euclidean(2)
ps = pp.sample_poisson(plane, geo.Box.centered(40.0), 1.0, seed=1)
print(f"{len(ps)} points")

# rounds of mutually nearest pairs give the stable matching
m = mt.greedy_stable_matching(ps)
print(f"{len(m)} pairs in {m.round.max()} rounds, "
      f"{len(mt.verify_stability(ps, m))} blocking pairs")

# pairs that would survive any enlargement of the window are certified
mt.certify(ps, m)
print(f"{m.certified.mean():.0%} of pairs certified")

# the event-driven simulation agrees with half the matched distances
T = mt.pop_times(m)
fin = np.isfinite(T)
gap = np.max(np.abs(mt.simulate_contacts(ps)[fin] - T[fin]))
print(f"largest disagreement with the contact simulation: {gap:.1e}")

# R_t is the distance from the origin to the nearest live balloon
tr = bl.compute_trajectory(ps, m)
rep = bl.cover_report(tr, t0=0.1)
print(f"certified until t = {tr.certified_until:.2f}; "
      f"min R_t/t on [0.1, horizon] = {rep['min_ratio']}")

# snapshots: grey for popped pairs, blue for live balloons
for t in (0.1, 0.5, 1.0):
    (out / f"balloons_t{t}.svg").write_text(bl.render_svg(ps, m, t))
print(f"wrote snapshots to {out}/")
