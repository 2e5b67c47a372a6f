"""
Bounded and heavy-tailed fields
===============================

For a stationary field f on the lattice, limsup f(x)/|x| is almost surely 0
or infinite. Bounded fields sit in the first regime, Pareto(1) fields in the
second. A finite box only shows the trend.
"""

import numpy as np

from balloons import limits as lm

Ls = [25, 50, 100, 200]
for kind in ("bounded", "pareto"):
    med = lm.median_by_L(lm.trend(kind, Ls, range(20)))
    print(kind, ", ".join(f"L={L}: {v:.4g}" for L, v in med.items()))

# the tail criterion behind the split
for beta in (1.0, 2.0, 3.0):
    print(f"Pareto({beta:g}) in d=2: limsup is {lm.tail_criterion(beta, 2)}")

# the covering lemma used in the proof: a disjoint subfamily whose threefold
# enlargements cover every ball
bc = lm.random_balls(2000, seed=0)
J = lm.vitali_subcover(bc)
disjoint, covered, _ = lm.check_subcover(bc, J)
print(f"{len(J)} of {len(bc)} balls kept; disjoint {disjoint}, threefold cover {covered}")
print("largest kept radius", np.max(bc.radii[J]).round(3))
