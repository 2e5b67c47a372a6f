"""
Separated sets in random regular graphs
=======================================

A t-separated set keeps all pairwise distances above t. In the union of d
random perfect matchings its density is at most about 2t log(d-1)/(d-1)^t,
which comes from an exact formula for the chance that k vertices have
disjoint tree-like neighbourhoods.
"""

import math

from balloons import treesep as ts

# the exact probability is a rational number
print("P(n=4, d=3, k=1, t=2) =", ts.exact_event_probability(4, 3, 1, 2))
p = float(ts.exact_event_probability(20, 3, 2, 2))
f = ts.sample_event(20, 3, 2, 2, 200000, seed=0)
print(f"n=20: exact {p:.5f}, Monte Carlo {f:.5f}")

# the gap between the first-moment exponent and zero at the bound
for row in ts.gap_table(range(3, 6), range(1, 5)):
    margin = "infeasible" if row["margin"] is None else f"{row['margin']:.3e}"
    print(f"d={row['d']} t={row['t']} alpha*={row['alpha_star']:.4f} margin {margin}")

# a greedy separated set sits well below the bound
g = ts.generate_configuration_model(20000, 3, seed=0)
for t in (1, 2, 3):
    s = ts.greedy_max_separated(g, t, seed=0)
    print(f"t={t}: greedy {len(s) / g.n:.4f}  bound {ts.bound_density(3, t):.4f}")

# double edges: about C(d,2)/2 on average
counts = [ts.double_edge_count(ts.generate_configuration_model(20000, 3, s)) for s in range(50)]
print(f"mean double edges {sum(counts) / len(counts):.2f}, "
      f"model {ts.expected_double_edges(20000, 3):.3f}, d(d-1)/2 = {3 * 2 / 2:g}")
print(f"log-rate check: {-ts.log_event_probability(10**6, 3, 10**4, 2) / 10**6:.6f}")
