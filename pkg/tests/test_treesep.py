import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from balloons import treesep as ts


def all_matchings(n):
    """Every perfect matching of range(n) as a partner array."""
    if n == 0:
        yield []
        return

    def rec(rest):
        if not rest:
            yield []
            return
        a = rest[0]
        for j in range(1, len(rest)):
            for m in rec(rest[1:j] + rest[j + 1:]):
                yield [(a, rest[j])] + m

    for pairs in rec(list(range(n))):
        p = [0] * n
        for a, b in pairs:
            p[a], p[b] = b, a
        yield p


def event_holds(partner, k, t):
    """Direct check of the structured event for roots 0..k-1."""
    d = len(partner)
    s = (t + 1) // 2
    inner = s if t % 2 == 0 else s - 1
    seen = list(range(k))
    frontier = [(v, -1) for v in range(k)]
    for _ in range(inner):
        nxt = [(partner[c][v], c) for v, came in frontier for c in range(d) if c != came]
        seen += [v for v, _ in nxt]
        frontier = nxt
    if len(set(seen)) != len(seen):
        return False
    if t % 2 == 1:
        for c in range(d):
            out = [partner[c][v] for v, came in frontier if came != c]
            if len(set(out)) != len(out) or set(out) & set(seen):
                return False
    return True


def enumerate_probability(n, d, k, t):
    ms = list(all_matchings(n))
    hits = sum(event_holds(g, k, t) for g in itertools.product(ms, repeat=d))
    return Fraction(hits, len(ms) ** d)


def test_two_ninths():
    p = ts.exact_event_probability(4, 3, 1, 2)
    assert p == Fraction(2, 9)
    assert enumerate_probability(4, 3, 1, 2) == Fraction(2, 9)


@pytest.mark.parametrize("k,t", [(1, 1), (2, 1), (3, 1), (1, 2), (2, 2), (1, 3), (1, 4)])
def test_exact_formula_matches_enumeration(k, t):
    assert ts.exact_event_probability(6, 3, k, t) == enumerate_probability(6, 3, k, t)


def test_empty_event_and_infeasible():
    assert ts.exact_event_probability(10, 3, 0, 5) == 1
    assert ts.exact_event_probability(6, 3, 2, 2) == 0
    with pytest.raises(ValueError):
        ts.exact_event_probability(5, 3, 1, 2)


def test_monte_carlo_agreement():
    p = float(ts.exact_event_probability(20, 3, 2, 2))
    samples = 10**6
    f = ts.sample_event(20, 3, 2, 2, samples, seed=1)
    assert abs(f - p) < 4 * math.sqrt(p * (1 - p) / samples)


@pytest.mark.parametrize("n,d,k,t", [(20, 3, 2, 2), (60, 4, 3, 3), (200, 3, 10, 4), (1000, 5, 7, 1)])
def test_log_probability_cross_check(n, d, k, t):
    exact = ts.exact_event_probability(n, d, k, t)
    ref = math.log(exact.numerator) - math.log(exact.denominator)
    assert ts.log_event_probability(n, d, k, t) == pytest.approx(ref, rel=1e-10, abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 30), st.integers(3, 5), st.integers(1, 4))
def test_probability_nonincreasing_in_k(half, d, t):
    n = 2 * half
    ps = [ts.exact_event_probability(n, d, k, t) for k in range(6)]
    assert all(a >= b for a, b in zip(ps, ps[1:]))
    assert all(0 <= p <= 1 for p in ps)


def test_pairing_count_recurrence():
    assert ts.pairing_count(2) == 1
    for n in range(4, 80, 2):
        assert ts.pairing_count(n) == (n - 1) * ts.pairing_count(n - 2)
    assert ts.pairing_count(6) == len(list(all_matchings(6)))


@pytest.mark.parametrize("d,t,alpha", [(3, 2, 0.05), (3, 3, 0.03), (4, 4, 0.005), (5, 1, 0.1)])
def test_exponent_is_the_log_rate(d, t, alpha):
    # the exponent is the n -> infinity rate of the exact probability
    n = 10**7
    rate = -ts.log_event_probability(n, d, round(alpha * n), t) / n
    assert rate == pytest.approx(ts.exponent(ts.BoundParams(d, t, alpha)), rel=1e-5)


def test_bound_density_examples():
    assert ts.bound_density(3, 2) == pytest.approx(math.log(2), abs=1e-12)
    assert ts.bound_density(3, 1) == pytest.approx(math.log(2), abs=1e-12)
    assert ts.bound_density(4, 4) == pytest.approx(8 * math.log(3) / 81)
    assert ts.bound_density(4, 4) == pytest.approx(0.1085, abs=1e-4)
    # the classical independent-set bound uses d where the theorem uses d - 1
    assert ts.independence_bound(3) == pytest.approx(2 * math.log(3) / 3)


def test_gamma_identity():
    for d in range(3, 11):
        for t in range(2, 9, 2):
            for alpha in (1e-4, 0.01, ts.bound_density(d, t)):
                p = ts.BoundParams(d, t, alpha)
                assert p.alpha_i(p.s) - p.alpha_i(0) == pytest.approx(d / 2 * p.gamma, abs=1e-12)
                assert p.alpha_i(0) == pytest.approx(alpha)
                assert p.beta_i(0) == pytest.approx(alpha * d)


def test_gap_table():
    rows = ts.gap_table()
    assert len(rows) == 64
    feasible = [r for r in rows if r["feasible"]]
    assert feasible
    assert all(r["margin"] > 0 for r in feasible)
    # d = 3, t = 2 has alpha_s = 4 alpha* > 1, so the claim there is flagged
    assert ts.gap_margin(3, 2) is None
    for r in rows:
        p = ts.BoundParams(r["d"], r["t"], r["alpha_star"])
        top = p.alpha_i(p.s) if p.even else p.alpha_i(p.s - 1)
        assert r["feasible"] == (top < 1 and p.gamma < 1)


def test_sufficient_condition():
    for d in range(3, 11):
        for t in (2, 4, 6, 8):
            assert ts.sufficient_condition(d, t)
    with pytest.raises(ValueError):
        ts.sufficient_condition(3, 3)


def test_entropy():
    assert ts.entropy(0.5) == pytest.approx(math.log(2))
    assert ts.entropy(0.0) == 0.0 and ts.entropy(1.0) == 0.0


# --------------------------------------------------------------- graphs

def test_two_vertex_graph():
    g = ts.generate_configuration_model(2, 3, 0)
    assert g.partner.tolist() == [[1, 0]] * 3
    assert ts.double_edge_count(g) == 3
    assert ts.local_tree_fraction(g, 1) == 0
    assert len(ts.greedy_max_separated(g, 1)) == 1
    assert ts.exact_max_separated(g, 1) == 1
    with pytest.raises(ValueError):
        ts.generate_configuration_model(7, 3, 0)


def test_graph_invariants_and_reproducibility():
    g = ts.generate_configuration_model(1000, 4, 3)
    for c in range(4):
        assert np.all(g.partner[c][g.partner[c]] == np.arange(1000))
        assert np.all(g.partner[c] != np.arange(1000))
    assert np.array_equal(g.partner, ts.generate_configuration_model(1000, 4, 3).partner)
    lines = g.to_edge_list().splitlines()
    assert lines[0] == "u,v,color" and len(lines) == 1 + 4 * 500
    with pytest.raises(ValueError):
        ts.ColoredMultigraph(np.array([[1, 2, 0]]))


def test_matchings_are_uniform():
    # each of the 15 matchings of 6 points should appear equally often
    counts = {}
    for s in range(3000):
        p = tuple(ts.generate_configuration_model(6, 3, s).partner[0])
        counts[p] = counts.get(p, 0) + 1
    assert len(counts) == 15
    obs = np.array(list(counts.values()))
    chi2 = ((obs - 200) ** 2 / 200).sum()
    assert chi2 < 36.1  # 0.999 quantile at 14 degrees of freedom


def test_double_edges_mean():
    n, d = 10**4, 3
    counts = np.array([ts.double_edge_count(ts.generate_configuration_model(n, d, s))
                       for s in range(200)])
    mean = ts.expected_double_edges(n, d)
    assert mean == pytest.approx(1.5, abs=1e-3)
    assert abs(counts.mean() - mean) < 3 * math.sqrt(mean / 200)


def test_local_tree_fraction():
    g = ts.generate_configuration_model(10**5, 3, 0)
    fr = [ts.local_tree_fraction(g, r) for r in (1, 2, 3, 4)]
    assert fr[1] >= 0.99
    assert all(a >= b for a, b in zip(fr, fr[1:]))
    small = ts.generate_configuration_model(12, 3, 1)
    fr = [ts.local_tree_fraction(small, r) for r in (1, 2, 3)]
    assert all(a >= b for a, b in zip(fr, fr[1:]))


def test_six_cycle():
    cyc = ts.ColoredMultigraph.from_matchings([[(0, 1), (2, 3), (4, 5)], [(1, 2), (3, 4), (5, 0)]], 6)
    assert ts.exact_max_separated(cyc, 2) == 2
    assert ts.exact_max_separated(cyc, 1) == 3
    best = max(len(c) for r in range(7) for c in itertools.combinations(range(6), r)
               if ts.is_separated(cyc, c, 2))
    assert best == 2


@pytest.mark.parametrize("seed", range(10))
def test_exact_against_exhaustive_search(seed):
    g = ts.generate_configuration_model(14, 3, seed)
    for t in (1, 2):
        best = 0
        for r in range(1, 8):
            if any(ts.is_separated(g, c, t) for c in itertools.combinations(range(14), r)):
                best = r
        assert ts.exact_max_separated(g, t) == best
        greedy = ts.greedy_max_separated(g, t, seed)
        assert ts.is_separated(g, greedy, t)
        assert len(greedy) <= best


def test_exact_size_guard():
    with pytest.raises(ValueError):
        ts.exact_max_separated(ts.generate_configuration_model(62, 3, 0), 1)


def test_greedy_density_below_bound():
    g = ts.generate_configuration_model(10**5, 3, 0)
    for t in (1, 2, 3):
        s = ts.greedy_max_separated(g, t, 0)
        assert len(s) / g.n <= ts.bound_density(3, t) + 0.02
        # greedy output is maximal: every other vertex is within t of the set
        assert ts.is_separated(g, s, t)
    small = ts.generate_configuration_model(2000, 3, 1)
    s = ts.greedy_max_separated(small, 2, 1)
    assert ts.is_separated(small, s, 2)
    assert not ts.is_separated(small, np.r_[s, np.setdiff1d(np.arange(2000), s)[:1]], 2)


def test_factor_on_tree_ball():
    radius, t = 16, 1
    adj, depth = ts.tree_ball_adjacency(3, radius)
    assert len(adj) == ts.tree_ball_size(3, radius)
    chosen = np.zeros(len(adj), dtype=bool)
    chosen[ts.local_factor_separated(adj, t, seed=5)] = True
    interior = depth <= radius - t
    p = 1 / ts.tree_ball_size(3, t)
    n = interior.sum()
    assert n >= 10**5 // 2
    assert abs(chosen[interior].mean() - p) < 3 * math.sqrt(p * (1 - p) / n)


def test_factor_on_graph():
    g = ts.generate_configuration_model(20000, 3, 2)
    for t in (1, 2, 3):
        s = ts.local_factor_separated(g, t, seed=t)
        assert ts.is_separated(g, s, t)
        assert len(s) / g.n <= ts.bound_density(3, t)


def test_sweep_csv():
    rows = ts.sweep([3], [1, 2], 1000, [0, 1])
    cols = ["d", "t", "alpha_star", "margin", "greedy_density", "n", "seed"]
    text = ts.rows_to_csv(rows, cols)
    lines = text.splitlines()
    assert lines[0] == ",".join(cols) and len(lines) == 5
    # the infeasible margin is written as an empty field
    assert lines[1].split(",")[3] == ""
