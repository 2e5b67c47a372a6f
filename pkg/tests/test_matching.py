import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from balloons import geometry as geo
from balloons import matching as mt
from balloons import pointproc as pp

E1 = geo.Space.euclidean(1)
E2 = geo.Space.euclidean(2)
H = geo.Space.hyperbolic()

SPACES = [
    ("E1", E1, geo.Box((0.0,), (500.0,))),
    ("E2", E2, geo.Box.centered(22.0)),
    ("E3", geo.Space.euclidean(3), geo.Box.centered(8.0, 3)),
    ("H", H, geo.Ball(5.0)),
    ("T3", geo.Space.tree(3), geo.Ball(6.5)),
]


def line(*xs):
    return np.array([[x] for x in xs], dtype=float)


def test_three_points_on_a_line():
    for method in ("index", "naive"):
        m = mt.greedy_stable_matching(line(0, 1, 3), E1, method=method)
        assert m.pairs() == {(0, 1)}
        assert m.round.tolist() == [1] and m.dist.tolist() == [1.0]
        assert m.unmatched.tolist() == [2]
    assert mt.brute_force_matching(line(0, 1, 3), E1).pairs() == {(0, 1)}


def test_four_points_rounds():
    m = mt.greedy_stable_matching(line(0, 1, 3, 7), E1)
    assert list(zip(m.u.tolist(), m.v.tolist(), m.round.tolist(), m.dist.tolist())) == \
        [(0, 1, 1, 1.0), (2, 3, 2, 4.0)]
    assert len(m.unmatched) == 0


def test_empty_and_duplicates():
    m = mt.greedy_stable_matching(np.empty((0, 2)), E2)
    assert len(m) == 0 and len(m.unmatched) == 0
    assert len(mt.brute_force_matching(np.empty((0, 2)), E2)) == 0
    with pytest.raises(ValueError):
        mt.greedy_stable_matching(line(0, 1, 1), E1)
    with pytest.raises(ValueError):
        mt.brute_force_matching(line(2, 2), E1)
    with pytest.raises(ValueError):
        mt.greedy_stable_matching(line(0, 1), E1, method="magic")


def test_brute_force_size_guard():
    with pytest.raises(ValueError):
        mt.brute_force_matching(np.arange(5001, dtype=float)[:, None], E1)


def _same(a, b):
    return (np.array_equal(a.u, b.u) and np.array_equal(a.v, b.v)
            and np.array_equal(a.round, b.round) and np.array_equal(a.unmatched, b.unmatched))


@pytest.mark.parametrize("name,space,window", SPACES, ids=[s[0] for s in SPACES])
def test_matchers_agree_with_oracle(name, space, window):
    for seed in range(100):
        ps = pp.sample_binomial(space, window, 300 + seed % 7, seed)
        fast = mt.greedy_stable_matching(ps)
        assert _same(fast, mt.brute_force_matching(ps)), seed
        if seed % 10 == 0:
            assert _same(fast, mt.greedy_stable_matching(ps, method="naive")), seed


@pytest.mark.parametrize("name,space,window", SPACES, ids=[s[0] for s in SPACES])
def test_matchers_agree_at_2000_points(name, space, window):
    for seed in range(3):
        ps = pp.sample_binomial(space, window, 2000, 1000 + seed)
        assert _same(mt.greedy_stable_matching(ps), mt.brute_force_matching(ps))


@pytest.mark.parametrize("name,space,window", SPACES, ids=[s[0] for s in SPACES])
def test_structure_and_stability(name, space, window):
    ps = pp.sample_binomial(space, window, 1001, 7)
    m = mt.greedy_stable_matching(ps)
    ids = np.r_[m.u, m.v, m.unmatched]
    assert sorted(ids.tolist()) == list(range(len(ps)))
    assert len(m.unmatched) == len(ps) % 2
    assert np.all(np.diff(m.dist) >= 0)
    assert np.all(m.u < m.v)
    assert mt.verify_stability(ps, m) == []


def test_round_is_dependency_depth():
    ps = pp.sample_binomial(E2, geo.Box.centered(20.0), 400, 3)
    m = mt.greedy_stable_matching(ps)
    full = geo.cdist(E2, ps.coords)
    rnd = np.zeros(len(ps), dtype=int)
    rnd[m.u] = m.round
    rnd[m.v] = m.round
    for a, b, d, r in zip(m.u, m.v, m.dist, m.round):
        near = (full[a] < d) | (full[b] < d)
        near[[a, b]] = False
        assert r == 1 + rnd[near].max(initial=0)


def test_verify_stability_examples():
    pts = line(0, 1, 3, 7)
    bad = mt._result(4, [np.array([0, 1])], [np.array([3, 2])],
                     [np.array([7.0, 2.0])], [np.array([1, 1])])
    assert len(mt.verify_stability(pts, bad, E1)) >= 1
    assert (0, 1) in mt.verify_stability(pts, bad, E1)
    single = mt.greedy_stable_matching(line(0, 1), E1)
    assert mt.verify_stability(line(0, 1), single, E1) == []


def test_verify_stability_large_euclidean_branch():
    ps = pp.sample_binomial(E2, geo.Box.centered(60.0), 3000, 1)
    m = mt.greedy_stable_matching(ps)
    assert mt.verify_stability(ps, m) == []
    # swapping partners of two neighbouring pairs breaks stability
    u, v = m.u.copy(), m.v.copy()
    u[0], v[0], u[1], v[1] = m.u[0], m.u[1], m.v[0], m.v[1]
    d = geo.pairwise(E2, ps.coords[u], ps.coords[v])
    broken = mt.MatchingResult(m.n, u, v, d, m.round, m.unmatched)
    assert mt.verify_stability(ps, broken)


def dense_blocking_pairs(space, coords, res):
    """Every blocking pair from full distance rows."""
    reach = np.full(len(coords), np.inf)
    reach[res.u] = res.dist
    reach[res.v] = res.dist
    um = res.unmatched
    bad = {(int(um[0]), int(y)) for y in um[1:]}
    dm = geo.cdist(space, coords)
    r, c = np.nonzero(dm < np.minimum(reach[:, None], reach[None, :]))
    bad |= {(int(a), int(b)) for a, b in zip(r, c) if a < b and res.partner[a] != b}
    return sorted(bad)


@pytest.mark.parametrize("space,window", [(E2, geo.Box.centered(60.0)), (H, geo.Ball(8.0)),
                                          (geo.Space.tree(3), geo.Ball(11.0))],
                         ids=["E2", "H", "T3"])
def test_large_verification_branches_list_every_pair(space, window):
    ps = pp.sample_poisson(space, window, 1.0, 2)
    assert len(ps) > 2000
    m = mt.greedy_stable_matching(ps)
    # re-pair a handful of pairs crosswise
    u, v = m.u.copy(), m.v.copy()
    k = np.random.default_rng(0).choice(len(m), 10, replace=False)
    v[k[::2]], v[k[1::2]] = m.v[k[1::2]], m.v[k[::2]]
    d = geo.pairwise(space, ps.coords[u], ps.coords[v])
    broken = mt.MatchingResult(m.n, u, v, d, m.round, m.unmatched)
    got = mt.verify_stability(ps, broken)
    assert got and got == dense_blocking_pairs(space, ps.coords, broken)


def test_pop_times():
    m = mt.greedy_stable_matching(line(0, 4), E1)
    assert mt.pop_times(m).tolist() == [2.0, 2.0]
    m = mt.greedy_stable_matching(line(0, 1, 3), E1)
    assert mt.pop_times(m)[2] == np.inf


@pytest.mark.parametrize("name,space,window", SPACES, ids=[s[0] for s in SPACES])
def test_pop_times_match_contact_simulation(name, space, window):
    for seed in range(5):
        ps = pp.sample_binomial(space, window, 200, seed)
        m = mt.greedy_stable_matching(ps)
        np.testing.assert_allclose(mt.pop_times(m), mt.simulate_contacts(ps), atol=1e-9)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.integers(-10**6, 10**6), min_size=0, max_size=40, unique=True))
def test_line_matching_property(ks):
    # integer lattice values keep every gap far above the tie tolerance
    xs = [k / 7.0 for k in ks]
    pts = line(*xs) if xs else np.empty((0, 1))
    m = mt.greedy_stable_matching(pts, E1)
    oracle = mt.brute_force_matching(pts, E1)
    assert m.pairs() == oracle.pairs()
    assert mt.verify_stability(pts, m, E1) == []
    assert len(m.unmatched) <= 1


def test_json_roundtrip():
    ps = pp.sample_binomial(E2, geo.Box.centered(10.0), 51, 2)
    m = mt.greedy_stable_matching(ps)
    mt.certify(ps, m)
    back = mt.MatchingResult.from_json(m.to_json())
    assert _same(back, m)
    np.testing.assert_array_equal(back.dist, m.dist)
    np.testing.assert_array_equal(back.certified, m.certified)


def test_certify_examples():
    box = geo.Box((0.0, 0.0), (100.0, 100.0))
    inner = pp.PointSet(E2, box, np.array([[50.0, 50.0], [51.0, 50.0]]))
    m = mt.greedy_stable_matching(inner)
    assert mt.certify(inner, m).tolist() == [True]

    edge = pp.PointSet(E2, box, np.array([[0.5, 50.0], [2.5, 50.0]]))
    m = mt.greedy_stable_matching(edge)
    assert mt.certify(edge, m).tolist() == [False]
    assert {i for i, _ in m.taint_log} == {0, 1}


def test_certified_pairs_survive_window_growth():
    # the full 100-seed run is in the acceptance suite
    L = 50.0
    disagreements = 0
    for seed in range(10):
        small = pp.sample_poisson(E2, geo.Box((0.0, 0.0), (L, L)), 1.0, seed)
        big = pp.sample_poisson(E2, geo.Box((-L, -L), (3 * L, 3 * L)), 1.0, seed)
        ms = mt.greedy_stable_matching(small)
        mt.certify(small, ms)
        mb = mt.greedy_stable_matching(big)
        # translate small ids to big ids by coordinates
        key = {tuple(p): i for i, p in enumerate(big.coords)}
        to_big = np.array([key[tuple(p)] for p in small.coords])
        partner = mb.partner
        for a, b in zip(ms.u[ms.certified], ms.v[ms.certified]):
            disagreements += partner[to_big[a]] != to_big[b]
    assert disagreements == 0
