from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from balloons import limits as lm


def brute_force_check(bc, J):
    """Exact pairwise check of disjointness and the threefold cover."""
    F = lambda x: Fraction(float(x))
    c = [[F(x) for x in row] for row in bc.centers]
    r = [F(x) for x in bc.radii]
    d2 = lambda i, j: sum((a - b) ** 2 for a, b in zip(c[i], c[j]))
    disjoint = all(d2(i, j) > (r[i] + r[j]) ** 2 for i in J for j in J if i < j)
    # |x_i - x_j| + r_i <= 3 r_j, squared once the right side is nonnegative
    covered = all(any(3 * r[j] - r[i] >= 0 and d2(i, j) <= (3 * r[j] - r[i]) ** 2 for j in J)
                  for i in range(len(r)))
    return disjoint, covered


def test_vitali_examples():
    one = lm.BallCollection([[1.0, 2.0]], [0.5])
    assert lm.vitali_subcover(one).tolist() == [0]
    twins = lm.BallCollection([[0.0, 0.0], [0.0, 0.0]], [1.0, 1.0])
    J = lm.vitali_subcover(twins)
    assert J.tolist() == [0]
    assert lm.check_subcover(twins, J)[:2] == (True, True)
    # closed balls that touch are not disjoint
    touching = lm.BallCollection([[0.0], [2.0]], [1.0, 1.0])
    assert lm.vitali_subcover(touching).tolist() == [0]
    apart = lm.BallCollection([[0.0], [2.5]], [1.0, 1.0])
    assert lm.vitali_subcover(apart).tolist() == [0, 1]
    # equal radii touching in a row: the middle one meets both
    row = lm.BallCollection([[0.0, 0.0], [0.0, 9.0], [0.0, 3.0]], [3.0, 3.0, 3.0])
    J = lm.vitali_subcover(row)
    assert J.tolist() == [0, 1] and brute_force_check(row, J) == (True, True)
    empty = lm.BallCollection(np.empty((0, 2)), [])
    assert len(lm.vitali_subcover(empty)) == 0


def test_ball_collection_validation():
    with pytest.raises(ValueError):
        lm.BallCollection([[0.0, 0.0]], [0.0])
    with pytest.raises(ValueError):
        lm.BallCollection([[0.0, 0.0]], [1.0, 2.0])
    with pytest.raises(ValueError):
        lm.BallCollection([[np.nan, 0.0]], [1.0])


@pytest.mark.parametrize("seed", range(20))
def test_vitali_against_brute_force(seed):
    bc = lm.random_balls(150, seed, extent=30.0)
    J = lm.vitali_subcover(bc)
    assert brute_force_check(bc, J) == (True, True)
    disjoint, covered, witness = lm.check_subcover(bc, J)
    assert disjoint and covered
    assert set(witness.tolist()) <= set(J.tolist())


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 12), st.integers(0, 12), st.integers(1, 4)),
                min_size=1, max_size=30))
def test_vitali_on_lattice_balls(specs):
    # integer data makes exact tangencies common
    arr = np.array(specs, dtype=float)
    bc = lm.BallCollection(arr[:, :2], arr[:, 2])
    J = lm.vitali_subcover(bc)
    assert brute_force_check(bc, J) == (True, True)
    assert lm.check_subcover(bc, J)[:2] == (True, True)


def test_vitali_large_collections():
    for seed in range(3):
        bc = lm.random_balls(10**4, seed)
        assert lm.check_subcover(bc, lm.vitali_subcover(bc))[:2] == (True, True)


def test_check_subcover_detects_failures():
    bc = lm.BallCollection([[0.0, 0.0], [1.0, 0.0], [10.0, 0.0]], [1.0, 1.0, 1.0])
    assert lm.check_subcover(bc, [0, 1])[0] is False
    disjoint, covered, witness = lm.check_subcover(bc, [0])
    assert disjoint and not covered and witness.tolist() == [0, 0, -1]


def test_estimator_examples():
    f = lm.iid_field("constant", 100, 2, 0)
    assert lm.limsup_estimator(f, 100) == 1.0
    assert lm.shell_estimator(f, 100) == pytest.approx(1 / 51)
    sq = lm.iid_field("square", 64, 2, 0)
    assert lm.limsup_estimator(sq, 64) == 64.0
    assert [lm.limsup_estimator(sq, L) for L in (8, 16, 32)] == [8.0, 16.0, 32.0]
    shells = [lm.shell_estimator(f, L) for L in (10, 20, 40, 80)]
    assert lm.is_monotone(shells, increasing=False)


def test_estimator_on_dict_and_errors():
    f = {(i, j): 2.0 for i in range(-2, 3) for j in range(-2, 3)}
    assert lm.limsup_estimator(f, 2) == 2.0
    with pytest.raises(ValueError):
        lm.limsup_estimator(f, 3)
    with pytest.raises(ValueError):
        lm.limsup_estimator(f, 0)
    with pytest.raises(ValueError):
        lm.shell_estimator(f, 0.5)
    with pytest.raises(ValueError):
        lm.iid_field("gaussian", 3, 2, 0)


def test_estimator_monotone_under_domination():
    for seed in range(10):
        a = lm.iid_field("bounded", 30, 2, seed)
        b = lm.Field(a.cells, a.values + np.abs(lm.iid_field("bounded", 30, 2, seed + 100).values))
        for L in (5, 17, 30):
            assert lm.limsup_estimator(a, L) <= lm.limsup_estimator(b, L)
            assert lm.shell_estimator(a, L) <= lm.shell_estimator(b, L)


def test_estimator_is_brute_force_max():
    f = lm.iid_field("pareto", 12, 2, 3)
    for L in (1, 5, 12):
        best = max(v / max(abs(int(c[0])), abs(int(c[1])))
                   for c, v in zip(f.cells, f.values) if 0 < max(abs(c[0]), abs(c[1])) <= L)
        assert lm.limsup_estimator(f, L) == best


@pytest.mark.parametrize("beta,d,expected", [(3, 2, "finite"), (2, 2, "infinite"),
                                             (0.5, 1, "infinite"), (1.0, 2, "infinite"),
                                             (2.0001, 2, "finite")])
def test_tail_criterion(beta, d, expected):
    assert lm.tail_criterion(beta, d) == expected


def test_tail_criterion_rejects_nonpositive():
    with pytest.raises(ValueError):
        lm.tail_criterion(0, 2)


def test_fields_are_nested_and_reproducible():
    small = lm.iid_field("pareto", 10, 2, 7)
    big = lm.iid_field("pareto", 25, 2, 7)
    lookup = {tuple(c): v for c, v in zip(big.cells.tolist(), big.values)}
    assert all(lookup[tuple(c)] == v for c, v in zip(small.cells.tolist(), small.values))
    again = lm.iid_field("pareto", 10, 2, 7)
    assert np.array_equal(again.values, small.values)
    assert np.all(small.values >= 1)
    b = lm.iid_field("bounded", 10, 3, 1)
    assert len(b.cells) == 21**3 and np.all((b.values >= 0) & (b.values < 1))


def test_pareto_tail():
    v = lm.iid_field("pareto", 200, 2, 0, beta=2.0).values
    for x in (2.0, 5.0, 10.0):
        p = x ** -2
        assert abs(np.mean(v >= x) - p) < 4 * np.sqrt(p * (1 - p) / len(v))


def test_trend_regimes_small():
    Ls = [25, 50, 100]
    bounded = lm.median_by_L(lm.trend("bounded", Ls, range(20)))
    pareto = lm.median_by_L(lm.trend("pareto", Ls, range(20)))
    assert lm.is_monotone(bounded.values(), increasing=False)
    assert lm.is_monotone(pareto.values(), increasing=True)


def test_trend_csv():
    rows = lm.trend("bounded", [4, 8], [0, 1])
    lines = lm.trend_csv(rows).splitlines()
    assert lines[0] == "L,estimate,seed,field_kind"
    assert len(lines) == 5
    L, est, seed, kind = lines[1].split(",")
    assert (int(L), int(seed), kind) == (4, 0, "bounded")
    assert float(est) == rows[0]["estimate"]


def test_is_monotone():
    assert lm.is_monotone([1, 2, 3], True) and not lm.is_monotone([1, 1, 2], True)
    assert lm.is_monotone([3, 2, 1], False)


def test_cell_bracket():
    f = lm.Field(np.array([[0, 0], [1, 0], [3, 0], [0, -5]]), np.array([9.0, 9.0, 2.0, 4.0]))
    lo, hi = lm.cell_bracket(f)
    assert lo == pytest.approx(max(2 / 4, 4 / 6))
    assert hi == pytest.approx(max(2 / 2, 4 / 4))
    with pytest.raises(ValueError):
        lm.cell_bracket(f, min_norm=1)
