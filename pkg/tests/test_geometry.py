import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from balloons import geometry as geo
from balloons._rng import stream

E2 = geo.Space.euclidean(2)
H = geo.Space.hyperbolic()
T3 = geo.Space.tree(3)


def test_distance_examples():
    assert geo.distance(E2, (0, 0), (3, 4)) == 5.0
    assert geo.distance(H, 0j, 0.5 + 0j) == pytest.approx(math.log(3), abs=1e-15)
    # midpoints of the first two root edges of the 3-regular tree
    assert geo.distance(T3, (1, 0.5), (2, 0.5)) == pytest.approx(1.0)


def test_disk_distance_matches_arcosh_formula():
    rng = stream(1, "test")
    z = geo.as_complex(geo.sample_uniform(H, geo.Ball(4.0), rng, 1000))
    w = geo.as_complex(geo.sample_uniform(H, geo.Ball(4.0), rng, 1000))
    ref = np.arccosh(1 + 2 * np.abs(z - w) ** 2 / ((1 - np.abs(z) ** 2) * (1 - np.abs(w) ** 2)))
    np.testing.assert_allclose(geo.disk_distance(z, w), ref, rtol=1e-9, atol=1e-7)


def test_mismatched_space_rejected():
    with pytest.raises(ValueError):
        geo.distance(E2, (0, 0, 0), (1, 1))
    with pytest.raises(ValueError):
        geo.check_coords(H, np.array([[0.999999999999999, 0.0]]))


def test_ball_volume_examples():
    assert geo.ball_volume(H, 2.0) == pytest.approx(4 * math.pi * math.sinh(1) ** 2)
    assert geo.ball_volume(H, 2.0) == pytest.approx(17.3554, abs=1e-4)
    assert geo.ball_volume(T3, 1.0) == 3.0
    assert geo.ball_volume(geo.Space.euclidean(1), 2.0) == 4.0
    with pytest.raises(ValueError):
        geo.ball_volume(E2, -1.0)


@pytest.mark.parametrize("d", [3, 4, 5])
def test_tree_ball_volume_at_integers(d):
    space = geo.Space.tree(d)
    for i in range(8):
        # number of edges within distance i of a vertex
        edges = sum(d * (d - 1) ** k for k in range(i))
        assert geo.ball_volume(space, float(i)) == edges


@pytest.mark.parametrize("space", [E2, geo.Space.euclidean(3), H, T3])
def test_ball_volume_increasing_and_continuous(space):
    s = np.linspace(0, 6, 6001)
    v = geo.ball_volume(space, s)
    assert np.all(np.diff(v) > 0)
    # no jumps at the integer breakpoints of the tree formula
    k = np.arange(1.0, 6.0)
    np.testing.assert_allclose(geo.ball_volume(space, k - 1e-9), geo.ball_volume(space, k),
                               rtol=1e-6)


TRIPLES = 10**6


def _random_points(space, rng, n):
    if space.kind == geo.EUCLIDEAN:
        return geo.sample_uniform(space, geo.Box.centered(10.0, space.dim), rng, n)
    return geo.sample_uniform(space, geo.Ball(6.0), rng, n)


@pytest.mark.parametrize("space", [geo.Space.euclidean(1), E2, geo.Space.euclidean(3), H, T3,
                                   geo.Space.tree(5)])
def test_triangle_inequality(space):
    rng = stream(2, "triangle")
    x, y, z = (_random_points(space, rng, TRIPLES) for _ in range(3))
    dxy = geo.pairwise(space, x, y)
    dyz = geo.pairwise(space, y, z)
    dxz = geo.pairwise(space, x, z)
    assert np.all(dxz <= dxy + dyz + 1e-9)
    assert np.all(dxy >= 0)
    np.testing.assert_array_equal(dxy, geo.pairwise(space, y, x))
    assert np.all(geo.pairwise(space, x, x) == 0)


def test_hyperbolic_distance_mobius_invariant():
    rng = stream(3, "mobius")
    z = geo.as_complex(_random_points(H, rng, 100000))
    w = geo.as_complex(_random_points(H, rng, 100000))
    a = 0.7 * np.exp(2j * math.pi * rng.random())
    rot = np.exp(2j * math.pi * rng.random())
    fz = rot * geo.recenter(a, z)
    fw = rot * geo.recenter(a, w)
    np.testing.assert_allclose(geo.disk_distance(fz, fw), geo.disk_distance(z, w),
                               rtol=1e-9, atol=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.complex_numbers(max_magnitude=0.95), st.floats(0.01, 5.0))
def test_hyperbolic_circle_points_at_radius(c, rho):
    centre, rad = geo.hyperbolic_circle(c, rho)
    theta = np.linspace(0, 2 * math.pi, 16)
    ring = centre + rad * np.exp(1j * theta)
    np.testing.assert_allclose(geo.disk_distance(c, ring), rho, rtol=1e-6, atol=1e-8)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=0, max_size=12), st.integers(0, 2))
def test_tree_address_roundtrip(tail, first):
    address = (first,) + tuple(tail)
    v = geo.tree_vertex(3, address)
    assert geo.tree_address(3, v) == address
    assert geo.vertex_level(3, v) == len(address)
    if len(address) > 1:
        assert geo.vertex_parent(3, v) == geo.tree_vertex(3, address[:-1])


def test_sample_uniform_examples():
    rng = stream(4, "uniform")
    pts = geo.sample_uniform(E2, geo.Box((0.0, 0.0), (1.0, 1.0)), rng, 10**5)
    assert np.all(np.abs(pts.mean(axis=0) - 0.5) < 0.01)

    pts = geo.sample_uniform(H, geo.Ball(2.0), rng, 10**5)
    frac = np.mean(geo.hyperbolic_norm(geo.as_complex(pts)) <= 1)
    assert abs(frac - math.sinh(0.5) ** 2 / math.sinh(1) ** 2) < 0.01

    pts = geo.sample_uniform(T3, geo.Ball(1.0), rng, 10**4)
    assert set(pts[:, 0].astype(int)) <= {1, 2, 3}


def test_tree_sampling_proportional_to_length():
    rng = stream(5, "tree-uniform")
    pts = geo.sample_uniform(T3, geo.Ball(2.5), rng, 10**5)
    depth = geo.tree_point_depth(pts, 3)
    # measure within depth 1 is 3 out of 3 + 6 + 12 * 0.5 = 15
    assert abs(np.mean(depth <= 1) - 3 / 15) < 0.01
    assert depth.max() <= 2.5


def test_window_measure_and_boundary():
    box = geo.Box((0.0, 0.0), (2.0, 3.0))
    assert geo.window_measure(E2, box) == 6.0
    assert geo.boundary_distance(E2, box, np.array([[0.5, 1.0]]))[0] == 0.5
    assert geo.boundary_distance(H, geo.Ball(3.0), np.zeros((1, 2)))[0] == 3.0
    with pytest.raises(ValueError):
        geo.Box((0.0,), (0.0,))


def test_descriptions_roundtrip():
    for space in (E2, H, T3):
        assert geo.Space.from_description(space.describe()) == space
    for w in (geo.Box((0.0, 1.0), (2.0, 3.0)), geo.Ball(2.5)):
        assert geo.window_from_description(w.describe()) == w
