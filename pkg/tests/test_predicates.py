import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from oracles import insphere_fraction, orient3d_fraction
from surfremesh.predicates import (
    Ball3, DegenerateSimplexError, Plane3, circumball_tri3, circumcentre_tet, insphere,
    orient3d, radius_edge, shortest_edge,
)

O, X, Y, Z = (0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)

coord = st.floats(-100, 100, allow_nan=False, allow_infinity=False)
point = st.tuples(coord, coord, coord)
# small integer grid: plenty of exact degeneracies
grid = st.tuples(*[st.integers(-3, 3).map(float)] * 3)


def test_orient3d_examples():
    assert orient3d(O, X, Y, Z) == 1
    assert orient3d(O, X, Y, (1.0, 1.0, 0.0)) == 0
    assert orient3d(O, X, Y, (0.0, 0.0, -1.0)) == -1


def test_insphere_examples():
    assert insphere(O, X, Y, Z, (0.25, 0.25, 0.25)) == 1
    assert insphere(O, X, Y, Z, (10.0, 10.0, 10.0)) == -1
    assert insphere(O, X, Y, Z, O) == 0


def test_insphere_rejects_flat_base():
    with pytest.raises(DegenerateSimplexError):
        insphere(O, X, Y, (1.0, 1.0, 0.0), Z)


def test_orient3d_near_degenerate_is_exact():
    # d sits one ulp off the plane z = 0.5 spanned by the others
    a, b, c = (0.1, 0.2, 0.5), (0.7, 0.3, 0.5), (0.4, 0.9, 0.5)
    d = (0.3, 0.3, math.nextafter(0.5, 1.0))
    assert orient3d(a, b, c, d) == orient3d_fraction(a, b, c, d) == 1
    d = (0.3, 0.3, 0.5)
    assert orient3d(a, b, c, d) == 0


@given(point, point, point, point)
def test_orient3d_matches_rational(a, b, c, d):
    assert orient3d(a, b, c, d) == orient3d_fraction(a, b, c, d)


@given(grid, grid, grid, grid)
def test_orient3d_matches_rational_on_degenerate_grid(a, b, c, d):
    assert orient3d(a, b, c, d) == orient3d_fraction(a, b, c, d)


@given(point, point, point, point)
def test_orient3d_permutation_parity(a, b, c, d):
    s = orient3d(a, b, c, d)
    assert orient3d(b, a, c, d) == -s          # odd
    assert orient3d(a, c, b, d) == -s          # odd
    assert orient3d(b, c, a, d) == s           # even
    assert orient3d(d, c, b, a) == s           # even (two swaps)


@given(grid, grid, grid, grid, grid)
def test_insphere_matches_rational(a, b, c, d, e):
    if orient3d_fraction(a, b, c, d) == 0:
        return
    assert insphere(a, b, c, d, e) == insphere_fraction(a, b, c, d, e)


@given(point, point, point, point, point)
def test_insphere_matches_rational_random(a, b, c, d, e):
    if orient3d_fraction(a, b, c, d) == 0:
        return
    assert insphere(a, b, c, d, e) == insphere_fraction(a, b, c, d, e)


def test_circumball_examples():
    s3 = math.sqrt(3.0)
    ball = circumball_tri3(O, X, (0.5, s3 / 2, 0.0))
    assert isinstance(ball, Ball3)
    assert ball.radius == pytest.approx(1 / s3, rel=1e-12)
    ball = circumball_tri3(O, X, Y)
    assert ball.centre == pytest.approx((0.5, 0.5, 0.0), abs=1e-15)
    assert ball.radius == pytest.approx(math.sqrt(2) / 2, rel=1e-15)
    with pytest.raises(DegenerateSimplexError):
        circumball_tri3(O, X, (2.0, 0.0, 0.0))


def _solve_circumcentre_tri(a, b, c):
    # independent: solve the 3x3 system of two bisector planes + the plane
    a, b, c = map(np.asarray, (a, b, c))
    n = np.cross(b - a, c - a)
    A = np.array([b - a, c - a, n])
    rhs = np.array([(b @ b - a @ a) / 2, (c @ c - a @ a) / 2, n @ a])
    return np.linalg.solve(A, rhs)


@given(point, point, point)
def test_circumball_random(a, b, c):
    A, B, C = map(np.asarray, (a, b, c))
    n = np.cross(B - A, C - A)
    scale = max(np.linalg.norm(B - A), np.linalg.norm(C - A), 1e-300)
    assume(np.linalg.norm(n) > 1e-3 * scale ** 2)
    ball = circumball_tri3(a, b, c)
    ctr = np.asarray(ball.centre)
    for p in (A, B, C):
        assert abs(np.linalg.norm(ctr - p) - ball.radius) <= 1e-9 * ball.radius
    # in the plane of the triangle
    assert abs((ctr - A) @ (n / np.linalg.norm(n))) <= 1e-9 * ball.radius
    assert np.allclose(ctr, _solve_circumcentre_tri(a, b, c), rtol=1e-7, atol=1e-9 * ball.radius)


def test_circumcentre_tet_examples():
    phi = 1.0 / math.sqrt(3.0)
    reg = [(phi, phi, phi), (phi, -phi, -phi), (-phi, phi, -phi), (-phi, -phi, phi)]
    assert circumcentre_tet(*reg) == pytest.approx((0, 0, 0), abs=1e-15)
    assert circumcentre_tet(O, X, Y, Z) == pytest.approx((0.5, 0.5, 0.5), abs=1e-15)
    with pytest.raises(DegenerateSimplexError):
        circumcentre_tet(O, X, Y, (1.0, 1.0, 0.0))


@given(point, point, point, point)
def test_circumcentre_tet_equidistant(a, b, c, d):
    P = np.array([a, b, c, d])
    vol = abs(np.linalg.det(P[1:] - P[0]))
    edge = max(np.linalg.norm(P[i] - P[j]) for i in range(4) for j in range(i))
    assume(vol > 1e-3 * edge ** 3)
    ctr = np.asarray(circumcentre_tet(a, b, c, d))
    dist = np.linalg.norm(P - ctr, axis=1)
    assert np.ptp(dist) <= 1e-9 * dist.max()
    # linear-system oracle
    A = 2 * (P[1:] - P[0])
    rhs = np.sum(P[1:] ** 2, axis=1) - P[0] @ P[0]
    assert np.allclose(ctr, np.linalg.solve(A, rhs), rtol=1e-7, atol=1e-9 * dist.max())


def test_circumcentre_tet_nearly_flat_uses_exact_path():
    # fourth point 1e-9 off the plane: the float solve loses ~9 digits
    a, b, c, d = (0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.4, 0.4, 1e-9)
    ctr = np.asarray(circumcentre_tet(a, b, c, d))
    dist = np.linalg.norm(np.array([a, b, c, d]) - ctr, axis=1)
    assert np.ptp(dist) <= 1e-9 * dist.max()


def test_radius_edge_examples():
    s3 = math.sqrt(3.0)
    assert radius_edge(O, X, (0.5, s3 / 2, 0.0)) == pytest.approx(1 / s3, rel=1e-12)
    # 30-60-90 triangle: theta_min = 30 deg -> rho = 1
    assert radius_edge(O, (s3, 0.0, 0.0), (0.0, 1.0, 0.0)) == pytest.approx(1.0, rel=1e-12)
    # needle: R = abc / 4A = (0.25 + 1e-6) / 2e-3 = 125.0005 and the shortest
    # edge is sqrt(0.25 + 1e-6), so rho = sqrt(0.25 + 1e-6) / 2e-3 ~ 250
    needle = radius_edge(O, X, (0.5, 1e-3, 0.0))
    assert circumball_tri3(O, X, (0.5, 1e-3, 0.0)).radius == pytest.approx(125.0005, rel=1e-9)
    assert needle == pytest.approx(250.0004999995, rel=1e-9)
    assert needle > 100
    assert radius_edge(O, X, (2.0, 0.0, 0.0)) == math.inf
    assert radius_edge(O, O, X) == math.inf


@given(point, point, point)
def test_radius_edge_is_inverse_sine_of_min_angle(a, b, c):
    A, B, C = map(np.asarray, (a, b, c))
    sides = [np.linalg.norm(B - C), np.linalg.norm(C - A), np.linalg.norm(A - B)]
    n = np.linalg.norm(np.cross(B - A, C - A))
    assume(min(sides) > 0 and n > 1e-3 * max(sides) ** 2)
    # smallest angle is opposite the shortest side; law of sines via area
    i = int(np.argmin(sides))
    sin_min = n / (sides[(i + 1) % 3] * sides[(i + 2) % 3])
    assert radius_edge(a, b, c) == pytest.approx(1 / (2 * sin_min), rel=1e-9)


def test_shortest_edge_reports_opposite_vertex():
    e, k = shortest_edge(O, (3.0, 0.0, 0.0), (0.0, 1.0, 0.0))
    assert e == pytest.approx(1.0) and k == 1


def test_plane_normalises():
    p = Plane3.from_normal((0, 0, 0), (0, 0, 5))
    assert p.normal == (0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        Plane3.from_normal((0, 0, 0), (0, 0, 0))
