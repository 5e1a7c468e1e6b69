import math

import numpy as np
import pytest

from oracles import nearest_distance, winding_number
from surfremesh import shapes
from surfremesh.delaunay import build
from surfremesh.refine import RefineConfig, Refiner, seed_sample
from surfremesh.restricted import RestrictedComplex, manifoldness_report
from surfremesh.sizing import constant_field
from surfremesh.surface import SurfacePolyhedron


def _facet_with_points(rc, coords):
    pts = rc.tess.points
    want = {tuple(map(float, c)) for c in coords}
    for t, i in rc.tess.facets():
        verts = rc.tess.facet_vertices(t, i)
        if {pts[k] for k in verts} == want:
            return t, i
    raise LookupError("facet not in the tessellation")


def _equilateral(r, z, centre=(0.0, 0.0)):
    return [(centre[0] + r * math.cos(a), centre[1] + r * math.sin(a), z)
            for a in (0.0, 2 * math.pi / 3, 4 * math.pi / 3)]


@pytest.fixture(scope="module")
def plate():
    return SurfacePolyhedron(*shapes.flat_plate(size=(2.0, 2.0, 0.1), n=8))


def test_flat_facet_ball_is_diametric(plate):
    tri = _equilateral(0.1, 0.05, centre=(0.013, -0.021))
    apex = [(0.013, -0.021, 0.25), (0.013, -0.021, -0.15)]
    tess = build(tri + apex)
    rc = RestrictedComplex(tess, plate)
    f = rc.classify_facet(*_facet_with_points(rc, tri))
    assert f is not None
    assert f.err_eps == pytest.approx(0.0, abs=1e-12)
    assert f.radius == pytest.approx(0.1, rel=1e-12)
    assert f.centre == pytest.approx((0.013, -0.021, 0.05), abs=1e-12)
    # oriented with the outward (+z) normal of the top face
    a, b, c = (np.array(tess.points[k]) for k in f.verts)
    assert np.cross(b - a, c - a)[2] > 0


def test_facet_missing_surface_not_restricted(plate):
    tri = _equilateral(0.1, 5.0)
    tess = build(tri + [(0.0, 0.0, 5.2), (0.0, 0.0, 4.8)])
    rc = RestrictedComplex(tess, plate)
    assert rc.classify_facet(*_facet_with_points(rc, tri)) is None
    assert rc.facets == {}


def _pole_sphere():
    V, F = shapes.icosphere(3)
    v = V[0] / np.linalg.norm(V[0])
    z = np.array([0.0, 0.0, 1.0])
    k = np.cross(v, z)
    s, c = np.linalg.norm(k), v @ z
    k /= s
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    R = np.eye(3) + s * K + (1 - c) * K @ K
    W = V @ R.T
    W[0] = (0.0, 0.0, 1.0)
    return SurfacePolyhedron(W, F)


@pytest.mark.parametrize("theta", [0.2, 0.35, 0.5])
def test_sphere_surface_ball_matches_closed_form(theta):
    surf = _pole_sphere()
    ring = [(math.sin(theta) * math.cos(a), math.sin(theta) * math.sin(a), math.cos(theta))
            for a in (0.1, 0.1 + 2 * math.pi / 3, 0.1 + 4 * math.pi / 3)]
    tess = build(ring + [(0.0, 0.0, -1.0)])
    rc = RestrictedComplex(tess, surf)
    f = rc.classify_facet(*_facet_with_points(rc, ring))
    # ball centred at the pole; radius is the chord to the ring, error the
    # distance from the pole to the ring's circumcentre (0, 0, cos theta)
    assert f.centre == pytest.approx((0.0, 0.0, 1.0), abs=1e-6)
    assert f.radius == pytest.approx(math.sqrt(2 - 2 * math.cos(theta)), abs=1e-6)
    assert f.err_eps == pytest.approx(1 - math.cos(theta), abs=1e-6)
    assert f.size_h == pytest.approx(math.sqrt(3) * f.radius, rel=1e-15)


def test_classify_tet_examples(sphere):
    tess = build([(0.0, 0.0, 0.0), (0.1, 0.0, 0.0), (0.0, 0.1, 0.0), (0.0, 0.0, 0.1)])
    rc = RestrictedComplex(tess, sphere)
    t = next(tess.cells())
    assert rc.classify_tet(t)
    assert rc.volume == {t}
    # sliver near the surface: nearly coplanar, not cocircular
    sliver = [(0.1, 0.0, 0.9), (-0.1, 0.0, 0.9), (0.0, 0.05, 0.9), (0.0, -0.05, 0.9005)]
    tess = build(sliver)
    rc = RestrictedComplex(tess, sphere)
    t = next(tess.cells())
    assert np.linalg.norm(tess.cc[t]) > 2
    assert not rc.classify_tet(t)


def test_volume_membership_matches_winding_number(torus):
    tess = build(seed_sample(torus, 250))
    rc = RestrictedComplex(tess, torus)
    V, F = torus.vertices, torus.triangles
    checked = 0
    for t in tess.cells():
        c = np.array(tess.cc[t])
        if nearest_distance(V, F, c) < 1e-6 * torus.diagonal:
            continue
        assert (t in rc.volume) == (winding_number(V, F, c) > 0.5)
        checked += 1
    assert checked > 500


def _snapshot(rc):
    return ({k: (f.verts, f.centre, f.radius, f.rho, f.err_eps, f.e0_edge)
             for k, f in rc.facets.items()}, rc.volume_tets())


@pytest.mark.parametrize("algorithm", ["dr", "fd"])
def test_incremental_equals_rebuild(torus, algorithm):
    r = Refiner(torus, constant_field(torus, 0.12), RefineConfig(algorithm=algorithm))
    inserted = 0
    while inserted < 300:
        f = r._next()
        if f is None:
            break
        if r.refine_facet(f):
            inserted += 1
            if inserted % 50 == 0:
                fresh = RestrictedComplex(r.tess, torus)
                assert _snapshot(r.rc) == _snapshot(fresh)
    assert inserted >= 250


def test_update_is_local(torus):
    r = Refiner(torus, constant_field(torus, 0.12), RefineConfig(algorithm="dr"))
    for _ in range(40):
        r.refine_facet(r._next())
    before = dict(r.rc.facets)
    f = r._next()
    assert r.refine_facet(f)
    # the refined facet was destroyed by its own Steiner point
    assert r.rc.facets.get(f.key) is not f
    touched = {tuple(sorted(r.tess.tv[t][j] for j in range(4) if j != i))
               for t in r.tess.last_created for i in range(4)}
    kept = [k for k in before if k in r.rc.facets and k not in touched]
    assert len(kept) > 0.8 * len(before)
    # facets away from the cavity keep their identity
    assert all(r.rc.facets[k] is before[k] for k in kept)


def test_facet_invariants(torus):
    r = Refiner(torus, constant_field(torus, 0.1), RefineConfig(algorithm="fd"))
    for _ in range(150):
        f = r._next()
        if f is None:
            break
        r.refine_facet(f)
    pts = r.tess.points
    V, F = torus.vertices, torus.triangles
    for f in r.rc.facets.values():
        c = np.array(f.centre)
        d = [math.dist(f.centre, pts[k]) for k in f.verts]
        assert max(d) - min(d) <= 1e-9 * f.radius
        assert f.err_eps <= f.radius * (1 + 1e-12)
        assert nearest_distance(V, F, c) <= 1e-9 * torus.diagonal
        assert f.radius == max(math.dist(h.point, pts[f.verts[0]]) for h in f.hits)
        assert f.verts[0] == min(f.verts) and tuple(sorted(f.verts)) == f.key


def test_manifoldness_report_examples():
    V, F = shapes.icosahedron()
    rep = manifoldness_report(F.tolist())
    assert rep["euler_characteristic"] == 2
    assert rep["edge_use_histogram"] == {2: 30}
    assert rep["manifold"] and rep["components"] == 1
    # an open fan: boundary edges used once
    rep = manifoldness_report([(0, 1, 2), (0, 2, 3)])
    assert rep["edge_use_histogram"] == {1: 4, 2: 1}
    assert not rep["manifold"]


def test_under_refined_sample_reports_without_error(torus):
    tess = build(seed_sample(torus, 12))
    rep = RestrictedComplex(tess, torus).manifoldness_report()
    assert set(rep) >= {"edge_use_histogram", "euler_characteristic", "components"}
