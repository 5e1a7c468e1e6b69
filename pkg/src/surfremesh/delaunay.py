"""
Incremental Delaunay tetrahedralisation by Bowyer-Watson cavity insertion.

The convex hull is closed by ghost cells: every hull triangle (a, b, c) owns a
cell ``[a, b, c, INF]`` whose triangle is oriented so that orient3d(a, b, c, x)
is positive for points x outside the hull. Vertex id ``INF`` (= -1) is never a
real vertex.

Ties in the empty-sphere test are broken as if later vertices were lifted
slightly above the paraboloid: a point exactly on a circumsphere is *not* in
conflict with that cell. This is a consistent symbolic perturbation by
insertion order, so the tessellation of any point set is unique given the
order in which its points were inserted.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

from .predicates import (
    DegenerateSimplexError,
    circumcentre_tet,
    insphere_oriented,
    orient3d,
    as_point,
)

log = logging.getLogger(__name__)

INF = -1

# outward-oriented face of a positive cell opposite each local vertex
FACES = ((1, 2, 3), (0, 3, 2), (0, 1, 3), (0, 2, 1))


class DuplicatePointError(ValueError):
    """Raised by ``insert`` for a point within the collapse tolerance of a vertex."""

    def __init__(self, point, vertex):
        super().__init__(f"point {point} duplicates vertex {vertex}")
        self.point = point
        self.vertex = vertex


@dataclass(frozen=True)
class VoronoiEdge:
    """Dual of a Delaunay triangle: a segment between two circumcentres, or a
    ray from the circumcentre of a hull cell along the outward hull normal."""

    facet: tuple
    origin: tuple
    end: Optional[tuple] = None
    direction: Optional[tuple] = None

    @property
    def is_ray(self):
        return self.end is None


class Tessellation:
    def __init__(self, tolerance=0.0):
        self.points = []
        self.tv = []
        self.tn = []
        self.alive = []
        self.cc = []
        self.free = []
        self.vert_tet = []
        self.tolerance = tolerance
        self.collapsed = 0
        self.source_index = []
        self.last_destroyed = []
        self.last_created = []
        self._hint = 0

    # ------------------------------------------------------------------ queries
    @property
    def n_vertices(self):
        return len(self.points)

    def is_ghost(self, t):
        return self.tv[t][3] == INF

    def cells(self, finite=True):
        for t, ok in enumerate(self.alive):
            if ok and (not finite or self.tv[t][3] != INF):
                yield t

    def tets(self):
        """Set of finite cells as sorted vertex-id tuples."""
        return {tuple(sorted(self.tv[t])) for t in self.cells()}

    def facet_vertices(self, t, i):
        v = self.tv[t]
        f = FACES[i]
        return (v[f[0]], v[f[1]], v[f[2]])

    def facets(self):
        """Every finite triangle once, as (finite cell, local index)."""
        tv = self.tv
        for t in self.cells():
            for i, n in enumerate(self.tn[t]):
                if tv[n][3] == INF or t < n:
                    yield t, i

    def circumcentre(self, t):
        return self.cc[t]

    def voronoi_edge(self, t, i):
        """Dual Voronoi edge of triangle ``i`` of cell ``t``."""
        v = self.tv[t]
        if v[3] == INF and i != 3:
            raise ValueError("facet through the vertex at infinity has no dual edge")
        n = self.tn[t][i]
        key = tuple(sorted(self.facet_vertices(t, i)))
        if v[3] == INF:
            t, n = n, t
        if self.tv[n][3] == INF:
            a, b, c = (self.points[k] for k in self.tv[n][:3])
            ux, uy, uz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
            wx, wy, wz = c[0] - a[0], c[1] - a[1], c[2] - a[2]
            nx, ny, nz = uy * wz - uz * wy, uz * wx - ux * wz, ux * wy - uy * wx
            s = 1.0 / math.sqrt(nx * nx + ny * ny + nz * nz)
            return VoronoiEdge(key, self.cc[t], None, (nx * s, ny * s, nz * s))
        return VoronoiEdge(key, self.cc[t], self.cc[n], None)

    def check(self):
        """Structural self-check: orientation and neighbour symmetry."""
        for t in self.cells(finite=False):
            v = self.tv[t]
            for i in range(4):
                n = self.tn[t][i]
                if not self.alive[n] or t not in self.tn[n]:
                    raise AssertionError(f"asymmetric neighbours {t} {n}")
                shared = set(v) - {v[i]}
                if shared != set(self.tv[n]) - {self.tv[n][self.tn[n].index(t)]}:
                    raise AssertionError(f"neighbours {t} {n} do not share a face")
            if v[3] != INF:
                p = [self.points[k] for k in v]
                if orient3d(*p) <= 0:
                    raise AssertionError(f"cell {t} not positively oriented")
        return True

    # ------------------------------------------------------------ construction
    def _new_cell(self, verts):
        if self.free:
            t = self.free.pop()
            self.tv[t] = verts
            self.tn[t] = [-1, -1, -1, -1]
            self.alive[t] = True
        else:
            t = len(self.tv)
            self.tv.append(verts)
            self.tn.append([-1, -1, -1, -1])
            self.alive.append(True)
            self.cc.append(None)
        if verts[3] != INF:
            p = self.points
            self.cc[t] = circumcentre_tet(p[verts[0]], p[verts[1]], p[verts[2]], p[verts[3]])
        else:
            self.cc[t] = None
        for k in verts:
            if k != INF:
                self.vert_tet[k] = t
        return t

    def _seed(self, p0, p1, p2, p3):
        for p in (p0, p1, p2, p3):
            self.points.append(p)
            self.vert_tet.append(-1)
        t = self._new_cell([0, 1, 2, 3])
        ghosts = []
        for i in range(4):
            f = FACES[i]
            g = self._new_cell([f[0], f[1], f[2], INF])
            ghosts.append(g)
            self.tn[t][i] = g
            self.tn[g][3] = t
        # ghosts meet along hull edges
        for gi in ghosts:
            for j in range(3):
                edge = set(self.tv[gi][:3]) - {self.tv[gi][j]}
                for gk in ghosts:
                    if gk != gi and edge <= set(self.tv[gk][:3]):
                        self.tn[gi][j] = gk
        self._hint = t

    def _conflict(self, t, p):
        v = self.tv[t]
        pts = self.points
        if v[3] != INF:
            return insphere_oriented(pts[v[0]], pts[v[1]], pts[v[2]], pts[v[3]], p) > 0
        o = orient3d(pts[v[0]], pts[v[1]], pts[v[2]], p)
        if o != 0:
            return o > 0
        n = self.tn[t][3]
        w = self.tv[n]
        return insphere_oriented(pts[w[0]], pts[w[1]], pts[w[2]], pts[w[3]], p) > 0

    def locate(self, p, start=None):
        """Visibility walk to a cell whose circumsphere contains ``p``."""
        t = self._hint if start is None or not self.alive[start] else start
        if not self.alive[t]:
            t = next(self.cells(finite=False))
        pts = self.points
        steps = 0
        limit = 4 * len(self.tv) + 16
        while True:
            v = self.tv[t]
            if v[3] == INF:
                if self._conflict(t, p):
                    return t
                t = self.tn[t][3]
                continue
            moved = False
            for k in range(4):
                i = (k + steps) & 3
                f = FACES[i]
                if orient3d(pts[v[f[0]]], pts[v[f[1]]], pts[v[f[2]]], p) > 0:
                    t = self.tn[t][i]
                    moved = True
                    break
            if not moved:
                return t
            steps += 1
            if steps > limit:
                raise RuntimeError("point location did not terminate")

    def insert(self, p, hint=None):
        """Insert ``p`` and return its vertex id.

        ``hint`` is a cell id to start from; if it or one of its neighbours is
        already in conflict with ``p`` no walk is needed. The destroyed cell ids
        and the created cell ids are left in ``last_destroyed`` and
        ``last_created``.
        """
        p = as_point(p)
        seed = None
        if hint is not None and self.alive[hint]:
            for t in (hint, *self.tn[hint]):
                if self._conflict(t, p):
                    seed = t
                    break
        if seed is None:
            seed = self.locate(p, hint)
            if not self._conflict(seed, p):
                # p coincides with a vertex of the located cell
                v = self.tv[seed]
                k = min((k for k in v if k != INF), key=lambda k: math.dist(self.points[k], p))
                raise DuplicatePointError(p, k)

        cavity = [seed]
        in_cavity = {seed}
        boundary = []
        stack = [seed]
        while stack:
            t = stack.pop()
            for i, n in enumerate(self.tn[t]):
                if n in in_cavity:
                    continue
                if self._conflict(n, p):
                    in_cavity.add(n)
                    cavity.append(n)
                    stack.append(n)
                else:
                    boundary.append((t, i, n))

        tol = self.tolerance
        pts = self.points
        nearest = None
        best = math.inf
        for t in cavity:
            for k in self.tv[t]:
                if k != INF:
                    d = math.dist(pts[k], p)
                    if d < best:
                        best, nearest = d, k
        if best <= tol:
            raise DuplicatePointError(p, nearest)

        vid = len(pts)
        pts.append(p)
        self.vert_tet.append(-1)
        created = []
        links = {}
        try:
            for t, i, n in boundary:
                verts = list(self.tv[t])
                verts[i] = vid
                if verts[3] == INF and i == 3:
                    raise AssertionError("unreachable: ghost apex replaced")
                c = self._new_cell(verts)
                created.append(c)
                self.tn[c][i] = n
                self.tn[n][self.tn[n].index(t)] = c
                for j in range(4):
                    if j == i:
                        continue
                    key = tuple(sorted(verts[k] for k in range(4) if k != i and k != j))
                    other = links.pop(key, None)
                    if other is None:
                        links[key] = (c, j)
                    else:
                        oc, oj = other
                        self.tn[c][j] = oc
                        self.tn[oc][oj] = c
        except DegenerateSimplexError:
            raise RuntimeError("Bowyer-Watson produced a flat cell") from None
        if links:
            raise RuntimeError("cavity boundary is not a closed surface")

        for t in cavity:
            self.alive[t] = False
        self.free.extend(reversed(cavity))
        self.last_destroyed = cavity
        self.last_created = created
        self._hint = next(c for c in created if self.tv[c][3] != INF) if any(
            self.tv[c][3] != INF for c in created) else created[0]
        for c in created:
            for k in self.tv[c]:
                if k != INF:
                    self.vert_tet[k] = c
        return vid

    def incident_cells(self, v):
        """All live cells (ghosts included) incident to vertex ``v``."""
        start = self.vert_tet[v]
        seen = {start}
        stack = [start]
        while stack:
            t = stack.pop()
            for n in self.tn[t]:
                if n not in seen and v in self.tv[n]:
                    seen.add(n)
                    stack.append(n)
        return seen

    def hull_to_off(self, path):
        """Write the convex-hull boundary (ghost triangles) as an OFF file."""
        tris = [self.tv[t][:3] for t in self.cells(finite=False) if self.tv[t][3] == INF]
        used = sorted({k for tri in tris for k in tri})
        index = {k: i for i, k in enumerate(used)}
        with open(path, "w") as fh:
            fh.write(f"OFF\n{len(used)} {len(tris)} 0\n")
            for k in used:
                fh.write("%r %r %r\n" % self.points[k])
            for a, b, c in tris:
                fh.write(f"3 {index[a]} {index[b]} {index[c]}\n")


def _initial_simplex(points):
    p0 = 0
    n = len(points)
    p1 = next((i for i in range(1, n) if points[i] != points[p0]), None)
    if p1 is None:
        raise ValueError("all points coincide")
    a, b = points[p0], points[p1]
    p2 = None
    for i in range(n):
        c = points[i]
        ux, uy, uz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
        wx, wy, wz = c[0] - a[0], c[1] - a[1], c[2] - a[2]
        if (uy * wz - uz * wy, uz * wx - ux * wz, ux * wy - uy * wx) != (0.0, 0.0, 0.0):
            p2 = i
            break
    if p2 is None:
        raise ValueError("all points are collinear")
    p3 = None
    for i in range(n):
        o = orient3d(points[p0], points[p1], points[p2], points[i])
        if o != 0:
            p3 = i
            break
    if p3 is None:
        raise ValueError("all points are coplanar; cannot seed a 3D tessellation")
    if orient3d(points[p0], points[p1], points[p2], points[p3]) < 0:
        p1, p2 = p2, p1
    return p0, p1, p2, p3


def build(points, tolerance=None):
    """Delaunay tessellation of ``points``.

    Points closer than ``tolerance`` (default 1e-12 of the bounding-box
    diagonal) to an earlier vertex are collapsed onto it and counted in
    ``Tessellation.collapsed``.
    """
    pts = [as_point(p) for p in points]
    if len(pts) < 4:
        raise ValueError("need at least 4 points")
    lo = [min(p[k] for p in pts) for k in range(3)]
    hi = [max(p[k] for p in pts) for k in range(3)]
    diag = math.dist(lo, hi)
    if tolerance is None:
        tolerance = 1e-12 * diag
    i0, i1, i2, i3 = _initial_simplex(pts)
    tess = Tessellation(tolerance)
    tess._seed(pts[i0], pts[i1], pts[i2], pts[i3])
    tess.source_index = [i0, i1, i2, i3]
    first = {i0, i1, i2, i3}
    for i, p in enumerate(pts):
        if i in first:
            continue
        try:
            tess.insert(p)
        except DuplicatePointError:
            tess.collapsed += 1
            continue
        tess.source_index.append(i)
    if tess.collapsed:
        log.warning("collapsed %d duplicate points", tess.collapsed)
    return tess
