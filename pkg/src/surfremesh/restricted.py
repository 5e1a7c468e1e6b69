"""Restricted Delaunay complexes: the surface triangulation and the volume
cells of a tessellation, relative to a closed input surface."""

from __future__ import annotations

import heapq
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .delaunay import FACES, INF
from .predicates import (
    Ball3,
    DegenerateSimplexError,
    circumball_tri3,
    radius_edge,
    shortest_edge,
)
from .surface import SurfaceHit, _clean_bary

SQRT3 = math.sqrt(3.0)


@dataclass(eq=False)
class RestrictedFacet:
    """A triangle of the tessellation whose dual Voronoi edge meets the surface.

    ``verts`` is oriented to agree with the surface normal at the ball centre;
    ``key`` is the sorted vertex triple that identifies the facet across
    cavity updates.
    """

    key: tuple
    verts: tuple
    ball: Ball3
    hits: list
    rho: float
    size_h: float
    err_eps: float
    diametric: Ball3
    e0: float
    e0_edge: tuple
    frontal: bool = field(default=False)
    # target size at the ball centre and the bad-facet verdict, set by refine
    hbar: float = field(default=math.nan)
    bad: bool = field(default=False)

    @property
    def centre(self):
        return self.ball.centre

    @property
    def radius(self):
        return self.ball.radius


def _diametric(a, b, c):
    try:
        return circumball_tri3(a, b, c)
    except DegenerateSimplexError:
        # collinear: the smallest enclosing ball of the longest edge
        pairs = ((a, b), (b, c), (c, a))
        p, q = max(pairs, key=lambda e: math.dist(*e))
        m = tuple((p[k] + q[k]) / 2 for k in range(3))
        return Ball3(m, math.dist(p, q) / 2)


def make_facet(points, verts, hits, normals):
    """Build a RestrictedFacet from the oriented vertex triple and the hits of
    its dual edge (must be non-empty)."""
    k = verts.index(min(verts))
    verts = verts[k:] + verts[:k]
    a, b, c = (points[k] for k in verts)
    best, best_r = None, -1.0
    for h in hits:
        r = math.dist(h.point, a)
        if r > best_r:
            best, best_r = h, r
    n = normals[best.triangle]
    nx, ny, nz = n
    ux, uy, uz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    vx, vy, vz = c[0] - a[0], c[1] - a[1], c[2] - a[2]
    if (uy * vz - uz * vy) * nx + (uz * vx - ux * vz) * ny + (ux * vy - uy * vx) * nz < 0:
        verts = (verts[0], verts[2], verts[1])
        b, c = c, b
    verts = tuple(verts)
    diam = _diametric(a, b, c)
    e0, opp = shortest_edge(a, b, c)
    e0_edge = tuple(sorted(verts[k] for k in range(3) if k != opp))
    return RestrictedFacet(
        key=tuple(sorted(verts)),
        verts=verts,
        ball=Ball3(best.point, best_r),
        hits=hits,
        rho=radius_edge(a, b, c),
        size_h=SQRT3 * best_r,
        err_eps=math.dist(best.point, diam.centre),
        diametric=diam,
        e0=e0,
        e0_edge=e0_edge,
    )


class RestrictedComplex:
    """Restricted surface triangulation and volume cells of a tessellation.

    Parameters
    ----------
    tess : Tessellation
    surf : SurfacePolyhedron
    """

    def __init__(self, tess, surf):
        self.tess = tess
        self.surf = surf
        self.facets = {}
        self.volume = set()
        self.edge_facets = defaultdict(set)
        self._edge_heap = []
        centre = (surf.bbox[0] + surf.bbox[1]) / 2
        self._centre = tuple(float(x) for x in centre)
        self.rebuild()

    # -- classification ---------------------------------------------------

    def _dual_segments(self, cells):
        """Finite facets of ``cells`` with their dual edges as segments."""
        tess = self.tess
        tv, tn, cc, pts = tess.tv, tess.tn, tess.cc, tess.points
        keys, orient, A, B = [], [], [], []
        seen = set()
        for t in cells:
            if tv[t][3] == INF:
                u = tn[t][3]
                todo = ((u, tn[u].index(t)),)
            else:
                todo = ((t, 0), (t, 1), (t, 2), (t, 3))
            for u, i in todo:
                v = tv[u]
                f = FACES[i]
                tri = (v[f[0]], v[f[1]], v[f[2]])
                key = tuple(sorted(tri))
                if key in seen:
                    continue
                seen.add(key)
                keys.append(key)
                orient.append(tri)
                o = cc[u]
                A.append(o)
                n = tn[u][i]
                if tv[n][3] == INF:
                    a, b, c = (pts[k] for k in tv[n][:3])
                    ux, uy, uz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
                    wx, wy, wz = c[0] - a[0], c[1] - a[1], c[2] - a[2]
                    nx, ny, nz = uy * wz - uz * wy, uz * wx - ux * wz, ux * wy - uy * wx
                    # long enough to leave the surface's bounding box
                    s = ((math.dist(o, self._centre) + self.surf.diagonal)
                         / math.sqrt(nx * nx + ny * ny + nz * nz))
                    B.append((o[0] + nx * s, o[1] + ny * s, o[2] + nz * s))
                else:
                    B.append(cc[n])
        return keys, orient, A, B

    def _clip(self, A, B):
        """Canonical, clipped form of the segments A[k]-B[k].

        Each segment is re-parametrised from the endpoint nearer the surface
        (circumcentres of flat cells can be very far away, and measuring from
        them would cost all precision near the surface) and cut to the padded
        bounding box of the surface. Segments missing the box collapse to a
        point far from the surface.
        """
        c = np.asarray(self._centre)
        swap = np.sum((B - c) ** 2, axis=1) < np.sum((A - c) ** 2, axis=1)
        A, B = np.where(swap[:, None], B, A), np.where(swap[:, None], A, B)
        lo, hi = self.surf.bbox
        pad = 1e-3 * self.surf.diagonal
        lo, hi = lo - pad, hi + pad
        d = B - A
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / d
            ta = (lo - A) * inv
            tb = (hi - A) * inv
        t_in = np.where(d == 0, np.where((A >= lo) & (A <= hi), -np.inf, np.inf), np.minimum(ta, tb))
        t_out = np.where(d == 0, np.where((A >= lo) & (A <= hi), np.inf, -np.inf), np.maximum(ta, tb))
        t0 = np.maximum(t_in.max(axis=1), 0.0)
        t1 = np.minimum(t_out.min(axis=1), 1.0)
        miss = t0 > t1
        with np.errstate(invalid="ignore"):
            A2 = np.where((t0 > 0)[:, None], A + t0[:, None] * d, A)
            B2 = np.where((t1 < 1)[:, None], A + t1[:, None] * d, B)
        far = c + 10.0 * self.surf.diagonal
        A2[miss] = far
        B2[miss] = far
        return A2, B2

    def _classify(self, cells):
        """Classify every finite facet of ``cells``; returns {key: facet or None}."""
        keys, orient, A, B = self._dual_segments(cells)
        out = {}
        if not keys:
            return out
        s = self.surf
        A, B = self._clip(np.array(A, dtype=float), np.array(B, dtype=float))
        offsets, ts, tris, us, vs, grazing = K.segments_batch(
            s.vertices, s.triangles, *s._tree, A, B, 1e-10, s.tolerance)
        pts = self.tess.points
        for k, key in enumerate(keys):
            if grazing[k]:
                hits = s.intersect_segment(A[k], B[k])
            else:
                lo, hi = offsets[k], offsets[k + 1]
                if lo == hi:
                    out[key] = None
                    continue
                hits = []
                a, d = A[k], B[k] - A[k]
                for j in range(lo, hi):
                    t = float(ts[j])
                    p = a + t * d
                    hits.append(SurfaceHit((float(p[0]), float(p[1]), float(p[2])), int(tris[j]),
                                           _clean_bary(us[j], vs[j]), t))
            out[key] = make_facet(pts, orient[k], hits, s.normals) if hits else None
        return out

    def classify_facet(self, t, i):
        """RestrictedFacet for triangle ``i`` of cell ``t``, or None."""
        return self._classify_one(t, i)

    def _classify_one(self, t, i):
        tess = self.tess
        if tess.tv[t][3] == INF:
            if i != 3:
                raise ValueError("facet through the vertex at infinity")
            t, i = tess.tn[t][3], tess.tn[tess.tn[t][3]].index(t)
        e = tess.voronoi_edge(t, i)
        if e.is_ray:
            o = e.origin
            L = math.dist(o, self._centre) + self.surf.diagonal
            end = tuple(o[k] + L * e.direction[k] for k in range(3))
        else:
            end = e.end
        A, B = self._clip(np.array([e.origin], dtype=float), np.array([end], dtype=float))
        if not np.any(B[0] != A[0]):
            return None
        hits = self.surf.intersect_segment(A[0], B[0])
        if not hits:
            return None
        return make_facet(tess.points, tess.facet_vertices(t, i), hits, self.surf.normals)

    def classify_tet(self, t):
        tess = self.tess
        if tess.tv[t][3] == INF:
            raise ValueError("ghost cell has no circumcentre")
        return self.surf.contains(tess.cc[t])

    def _contains_batch(self, cells):
        cells = [t for t in cells if self.tess.tv[t][3] != INF]
        if not cells:
            return []
        s = self.surf
        P = np.array([self.tess.cc[t] for t in cells], dtype=float)
        inside = K.contains_batch(s.vertices, s.triangles, *s._tree, _dirs(), P, s.tolerance)
        return [t for t, ok in zip(cells, inside) if ok]

    # -- maintenance ------------------------------------------------------

    def _add(self, f):
        self.facets[f.key] = f
        a, b, c = f.key
        pts = self.tess.points
        for e in ((a, b), (a, c), (b, c)):
            ef = self.edge_facets[e]
            if not ef:
                heapq.heappush(self._edge_heap, (math.dist(pts[e[0]], pts[e[1]]), e))
            ef.add(f.key)

    def _remove(self, key):
        f = self.facets.pop(key, None)
        if f is None:
            return None
        a, b, c = key
        for e in ((a, b), (a, c), (b, c)):
            ef = self.edge_facets[e]
            ef.discard(key)
            if not ef:
                del self.edge_facets[e]
        return f

    def rebuild(self):
        """Classify the whole tessellation from scratch."""
        self.facets = {}
        self.edge_facets = defaultdict(set)
        self._edge_heap = []
        cells = list(self.tess.cells(finite=False))
        for key, f in sorted(self._classify(cells).items()):
            if f is not None:
                self._add(f)
        self.volume = set(self._contains_batch(cells))

    def update_after_insert(self, destroyed, created):
        """Reclassify the facets and cells touched by one insertion.

        Returns (removed, added): the facets that left the complex and those
        that (re-)entered it.
        """
        tv = self.tess.tv
        gone = set()
        for t in destroyed:
            v = tv[t]
            for i in (range(3, 4) if v[3] == INF else range(4)):
                f = FACES[i]
                gone.add(tuple(sorted((v[f[0]], v[f[1]], v[f[2]]))))
            self.volume.discard(t)
        removed = []
        for key in sorted(gone):
            f = self._remove(key)
            if f is not None:
                removed.append(f)
        added = []
        # cavity-boundary facets were removed above and are reclassified here
        for key, f in sorted(self._classify(created).items()):
            if f is not None:
                self._add(f)
                added.append(f)
        self.volume.update(self._contains_batch(created))
        return removed, added

    # -- queries ----------------------------------------------------------

    def min_edge(self):
        """Shortest edge of the restricted surface triangulation."""
        heap, ef, pts = self._edge_heap, self.edge_facets, self.tess.points
        while heap:
            length, e = heap[0]
            if e in ef:
                return length
            heapq.heappop(heap)
        return math.inf

    def vertex_edges(self, v):
        """Lengths of the restricted edges incident to vertex ``v``."""
        pts = self.tess.points
        out = []
        for f in self._vertex_facets(v):
            for u in f.key:
                if u != v:
                    out.append(math.dist(pts[u], pts[v]))
        return out

    def _vertex_facets(self, v):
        tv = self.tess.tv
        seen = set()
        for t in self.tess.incident_cells(v):
            w = tv[t]
            for i in (range(3, 4) if w[3] == INF else range(4)):
                f = FACES[i]
                key = tuple(sorted((w[f[0]], w[f[1]], w[f[2]])))
                if v in key and key not in seen:
                    seen.add(key)
                    if key in self.facets:
                        yield self.facets[key]

    def triangles(self):
        """Oriented restricted facets, sorted by key: (vertex ids, triangles)."""
        tris = [self.facets[k].verts for k in sorted(self.facets)]
        used = sorted({v for t in tris for v in t})
        index = {v: i for i, v in enumerate(used)}
        pts = self.tess.points
        V = np.array([pts[v] for v in used], dtype=float).reshape(-1, 3)
        F = np.array([[index[v] for v in t] for t in tris], dtype=np.int64).reshape(-1, 3)
        return V, F, used

    def volume_tets(self):
        tv = self.tess.tv
        return sorted(tuple(tv[t]) for t in self.volume)

    def manifoldness_report(self):
        return manifoldness_report(self.facets.keys())


def _dirs():
    from .surface import _DIRS
    return _DIRS


def manifoldness_report(facet_keys):
    """Edge-use histogram, Euler characteristic and component count of a
    triangle set given as vertex triples."""
    keys = [tuple(k) for k in facet_keys]
    uses = Counter()
    verts = set()
    for a, b, c in keys:
        verts.update((a, b, c))
        for e in ((a, b), (b, c), (a, c)):
            uses[tuple(sorted(e))] += 1
    hist = Counter(uses.values())
    parent = {v: v for v in verts}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b, c in keys:
        ra = find(a)
        for u in (b, c):
            ru = find(u)
            if ru != ra:
                parent[ru] = ra
    components = len({find(v) for v in verts})
    return {
        "edge_use_histogram": {int(k): int(v) for k, v in sorted(hist.items())},
        "euler_characteristic": len(verts) - len(uses) + len(keys),
        "components": components,
        "vertices": len(verts),
        "edges": len(uses),
        "facets": len(keys),
        "manifold": set(hist) <= {2},
    }
