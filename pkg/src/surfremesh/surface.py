"""The input surface and the oracle queries refinement runs against it."""

from __future__ import annotations

import logging
import math
from typing import NamedTuple

import numpy as np

from . import _kernels as K
from .meshio import read_mesh
from .predicates import Plane3

log = logging.getLogger(__name__)


class SurfaceValidationError(ValueError):
    """The input is not a closed, consistently oriented 2-manifold."""


class SurfaceHit(NamedTuple):
    point: tuple
    triangle: int
    bary: tuple
    t: float


def _ray_directions(n=8):
    # fixed, irrational-looking directions: no axis or diagonal alignment
    golden = (1 + 5 ** 0.5) / 2
    dirs = []
    for i in range(n):
        z = 1 - 2 * ((i + 0.5) / n)
        phi = 2 * math.pi * ((i * golden + 0.1234567) % 1.0)
        s = math.sqrt(1 - z * z)
        dirs.append((s * math.cos(phi), s * math.sin(phi), z))
    return np.array(dirs)


_DIRS = _ray_directions()


def _clean_bary(u, v):
    b = np.clip([1.0 - u - v, u, v], 0.0, None)
    b = b / b.sum()
    return (float(b[0]), float(b[1]), float(b[2]))


class SurfacePolyhedron:
    """Closed triangle surface with an AABB tree for oracle queries.

    Parameters
    ----------
    vertices : (n, 3) array_like
    triangles : (m, 3) array_like of int
    validate : bool
        Check closedness, manifoldness and orientation (default True).
    """

    def __init__(self, vertices, triangles, validate=True):
        V = np.ascontiguousarray(vertices, dtype=float).reshape(-1, 3)
        F = np.ascontiguousarray(triangles, dtype=np.int64).reshape(-1, 3)
        if len(F) == 0:
            raise SurfaceValidationError("surface has no triangles")
        if not np.all(np.isfinite(V)):
            raise SurfaceValidationError("non-finite vertex coordinates")
        self.vertices = V
        self.triangles = F
        lo, hi = V.min(axis=0), V.max(axis=0)
        self.bbox = (lo, hi)
        self.diagonal = float(np.linalg.norm(hi - lo))
        self.tolerance = 1e-10 * self.diagonal
        self.edge_faces = self._edge_map()
        if validate:
            self._validate()
        self.components = self._label_components()
        self.n_components = int(self.components.max()) + 1
        n = np.cross(V[F[:, 1]] - V[F[:, 0]], V[F[:, 2]] - V[F[:, 0]])
        self.areas = 0.5 * np.linalg.norm(n, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            self.normals = n / np.linalg.norm(n, axis=1)[:, None]
        self.normals[~np.isfinite(self.normals)] = 0.0
        self._tree = K.build_tree(V, F, 1e-12 * max(self.diagonal, 1e-300))

    @classmethod
    def from_file(cls, path):
        verts, faces = read_mesh(path)
        return cls(verts, faces)

    # -- topology ---------------------------------------------------------

    def _edge_map(self):
        """Undirected edge -> list of (triangle, directed?) uses."""
        em = {}
        for f, (a, b, c) in enumerate(self.triangles.tolist()):
            for u, v in ((a, b), (b, c), (c, a)):
                em.setdefault((min(u, v), max(u, v)), []).append((f, u < v))
        return em

    def _validate(self):
        F = self.triangles
        bad = np.nonzero((F[:, 0] == F[:, 1]) | (F[:, 1] == F[:, 2]) | (F[:, 2] == F[:, 0]))[0]
        if len(bad):
            raise SurfaceValidationError(f"triangle {int(bad[0])} repeats a vertex")
        for edge in sorted(self.edge_faces):
            uses = self.edge_faces[edge]
            if len(uses) == 1:
                raise SurfaceValidationError(f"open surface: boundary edge {edge} (triangle {uses[0][0]})")
            if len(uses) > 2:
                raise SurfaceValidationError(
                    f"non-manifold edge {edge} shared by {len(uses)} triangles")
            if uses[0][1] == uses[1][1]:
                raise SurfaceValidationError(
                    f"inconsistent orientation across edge {edge} (triangles {uses[0][0]}, {uses[1][0]})")
        # vertex links must be single fans
        fan = {}
        FL = [set(t) for t in F.tolist()]
        for f, tri in enumerate(F.tolist()):
            for v in tri:
                fan.setdefault(v, []).append(f)
        for v, faces in fan.items():
            adj = {f: [] for f in faces}
            for f in faces:
                for g in faces:
                    if f < g and len(FL[f] & FL[g]) == 2:
                        adj[f].append(g)
                        adj[g].append(f)
            seen, stack = {faces[0]}, [faces[0]]
            while stack:
                for g in adj[stack.pop()]:
                    if g not in seen:
                        seen.add(g)
                        stack.append(g)
            if len(seen) != len(faces):
                raise SurfaceValidationError(f"non-manifold vertex {v}")

    def _label_components(self):
        from scipy.sparse import coo_matrix
        from scipy.sparse.csgraph import connected_components
        rows, cols = [], []
        for uses in self.edge_faces.values():
            for i in range(1, len(uses)):
                rows.append(uses[0][0])
                cols.append(uses[i][0])
        m = len(self.triangles)
        g = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(m, m))
        _, labels = connected_components(g, directed=False)
        return labels.astype(np.int64)

    def signed_volume(self):
        V, F = self.vertices, self.triangles
        a, b, c = V[F[:, 0]], V[F[:, 1]], V[F[:, 2]]
        return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)

    def component_vertices(self):
        """Vertex ids per connected component."""
        out = []
        for k in range(self.n_components):
            out.append(np.unique(self.triangles[self.components == k]))
        return out

    # -- oracle queries ---------------------------------------------------

    def _line(self, o, d, tmin, tmax):
        n, ts, tris, us, vs, grazing = K.line_hits(
            self.vertices, self.triangles, *self._tree,
            o[0], o[1], o[2], d[0], d[1], d[2], tmin, tmax, 1e-10, self.tolerance)
        return n, ts, tris, us, vs, grazing

    def _line_query(self, o, d, tmin, tmax):
        o = np.asarray(o, dtype=float)
        d = np.asarray(d, dtype=float)
        n, ts, tris, us, vs, grazing = self._line(o, d, tmin, tmax)
        retries = 0
        while grazing and retries < 3:
            # nudge the query off the coplanar triangle and try again
            retries += 1
            shift = 1e-12 * self.diagonal * retries * _DIRS[retries]
            shift -= d * (shift @ d) / (d @ d)
            n, ts, tris, us, vs, grazing = self._line(o + shift, d, tmin, tmax)
        hits = []
        for i in range(n):
            t = float(ts[i])
            p = o + t * d
            hits.append(SurfaceHit((float(p[0]), float(p[1]), float(p[2])), int(tris[i]),
                                   _clean_bary(us[i], vs[i]), t))
        return hits

    def intersect_segment(self, a, b):
        """Hits of segment a-b with the surface, sorted by parameter in [0, 1]."""
        a = np.asarray(a, dtype=float)
        d = np.asarray(b, dtype=float) - a
        if not np.any(d):
            raise ValueError("degenerate segment")
        return self._line_query(a, d, 0.0, 1.0)

    def intersect_ray(self, origin, direction):
        """Hits of the ray origin + t*direction, t >= 0 (direction unit)."""
        d = np.asarray(direction, dtype=float)
        nd = float(np.linalg.norm(d))
        if not abs(nd - 1.0) <= 1e-9:
            raise ValueError("ray direction must be unit length")
        return self._line_query(origin, d, 0.0, np.inf)

    def intersect_circle(self, plane, centre, radius):
        """Points of the surface on ``plane`` at distance ``radius`` from ``centre``."""
        if not radius > 0:
            raise ValueError("circle radius must be positive")
        if not isinstance(plane, Plane3):
            plane = Plane3.from_normal(*plane)
        c = np.asarray(centre, dtype=float)
        nrm = np.asarray(plane.normal, dtype=float)
        n, xyz, tris, bary = K.circle_hits(
            self.vertices, self.triangles, *self._tree,
            c[0], c[1], c[2], nrm[0], nrm[1], nrm[2], float(radius), self.tolerance)
        hits = []
        for i in range(n):
            p = xyz[i]
            b = np.clip(bary[i], 0.0, None)
            b = b / b.sum()
            ang = math.atan2(*_plane_coords(p - c, nrm)[::-1])
            hits.append(SurfaceHit((float(p[0]), float(p[1]), float(p[2])), int(tris[i]),
                                   (float(b[0]), float(b[1]), float(b[2])), ang))
        hits.sort(key=lambda h: (h.t, h.triangle))
        return hits

    def contains(self, p):
        """True if p is inside the enclosed volume or on the surface."""
        return bool(K.contains(self.vertices, self.triangles, *self._tree, _DIRS,
                               float(p[0]), float(p[1]), float(p[2]), self.tolerance))

    def nearest_point(self, p):
        """Closest surface point; ``t`` holds the distance."""
        d2, f, b0, b1, b2, x, y, z = K.nearest(self.vertices, self.triangles, *self._tree,
                                               float(p[0]), float(p[1]), float(p[2]))
        return SurfaceHit((float(x), float(y), float(z)), int(f), (float(b0), float(b1), float(b2)),
                          math.sqrt(d2))

    def normal_at(self, hit):
        return self.normals[hit.triangle]


def _plane_coords(v, n):
    """Coordinates of v in a fixed orthonormal frame of the plane normal to n."""
    a = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(n, a)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    return float(v @ e1), float(v @ e2)


def load_and_validate(path):
    """Read an OFF/OBJ file and build a validated SurfacePolyhedron."""
    return SurfacePolyhedron.from_file(path)
