"""Mesh-size functions on the input surface.

The target edge length is stored at the vertices of the input surface and
interpolated linearly over its triangles. Geometric sizing comes from an
estimate of the local feature size (distance to the medial axis, approximated
by Voronoi poles); a graph-distance gradient limit keeps the field g-Lipschitz.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from . import _kernels as K


class SizeFieldError(ValueError):
    pass


@dataclass
class LfsEstimate:
    """Per-vertex local feature size and the pole cloud it was measured to.

    ``fallback`` marks vertices where no pole was found and the distance to
    the nearest non-adjacent triangle was used instead.
    """

    values: np.ndarray
    poles: np.ndarray
    fallback: np.ndarray


def _tet_circumcentres(P, simplices):
    a = P[simplices[:, 0]]
    rows = P[simplices[:, 1:]] - a[:, None, :]
    rhs = 0.5 * np.einsum("ijk,ijk->ij", rows, rows)
    det = np.linalg.det(rows)
    ok = np.abs(det) > 1e-14 * np.einsum("ijk,ijk->i", rows, rows) ** 1.5
    cc = np.full((len(simplices), 3), np.nan)
    if ok.any():
        cc[ok] = a[ok] + np.linalg.solve(rows[ok], rhs[ok][..., None])[..., 0]
    return cc


def vertex_normals(surf):
    """Area-weighted vertex normals of the input surface."""
    V, F = surf.vertices, surf.triangles
    n = np.cross(V[F[:, 1]] - V[F[:, 0]], V[F[:, 2]] - V[F[:, 0]])
    vn = np.zeros_like(V)
    for k in range(3):
        np.add.at(vn, F[:, k], n)
    length = np.linalg.norm(vn, axis=1)
    length[length == 0] = 1.0
    return vn / length[:, None]


def estimate_lfs(surf):
    """Local feature size at every vertex of ``surf`` from Voronoi poles.

    For each vertex the farthest Voronoi vertex of its cell on either side of
    the surface (along the vertex normal) is a pole; lfs is the distance from
    the vertex to the nearest pole of any vertex.
    """
    V = surf.vertices
    n = len(V)
    tri = Delaunay(V)
    cc = _tet_circumcentres(V, tri.simplices)
    finite = np.all(np.isfinite(cc), axis=1)
    normals = vertex_normals(surf)
    best_in = np.full(n, -1.0)
    best_out = np.full(n, -1.0)
    pole_in = np.zeros((n, 3))
    pole_out = np.zeros((n, 3))
    for s, simplex in enumerate(tri.simplices):
        if not finite[s]:
            continue
        c = cc[s]
        for v in simplex:
            d = c - V[v]
            dist = float(np.sqrt(d @ d))
            if d @ normals[v] < 0:
                if dist > best_in[v]:
                    best_in[v] = dist
                    pole_in[v] = c
            elif dist > best_out[v]:
                best_out[v] = dist
                pole_out[v] = c
    # poles further than the model size belong to unbounded cells
    far = 2.0 * surf.diagonal
    centre = (surf.bbox[0] + surf.bbox[1]) / 2
    poles = []
    for arr, best in ((pole_in, best_in), (pole_out, best_out)):
        keep = (best > 0) & (np.linalg.norm(arr - centre, axis=1) < far)
        poles.append(arr[keep])
    poles = np.concatenate(poles) if poles else np.zeros((0, 3))
    values = np.full(n, np.inf)
    if len(poles):
        values, _ = cKDTree(poles).query(V)
    fallback = ~(best_in > 0) | ~np.isfinite(values) | (values <= 0)
    if fallback.any():
        values[fallback] = _nonadjacent_distance(surf, np.nonzero(fallback)[0])
    values = np.clip(values, 1e-12 * surf.diagonal, surf.diagonal)
    return LfsEstimate(values=np.asarray(values, dtype=float), poles=poles, fallback=fallback)


def _nonadjacent_distance(surf, vids, k=32):
    V, F = surf.vertices, surf.triangles
    cen = V[F].mean(axis=1)
    tree = cKDTree(cen)
    out = np.empty(len(vids))
    for i, v in enumerate(vids):
        best = surf.diagonal
        _, idx = tree.query(V[v], k=min(k, len(F)))
        for f in np.atleast_1d(idx):
            if v in F[f]:
                continue
            w0, w1, w2 = K._closest_on_tri(*V[v], *V[F[f, 0]], *V[F[f, 1]], *V[F[f, 2]])
            q = w0 * V[F[f, 0]] + w1 * V[F[f, 1]] + w2 * V[F[f, 2]]
            best = min(best, float(np.linalg.norm(q - V[v])))
        out[i] = best
    return out


def surface_edges(surf):
    """Unique undirected edges of the input surface as an (m, 2) array."""
    return np.array(sorted(surf.edge_faces), dtype=np.int64).reshape(-1, 2)


def limit_gradient(points, edges, values, g):
    """Smallest field <= ``values`` with h_i <= h_j + g |x_i - x_j| on every edge.

    Multi-source Dijkstra: h_i = min_j (values_j + g * graph_distance(i, j)).
    """
    n = len(values)
    adj = [[] for _ in range(n)]
    lengths = np.linalg.norm(points[edges[:, 0]] - points[edges[:, 1]], axis=1)
    for (i, j), L in zip(edges.tolist(), lengths.tolist()):
        adj[i].append((j, g * L))
        adj[j].append((i, g * L))
    h = [float(x) for x in values]
    heap = [(h[i], i) for i in range(n)]
    heapq.heapify(heap)
    done = [False] * n
    while heap:
        d, i = heapq.heappop(heap)
        if done[i] or d > h[i]:
            continue
        done[i] = True
        for j, w in adj[i]:
            nd = d + w
            if nd < h[j]:
                h[j] = nd
                heapq.heappush(heap, (nd, j))
    return np.array(h)


def lipschitz_violations(points, edges, values, g, rtol=1e-9):
    """Edges (i, j) where |h_i - h_j| exceeds g |x_i - x_j| beyond ``rtol``."""
    L = np.linalg.norm(points[edges[:, 0]] - points[edges[:, 1]], axis=1)
    hi, hj = values[edges[:, 0]], values[edges[:, 1]]
    excess = np.abs(hi - hj) - g * L
    bad = excess > rtol * np.maximum(hi, hj)
    return edges[bad]


class SizeField:
    """Piecewise-linear target edge length on the input surface.

    Parameters
    ----------
    host : SurfacePolyhedron
    values : (n,) array
        Target edge length at every vertex of ``host``.
    g : float
        Lipschitz bound the values were limited to.
    """

    def __init__(self, host, values, g):
        values = np.asarray(values, dtype=float)
        if values.shape != (len(host.vertices),):
            raise SizeFieldError("one value per surface vertex is required")
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise SizeFieldError("size values must be positive and finite")
        self.host = host
        self.values = values
        self.g = float(g)
        self._constant = float(values[0]) if np.all(values == values[0]) else None

    @property
    def sample_points(self):
        return self.host.vertices

    @property
    def is_constant(self):
        return self._constant is not None

    @property
    def minimum(self):
        return float(self.values.min())

    def __call__(self, p):
        return self.eval(p)

    def eval(self, p):
        """Target edge length at the surface point nearest to ``p``."""
        if self._constant is not None:
            return self._constant
        s = self.host
        _, f, b0, b1, b2, _, _, _ = K.nearest(s.vertices, s.triangles, *s._tree,
                                              float(p[0]), float(p[1]), float(p[2]))
        a, b, c = s.triangles[f]
        v = self.values
        return float(b0 * v[a] + b1 * v[b] + b2 * v[c])

    def violations(self, rtol=1e-9):
        return lipschitz_violations(self.host.vertices, surface_edges(self.host), self.values,
                                    self.g, rtol)

    # -- serialization ----------------------------------------------------

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(f"sizefield v1 g={self.g!r}\n")
            for p, h in zip(self.host.vertices.tolist(), self.values.tolist()):
                fh.write(f"{p[0]!r} {p[1]!r} {p[2]!r} {h!r}\n")

    @classmethod
    def load(cls, path, host):
        """Read a field saved by ``save`` and attach it to ``host``.

        Every sample must coincide with a vertex of ``host``; a field that
        breaks its declared Lipschitz bound is rejected naming the edge.
        """
        with open(path) as fh:
            head = fh.readline().split()
            if len(head) != 3 or head[:2] != ["sizefield", "v1"] or not head[2].startswith("g="):
                raise SizeFieldError(f"{path}: not a 'sizefield v1' file")
            g = float(head[2][2:])
            rows = [line.split() for line in fh if line.strip()]
        try:
            data = np.array(rows, dtype=float).reshape(-1, 4)
        except ValueError:
            raise SizeFieldError(f"{path}: malformed sample line") from None
        dist, idx = cKDTree(data[:, :3]).query(host.vertices)
        if len(data) != len(host.vertices) or np.any(dist > host.tolerance):
            raise SizeFieldError(f"{path}: samples do not match the surface vertices")
        field = cls(host, data[idx, 3], g)
        bad = field.violations()
        if len(bad):
            i, j = bad[0]
            raise SizeFieldError(f"{path}: gradient limit g={g} violated on edge ({i}, {j})")
        return field


def build_field(surf, lfs=None, user_h=np.inf, epsilon=0.5, g=0.2):
    """Gradient-limited size field min(user_h, epsilon * lfs).

    ``user_h`` is a constant or one value per surface vertex; ``lfs`` is an
    LfsEstimate (computed when omitted, skipped when ``epsilon`` is inf).
    """
    if not epsilon > 0:
        raise SizeFieldError("epsilon must be positive")
    if not 0 < g < 1:
        raise SizeFieldError("gradient limit g must lie in (0, 1)")
    n = len(surf.vertices)
    user = np.broadcast_to(np.asarray(user_h, dtype=float), (n,)).copy()
    if np.any(user <= 0) or np.any(np.isnan(user)):
        raise SizeFieldError("user size must be positive")
    if math.isinf(epsilon):
        raw = user
    else:
        if lfs is None:
            lfs = estimate_lfs(surf)
        raw = np.minimum(user, epsilon * lfs.values)
    if not np.all(np.isfinite(raw)):
        raise SizeFieldError("no finite size constraint: give user_h or a finite epsilon")
    values = limit_gradient(surf.vertices, surface_edges(surf), raw, g)
    return SizeField(surf, values, g)


def constant_field(surf, h, g=0.2):
    """Uniform target edge length ``h`` (trivially Lipschitz)."""
    return SizeField(surf, np.full(len(surf.vertices), float(h)), g)
