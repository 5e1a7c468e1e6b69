"""Closed test surfaces: icospheres, tori, rounded cubes, flat plates."""

import numpy as np


def icosahedron():
    t = (1 + 5 ** 0.5) / 2
    v = np.array([(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
                  (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
                  (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)], dtype=float)
    v /= np.linalg.norm(v, axis=1)[:, None]
    f = np.array([(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
                  (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
                  (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
                  (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)], dtype=np.int64)
    return v, f


def _subdivide(v, f):
    v = [tuple(p) for p in v]
    mid = {}

    def m(a, b):
        key = (min(a, b), max(a, b))
        if key not in mid:
            mid[key] = len(v)
            v.append(tuple((np.asarray(v[a]) + np.asarray(v[b])) / 2))
        return mid[key]

    out = []
    for a, b, c in f.tolist():
        ab, bc, ca = m(a, b), m(b, c), m(c, a)
        out += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
    return np.array(v), np.array(out, dtype=np.int64)


def icosphere(subdiv=2, radius=1.0, centre=(0.0, 0.0, 0.0)):
    v, f = icosahedron()
    for _ in range(subdiv):
        v, f = _subdivide(v, f)
        v /= np.linalg.norm(v, axis=1)[:, None]
    return v * radius + np.asarray(centre, dtype=float), f


def torus(R=1.0, r=0.4, nu=48, nv=24):
    u = 2 * np.pi * np.arange(nu) / nu
    w = 2 * np.pi * np.arange(nv) / nv
    U, W = np.meshgrid(u, w, indexing="ij")
    x = (R + r * np.cos(W)) * np.cos(U)
    y = (R + r * np.cos(W)) * np.sin(U)
    z = r * np.sin(W)
    v = np.stack([x, y, z], axis=-1).reshape(-1, 3)
    f = []
    for i in range(nu):
        for j in range(nv):
            a = i * nv + j
            b = ((i + 1) % nu) * nv + j
            c = ((i + 1) % nu) * nv + (j + 1) % nv
            d = i * nv + (j + 1) % nv
            f += [(a, b, c), (a, c, d)]
    return v, np.array(f, dtype=np.int64)


def box(size=(1.0, 1.0, 1.0), n=4, centre=(0.0, 0.0, 0.0)):
    """Axis-aligned box surface, each face split into an n x n grid."""
    verts, faces, index = [], [], {}

    def vid(p):
        key = tuple(np.round(p, 12))
        if key not in index:
            index[key] = len(verts)
            verts.append(p)
        return index[key]

    s = np.arange(n + 1) / n * 2 - 1
    for axis in range(3):
        for sign in (-1.0, 1.0):
            a1, a2 = (axis + 1) % 3, (axis + 2) % 3
            grid = np.empty((n + 1, n + 1), dtype=np.int64)
            for i in range(n + 1):
                for j in range(n + 1):
                    p = np.zeros(3)
                    p[axis] = sign
                    p[a1] = s[i]
                    p[a2] = s[j]
                    grid[i, j] = vid(p)
            for i in range(n):
                for j in range(n):
                    q = (grid[i, j], grid[i + 1, j], grid[i + 1, j + 1], grid[i, j + 1])
                    if sign < 0:
                        q = q[::-1]
                    faces += [(q[0], q[1], q[2]), (q[0], q[2], q[3])]
    v = np.array(verts) * (np.asarray(size, dtype=float) / 2) + np.asarray(centre, dtype=float)
    return v, np.array(faces, dtype=np.int64)


def rounded_cube(half=0.5, fillet=0.2, n=12):
    """Cube of half-size ``half`` + ``fillet`` with edges rounded by ``fillet``."""
    v, f = box((2.0, 2.0, 2.0), n)
    v = v * (half + fillet)
    core = np.clip(v, -half, half)
    d = v - core
    nd = np.linalg.norm(d, axis=1)
    ok = nd > 0
    d[ok] /= nd[ok][:, None]
    return core + fillet * d, f


def flat_plate(size=(2.0, 2.0, 0.1), n=8):
    """Thin slab: two large flat faces joined by narrow sides."""
    return box(size, n)
