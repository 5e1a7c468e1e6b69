"""Compiled inner loops for the surface oracle (AABB tree traversal).

All kernels take the flattened tree arrays built by ``build_tree`` and plain
scalars for query geometry, so calls from Python allocate nothing.
"""

import math

import numba as nb
import numpy as np

LEAF_SIZE = 8


def build_tree(verts, faces, pad):
    """Median-split AABB hierarchy over triangle boxes.

    Returns (lo, hi, left, right, start, count, order); leaves have left == -1
    and own ``order[start:start + count]``.
    """
    tri = verts[faces]
    tlo = tri.min(axis=1)
    thi = tri.max(axis=1)
    cen = tri.mean(axis=1)
    order = np.arange(len(faces), dtype=np.int64)
    lo, hi, left, right, start, count = [], [], [], [], [], []

    def node(s, e):
        k = len(lo)
        idx = order[s:e]
        lo.append(tlo[idx].min(axis=0) - pad)
        hi.append(thi[idx].max(axis=0) + pad)
        left.append(-1)
        right.append(-1)
        start.append(s)
        count.append(e - s)
        if e - s > LEAF_SIZE:
            c = cen[idx]
            axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
            # stable sort keeps the build deterministic under ties
            perm = np.argsort(c[:, axis], kind="stable")
            order[s:e] = idx[perm]
            m = s + (e - s) // 2
            left[k] = node(s, m)
            right[k] = node(m, e)
        return k

    if len(faces):
        node(0, len(faces))
    return (np.array(lo, dtype=float).reshape(-1, 3), np.array(hi, dtype=float).reshape(-1, 3),
            np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
            np.array(start, dtype=np.int64), np.array(count, dtype=np.int64), order)


@nb.njit(cache=True, inline="always")
def _slab(o, d, lo, hi, t0, t1):
    if d == 0.0:
        if o < lo or o > hi:
            return 1.0, 0.0
        return t0, t1
    inv = 1.0 / d
    ta = (lo - o) * inv
    tb = (hi - o) * inv
    if ta > tb:
        ta, tb = tb, ta
    return max(t0, ta), min(t1, tb)


@nb.njit(cache=True)
def _line_box(ox, oy, oz, dx, dy, dz, tmin, tmax, lo, hi, k):
    t0, t1 = _slab(ox, dx, lo[k, 0], hi[k, 0], tmin, tmax)
    if t0 > t1:
        return False
    t0, t1 = _slab(oy, dy, lo[k, 1], hi[k, 1], t0, t1)
    if t0 > t1:
        return False
    t0, t1 = _slab(oz, dz, lo[k, 2], hi[k, 2], t0, t1)
    return t0 <= t1


@nb.njit(cache=True)
def line_hits(V, F, lo, hi, left, right, start, count, order,
              ox, oy, oz, dx, dy, dz, tmin, tmax, btol, merge):
    """Intersections of o + t d, t in [tmin, tmax], with the triangles.

    Returns (n, t, tri, u, v, grazing) sorted by t. Hits closer than ``merge``
    (in model units) are merged. ``grazing`` flags a triangle coplanar with the
    line that the line actually touches.
    """
    cap = 32
    ts = np.empty(cap)
    tris = np.empty(cap, dtype=np.int64)
    us = np.empty(cap)
    vs = np.empty(cap)
    n = 0
    grazing = False
    dl = math.sqrt(dx * dx + dy * dy + dz * dz)
    if len(left) == 0:
        return 0, ts, tris, us, vs, False
    stack = np.empty(256, dtype=np.int64)
    sp = 1
    stack[0] = 0
    while sp > 0:
        sp -= 1
        k = stack[sp]
        if not _line_box(ox, oy, oz, dx, dy, dz, tmin, tmax, lo, hi, k):
            continue
        if left[k] >= 0:
            stack[sp] = left[k]
            stack[sp + 1] = right[k]
            sp += 2
            continue
        for j in range(start[k], start[k] + count[k]):
            f = order[j]
            a = F[f, 0]; b = F[f, 1]; c = F[f, 2]
            e1x = V[b, 0] - V[a, 0]; e1y = V[b, 1] - V[a, 1]; e1z = V[b, 2] - V[a, 2]
            e2x = V[c, 0] - V[a, 0]; e2y = V[c, 1] - V[a, 1]; e2z = V[c, 2] - V[a, 2]
            px = dy * e2z - dz * e2y; py = dz * e2x - dx * e2z; pz = dx * e2y - dy * e2x
            det = e1x * px + e1y * py + e1z * pz
            sx = ox - V[a, 0]; sy = oy - V[a, 1]; sz = oz - V[a, 2]
            l1 = math.sqrt(e1x * e1x + e1y * e1y + e1z * e1z)
            l2 = math.sqrt(e2x * e2x + e2y * e2y + e2z * e2z)
            if abs(det) <= 1e-13 * l1 * l2 * dl:
                nx = e1y * e2z - e1z * e2y; ny = e1z * e2x - e1x * e2z; nz = e1x * e2y - e1y * e2x
                nn = math.sqrt(nx * nx + ny * ny + nz * nz)
                if nn > 0.0 and abs(sx * nx + sy * ny + sz * nz) <= 1e-12 * nn * (l1 + l2):
                    grazing = True
                continue
            inv = 1.0 / det
            u = (sx * px + sy * py + sz * pz) * inv
            if u < -btol or u > 1.0 + btol:
                continue
            qx = sy * e1z - sz * e1y; qy = sz * e1x - sx * e1z; qz = sx * e1y - sy * e1x
            v = (dx * qx + dy * qy + dz * qz) * inv
            if v < -btol or u + v > 1.0 + btol:
                continue
            t = (e2x * qx + e2y * qy + e2z * qz) * inv
            if t < tmin or t > tmax:
                continue
            if n == cap:
                cap *= 2
                ts2 = np.empty(cap); ts2[:n] = ts; ts = ts2
                tr2 = np.empty(cap, dtype=np.int64); tr2[:n] = tris; tris = tr2
                us2 = np.empty(cap); us2[:n] = us; us = us2
                vs2 = np.empty(cap); vs2[:n] = vs; vs = vs2
            ts[n] = t; tris[n] = f; us[n] = u; vs[n] = v
            n += 1
    if n > 1:
        # sort by (t, tri) for determinism
        keys = np.empty(n)
        for i in range(n):
            keys[i] = ts[i]
        idx = np.argsort(keys, kind="mergesort")
        ts = ts[idx]; tris = tris[idx]; us = us[idx]; vs = vs[idx]
        m = 1
        for i in range(1, n):
            if (ts[i] - ts[m - 1]) * dl <= merge:
                continue
            ts[m] = ts[i]; tris[m] = tris[i]; us[m] = us[i]; vs[m] = vs[i]
            m += 1
        n = m
    return n, ts, tris, us, vs, grazing


@nb.njit(cache=True)
def _closest_on_tri(px, py, pz, ax, ay, az, bx, by, bz, cx, cy, cz):
    # Ericson, Real-Time Collision Detection, 5.1.5; returns barycentrics
    abx = bx - ax; aby = by - ay; abz = bz - az
    acx = cx - ax; acy = cy - ay; acz = cz - az
    apx = px - ax; apy = py - ay; apz = pz - az
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return 1.0, 0.0, 0.0
    bpx = px - bx; bpy = py - by; bpz = pz - bz
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return 0.0, 1.0, 0.0
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        return 1.0 - v, v, 0.0
    cpx = px - cx; cpy = py - cy; cpz = pz - cz
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return 0.0, 0.0, 1.0
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        return 1.0 - w, 0.0, w
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return 0.0, 1.0 - w, w
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    return 1.0 - v - w, v, w


@nb.njit(cache=True)
def _box_dist2(px, py, pz, lo, hi, k):
    d = 0.0
    q = px
    if q < lo[k, 0]:
        d += (lo[k, 0] - q) ** 2
    elif q > hi[k, 0]:
        d += (q - hi[k, 0]) ** 2
    q = py
    if q < lo[k, 1]:
        d += (lo[k, 1] - q) ** 2
    elif q > hi[k, 1]:
        d += (q - hi[k, 1]) ** 2
    q = pz
    if q < lo[k, 2]:
        d += (lo[k, 2] - q) ** 2
    elif q > hi[k, 2]:
        d += (q - hi[k, 2]) ** 2
    return d


@nb.njit(cache=True)
def nearest(V, F, lo, hi, left, right, start, count, order, px, py, pz):
    """Closest point on the triangles: (dist2, tri, b0, b1, b2, x, y, z)."""
    best = np.inf
    bt = -1
    b0 = b1 = b2 = 0.0
    qx = qy = qz = 0.0
    if len(left) == 0:
        return best, bt, b0, b1, b2, qx, qy, qz
    stack = np.empty(256, dtype=np.int64)
    sp = 1
    stack[0] = 0
    while sp > 0:
        sp -= 1
        k = stack[sp]
        if _box_dist2(px, py, pz, lo, hi, k) > best:
            continue
        if left[k] >= 0:
            dl = _box_dist2(px, py, pz, lo, hi, left[k])
            dr = _box_dist2(px, py, pz, lo, hi, right[k])
            if dl < dr:
                stack[sp] = right[k]; stack[sp + 1] = left[k]
            else:
                stack[sp] = left[k]; stack[sp + 1] = right[k]
            sp += 2
            continue
        for j in range(start[k], start[k] + count[k]):
            f = order[j]
            a = F[f, 0]; b = F[f, 1]; c = F[f, 2]
            w0, w1, w2 = _closest_on_tri(px, py, pz, V[a, 0], V[a, 1], V[a, 2],
                                         V[b, 0], V[b, 1], V[b, 2], V[c, 0], V[c, 1], V[c, 2])
            x = w0 * V[a, 0] + w1 * V[b, 0] + w2 * V[c, 0]
            y = w0 * V[a, 1] + w1 * V[b, 1] + w2 * V[c, 1]
            z = w0 * V[a, 2] + w1 * V[b, 2] + w2 * V[c, 2]
            d2 = (x - px) ** 2 + (y - py) ** 2 + (z - pz) ** 2
            if d2 < best or (d2 == best and f < bt):
                best = d2; bt = f
                b0 = w0; b1 = w1; b2 = w2
                qx = x; qy = y; qz = z
    return best, bt, b0, b1, b2, qx, qy, qz


@nb.njit(cache=True)
def contains(V, F, lo, hi, left, right, start, count, order, dirs, px, py, pz, on_tol):
    """Ray-parity point-in-volume test; points on the surface count as inside."""
    parity = 0
    for r in range(dirs.shape[0]):
        dx = dirs[r, 0]; dy = dirs[r, 1]; dz = dirs[r, 2]
        n, ts, tris, us, vs, grazing = line_hits(V, F, lo, hi, left, right, start, count, order,
                                                 px, py, pz, dx, dy, dz, -on_tol, np.inf, 1e-9, 0.0)
        clean = not grazing
        for i in range(n):
            if abs(ts[i]) <= on_tol:
                return True
            u = us[i]; v = vs[i]
            if u < 1e-9 or v < 1e-9 or 1.0 - u - v < 1e-9:
                clean = False
        parity = 0
        for i in range(n):
            if ts[i] > 0.0:
                parity ^= 1
        if clean:
            return parity == 1
    return parity == 1


@nb.njit(cache=True)
def circle_hits(V, F, lo, hi, left, right, start, count, order,
                cx, cy, cz, nx, ny, nz, radius, merge):
    """Points on the triangles lying on the plane through c with normal n and
    at distance ``radius`` from c. Returns (n, xyz, tri, bary)."""
    cap = 16
    xyz = np.empty((cap, 3))
    tris = np.empty(cap, dtype=np.int64)
    bary = np.empty((cap, 3))
    n = 0
    if len(left) == 0:
        return 0, xyz, tris, bary
    stack = np.empty(256, dtype=np.int64)
    sp = 1
    stack[0] = 0
    r2 = radius * radius
    while sp > 0:
        sp -= 1
        k = stack[sp]
        if _box_dist2(cx, cy, cz, lo, hi, k) > r2:
            continue
        # box must straddle the plane
        mx = 0.5 * (lo[k, 0] + hi[k, 0]); my = 0.5 * (lo[k, 1] + hi[k, 1]); mz = 0.5 * (lo[k, 2] + hi[k, 2])
        ex = 0.5 * (hi[k, 0] - lo[k, 0]); ey = 0.5 * (hi[k, 1] - lo[k, 1]); ez = 0.5 * (hi[k, 2] - lo[k, 2])
        s = (mx - cx) * nx + (my - cy) * ny + (mz - cz) * nz
        ext = ex * abs(nx) + ey * abs(ny) + ez * abs(nz)
        if abs(s) > ext:
            continue
        if left[k] >= 0:
            stack[sp] = left[k]
            stack[sp + 1] = right[k]
            sp += 2
            continue
        for j in range(start[k], start[k] + count[k]):
            f = order[j]
            ia = F[f, 0]; ib = F[f, 1]; ic = F[f, 2]
            ids = (ia, ib, ic)
            sd = np.empty(3)
            for q in range(3):
                i = ids[q]
                sd[q] = (V[i, 0] - cx) * nx + (V[i, 1] - cy) * ny + (V[i, 2] - cz) * nz
            if (sd[0] > 0 and sd[1] > 0 and sd[2] > 0) or (sd[0] < 0 and sd[1] < 0 and sd[2] < 0):
                continue
            if sd[0] == 0 and sd[1] == 0 and sd[2] == 0:
                continue
            # clip: up to two points on the plane, kept as barycentric coords
            seg = np.zeros((2, 3))
            m = 0
            for q in range(3):
                if sd[q] == 0.0 and m < 2:
                    seg[m, q] = 1.0
                    m += 1
            for q in range(3):
                q2 = (q + 1) % 3
                if sd[q] * sd[q2] < 0.0 and m < 2:
                    w = sd[q] / (sd[q] - sd[q2])
                    seg[m, q] = 1.0 - w
                    seg[m, q2] = w
                    m += 1
            if m == 0:
                continue
            if m == 1:
                seg[1, :] = seg[0, :]
            p0x = seg[0, 0] * V[ia, 0] + seg[0, 1] * V[ib, 0] + seg[0, 2] * V[ic, 0]
            p0y = seg[0, 0] * V[ia, 1] + seg[0, 1] * V[ib, 1] + seg[0, 2] * V[ic, 1]
            p0z = seg[0, 0] * V[ia, 2] + seg[0, 1] * V[ib, 2] + seg[0, 2] * V[ic, 2]
            p1x = seg[1, 0] * V[ia, 0] + seg[1, 1] * V[ib, 0] + seg[1, 2] * V[ic, 0]
            p1y = seg[1, 0] * V[ia, 1] + seg[1, 1] * V[ib, 1] + seg[1, 2] * V[ic, 1]
            p1z = seg[1, 0] * V[ia, 2] + seg[1, 1] * V[ib, 2] + seg[1, 2] * V[ic, 2]
            ddx = p1x - p0x; ddy = p1y - p0y; ddz = p1z - p0z
            fx = p0x - cx; fy = p0y - cy; fz = p0z - cz
            qa = ddx * ddx + ddy * ddy + ddz * ddz
            qb = 2.0 * (ddx * fx + ddy * fy + ddz * fz)
            qc = fx * fx + fy * fy + fz * fz - r2
            roots = np.empty(2)
            nr = 0
            if qa <= 1e-30 * (r2 + 1e-300):
                if abs(qc) <= 1e-9 * r2:
                    roots[0] = 0.0
                    nr = 1
            else:
                disc = qb * qb - 4.0 * qa * qc
                if disc < 0.0:
                    continue
                sq = math.sqrt(disc)
                # stable quadratic roots
                if qb >= 0:
                    qq = -0.5 * (qb + sq)
                else:
                    qq = -0.5 * (qb - sq)
                t1 = qq / qa
                t2 = qc / qq if qq != 0.0 else t1
                for t in (t1, t2):
                    if -1e-12 <= t <= 1.0 + 1e-12:
                        if nr == 1 and abs(roots[0] - t) <= 1e-15:
                            continue
                        roots[nr] = min(max(t, 0.0), 1.0)
                        nr += 1
            for ri in range(nr):
                t = roots[ri]
                w0 = (1.0 - t) * seg[0, 0] + t * seg[1, 0]
                w1 = (1.0 - t) * seg[0, 1] + t * seg[1, 1]
                w2 = (1.0 - t) * seg[0, 2] + t * seg[1, 2]
                x = w0 * V[ia, 0] + w1 * V[ib, 0] + w2 * V[ic, 0]
                y = w0 * V[ia, 1] + w1 * V[ib, 1] + w2 * V[ic, 1]
                z = w0 * V[ia, 2] + w1 * V[ib, 2] + w2 * V[ic, 2]
                dup = False
                for h in range(n):
                    if (xyz[h, 0] - x) ** 2 + (xyz[h, 1] - y) ** 2 + (xyz[h, 2] - z) ** 2 <= merge * merge:
                        dup = True
                        break
                if dup:
                    continue
                if n == cap:
                    cap *= 2
                    x2 = np.empty((cap, 3)); x2[:n] = xyz[:n]; xyz = x2
                    t2a = np.empty(cap, dtype=np.int64); t2a[:n] = tris[:n]; tris = t2a
                    b2a = np.empty((cap, 3)); b2a[:n] = bary[:n]; bary = b2a
                xyz[n, 0] = x; xyz[n, 1] = y; xyz[n, 2] = z
                tris[n] = f
                bary[n, 0] = w0; bary[n, 1] = w1; bary[n, 2] = w2
                n += 1
    return n, xyz, tris, bary


@nb.njit(cache=True)
def segments_batch(V, F, lo, hi, left, right, start, count, order, A, B, btol, merge):
    """``line_hits`` over many segments A[k] -> B[k].

    Returns (offsets, t, tri, u, v, grazing) with the hits of segment k in
    ``offsets[k]:offsets[k + 1]``.
    """
    m = A.shape[0]
    offsets = np.zeros(m + 1, dtype=np.int64)
    grazing = np.zeros(m, dtype=np.bool_)
    cap = 4 * m + 8
    ts = np.empty(cap)
    tris = np.empty(cap, dtype=np.int64)
    us = np.empty(cap)
    vs = np.empty(cap)
    n = 0
    for k in range(m):
        dx = B[k, 0] - A[k, 0]; dy = B[k, 1] - A[k, 1]; dz = B[k, 2] - A[k, 2]
        c, t1, f1, u1, v1, g = line_hits(V, F, lo, hi, left, right, start, count, order,
                                         A[k, 0], A[k, 1], A[k, 2], dx, dy, dz, 0.0, 1.0, btol, merge)
        grazing[k] = g
        while n + c > cap:
            cap *= 2
            a1 = np.empty(cap); a1[:n] = ts[:n]; ts = a1
            a2 = np.empty(cap, dtype=np.int64); a2[:n] = tris[:n]; tris = a2
            a3 = np.empty(cap); a3[:n] = us[:n]; us = a3
            a4 = np.empty(cap); a4[:n] = vs[:n]; vs = a4
        for i in range(c):
            ts[n] = t1[i]; tris[n] = f1[i]; us[n] = u1[i]; vs[n] = v1[i]
            n += 1
        offsets[k + 1] = n
    return offsets, ts[:n], tris[:n], us[:n], vs[:n], grazing


@nb.njit(cache=True)
def contains_batch(V, F, lo, hi, left, right, start, count, order, dirs, P, on_tol):
    out = np.empty(P.shape[0], dtype=np.bool_)
    for k in range(P.shape[0]):
        out[k] = contains(V, F, lo, hi, left, right, start, count, order, dirs,
                          P[k, 0], P[k, 1], P[k, 2], on_tol)
    return out
