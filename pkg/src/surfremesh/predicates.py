"""
Geometric predicates and simplex constructions.

``orient3d`` and ``insphere`` are exact in sign: a floating-point evaluation is
accepted when its magnitude clears a forward error bound, otherwise the
determinant is recomputed in integer arithmetic from the exact binary values of
the coordinates. The constructions (circumcentres, radius-edge ratios) are plain
floating point.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

_EPS = 2.0 ** -53
_O3D_ERRBOUND = (7.0 + 56.0 * _EPS) * _EPS
_ISP_ERRBOUND = (16.0 + 224.0 * _EPS) * _EPS


class DegenerateSimplexError(ValueError):
    """Raised when a construction needs a non-degenerate simplex."""


class Ball3(NamedTuple):
    centre: tuple
    radius: float


class Plane3(NamedTuple):
    origin: tuple
    normal: tuple

    @classmethod
    def from_normal(cls, origin, normal):
        n = np.asarray(normal, dtype=float)
        length = float(np.linalg.norm(n))
        if length == 0.0 or not math.isfinite(length):
            raise ValueError("plane normal must be non-zero and finite")
        return cls(tuple(float(v) for v in origin), tuple(float(v) for v in n / length))


def _sign(x):
    return (x > 0) - (x < 0)


def _to_ints(points):
    """Scale float coordinates onto a common power-of-two grid, exactly."""
    ratios = [c.as_integer_ratio() for p in points for c in p]
    den = max(r[1] for r in ratios)
    vals = [n * (den // d) for n, d in ratios]
    return [vals[3 * i:3 * i + 3] for i in range(len(points))]


def _orient3d_exact(a, b, c, d):
    a, b, c, d = _to_ints((a, b, c, d))
    adx, ady, adz = a[0] - d[0], a[1] - d[1], a[2] - d[2]
    bdx, bdy, bdz = b[0] - d[0], b[1] - d[1], b[2] - d[2]
    cdx, cdy, cdz = c[0] - d[0], c[1] - d[1], c[2] - d[2]
    det = (adx * (bdy * cdz - bdz * cdy)
           + bdx * (cdy * adz - cdz * ady)
           + cdx * (ady * bdz - adz * bdy))
    return -_sign(det)


def orient3d(a, b, c, d):
    """Sign of det[b - a, c - a, d - a].

    Positive when ``d`` lies on the side of plane (a, b, c) that the normal
    (b - a) x (c - a) points to; the corner tetrahedron
    (0,0,0), (1,0,0), (0,1,0), (0,0,1) is positive.
    """
    adx = a[0] - d[0]; ady = a[1] - d[1]; adz = a[2] - d[2]
    bdx = b[0] - d[0]; bdy = b[1] - d[1]; bdz = b[2] - d[2]
    cdx = c[0] - d[0]; cdy = c[1] - d[1]; cdz = c[2] - d[2]
    bdxcdy = bdx * cdy; cdxbdy = cdx * bdy
    cdxady = cdx * ady; adxcdy = adx * cdy
    adxbdy = adx * bdy; bdxady = bdx * ady
    det = (adz * (bdxcdy - cdxbdy)
           + bdz * (cdxady - adxcdy)
           + cdz * (adxbdy - bdxady))
    permanent = ((abs(bdxcdy) + abs(cdxbdy)) * abs(adz)
                 + (abs(cdxady) + abs(adxcdy)) * abs(bdz)
                 + (abs(adxbdy) + abs(bdxady)) * abs(cdz))
    bound = _O3D_ERRBOUND * permanent
    if det > bound:
        return -1
    if -det > bound:
        return 1
    return _orient3d_exact(a, b, c, d)


def _insphere_raw_exact(a, b, c, d, e):
    a, b, c, d, e = _to_ints((a, b, c, d, e))
    rows = []
    for p in (a, b, c, d):
        x, y, z = p[0] - e[0], p[1] - e[1], p[2] - e[2]
        rows.append((x, y, z, x * x + y * y + z * z))
    (aex, aey, aez, al), (bex, bey, bez, bl), (cex, cey, cez, cl), (dex, dey, dez, dl) = rows
    ab = aex * bey - bex * aey
    bc = bex * cey - cex * bey
    cd = cex * dey - dex * cey
    da = dex * aey - aex * dey
    ac = aex * cey - cex * aey
    bd = bex * dey - dex * bey
    abc = aez * bc - bez * ac + cez * ab
    bcd = bez * cd - cez * bd + dez * bc
    cda = cez * da + dez * ac + aez * cd
    dab = dez * ab + aez * bd + bez * da
    return _sign((dl * abc - cl * dab) + (bl * cda - al * bcd))


def _insphere_raw(a, b, c, d, e):
    # positive when e is inside and orient3d(a, b, c, d) > 0
    aex = a[0] - e[0]; aey = a[1] - e[1]; aez = a[2] - e[2]
    bex = b[0] - e[0]; bey = b[1] - e[1]; bez = b[2] - e[2]
    cex = c[0] - e[0]; cey = c[1] - e[1]; cez = c[2] - e[2]
    dex = d[0] - e[0]; dey = d[1] - e[1]; dez = d[2] - e[2]
    aexbey = aex * bey; bexaey = bex * aey
    bexcey = bex * cey; cexbey = cex * bey
    cexdey = cex * dey; dexcey = dex * cey
    dexaey = dex * aey; aexdey = aex * dey
    aexcey = aex * cey; cexaey = cex * aey
    bexdey = bex * dey; dexbey = dex * bey
    ab = aexbey - bexaey
    bc = bexcey - cexbey
    cd = cexdey - dexcey
    da = dexaey - aexdey
    ac = aexcey - cexaey
    bd = bexdey - dexbey
    abc = aez * bc - bez * ac + cez * ab
    bcd = bez * cd - cez * bd + dez * bc
    cda = cez * da + dez * ac + aez * cd
    dab = dez * ab + aez * bd + bez * da
    alift = aex * aex + aey * aey + aez * aez
    blift = bex * bex + bey * bey + bez * bez
    clift = cex * cex + cey * cey + cez * cez
    dlift = dex * dex + dey * dey + dez * dez
    det = (dlift * abc - clift * dab) + (blift * cda - alift * bcd)

    aezp = abs(aez); bezp = abs(bez); cezp = abs(cez); dezp = abs(dez)
    aexbeyp = abs(aexbey); bexaeyp = abs(bexaey)
    bexceyp = abs(bexcey); cexbeyp = abs(cexbey)
    cexdeyp = abs(cexdey); dexceyp = abs(dexcey)
    dexaeyp = abs(dexaey); aexdeyp = abs(aexdey)
    aexceyp = abs(aexcey); cexaeyp = abs(cexaey)
    bexdeyp = abs(bexdey); dexbeyp = abs(dexbey)
    permanent = (((cexdeyp + dexceyp) * bezp
                  + (dexbeyp + bexdeyp) * cezp
                  + (bexceyp + cexbeyp) * dezp) * alift
                 + ((dexaeyp + aexdeyp) * cezp
                    + (aexceyp + cexaeyp) * dezp
                    + (cexdeyp + dexceyp) * aezp) * blift
                 + ((aexbeyp + bexaeyp) * dezp
                    + (bexdeyp + dexbeyp) * aezp
                    + (dexaeyp + aexdeyp) * bezp) * clift
                 + ((bexceyp + cexbeyp) * aezp
                    + (cexaeyp + aexceyp) * bezp
                    + (aexbeyp + bexaeyp) * cezp) * dlift)
    bound = _ISP_ERRBOUND * permanent
    if det > bound:
        return -1
    if -det > bound:
        return 1
    return -_insphere_raw_exact(a, b, c, d, e)


def insphere_oriented(a, b, c, d, e):
    """``insphere`` for a tetrahedron already known to have orient3d > 0."""
    return _insphere_raw(a, b, c, d, e)


def insphere(a, b, c, d, e):
    """+1 if ``e`` is strictly inside the circumsphere of (a, b, c, d), -1 if
    strictly outside, 0 if on it.

    Raises DegenerateSimplexError for a flat base tetrahedron; callers break
    ties on a flat base by perturbation, not here.
    """
    o = orient3d(a, b, c, d)
    if o == 0:
        raise DegenerateSimplexError("insphere on a coplanar base tetrahedron")
    return o * _insphere_raw(a, b, c, d, e)


def circumball_tri3(a, b, c):
    """Diametric ball of triangle (a, b, c): centre in the triangle's plane."""
    ax, ay, az = a
    abx = b[0] - ax; aby = b[1] - ay; abz = b[2] - az
    acx = c[0] - ax; acy = c[1] - ay; acz = c[2] - az
    nx = aby * acz - abz * acy
    ny = abz * acx - abx * acz
    nz = abx * acy - aby * acx
    nn = nx * nx + ny * ny + nz * nz
    lab = abx * abx + aby * aby + abz * abz
    lac = acx * acx + acy * acy + acz * acz
    if nn <= 1e-28 * lab * lac or nn == 0.0:
        raise DegenerateSimplexError("collinear triangle has no circumball")
    # (|ab|^2 (ac x n) + |ac|^2 (n x ab)) / (2 |n|^2)
    t1x = acy * nz - acz * ny; t1y = acz * nx - acx * nz; t1z = acx * ny - acy * nx
    t2x = ny * abz - nz * aby; t2y = nz * abx - nx * abz; t2z = nx * aby - ny * abx
    s = 0.5 / nn
    ox = (lab * t1x + lac * t2x) * s
    oy = (lab * t1y + lac * t2y) * s
    oz = (lab * t1z + lac * t2z) * s
    return Ball3((ax + ox, ay + oy, az + oz), math.sqrt(ox * ox + oy * oy + oz * oz))


def circumcentre_tet(a, b, c, d):
    """Point equidistant from the four vertices of a tetrahedron."""
    ax, ay, az = a
    bx = b[0] - ax; by = b[1] - ay; bz = b[2] - az
    cx = c[0] - ax; cy = c[1] - ay; cz = c[2] - az
    dx = d[0] - ax; dy = d[1] - ay; dz = d[2] - az
    lb = bx * bx + by * by + bz * bz
    lc = cx * cx + cy * cy + cz * cz
    ld = dx * dx + dy * dy + dz * dz
    cdx = cy * dz - cz * dy; cdy = cz * dx - cx * dz; cdz = cx * dy - cy * dx
    dbx = dy * bz - dz * by; dby = dz * bx - dx * bz; dbz = dx * by - dy * bx
    bcx = by * cz - bz * cy; bcy = bz * cx - bx * cz; bcz = bx * cy - by * cx
    det = bx * cdx + by * cdy + bz * cdz
    scale = math.sqrt(lb * lc * ld)
    if abs(det) <= 1e-10 * scale:
        # nearly flat: the float solve loses too many digits
        return _circumcentre_tet_exact(a, b, c, d)
    s = 0.5 / det
    return (ax + (lb * cdx + lc * dbx + ld * bcx) * s,
            ay + (lb * cdy + lc * dby + ld * bcy) * s,
            az + (lb * cdz + lc * dbz + ld * bcz) * s)


def _circumcentre_tet_exact(a, b, c, d):
    a, b, c, d = ([Fraction(x) for x in p] for p in (a, b, c, d))
    rows = [[q[k] - a[k] for k in range(3)] for q in (b, c, d)]
    rhs = [sum(x * x for x in r) / 2 for r in rows]
    (bx, by, bz), (cx, cy, cz), (dx, dy, dz) = rows
    det = bx * (cy * dz - cz * dy) - by * (cx * dz - cz * dx) + bz * (cx * dy - cy * dx)
    if det == 0:
        raise DegenerateSimplexError("flat tetrahedron has no circumcentre")
    out = []
    for k in range(3):
        m = [list(r) for r in rows]
        for i in range(3):
            m[i][k] = rhs[i]
        (p, q, r), (s, t, u), (v, w, x) = m
        out.append(float(a[k] + (p * (t * x - u * w) - q * (s * x - u * v) + r * (s * w - t * v)) / det))
    return tuple(out)


def shortest_edge(a, b, c):
    """Length of the shortest edge and the index of the vertex opposite it."""
    la = math.dist(b, c)
    lb = math.dist(c, a)
    lc = math.dist(a, b)
    if la <= lb and la <= lc:
        return la, 0
    if lb <= lc:
        return lb, 1
    return lc, 2


def radius_edge(a, b, c):
    """Circumradius over shortest edge; +inf for a degenerate triangle."""
    e0, _ = shortest_edge(a, b, c)
    if e0 == 0.0:
        return math.inf
    try:
        ball = circumball_tri3(a, b, c)
    except DegenerateSimplexError:
        return math.inf
    return ball.radius / e0


def triangle_normal(a, b, c):
    ux, uy, uz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    vx, vy, vz = c[0] - a[0], c[1] - a[1], c[2] - a[2]
    return (uy * vz - uz * vy, uz * vx - ux * vz, ux * vy - uy * vx)


def as_point(p: Sequence[float]) -> tuple:
    q = (float(p[0]), float(p[1]), float(p[2]))
    if not all(math.isfinite(v) for v in q):
        raise ValueError(f"non-finite point {q}")
    return q
