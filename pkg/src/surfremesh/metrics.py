"""Triangle-mesh quality measures and DR/FD comparison summaries."""

from __future__ import annotations

import math

import numpy as np

from .predicates import radius_edge

A_BINS = np.linspace(0.0, 1.0, 51)
THETA_BINS = np.linspace(0.0, 180.0, 61)
HR_BINS = np.linspace(0.0, 2.0, 51)

_A_SCALE = 4.0 * math.sqrt(3.0) / 3.0


def area_length(a, b, c, normal=None):
    """Area-length ratio (4 sqrt(3) / 3) A / e_rms^2.

    1 for an equilateral triangle, 0 when degenerate. With ``normal`` given,
    the area is signed: negative when the triangle faces against it.
    """
    a, b, c = (np.asarray(p, dtype=float) for p in (a, b, c))
    n = np.cross(b - a, c - a)
    area = 0.5 * float(np.linalg.norm(n))
    if normal is not None and float(n @ np.asarray(normal, dtype=float)) < 0:
        area = -area
    e2 = (float((b - a) @ (b - a)) + float((c - b) @ (c - b)) + float((a - c) @ (a - c))) / 3.0
    if e2 == 0.0:
        return 0.0
    return _A_SCALE * area / e2


def area_length_many(V, F):
    a, b, c = V[F[:, 0]], V[F[:, 1]], V[F[:, 2]]
    area = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    e2 = (np.sum((b - a) ** 2, axis=1) + np.sum((c - b) ** 2, axis=1) + np.sum((a - c) ** 2, axis=1)) / 3.0
    out = np.zeros(len(F))
    ok = e2 > 0
    out[ok] = _A_SCALE * area[ok] / e2[ok]
    return out


def plane_angles(a, b, c):
    """Interior angles in degrees at a, b and c.

    Collinear points give 180 at the middle vertex; a zero-length edge gives
    (0, 0, 180).
    """
    return tuple(plane_angles_many(np.array([a, b, c], dtype=float), np.array([[0, 1, 2]]))[0])


def plane_angles_many(V, F):
    P = [V[F[:, k]] for k in range(3)]
    out = np.empty((len(F), 3))
    for k in range(3):
        u = P[(k + 1) % 3] - P[k]
        w = P[(k + 2) % 3] - P[k]
        # atan2 is accurate for angles near 0 and 180 where acos is not
        s = np.linalg.norm(np.cross(u, w), axis=1)
        c = np.einsum("ij,ij->i", u, w)
        out[:, k] = np.degrees(np.arctan2(s, c))
    lengths = np.stack([np.linalg.norm(P[(k + 1) % 3] - P[k], axis=1) for k in range(3)], axis=1)
    degenerate = (lengths.min(axis=1) == 0) | (np.abs(out.sum(axis=1) - 180.0) > 1e-6)
    # spread rounding so each triangle sums to 180 exactly
    out += (180.0 - out.sum(axis=1, keepdims=True)) / 3.0
    out[degenerate] = (0.0, 0.0, 180.0)
    return out


def unique_edges(F):
    e = np.concatenate([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]])
    e.sort(axis=1)
    return np.unique(e, axis=0)


def relative_lengths(V, F, field):
    """Edge length over the target size at the edge midpoint, per unique edge."""
    E = unique_edges(F)
    L = np.linalg.norm(V[E[:, 0]] - V[E[:, 1]], axis=1)
    mid = (V[E[:, 0]] + V[E[:, 1]]) / 2
    h = np.array([field(m) for m in mid])
    return L / h


def mad_theta(angles):
    """Mean absolute deviation of the pooled angle sample about its mean."""
    x = np.asarray(angles, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("no angles")
    return float(np.mean(np.abs(x - x.mean())))


def normal_deviation(V, F, surf):
    """Unsigned angle (degrees, in [0, 90]) between each facet normal and the
    surface normal nearest to its barycentre."""
    n = np.cross(V[F[:, 1]] - V[F[:, 0]], V[F[:, 2]] - V[F[:, 0]])
    nn = np.linalg.norm(n, axis=1)
    nn[nn == 0] = 1.0
    n = n / nn[:, None]
    cen = V[F].mean(axis=1)
    out = np.empty(len(F))
    for i, p in enumerate(cen):
        hit = surf.nearest_point(p)
        c = abs(float(n[i] @ surf.normals[hit.triangle]))
        out[i] = math.degrees(math.acos(min(1.0, c)))
    return out


def _hist(x, bins):
    counts, _ = np.histogram(np.clip(x, bins[0], bins[-1]), bins=bins)
    return {"edges": [float(b) for b in bins], "counts": [int(c) for c in counts]}


def _f(x):
    return float(x) if np.isfinite(x) else None


def quality_report(V, F, field=None, surf=None, rho=None):
    """Quality summary of a triangle mesh as a JSON-ready dict.

    Parameters
    ----------
    V, F : arrays
        Mesh vertices and oriented triangles.
    field : callable, optional
        Target size; adds the relative-length section.
    surf : SurfacePolyhedron, optional
        Adds normal deviation against the surface.
    rho : sequence, optional
        Radius-edge ratios in facet order (computed when omitted).
    """
    V = np.asarray(V, dtype=float)
    F = np.asarray(F, dtype=np.int64).reshape(-1, 3)
    if len(F) == 0:
        raise ValueError("mesh has no triangles")
    a = area_length_many(V, F)
    if surf is not None:
        # sign from agreement with the input surface orientation
        n = np.cross(V[F[:, 1]] - V[F[:, 0]], V[F[:, 2]] - V[F[:, 0]])
        cen = V[F].mean(axis=1)
        sgn = np.array([np.sign(n[i] @ surf.normals[surf.nearest_point(c).triangle]) or 1.0
                        for i, c in enumerate(cen)])
        a = a * sgn
    th = plane_angles_many(V, F)
    if rho is None:
        rho = [radius_edge(*V[f]) for f in F]
    rho = np.asarray(rho, dtype=float)
    rep = {
        "schema": "quality-report v1",
        "counts": {"vertices": int(len(np.unique(F))), "triangles": int(len(F)),
                   "edges": int(len(unique_edges(F)))},
        "area_length": {
            "mean": float(a.mean()), "min": float(a.min()),
            "inverted": int(np.sum(a < 0)),
            "histogram": _hist(a, A_BINS),
        },
        "angles": {
            "min": float(th.min()), "max": float(th.max()),
            "mean_min": float(th.min(axis=1).mean()),
            "mad": mad_theta(th),
            "histogram": _hist(th.ravel(), THETA_BINS),
        },
        "radius_edge": {"max": _f(rho.max()), "mean": _f(rho.mean())},
    }
    if field is not None:
        hr = relative_lengths(V, F, field)
        rep["relative_length"] = {
            "mean": float(hr.mean()), "std": float(hr.std()),
            "min": float(hr.min()), "max": float(hr.max()),
            "histogram": _hist(hr, HR_BINS),
        }
    if surf is not None:
        nd = normal_deviation(V, F, surf)
        rep["normal_deviation"] = {"max": float(nd.max()), "mean": float(nd.mean())}
    return rep


FACET_HEADER = "facet,v0,v1,v2,area_length,theta_min,theta_max,radius_edge"


def write_facet_csv(path, V, F):
    """Raw per-facet rows behind the report's histograms."""
    V = np.asarray(V, dtype=float)
    F = np.asarray(F, dtype=np.int64).reshape(-1, 3)
    a = area_length_many(V, F)
    th = plane_angles_many(V, F)
    with open(path, "w") as fh:
        fh.write(FACET_HEADER + "\n")
        for i, f in enumerate(F.tolist()):
            vals = (a[i], th[i].min(), th[i].max(), radius_edge(*V[f]))
            fh.write(f"{i},{f[0]},{f[1]},{f[2]}," + ",".join(repr(float(x)) for x in vals) + "\n")


def compare(dr, fd, dr_seconds=None, fd_seconds=None):
    """Paired FD-minus-DR summary of two quality reports."""
    out = {
        "dr": {"mean_a": dr["area_length"]["mean"], "mad": dr["angles"]["mad"],
               "triangles": dr["counts"]["triangles"]},
        "fd": {"mean_a": fd["area_length"]["mean"], "mad": fd["angles"]["mad"],
               "triangles": fd["counts"]["triangles"]},
    }
    out["delta"] = {
        "mean_a": out["fd"]["mean_a"] - out["dr"]["mean_a"],
        "mad": out["fd"]["mad"] - out["dr"]["mad"],
        "triangles": out["fd"]["triangles"] - out["dr"]["triangles"],
    }
    if "relative_length" in dr and "relative_length" in fd:
        for k, r in (("dr", dr), ("fd", fd)):
            out[k]["mean_hr"] = r["relative_length"]["mean"]
            out[k]["std_hr"] = r["relative_length"]["std"]
    if dr_seconds is not None and fd_seconds is not None:
        out["dr"]["seconds"] = dr_seconds
        out["fd"]["seconds"] = fd_seconds
        out["delta"]["seconds"] = fd_seconds - dr_seconds
    return out
