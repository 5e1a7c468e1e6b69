"""Restricted Delaunay refinement of a surface sample.

One driver serves both algorithms. They differ only in the point inserted for
a bad facet and in the order bad facets are taken:

* ``dr`` -- conventional refinement: always insert the centre of the facet's
  surface Delaunay ball, worst radius-edge ratio first.
* ``fd`` -- Frontal-Delaunay: insert a size-optimal off-centre on the frontal
  edge when it is safe to, and only refine facets whose shortest edge borders
  an already acceptable facet.
"""

from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import delaunay
from .delaunay import DuplicatePointError
from .predicates import Plane3
from .restricted import RestrictedComplex

log = logging.getLogger(__name__)

ALPHA = 4.0 / 3.0
SQRT3 = math.sqrt(3.0)

SEED, TYPE1, TYPE2 = "seed", "type1", "type2"


class RefineError(ValueError):
    pass


@dataclass
class RefineConfig:
    """Refinement thresholds.

    Attributes
    ----------
    rho_max : float
        Radius-edge bound; must be >= 1.
    eps_ratio : float
        Surface-error bound as a fraction of the local target size.
    alpha : float
        Slack on the size bound, h(f) <= alpha * h(x).
    algorithm : {"dr", "fd"}
    max_inserts : int
        Safety cap on Steiner insertions.
    seed_count : int or None
        Initial sample size; default max(32, 4 * components).
    """

    rho_max: float = 1.0
    eps_ratio: float = 0.25
    alpha: float = ALPHA
    algorithm: str = "fd"
    max_inserts: int = 500_000
    seed_count: Optional[int] = None

    def __post_init__(self):
        if not self.rho_max >= 1.0:
            raise RefineError(f"rho_max must be >= 1 (got {self.rho_max})")
        if not self.eps_ratio > 0:
            raise RefineError(f"eps_ratio must be positive (got {self.eps_ratio})")
        if not self.alpha > 0:
            raise RefineError(f"alpha must be positive (got {self.alpha})")
        if self.algorithm not in ("dr", "fd"):
            raise RefineError(f"unknown algorithm {self.algorithm!r} (use 'dr' or 'fd')")
        if self.max_inserts < 0:
            raise RefineError("max_inserts must be non-negative")


class TraceRow(NamedTuple):
    """One insertion. ``step`` is the new vertex id; ``facet`` the refined
    facet (empty for seeds); ``suspended`` marks a frontal-gate suspension."""

    step: int
    kind: str
    facet: tuple
    suspended: bool
    rho: float
    r: float
    H: float
    d1: float
    d2: float
    min_edge_before: float
    min_edge_after: float


TRACE_HEADER = "step,kind,facet,suspended,rho,r,H,d1,d2,min_edge_before,min_edge_after"


def write_trace(path, rows):
    with open(path, "w") as fh:
        fh.write(TRACE_HEADER + "\n")
        for row in rows:
            facet = " ".join(str(v) for v in row.facet)
            fh.write(",".join([str(row.step), row.kind, facet, str(int(row.suspended))]
                              + [repr(float(x)) for x in row[4:]]) + "\n")


# -- building blocks ------------------------------------------------------


def seed_sample(surf, n):
    """Farthest-point subsample of the surface vertices.

    The lowest-index vertex of every connected component is taken first, so
    each component is seeded; the rest are added greedily, each the vertex
    farthest from all seeds so far (lowest index on ties).
    """
    comps = surf.component_vertices()
    if n < len(comps):
        raise RefineError(f"seed count {n} is smaller than the component count {len(comps)}")
    V = surf.vertices
    chosen = [int(c.min()) for c in comps]
    d = np.full(len(V), np.inf)
    for i in chosen:
        d = np.minimum(d, np.linalg.norm(V - V[i], axis=1))
    while len(chosen) < min(n, len(V)):
        i = int(np.argmax(d))
        chosen.append(i)
        d = np.minimum(d, np.linalg.norm(V - V[i], axis=1))
    return [tuple(float(x) for x in V[i]) for i in chosen]


def bad_simplex(f, cfg, hbar):
    """True if ``f`` breaks a shape, surface-error or size bound.

    ``hbar`` is the target size at the centre of the facet's surface ball.
    All three tests are strict.
    """
    return (f.rho > cfg.rho_max
            or f.err_eps > cfg.eps_ratio * hbar
            or f.size_h > cfg.alpha * hbar)


def type1_point(f):
    """Centre of the facet's surface Delaunay ball."""
    return f.ball.centre


def _altitude(hs, half):
    if hs * hs < half * half:
        return None
    return min(math.sqrt(hs * hs - half * half), SQRT3 / 2 * hs)


class OffCentre(NamedTuple):
    point: tuple
    altitude: float
    H: float


def type2_point(f, points, field, surf, max_iter=4, rtol=1e-6):
    """Size-optimal off-centre on the frontal (shortest) edge of ``f``.

    The point lies on the surface, in the plane of points equidistant from
    the edge endpoints, at distance a from the edge midpoint, where a is the
    altitude of an isosceles triangle sized to the local target length.
    Returns an OffCentre, or None when no such point exists.
    """
    p = np.asarray(points[f.e0_edge[0]], dtype=float)
    q = np.asarray(points[f.e0_edge[1]], dtype=float)
    m0 = (p + q) / 2
    half = f.e0 / 2
    u = q - p
    u /= np.linalg.norm(u)
    d = np.asarray(f.centre) - m0
    dp = d - (d @ u) * u
    nd = np.linalg.norm(dp)
    if not nd > 1e-12 * half:
        return None
    dhat = dp / nd
    hs = field(m0)
    a = _altitude(hs, half)
    if a is None:
        return None
    for _ in range(max_iter):
        apex = m0 + a * dhat
        hs = 0.5 * (field((p + apex) / 2) + field((q + apex) / 2))
        a_new = _altitude(hs, half)
        if a_new is None:
            return None
        done = abs(a_new - a) <= rtol * a
        a = a_new
        if done:
            break
    hits = surf.intersect_circle(Plane3.from_normal(m0, u), m0, a)
    if not hits:
        return None
    best = max(hits, key=lambda h: ((np.asarray(h.point) - m0) @ d, -h.triangle))
    return OffCentre(best.point, a, math.sqrt(a * a + half * half))


def select_point(f, points, c1, c2):
    """Choose between the ball centre ``c1`` and off-centre ``c2``.

    Returns (point, kind, d1, d2); the off-centre is taken only when it is no
    farther from the frontal edge midpoint than ``c1`` and at least half the
    edge length away from it.
    """
    p, q = points[f.e0_edge[0]], points[f.e0_edge[1]]
    m0 = tuple((p[k] + q[k]) / 2 for k in range(3))
    d1 = math.dist(c1, m0)
    if c2 is None:
        return c1, TYPE1, d1, math.nan
    d2 = math.dist(c2, m0)
    if d2 <= d1 and d2 >= 0.5 * f.e0:
        return c2, TYPE2, d1, d2
    return c1, TYPE1, d1, d2


# -- driver ---------------------------------------------------------------


@dataclass
class RunResult:
    vertices: np.ndarray
    triangles: np.ndarray
    volume_tets: list
    volume_vertices: np.ndarray
    trace: list
    converged: bool
    stats: dict
    config: dict
    complex: RestrictedComplex = field(repr=False)
    report: Optional[dict] = None


class _Queue:
    """Max-rho heap with lazy deletion: entries whose facet object is no
    longer current are skipped when popped."""

    def __init__(self, facets):
        self.heap = []
        self.facets = facets
        self.seq = 0

    def push(self, f):
        self.seq += 1
        heapq.heappush(self.heap, (-f.rho, f.key, self.seq, f))

    def pop(self, ok=None):
        while self.heap:
            _, key, _, f = heapq.heappop(self.heap)
            if self.facets.get(key) is f and f.bad and (ok is None or ok(f)):
                return f
        return None

    def peek_live(self):
        while self.heap:
            f = self.heap[0][3]
            if self.facets.get(f.key) is f and f.bad:
                return True
            heapq.heappop(self.heap)
        return False


class Refiner:
    """Incremental refinement state; ``run`` drives it to completion."""

    def __init__(self, surf, field, cfg):
        self.surf = surf
        self.field = field
        self.cfg = cfg
        self.fd = cfg.algorithm == "fd"
        n = cfg.seed_count if cfg.seed_count is not None else max(32, 4 * surf.n_components)
        n = max(n, 4)
        seeds = seed_sample(surf, n)
        self.tess = delaunay.build(seeds, tolerance=1e-12 * surf.diagonal)
        self.rc = RestrictedComplex(self.tess, surf)
        self.trace = [TraceRow(i, SEED, (), False, *(math.nan,) * 7) for i in range(self.tess.n_vertices)]
        self.queue = _Queue(self.rc.facets)
        self.front = _Queue(self.rc.facets)
        self.stats = {"type1": 0, "type2": 0, "type2_declined": 0, "type2_duplicate": 0,
                      "skipped_duplicates": 0, "gate_suspensions": 0}
        self.deferred = []
        self._suspended = False
        for key in sorted(self.rc.facets):
            self._assess(self.rc.facets[key])
        if self.fd:
            for key in sorted(self.rc.facets):
                self._gate(self.rc.facets[key])

    # facet bookkeeping -----------------------------------------------------

    def _assess(self, f):
        f.hbar = self.field(f.centre)
        f.bad = bad_simplex(f, self.cfg, f.hbar)
        if f.bad:
            self.queue.push(f)

    def _eligible(self, f):
        facets = self.rc.facets
        for k in self.rc.edge_facets.get(f.e0_edge, ()):
            if k != f.key and not facets[k].bad:
                return True
        return False

    def _gate(self, f):
        if f.bad and self._eligible(f):
            self.front.push(f)

    def _after_insert(self, added):
        for f in added:
            self._assess(f)
        if not self.fd:
            return
        facets, ef = self.rc.facets, self.rc.edge_facets
        for f in added:
            if f.bad:
                self._gate(f)
                continue
            a, b, c = f.key
            for e in ((a, b), (a, c), (b, c)):
                for k in sorted(ef.get(e, ())):
                    g = facets[k]
                    if g.bad and g.e0_edge == e:
                        self.front.push(g)

    def _next(self):
        if not self.fd:
            return self.queue.pop()
        f = self.front.pop(self._eligible)
        self._suspended = False
        if f is None and self.queue.peek_live():
            # nothing borders an acceptable facet: take the worst one once
            self.stats["gate_suspensions"] += 1
            self._suspended = True
            f = self.queue.pop()
        return f

    # insertion ---------------------------------------------------------------

    def _hint(self, f):
        tess = self.tess
        key = set(f.key)
        for t in tess.incident_cells(f.key[0]):
            if key <= set(tess.tv[t]):
                return t
        return None

    def refine_facet(self, f):
        """Insert a Steiner point for bad facet ``f``; returns False if the
        point duplicated an existing vertex and nothing was inserted."""
        pts = self.tess.points
        c1 = type1_point(f)
        kind, H, d1, d2 = TYPE1, math.nan, math.nan, math.nan
        point = c1
        if self.fd:
            oc = type2_point(f, pts, self.field, self.surf)
            point, kind, d1, d2 = select_point(f, pts, c1, oc.point if oc else None)
            if oc is not None:
                H = oc.H
            if kind == TYPE1 and oc is not None:
                self.stats["type2_declined"] += 1
        else:
            p, q = pts[f.e0_edge[0]], pts[f.e0_edge[1]]
            d1 = math.dist(c1, tuple((p[k] + q[k]) / 2 for k in range(3)))
        before = self.rc.min_edge()
        hint = self._hint(f)
        try:
            vid = self.tess.insert(point, hint)
        except DuplicatePointError:
            if kind != TYPE2:
                return False
            self.stats["type2_duplicate"] += 1
            kind, point = TYPE1, c1
            try:
                vid = self.tess.insert(point, hint)
            except DuplicatePointError:
                return False
        self.stats[kind] += 1
        removed, added = self.rc.update_after_insert(self.tess.last_destroyed, self.tess.last_created)
        after = min(self.rc.vertex_edges(vid), default=math.inf)
        self.trace.append(TraceRow(vid, kind, f.key, self._suspended, f.rho, f.radius, H, d1, d2,
                                   before, after))
        self._after_insert(added)
        return True

    def run(self):
        t0 = time.perf_counter()
        inserts = 0
        converged = False
        stalled = 0
        while True:
            f = self._next()
            if f is None:
                if not self.deferred:
                    converged = True
                    break
                self._requeue_deferred()
                continue
            if inserts >= self.cfg.max_inserts:
                break
            if self.refine_facet(f):
                inserts += 1
                stalled = 0
                self._requeue_deferred()
            else:
                self.stats["skipped_duplicates"] += 1
                log.warning("Steiner point for facet %s duplicates a vertex; deferred", f.key)
                self.deferred.append(f)
                stalled += 1
                if stalled > 1000:
                    log.warning("refinement stalled on duplicate Steiner points")
                    break
        self.stats["inserts"] = inserts
        self.stats["seconds"] = time.perf_counter() - t0
        return converged

    def _requeue_deferred(self):
        deferred, self.deferred = self.deferred, []
        for f in deferred:
            if self.rc.facets.get(f.key) is f:
                self.queue.push(f)
                if self.fd:
                    self.front.push(f)

    def result(self, converged):
        V, F, used = self.rc.triangles()
        pts = self.tess.points
        tets = self.rc.volume_tets()
        vused = sorted({v for t in tets for v in t})
        index = {v: i for i, v in enumerate(vused)}
        cfg = asdict(self.cfg)
        cfg["sqrt3_edge_factor"] = SQRT3
        return RunResult(
            vertices=V,
            triangles=F,
            volume_tets=[tuple(index[v] for v in t) for t in tets],
            volume_vertices=np.array([pts[v] for v in vused], dtype=float).reshape(-1, 3),
            trace=self.trace,
            converged=converged,
            stats=dict(self.stats),
            config=cfg,
            complex=self.rc,
        )


def run(surf, field, cfg=None, report=True):
    """Refine a surface sample until every restricted facet is acceptable.

    Parameters
    ----------
    surf : SurfacePolyhedron
    field : SizeField
        Target edge length.
    cfg : RefineConfig
    report : bool
        Attach a quality report (see ``metrics.quality_report``).

    Returns
    -------
    RunResult
    """
    cfg = cfg or RefineConfig()
    t0 = time.perf_counter()
    r = Refiner(surf, field, cfg)
    converged = r.run()
    r.stats["total_seconds"] = time.perf_counter() - t0
    res = r.result(converged)
    if report:
        from .metrics import quality_report
        res.report = quality_report(res.vertices, res.triangles, field=field, surf=surf,
                                    rho=[r.rc.facets[k].rho for k in sorted(r.rc.facets)])
        res.report["run"] = {
            "algorithm": cfg.algorithm,
            "converged": converged,
            "inserts": {"type1": res.stats["type1"], "type2": res.stats["type2"]},
            "alpha": cfg.alpha,
            "sqrt3_edge_factor": SQRT3,
        }
    if not converged:
        log.warning("refinement stopped before convergence after %d inserts", r.stats["inserts"])
    return res
