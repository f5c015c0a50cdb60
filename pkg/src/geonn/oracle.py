"""Brute-force ground truth used to validate the fast structures.

Distances here come from Dijkstra over a visibility graph, a completely
different algorithm from the funnel-based engine in :mod:`geonn.paths`.
The two implementations share no shortest-path code, so agreement between
them is meaningful evidence of correctness.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import GeoNNError, PointOutsidePolygon
from .geometry import (
    DiagonalFrame,
    Point,
    Polygon,
    on_segment,
    orientation,
    point_in_polygon,
)

_NEAR = 1e-12


class VisibilityGraph:
    """Visibility relation among polygon vertices plus registered points."""

    def __init__(self, polygon: Polygon):
        self.polygon = polygon
        self.pts = np.asarray(polygon.vertices, dtype=float)
        m = polygon.m
        self.ea = self.pts
        self.eb = np.roll(self.pts, -1, axis=0)
        self._scale = float(np.abs(self.pts).max() + 1.0)
        vis = np.zeros((m, m), dtype=bool)
        for i in range(m):
            vis[i] = self.mask_from(self.pts[i])
        np.fill_diagonal(vis, False)
        self.base_vis = vis | vis.T
        diff = self.pts[:, None, :] - self.pts[None, :, :]
        w = np.hypot(diff[..., 0], diff[..., 1])
        w[~self.base_vis] = 0.0
        self._graph = csr_matrix(np.where(self.base_vis, w, 0.0))
        self._apsp = None
        self._apsp_pred = None

    # -- visibility ------------------------------------------------------

    def visible(self, p, q) -> bool:
        """Robust scalar test: open segment pq stays inside the polygon."""
        if p[0] == q[0] and p[1] == q[1]:
            return True
        verts = self.polygon.vertices
        n = len(verts)
        for i in range(n):
            a, b = verts[i], verts[(i + 1) % n]
            o1 = orientation(p, q, a)
            o2 = orientation(p, q, b)
            o3 = orientation(a, b, p)
            o4 = orientation(a, b, q)
            if o1 * o2 < 0 and o3 * o4 < 0:
                return False
        for i in range(n):
            w = verts[i]
            if (w[0] == p[0] and w[1] == p[1]) or (w[0] == q[0] and w[1] == q[1]):
                continue
            if on_segment(p, q, w):
                s1 = orientation(p, q, verts[(i - 1) % n])
                s2 = orientation(p, q, verts[(i + 1) % n])
                if s1 * s2 < 0:
                    return False
        mid = ((p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0)
        return point_in_polygon(verts, mid) >= 0

    def mask_from(self, p, targets=None) -> np.ndarray:
        """Vectorized visibility of point p to each target (default: vertices).

        Near-degenerate targets fall back to the exact scalar test.
        """
        tg = self.pts if targets is None else np.asarray(targets, dtype=float)
        px, py = float(p[0]), float(p[1])
        tx = tg[:, 0][:, None]
        ty = tg[:, 1][:, None]
        ax, ay = self.ea[:, 0][None, :], self.ea[:, 1][None, :]
        bx, by = self.eb[:, 0][None, :], self.eb[:, 1][None, :]
        d1 = (tx - px) * (ay - py) - (ty - py) * (ax - px)
        d2 = (tx - px) * (by - py) - (ty - py) * (bx - px)
        d3 = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
        d4 = (bx - ax) * (ty - ay) - (by - ay) * (tx - ax)
        proper = (d1 * d2 < 0) & (d3 * d4 < 0)
        tol = _NEAR * self._scale * self._scale
        near = (
            (np.abs(d1) < tol) | (np.abs(d2) < tol) | (np.abs(d3) < tol) | (np.abs(d4) < tol)
        )
        blocked = np.any(proper & ~near, axis=1)
        ambiguous = np.any(near, axis=1) & ~blocked
        out = ~blocked
        if np.any(ambiguous):
            for k in np.flatnonzero(ambiguous):
                out[k] = self.visible((px, py), (tg[k, 0], tg[k, 1]))
        else:
            # Cheap interiority check for the clean targets.
            mids = np.column_stack(((tg[:, 0] + px) / 2.0, (tg[:, 1] + py) / 2.0))
            inside = _pip_many(self.pts, mids)
            out &= inside
            return out
        clean = ~ambiguous & ~blocked
        if np.any(clean):
            mids = np.column_stack(((tg[clean, 0] + px) / 2.0, (tg[clean, 1] + py) / 2.0))
            out[clean] &= _pip_many(self.pts, mids)
        return out

    # -- graph distances -------------------------------------------------

    def apsp(self) -> np.ndarray:
        if self._apsp is None:
            self._apsp = dijkstra(self._graph, directed=False)
        return self._apsp

    def vertex_table(self, p) -> np.ndarray:
        """Geodesic distance from p to every polygon vertex."""
        mask = self.mask_from(p)
        d = np.hypot(self.pts[:, 0] - p[0], self.pts[:, 1] - p[1])
        if not mask.any():
            raise GeoNNError("point sees no polygon vertex; outside?")
        table = np.min(d[mask][:, None] + self.apsp()[mask, :], axis=0)
        return np.minimum(table, np.where(mask, d, np.inf))

    def sssp_tree(self, p):
        """Distances and predecessor vertex indices of a shortest-path tree
        rooted at p (predecessor -1 means the root itself)."""
        import scipy.sparse as sp

        mask = self.mask_from(p)
        d = np.hypot(self.pts[:, 0] - p[0], self.pts[:, 1] - p[1])
        m = self.polygon.m
        g = sp.lil_matrix((m + 1, m + 1))
        g[:m, :m] = self._graph
        for v in np.flatnonzero(mask):
            g[m, v] = d[v]
            g[v, m] = d[v]
        dist, pred = dijkstra(
            g.tocsr(), directed=False, indices=m, return_predecessors=True
        )
        parent = pred[:m]
        parent[parent == m] = -1
        return dist[:m], parent


def _pip_many(poly_pts: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Vectorized inside-or-boundary test (tolerant near the boundary)."""
    ax, ay = poly_pts[:, 0][None, :], poly_pts[:, 1][None, :]
    b = np.roll(poly_pts, -1, axis=0)
    bx, by = b[:, 0][None, :], b[:, 1][None, :]
    px = points[:, 0][:, None]
    py = points[:, 1][:, None]
    det = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    up = (ay <= py) & (py < by) & (det > 0)
    dn = (by <= py) & (py < ay) & (det < 0)
    crossings = np.sum(up | dn, axis=1)
    inside = crossings % 2 == 1
    # Points within a hair of an edge count as inside (boundary).
    seg_len2 = (bx - ax) ** 2 + (by - ay) ** 2
    t = np.clip(((px - ax) * (bx - ax) + (py - ay) * (by - ay)) / seg_len2, 0.0, 1.0)
    d2 = (ax + t * (bx - ax) - px) ** 2 + (ay + t * (by - ay) - py) ** 2
    on_edge = np.any(d2 < 1e-18, axis=1)
    return inside | on_edge


class BruteForceOracle:
    """Linear-scan geodesic nearest neighbor and bisector sampling.

    Sites may be registered to reuse their visibility masks across queries.
    """

    def __init__(self, polygon: Polygon):
        self.polygon = polygon
        self.vg = VisibilityGraph(polygon)
        self._sites = {}

    # -- distances -------------------------------------------------------

    def _require_inside(self, p):
        if self.polygon.classify(p) < 0:
            raise PointOutsidePolygon(f"{p} is outside the polygon")

    def distance(self, p, q) -> float:
        """Geodesic distance by visibility-graph Dijkstra."""
        self._require_inside(p)
        self._require_inside(q)
        if self.vg.visible(p, q):
            return math.hypot(q[0] - p[0], q[1] - p[1])
        table = self.vg.vertex_table(p)
        mask_q = self.vg.mask_from(q)
        dq = np.hypot(self.vg.pts[:, 0] - q[0], self.vg.pts[:, 1] - q[1])
        return float(np.min(table[mask_q] + dq[mask_q]))

    def register(self, sid, point):
        self._require_inside(point)
        self._sites[sid] = (Point(float(point[0]), float(point[1])), self.vg.vertex_table(point))

    def unregister(self, sid):
        self._sites.pop(sid)

    def live_ids(self):
        return sorted(self._sites)

    def nn(self, q):
        """(site id, distance) minimizing geodesic distance; ties to smaller id."""
        if not self._sites:
            raise GeoNNError("no sites registered")
        self._require_inside(q)
        mask_q = self.vg.mask_from(q)
        dq = np.hypot(self.vg.pts[:, 0] - q[0], self.vg.pts[:, 1] - q[1])
        best = None
        for sid in sorted(self._sites):
            pt, table = self._sites[sid]
            d = math.hypot(pt.x - q[0], pt.y - q[1]) if self.vg.visible(q, pt) else math.inf
            if mask_q.any():
                via = float(np.min(table[mask_q] + dq[mask_q]))
                d = min(d, via)
            if best is None or d < best[1] - 1e-15:
                best = (sid, d)
        return best

    def nn_among(self, sites, q):
        """One-shot variant over (id, point) pairs, without registration."""
        best = None
        for sid, pt in sorted(sites):
            d = self.distance(pt, q)
            if best is None or d < best[1] - 1e-15:
                best = (sid, d)
        if best is None:
            raise GeoNNError("empty site list")
        return best

    # -- point evaluation helpers for sampling ---------------------------

    def _dist_from_table(self, src, table, x) -> float:
        if self.vg.visible(src, x):
            return math.hypot(src[0] - x[0], src[1] - x[1])
        mask = self.vg.mask_from(x)
        dx = np.hypot(self.vg.pts[:, 0] - x[0], self.vg.pts[:, 1] - x[1])
        return float(np.min(table[mask] + dx[mask]))

    # -- samplers --------------------------------------------------------

    def sample_bisector(self, s, t, diag, resolution: int = 64, eps: float = 1e-10):
        """Polyline approximation of the bisector of s and t inside P_r.

        Sweeps chords perpendicular to the diagonal's frame and bisects the
        sign flip of the distance difference on each, ordered from the
        diagonal outward.
        """
        frame = DiagonalFrame.for_sites(self.polygon, diag, s)
        ts = self.vg.vertex_table(s)
        tt = self.vg.vertex_table(t)

        def diff(pt):
            return self._dist_from_table(s, ts, pt) - self._dist_from_table(t, tt, pt)

        right = frame.right_points()
        xs = [frame.x_of(p) for p in right]
        lo, hi = min(xs), max(xs)
        out = []
        sweep_hi = hi if hi > 1e-12 else 0.0
        sweep_lo = lo if lo < -1e-12 else 0.0
        grid = list(np.linspace(1e-7, sweep_hi, resolution)) if sweep_hi else []
        grid += list(np.linspace(-1e-7, sweep_lo, resolution)) if sweep_lo else []
        for c in grid:
            for (y0, y1) in _vertical_chord_intervals(frame, right, c):
                pa = frame.from_frame((c, y0))
                pb = frame.from_frame((c, y1))
                fa, fb = diff(pa), diff(pb)
                if fa == 0.0:
                    out.append((c, pa))
                    continue
                if fa * fb > 0:
                    continue
                a, b_ = y0, y1
                va, vb = fa, fb
                while b_ - a > eps:
                    mid = 0.5 * (a + b_)
                    vm = diff(frame.from_frame((c, mid)))
                    if vm == 0.0:
                        a = b_ = mid
                        break
                    if va * vm < 0:
                        b_, vb = mid, vm
                    else:
                        a, va = mid, vm
                out.append((c, frame.from_frame((c, 0.5 * (a + b_)))))
        out.sort(key=lambda cp: abs(cp[0]))
        return [p for _, p in out]

    def sample_diagonal_order(self, sites, diag, resolution: int = 2000):
        """Distinct consecutive nearest sites along the diagonal, bottom to top.

        ``sites`` is a sequence of (id, point).  Switch locations are refined
        by bisection so closely spaced regions are not missed.
        """
        if not sites:
            raise GeoNNError("empty site group")
        frame = DiagonalFrame.for_sites(self.polygon, diag, sites[0][1])
        tables = {sid: self.vg.vertex_table(pt) for sid, pt in sites}
        pts = {sid: pt for sid, pt in sites}
        lams = np.linspace(1e-9, 1.0 - 1e-9, resolution)

        def dist_at(sid, lam):
            return self._dist_from_table(
                pts[sid], tables[sid], frame.point_on_d(lam)
            )

        def argmin_at(lam):
            best = None
            for sid in sorted(pts):
                d = dist_at(sid, lam)
                if best is None or d < best[1] - 1e-15:
                    best = (sid, d)
            return best[0]

        order = [argmin_at(lams[0])]
        for i in range(1, resolution):
            prev_lam, lam = lams[i - 1], lams[i]
            winner = argmin_at(lam)
            if winner == order[-1]:
                continue
            # Refine: there may be a short-lived region between the samples.
            a, b = prev_lam, lam
            wa, wb = order[-1], winner
            for _ in range(40):
                if b - a < 1e-12:
                    break
                mid = 0.5 * (a + b)
                wm = argmin_at(mid)
                if wm == wa:
                    a = mid
                elif wm == wb:
                    b = mid
                else:
                    order.append(wm)
                    wa = wm
                    a = mid
            if winner != order[-1]:
                order.append(winner)
        return order


def _vertical_chord_intervals(frame: DiagonalFrame, right_pts, c: float):
    """y-intervals of the frame-vertical line x = c inside P_r."""
    ys = []
    n = len(right_pts)
    pts_f = [frame.to_frame(p) for p in right_pts]
    for i in range(n):
        a = pts_f[i]
        b = pts_f[(i + 1) % n]
        if (a.x - c) * (b.x - c) < 0:
            tpar = (c - a.x) / (b.x - a.x)
            ys.append(a.y + tpar * (b.y - a.y))
        elif a.x == c:
            ys.append(a.y)
    ys.sort()
    out = []
    for k in range(0, len(ys) - 1):
        y0, y1 = ys[k], ys[k + 1]
        if y1 - y0 < 1e-12:
            continue
        mid = frame.from_frame((c, 0.5 * (y0 + y1)))
        if point_in_polygon(right_pts, mid) > 0:
            out.append((y0 + 1e-12, y1 - 1e-12))
    return out
