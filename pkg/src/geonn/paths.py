"""Two-point geodesic shortest paths inside a simple polygon.

The engine triangulates the polygon once and answers queries with the
classic sleeve-and-funnel walk.  Returned paths wrap a balanced tree over
their vertices that carries subtree sizes and convexity flags, so indexed
vertex access and longest-convex-prefix/suffix searches run in
logarithmic time on the tree.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import (
    DegenerateGeometry,
    GeoNNError,
    IndexOutOfRange,
    PointOutsidePolygon,
)
from .geometry import (
    DEFAULT_TOLERANCES,
    Point,
    Polygon,
    ToleranceConfig,
    orientation,
    point_in_triangle,
    triangulate_ring,
)


# ---------------------------------------------------------------------------
# Balanced path representation
# ---------------------------------------------------------------------------


class _Node:
    __slots__ = ("size", "first", "second", "penult", "last", "convex", "sign", "left", "right")

    def __init__(self, size, first, second, penult, last, convex, sign, left=None, right=None):
        self.size = size
        self.first = first
        self.second = second
        self.penult = penult
        self.last = last
        self.convex = convex
        self.sign = sign
        self.left = left
        self.right = right


def _leaf(v) -> _Node:
    return _Node(1, v, None, None, v, True, 0)


def _combine(a: _Node, b: _Node) -> _Node:
    signs = set()
    if a.sign:
        signs.add(a.sign)
    if b.sign:
        signs.add(b.sign)
    if a.size >= 2:
        s = orientation(a.penult, a.last, b.first)
        if s:
            signs.add(s)
    if b.size >= 2:
        s = orientation(a.last, b.first, b.second)
        if s:
            signs.add(s)
    convex = a.convex and b.convex and len(signs) <= 1
    sign = signs.pop() if len(signs) == 1 else 0
    return _Node(
        a.size + b.size,
        a.first,
        a.second if a.size >= 2 else b.first,
        b.penult if b.size >= 2 else a.last,
        b.last,
        convex,
        sign if convex else 0,
        a,
        b,
    )


def _build(vertices, lo, hi) -> _Node:
    if hi - lo == 1:
        return _leaf(vertices[lo])
    mid = (lo + hi) // 2
    return _combine(_build(vertices, lo, mid), _build(vertices, mid, hi))


def _select(node: _Node, i: int):
    while node.size > 1:
        if i < node.left.size:
            node = node.left
        else:
            i -= node.left.size
            node = node.right
    return node.first


def _range_summary(node: _Node, lo: int, hi: int) -> _Node:
    """Summary of vertices [lo, hi) under the node (same shape as a tree node)."""
    if lo <= 0 and hi >= node.size:
        return node
    ls = node.left.size
    if hi <= ls:
        return _range_summary(node.left, lo, hi)
    if lo >= ls:
        return _range_summary(node.right, lo - ls, hi - ls)
    return _combine(
        _range_summary(node.left, lo, ls), _range_summary(node.right, 0, hi - ls)
    )


class GeodesicPath:
    """A shortest path, with random access and convex-chain queries.

    The vertex list is immutable; the balanced tree over it is built on
    first use and reused by every tree operation.
    """

    __slots__ = ("vertices", "length", "_tree", "_cum")

    def __init__(self, vertices: Sequence):
        vs = [Point(float(p[0]), float(p[1])) for p in vertices]
        if not vs:
            raise GeoNNError("empty path")
        self.vertices = tuple(vs)
        acc = [0.0]
        for a, b in zip(vs, vs[1:]):
            acc.append(acc[-1] + math.hypot(b.x - a.x, b.y - a.y))
        self._cum = tuple(acc)
        self.length = acc[-1]
        self._tree = None

    # Tree management -----------------------------------------------------

    @property
    def tree(self) -> _Node:
        if self._tree is None:
            self._tree = _build(self.vertices, 0, len(self.vertices))
        return self._tree

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def endpoints(self):
        return self.vertices[0], self.vertices[-1]

    def vertex(self, i: int) -> Point:
        if not 0 <= i < len(self.vertices):
            raise IndexOutOfRange(f"vertex index {i} out of range")
        return _select(self.tree, i)

    def prefix_length(self, i: int) -> float:
        """Arc length from the first vertex to vertex i."""
        return self._cum[i]

    def is_convex(self) -> bool:
        return self.tree.convex

    def turn_sign(self) -> int:
        return self.tree.sign

    def longest_convex_suffix(self) -> int:
        """Smallest j such that the subpath from j to the end is convex."""
        n = len(self.vertices)
        if self.tree.convex:
            return 0
        lo, hi = 1, n - 1  # suffix from hi is trivially convex
        while lo < hi:
            mid = (lo + hi) // 2
            if _range_summary(self.tree, mid, n).convex:
                hi = mid
            else:
                lo = mid + 1
        return lo

    def longest_convex_prefix(self) -> int:
        """Largest j such that the subpath from 0 through j is convex."""
        n = len(self.vertices)
        if self.tree.convex:
            return n - 1
        lo, hi = 0, n - 2
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if _range_summary(self.tree, 0, mid + 1).convex:
                lo = mid
            else:
                hi = mid - 1
        return lo

    def subpath(self, i: int, j: int) -> "GeodesicPath":
        """Vertices i..j inclusive as a new path."""
        if not (0 <= i <= j < len(self.vertices)):
            raise IndexOutOfRange("bad subpath range")
        return GeodesicPath(self.vertices[i : j + 1])

    def reverse(self) -> "GeodesicPath":
        return GeodesicPath(tuple(reversed(self.vertices)))

    def concat(self, other: "GeodesicPath") -> "GeodesicPath":
        """Join two paths sharing an endpoint (rebuilds the tree)."""
        if self.vertices[-1] != other.vertices[0]:
            raise GeoNNError("paths do not share an endpoint")
        return GeodesicPath(self.vertices + other.vertices[1:])

    def __repr__(self):
        return f"GeodesicPath({len(self.vertices)} vertices, length={self.length:.6g})"


def path_vertex(path: GeodesicPath, i: int) -> Point:
    """i-th vertex of the path, via the balanced tree."""
    return path.vertex(i)


def longest_convex_suffix(path: GeodesicPath) -> int:
    return path.longest_convex_suffix()


# ---------------------------------------------------------------------------
# Funnels and extension segments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExtensionSegment:
    """Extension of a shortest-path-tree edge beyond its far vertex.

    ``origin`` is the tree vertex v, ``endpoint`` the first hit on the
    boundary it was clipped to, ``source`` the site whose tree defines it.
    ``c_origin`` caches the geodesic distance source -> origin, so the
    distance from the source to any point x on the segment is
    c_origin + |x - origin|.
    """

    origin: Point
    endpoint: Point
    source: Point
    c_origin: float
    valid: bool = True

    def direction(self):
        dx = self.endpoint.x - self.origin.x
        dy = self.endpoint.y - self.origin.y
        n = math.hypot(dx, dy)
        return (dx / n, dy / n) if n else (0.0, 0.0)

    def point_at(self, t: float) -> Point:
        return Point(
            self.origin.x + t * (self.endpoint.x - self.origin.x),
            self.origin.y + t * (self.endpoint.y - self.origin.y),
        )

    def source_distance_at(self, p) -> float:
        return self.c_origin + math.hypot(p[0] - self.origin.x, p[1] - self.origin.y)


@dataclass
class Funnel:
    """Shortest paths from one source to every point of a segment.

    The apex path is shared by all of them; the two chains are convex and
    run from the apex to the segment endpoints ``seg_a`` and ``seg_b``
    (named left/right in that argument order).
    """

    source: Point
    seg_a: Point
    seg_b: Point
    apex: Point
    apex_path: GeodesicPath
    left_chain: GeodesicPath
    right_chain: GeodesicPath
    _pieces: Optional[list] = field(default=None, repr=False)

    def pieces(self) -> list:
        """Piecewise distance structure along the segment.

        Returns [(lam_lo, lam_hi, root, c_root), ...] covering [0, 1] with
        lam measured from seg_a, such that the distance from the source to
        the segment point at lam equals c_root + |point - root|.
        """
        if self._pieces is None:
            self._pieces = self._build_pieces()
        return self._pieces

    def _build_pieces(self) -> list:
        A, B = self.seg_a, self.seg_b
        U = (B.x - A.x, B.y - A.y)
        c0 = self.apex_path.length

        def chain_breaks(chain: GeodesicPath):
            # Boundaries between consecutive wedge roots, walking the chain
            # from the segment endpoint back toward the apex.
            vs = chain.vertices
            out = []
            c = c0
            cums = [c0 + chain.prefix_length(i) for i in range(len(vs))]
            for j in range(1, len(vs) - 1):
                lam = _ray_param_on_segment(vs[j - 1], vs[j], A, U)
                out.append((lam, vs[j], cums[j]))
            return out

        left = [r for r in chain_breaks(self.left_chain) if r[0] is not None]
        right = [r for r in chain_breaks(self.right_chain) if r[0] is not None]
        pieces = []
        prev = 0.0
        # Wedge roots walk the left chain from its deep end toward the apex
        # as lam grows, so boundaries come in ascending order.
        for lam, root, c in sorted(left, key=lambda r: r[0]):
            lam = min(max(lam, prev), 1.0)
            pieces.append((prev, lam, root, c))
            prev = lam
        top = 1.0
        right_pieces = []
        for lam, root, c in sorted(right, key=lambda r: -r[0]):
            lam = max(min(lam, top), prev)
            right_pieces.append((lam, top, root, c))
            top = lam
        pieces.append((prev, top, self.apex, c0))
        pieces.extend(reversed(right_pieces))
        return [p for p in pieces if p[1] >= p[0]]

    def point_at(self, lam: float) -> Point:
        return Point(
            self.seg_a.x + lam * (self.seg_b.x - self.seg_a.x),
            self.seg_a.y + lam * (self.seg_b.y - self.seg_a.y),
        )

    def root_at(self, lam: float):
        """(root, c_root) of the wedge containing lam."""
        ps = self.pieces()
        lo, hi = 0, len(ps) - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if ps[mid][1] < lam:
                lo = mid + 1
            else:
                hi = mid
        _, _, root, c = ps[lo]
        return root, c

    def distance_at(self, lam: float) -> float:
        root, c = self.root_at(lam)
        p = self.point_at(lam)
        return c + math.hypot(p.x - root.x, p.y - root.y)

    def breakpoints(self) -> list:
        return [p[0] for p in self.pieces()[1:]]


def _ray_param_on_segment(u, v, A, U) -> Optional[float]:
    """lam where the extension of edge u->v beyond v meets A + lam*U."""
    d = (v[0] - u[0], v[1] - u[1])
    denom = d[0] * U[1] - d[1] * U[0]
    if abs(denom) < 1e-300:
        return None
    wx, wy = A[0] - v[0], A[1] - v[1]
    tau = (wx * U[1] - wy * U[0]) / denom
    lam = (wx * d[1] - wy * d[0]) / denom
    if tau < -1e-9:
        return None
    return lam


def _ray_segment_hit(origin, direction, a, b, tau_min=1e-12):
    """(tau, point) where origin + tau*direction crosses segment ab, else None."""
    denom = direction[0] * (b[1] - a[1]) - direction[1] * (b[0] - a[0])
    if denom == 0.0:
        return None
    wx, wy = a[0] - origin[0], a[1] - origin[1]
    tau = (wx * (b[1] - a[1]) - wy * (b[0] - a[0])) / denom
    u = (wx * direction[1] - wy * direction[0]) / denom
    if tau < tau_min or u < -1e-12 or u > 1.0 + 1e-12:
        return None
    return tau, Point(origin[0] + tau * direction[0], origin[1] + tau * direction[1])


def solve_equidistant_on_segment(A, B, lam_lo, lam_hi, root_s, c_s, root_t, c_t, eps=1e-14):
    """Root of c_s + |x - root_s| = c_t + |x - root_t| for x on segment AB,
    restricted to lam in [lam_lo, lam_hi].

    Both distance functions are single hyperbolic pieces here, so the root
    is the solution of a quadratic; a bisection fallback guards against
    ill-conditioned coefficients.  Returns lam or None.
    """
    U = (B[0] - A[0], B[1] - A[1])
    a_coef = U[0] * U[0] + U[1] * U[1]
    q1 = (A[0] - root_s[0], A[1] - root_s[1])
    q2 = (A[0] - root_t[0], A[1] - root_t[1])
    b1 = 2.0 * (q1[0] * U[0] + q1[1] * U[1])
    c1 = q1[0] * q1[0] + q1[1] * q1[1]
    b2 = 2.0 * (q2[0] * U[0] + q2[1] * U[1])
    c2 = q2[0] * q2[0] + q2[1] * q2[1]

    def g(lam):
        f1 = math.sqrt(max(a_coef * lam * lam + b1 * lam + c1, 0.0))
        f2 = math.sqrt(max(a_coef * lam * lam + b2 * lam + c2, 0.0))
        return (c_s + f1) - (c_t + f2)

    glo, ghi = g(lam_lo), g(lam_hi)
    if glo == 0.0:
        return lam_lo
    if ghi == 0.0:
        return lam_hi
    if glo * ghi > 0:
        return None

    scale = 1.0 + abs(c_s) + abs(c_t) + math.sqrt(max(c1, c2))
    delta = c_t - c_s
    candidates = []
    if abs(delta) < 1e-15 * scale:
        denom = b1 - b2
        if denom != 0.0:
            candidates.append((c2 - c1) / denom)
    else:
        p = b1 - b2
        q = c1 - c2 - delta * delta
        inv = 1.0 / (2.0 * delta)
        alpha = a_coef - (p * inv) * (p * inv)
        beta = b2 - 2.0 * (p * inv) * (q * inv)
        gamma = c2 - (q * inv) * (q * inv)
        if alpha == 0.0:
            if beta != 0.0:
                candidates.append(-gamma / beta)
        else:
            disc = beta * beta - 4.0 * alpha * gamma
            if disc >= 0.0:
                r = math.sqrt(disc)
                candidates.append((-beta + r) / (2.0 * alpha))
                candidates.append((-beta - r) / (2.0 * alpha))
    slack = 1e-9 * (abs(lam_hi - lam_lo) + 1.0)
    x = None
    for lam in candidates:
        if lam_lo - slack <= lam <= lam_hi + slack and abs(g(lam)) < 1e-10 * scale:
            lam = min(max(lam, lam_lo), lam_hi)
            if x is None or abs(g(lam)) < abs(g(x)):
                x = lam
    if x is None:
        # Bisection on the exact single-piece functions.
        lo, hi, flo = lam_lo, lam_hi, glo
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            gm = g(mid)
            if gm == 0.0:
                lo = hi = mid
                break
            if flo * gm < 0:
                hi = mid
            else:
                lo, flo = mid, gm
            if hi - lo < eps:
                break
        x = 0.5 * (lo + hi)
    # A Newton step or two squeezes out the last few ulps.
    for _ in range(2):
        f1 = math.sqrt(max(a_coef * x * x + b1 * x + c1, 1e-300))
        f2 = math.sqrt(max(a_coef * x * x + b2 * x + c2, 1e-300))
        deriv = (2.0 * a_coef * x + b1) / (2.0 * f1) - (2.0 * a_coef * x + b2) / (2.0 * f2)
        if deriv == 0.0:
            break
        step = ((c_s + f1) - (c_t + f2)) / deriv
        nxt = x - step
        if not (lam_lo - slack <= nxt <= lam_hi + slack):
            break
        x = min(max(nxt, lam_lo), lam_hi)
    return x


# ---------------------------------------------------------------------------
# Pseudo-triangle
# ---------------------------------------------------------------------------


class _ExtensionFan:
    """Lazy ordered sequence of clipped extension segments along one side
    of a pseudo-triangle.

    ``start_side(i)`` reports which site is closer at segment i's origin:
    -1 for the fan's own source, +1 for the other site.
    """

    def __init__(self, source, candidates, clip_chain: GeodesicPath):
        self.source = source
        self._candidates = candidates  # list of (origin, pred, c_origin, side)
        self._clip = clip_chain.vertices
        self._cache = {}

    def __len__(self):
        return len(self._candidates)

    def origin(self, i: int):
        return self._candidates[i][0]

    def c_origin(self, i: int) -> float:
        return self._candidates[i][2]

    def start_side(self, i: int) -> int:
        return self._candidates[i][3]

    def __getitem__(self, i: int) -> ExtensionSegment:
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self._candidates):
            raise IndexOutOfRange(f"fan index {i}")
        seg = self._cache.get(i)
        if seg is None:
            origin, pred, c = self._candidates[i][:3]
            d = (origin.x - pred.x, origin.y - pred.y)
            n = math.hypot(*d)
            d = (d[0] / n, d[1] / n)
            best = None
            for a, b in zip(self._clip, self._clip[1:]):
                hit = _ray_segment_hit(origin, d, a, b, tau_min=1e-12)
                if hit and (best is None or hit[0] < best[0]):
                    best = hit
            if best is None:
                seg = ExtensionSegment(origin, origin, self.source, c, valid=False)
            else:
                seg = ExtensionSegment(origin, best[1], self.source, c, valid=True)
            self._cache[i] = seg
        return seg


@dataclass
class PseudoTriangle:
    """Convex-chain core of the region bounded by the pairwise geodesics of
    z, s, and t, plus the clipped extension-segment fans of both sites."""

    z: Point
    s: Point
    t: Point
    s_hat: Point
    t_hat: Point
    chain_st: GeodesicPath  # s_hat -> t_hat
    chain_tz: GeodesicPath  # t_hat -> z
    chain_zs: GeodesicPath  # z -> s_hat
    dist_s_shat: float
    dist_t_that: float
    F_s_t: _ExtensionFan
    F_t_s: _ExtensionFan

    def boundary(self):
        return (
            list(self.chain_st.vertices)
            + list(self.chain_tz.vertices[1:])
            + list(self.chain_zs.vertices[1:-1])
        )

    def contains(self, p) -> bool:
        from .geometry import point_in_polygon

        return point_in_polygon(self.boundary(), p) >= 0


# ---------------------------------------------------------------------------
# The engine
# ---------------------------------------------------------------------------


class _SourceData:
    __slots__ = ("tri", "parents", "vertex_dist", "vertex_pred")

    def __init__(self, tri, parents):
        self.tri = tri
        self.parents = parents
        self.vertex_dist = None
        self.vertex_pred = None


class PathEngine:
    """Geodesic shortest-path queries over a fixed simple polygon.

    Immutable after construction; concurrent queries are safe.
    """

    def __init__(self, polygon: Polygon, tolerances: ToleranceConfig = DEFAULT_TOLERANCES):
        self.polygon = polygon
        self.tol = tolerances
        self.pts = polygon.vertices
        self.triangles = triangulate_ring(self.pts, range(polygon.m))
        self._adj = [[] for _ in self.triangles]
        edge_map = {}
        for ti, t in enumerate(self.triangles):
            for u, v in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
                key = (min(u, v), max(u, v))
                if key in edge_map:
                    tj = edge_map[key]
                    self._adj[ti].append((tj, key))
                    self._adj[tj].append((ti, key))
                else:
                    edge_map[key] = ti
        self._grid = self._build_grid()
        xs = [p.x for p in self.pts]
        ys = [p.y for p in self.pts]
        self._scale = (max(xs) - min(xs)) * (max(ys) - min(ys)) + 1.0
        self._sources = {}
        self.stats = {"path_queries": 0, "distance_calls": 0}

    # -- triangle location -------------------------------------------------

    def _build_grid(self):
        xs = [p.x for p in self.pts]
        ys = [p.y for p in self.pts]
        nx = max(1, int(math.sqrt(len(self.triangles))) or 1)
        gx0, gy0 = min(xs), min(ys)
        gw = (max(xs) - gx0) / nx or 1.0
        gh = (max(ys) - gy0) / nx or 1.0
        cells = {}
        for ti, t in enumerate(self.triangles):
            txs = [self.pts[i].x for i in t]
            tys = [self.pts[i].y for i in t]
            i0 = int((min(txs) - gx0) / gw)
            i1 = int((max(txs) - gx0) / gw)
            j0 = int((min(tys) - gy0) / gh)
            j1 = int((max(tys) - gy0) / gh)
            for i in range(max(i0, 0), min(i1, nx - 1) + 1):
                for j in range(max(j0, 0), min(j1, nx - 1) + 1):
                    cells.setdefault((i, j), []).append(ti)
        return (gx0, gy0, gw, gh, nx, cells)

    def locate_triangle(self, p) -> int:
        gx0, gy0, gw, gh, nx, cells = self._grid
        i = min(max(int((p[0] - gx0) / gw), 0), nx - 1)
        j = min(max(int((p[1] - gy0) / gh), 0), nx - 1)
        for ti in cells.get((i, j), ()):
            a, b, c = (self.pts[k] for k in self.triangles[ti])
            if point_in_triangle(a, b, c, p):
                return ti
        for ti, t in enumerate(self.triangles):
            a, b, c = (self.pts[k] for k in t)
            if point_in_triangle(a, b, c, p):
                return ti
        # Points computed on the boundary can land a few ulps outside every
        # triangle; accept the least-violating one within tolerance.
        best = None
        for ti, t in enumerate(self.triangles):
            a, b, c = (self.pts[k] for k in t)
            worst = min(
                (b.x - a.x) * (p[1] - a.y) - (b.y - a.y) * (p[0] - a.x),
                (c.x - b.x) * (p[1] - b.y) - (c.y - b.y) * (p[0] - b.x),
                (a.x - c.x) * (p[1] - c.y) - (a.y - c.y) * (p[0] - c.x),
            )
            if best is None or worst > best[0]:
                best = (worst, ti)
        if best is not None and best[0] >= -1e-9 * self._scale:
            return best[1]
        raise PointOutsidePolygon(f"{tuple(p)} is not inside the polygon")

    # -- source caching ----------------------------------------------------

    def _source(self, p) -> _SourceData:
        key = (p[0], p[1])
        data = self._sources.get(key)
        if data is None:
            tri = self.locate_triangle(p)
            parents = [-2] * len(self.triangles)
            parents[tri] = -1
            dq = deque([tri])
            while dq:
                cur = dq.popleft()
                for nxt, _ in self._adj[cur]:
                    if parents[nxt] == -2:
                        parents[nxt] = cur
                        dq.append(nxt)
            data = _SourceData(tri, parents)
            if len(self._sources) > 20000:
                self._sources.clear()
            self._sources[key] = data
        return data

    def vertex_tables(self, p):
        """Per-source distance and tree-predecessor tables over polygon vertices.

        pred[v] is the polygon-vertex index preceding v on the path from p,
        or -1 when v is seen directly from p.
        """
        src = self._source(p)
        if src.vertex_dist is None:
            index_of = {q: i for i, q in enumerate(self.pts)}
            dist = [0.0] * len(self.pts)
            pred = [-1] * len(self.pts)
            for v, q in enumerate(self.pts):
                path = self.shortest_path(p, q)
                dist[v] = path.length
                if path.vertex_count >= 2:
                    before = path.vertices[-2]
                    pred[v] = index_of.get(before, -1)
            src.vertex_dist = dist
            src.vertex_pred = pred
        return src.vertex_dist, src.vertex_pred

    def distance_to_vertex(self, p, vidx: int) -> float:
        dist, _ = self.vertex_tables(p)
        return dist[vidx]

    # -- queries -------------------------------------------------------

    def shortest_path(self, p, q) -> GeodesicPath:
        """The unique geodesic between p and q; raises PointOutsidePolygon."""
        self.stats["path_queries"] += 1
        p = Point(float(p[0]), float(p[1]))
        q = Point(float(q[0]), float(q[1]))
        if p == q:
            return GeodesicPath([p])
        src = self._source(p)
        tri_q = self.locate_triangle(q)
        if tri_q == src.tri:
            return GeodesicPath([p, q])
        tri_path = [tri_q]
        cur = tri_q
        while cur != src.tri:
            cur = src.parents[cur]
            if cur < 0:
                raise GeoNNError("disconnected triangulation")
            tri_path.append(cur)
        tri_path.reverse()
        # Endpoints on a vertex or diagonal belong to several triangles; the
        # dual walk may overshoot past them, so trim to the first triangle
        # containing q and the last containing p.
        def tri_has(ti, pt):
            a, b, c = (self.pts[k] for k in self.triangles[ti])
            return point_in_triangle(a, b, c, pt)

        for idx in range(len(tri_path)):
            if tri_has(tri_path[idx], q):
                tri_path = tri_path[: idx + 1]
                break
        for idx in range(len(tri_path) - 1, -1, -1):
            if tri_has(tri_path[idx], p):
                tri_path = tri_path[idx:]
                break
        if len(tri_path) == 1:
            return GeodesicPath([p, q])
        portals = []
        for t1, t2 in zip(tri_path, tri_path[1:]):
            for nxt, key in self._adj[t1]:
                if nxt == t2:
                    portals.append((self.pts[key[0]], self.pts[key[1]]))
                    break
        verts = _funnel_walk(p, q, portals)
        out = [verts[0]]
        for v in verts[1:]:
            if v != out[-1]:
                out.append(v)
        if len(out) == 1:
            out.append(q)
        return GeodesicPath(out)

    def distance(self, p, q) -> float:
        self.stats["distance_calls"] += 1
        return self.shortest_path(p, q).length

    def funnel_to_segment(self, source, a, b) -> Funnel:
        """Funnel of shortest paths from source to every point of segment ab."""
        pa = self.shortest_path(source, a)
        pb = self.shortest_path(source, b)
        va, vb = pa.vertices, pb.vertices
        common = 1
        limit = min(len(va), len(vb))
        while common < limit and va[common] == vb[common]:
            common += 1
        apex = va[common - 1]
        return Funnel(
            source=Point(*source),
            seg_a=Point(*a),
            seg_b=Point(*b),
            apex=apex,
            apex_path=GeodesicPath(va[:common]),
            left_chain=GeodesicPath(va[common - 1 :]),
            right_chain=GeodesicPath(vb[common - 1 :]),
        )

    def funnel_to_diagonal(self, source, diag) -> Funnel:
        """Funnel to a polygon diagonal given by vertex indices."""
        return self.funnel_to_segment(
            source, self.pts[diag.a % self.polygon.m], self.pts[diag.b % self.polygon.m]
        )

    def extension_to_boundary(self, origin, pred) -> Point:
        """First polygon-boundary hit of the extension of edge pred->origin."""
        d = (origin[0] - pred[0], origin[1] - pred[1])
        n = math.hypot(*d)
        d = (d[0] / n, d[1] / n)
        best = None
        m = self.polygon.m
        for i in range(m):
            hit = _ray_segment_hit(origin, d, self.pts[i], self.pts[(i + 1) % m], tau_min=1e-9)
            if hit and (best is None or hit[0] < best[0]):
                best = hit
        if best is None:
            raise DegenerateGeometry("extension ray does not reach the boundary")
        return best[1]

    # -- pseudo-triangle -------------------------------------------------

    def pseudo_triangle(self, z, s, t) -> PseudoTriangle:
        """Corners, convex chains, and extension fans for sites s, t and a
        boundary point z, found by the convex-suffix and pivot searches."""
        z, s, t = Point(*z), Point(*s), Point(*t)
        path_sz = self.shortest_path(s, z)
        path_tz = self.shortest_path(t, z)
        s1 = path_sz.vertices[path_sz.longest_convex_suffix()]
        t1 = path_tz.vertices[path_tz.longest_convex_suffix()]
        path_p = self.shortest_path(s1, t1)
        if path_sz.vertex_count < 2:
            raise DegenerateGeometry("z coincides with s")
        pivot_origin = path_sz.vertices[-2]
        v_piv, split_idx = self._pivot_on_path(z, pivot_origin, path_p)
        # Convex-chain searches outward from the pivot give the corners.
        verts = list(path_p.vertices)
        head = verts[: split_idx + 1]
        if v_piv != head[-1]:
            head = head + [v_piv]
        tail = verts[split_idx + 1 :]
        if not tail or v_piv != tail[0]:
            tail = [v_piv] + tail
        sub_a = GeodesicPath(head)
        sub_b = GeodesicPath(tail)
        # The convex chain can run past the corner into the part shared with
        # the geodesic to z; the corner is its last vertex still on that
        # geodesic (the chains from the corners to z must stay convex).
        sz_set = set(path_sz.vertices)
        tz_set = set(path_tz.vertices)
        ja = sub_a.longest_convex_suffix()
        s_hat = None
        for k in range(len(sub_a.vertices) - 1, ja - 1, -1):
            if sub_a.vertices[k] in sz_set:
                s_hat = sub_a.vertices[k]
                break
        jb = sub_b.longest_convex_prefix()
        t_hat = None
        for k in range(jb + 1):
            if sub_b.vertices[k] in tz_set:
                t_hat = sub_b.vertices[k]
                break
        if s_hat is None or t_hat is None:
            raise DegenerateGeometry("pseudo-triangle corner search failed")
        chain_st = self.shortest_path(s_hat, t_hat)
        chain_tz = self.shortest_path(t_hat, z)
        chain_zs = self.shortest_path(z, s_hat)
        dist_s_shat = self.distance(s, s_hat) if s_hat != s else 0.0
        dist_t_that = self.distance(t, t_hat) if t_hat != t else 0.0

        fan_st = self._fan(
            s, chain_st, chain_zs, dist_s_shat, clip=chain_tz, other_corner_dist=dist_t_that
        )
        fan_ts = self._fan(
            t, chain_st.reverse(), chain_tz, dist_t_that, clip=chain_zs, other_corner_dist=dist_s_shat
        )
        return PseudoTriangle(
            z=z,
            s=s,
            t=t,
            s_hat=s_hat,
            t_hat=t_hat,
            chain_st=chain_st,
            chain_tz=chain_tz,
            chain_zs=chain_zs,
            dist_s_shat=dist_s_shat,
            dist_t_that=dist_t_that,
            F_s_t=fan_st,
            F_t_s=fan_ts,
        )

    def _pivot_on_path(self, z, origin, path: GeodesicPath):
        """Crossing of the extension of z->origin with the path (unique)."""
        verts = path.vertices
        for i, v in enumerate(verts):
            if abs(v.x - origin.x) < 1e-12 and abs(v.y - origin.y) < 1e-12:
                return v, max(i - 1, 0) if i == len(verts) - 1 else i
        d = (origin.x - z.x, origin.y - z.y)
        n = math.hypot(*d)
        d = (d[0] / n, d[1] / n)
        best = None
        for i in range(len(verts) - 1):
            hit = _ray_segment_hit(origin, d, verts[i], verts[i + 1], tau_min=-1e-12)
            if hit and (best is None or hit[0] < best[0]):
                best = (hit[0], hit[1], i)
        if best is None:
            raise DegenerateGeometry("pivot extension misses the opposite chain")
        return best[1], best[2]

    def _fan(self, source, chain_near, chain_far, dist_to_corner, clip, other_corner_dist):
        """Ordered extension-fan candidates for one site of a pseudo-triangle.

        chain_near runs corner(source) -> other corner (the shared geodesic
        side); chain_far runs corner(source) -> z.  Ordering follows the
        pseudo-triangle boundary so that segments crossing the bisector
        form a suffix.
        """
        corner = chain_near.vertices[0]
        cands = []
        vs = chain_near.vertices
        total = chain_near.length
        for i in range(len(vs) - 2, 0, -1):
            arc = chain_near.prefix_length(i)
            c = dist_to_corner + arc
            d_other = other_corner_dist + (total - arc)
            cands.append((vs[i], vs[i - 1], c, -1 if c < d_other else 1))
        if corner != source:
            pred = self.shortest_path(source, corner).vertices[-2]
            cands.append((corner, pred, dist_to_corner, -1))
        ws = chain_far.vertices if chain_far.vertices[0] == corner else tuple(reversed(chain_far.vertices))
        for i in range(1, len(ws) - 1):
            c = dist_to_corner + _arclen(ws, i)
            cands.append((ws[i], ws[i - 1], c, -1))
        return _ExtensionFan(source, cands, clip)


def _arclen(vs, i):
    acc = 0.0
    for k in range(i):
        acc += math.hypot(vs[k + 1].x - vs[k].x, vs[k + 1].y - vs[k].y)
    return acc


# ---------------------------------------------------------------------------
# Funnel walk over a sleeve of portals
# ---------------------------------------------------------------------------


def _funnel_walk(s: Point, t: Point, portals) -> list:
    """String pulling through the portal sequence; returns path vertices."""
    out = []
    portals = portals + [(portals[-1][0], t)]
    cusp = s
    first = portals[0]
    funnel = deque([first[0], cusp, first[1]])
    if orientation(s, first[0], first[1]) > 0:
        funnel.reverse()
    for a, b in portals[1:]:
        left, right = a, b
        if funnel[0] == right or funnel[-1] == left:
            left, right = right, left
        if left == funnel[0]:
            while funnel[-1] != cusp and orientation(funnel[-2], funnel[-1], right) > 0:
                funnel.pop()
            if funnel[-1] == cusp:
                while len(funnel) > 1 and orientation(funnel[-1], funnel[-2], right) > 0:
                    out.append(funnel.pop())
                cusp = funnel[-1]
            funnel.append(right)
        else:
            while funnel[0] != cusp and orientation(funnel[1], funnel[0], left) < 0:
                funnel.popleft()
            if funnel[0] == cusp:
                while len(funnel) > 1 and orientation(funnel[0], funnel[1], left) < 0:
                    out.append(funnel.popleft())
                cusp = funnel[0]
            funnel.appendleft(left)
    if funnel[0] == t:
        while funnel[-1] != cusp:
            funnel.pop()
        while funnel:
            out.append(funnel.pop())
    elif funnel[-1] == t:
        while funnel[0] != cusp:
            funnel.popleft()
        while funnel:
            out.append(funnel.popleft())
    else:
        out.append(cusp)
        out.append(t)
    if out[0] != s:
        out.insert(0, s)
    return out
