"""Planar primitives, polygon validation, triangulation, and the balanced
diagonal decomposition.

Points are ``(x, y)`` named tuples of floats.  The orientation predicate is
adaptively exact: a fast float evaluation backed by an exact rational
fallback when the float result is too close to zero to trust, so the sign
is never wrong.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Optional, Sequence

from .errors import (
    DegenerateVertex,
    GeoNNError,
    SelfIntersecting,
    TooFewVertices,
)


class Point(NamedTuple):
    x: float
    y: float


class Diagonal(NamedTuple):
    """Indices of two non-adjacent polygon vertices joined by an interior segment."""

    a: int
    b: int


@dataclass(frozen=True)
class ToleranceConfig:
    """Numeric tolerances used throughout the package.

    eps_dist is a relative tolerance on geodesic distances, eps_param an
    absolute tolerance in normalized parameter space for root finding.
    """

    eps_dist: float = 1e-9
    eps_param: float = 1e-12

    def __post_init__(self):
        if not (self.eps_dist > 0 and self.eps_param > 0):
            raise GeoNNError("tolerances must be strictly positive")


DEFAULT_TOLERANCES = ToleranceConfig()

# Relative rounding error bound for the 2x2 determinant (Shewchuk-style).
_ORIENT_ERRBOUND = (3.0 + 16.0 * 2.0 ** -53) * 2.0 ** -53


def orientation(a, b, c) -> int:
    """Sign of the cross product (b - a) x (c - a).

    Returns +1 for a counter-clockwise turn, -1 for clockwise, 0 for
    collinear.  The float fast path falls back to exact rational
    arithmetic when the determinant's magnitude is below its error bound.
    """
    detleft = (a[0] - c[0]) * (b[1] - c[1])
    detright = (a[1] - c[1]) * (b[0] - c[0])
    det = detleft - detright
    if detleft > 0.0:
        if detright <= 0.0:
            return 1 if det != 0.0 else _orientation_exact(a, b, c)
        detsum = detleft + detright
    elif detleft < 0.0:
        if detright >= 0.0:
            return -1 if det != 0.0 else _orientation_exact(a, b, c)
        detsum = -detleft - detright
    else:
        if detright > 0.0:
            return -1
        if detright < 0.0:
            return 1
        return 0
    if det >= _ORIENT_ERRBOUND * detsum:
        return 1
    if -det >= _ORIENT_ERRBOUND * detsum:
        return -1
    return _orientation_exact(a, b, c)


def _orientation_exact(a, b, c) -> int:
    ax, ay = Fraction(a[0]), Fraction(a[1])
    bx, by = Fraction(b[0]), Fraction(b[1])
    cx, cy = Fraction(c[0]), Fraction(c[1])
    det = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    if det > 0:
        return 1
    if det < 0:
        return -1
    return 0


def on_segment(a, b, p) -> bool:
    """True iff p lies on the closed segment ab (collinearity tested exactly)."""
    if orientation(a, b, p) != 0:
        return False
    return (
        min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
        and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])
    )


def segments_intersect(a, b, c, d) -> bool:
    """True iff closed segments ab and cd share at least one point."""
    o1 = orientation(a, b, c)
    o2 = orientation(a, b, d)
    o3 = orientation(c, d, a)
    o4 = orientation(c, d, b)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_segment(a, b, c):
        return True
    if o2 == 0 and on_segment(a, b, d):
        return True
    if o3 == 0 and on_segment(c, d, a):
        return True
    if o4 == 0 and on_segment(c, d, b):
        return True
    return False


def segment_intersection_point(a, b, c, d) -> Optional[Point]:
    """Intersection point of properly crossing segments ab and cd, else None."""
    r = (b[0] - a[0], b[1] - a[1])
    s = (d[0] - c[0], d[1] - c[1])
    denom = r[0] * s[1] - r[1] * s[0]
    if denom == 0.0:
        return None
    qp = (c[0] - a[0], c[1] - a[1])
    t = (qp[0] * s[1] - qp[1] * s[0]) / denom
    u = (qp[0] * r[1] - qp[1] * r[0]) / denom
    if -1e-12 <= t <= 1.0 + 1e-12 and -1e-12 <= u <= 1.0 + 1e-12:
        return Point(a[0] + t * r[0], a[1] + t * r[1])
    return None


@dataclass(frozen=True)
class Polygon:
    """A simple polygon with vertices in counter-clockwise order.

    Construct through :func:`validate_polygon`, which checks simplicity and
    normalizes orientation.
    """

    vertices: tuple
    m: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "m", len(self.vertices))

    def vertex(self, i: int) -> Point:
        return self.vertices[i % self.m]

    def area(self) -> float:
        return 0.5 * abs(_signed_area(self.vertices))

    def classify(self, p) -> int:
        """+1 if p is strictly inside, 0 on the boundary, -1 outside."""
        return point_in_polygon(self.vertices, p)

    def contains(self, p, strict: bool = False) -> bool:
        c = self.classify(p)
        return c > 0 if strict else c >= 0

    def to_json_dict(self) -> dict:
        return {"vertices": [[p[0], p[1]] for p in self.vertices]}


def _signed_area(pts) -> float:
    acc = 0.0
    n = len(pts)
    for i in range(n):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % n]
        acc += x1 * y2 - x2 * y1
    return acc


def validate_polygon(vertices: Sequence) -> Polygon:
    """Validate a vertex sequence and return a CCW :class:`Polygon`.

    Clockwise input is reversed rather than rejected.  Raises
    TooFewVertices, DegenerateVertex, or SelfIntersecting.
    """
    pts = [Point(float(p[0]), float(p[1])) for p in vertices]
    for p in pts:
        if not (math.isfinite(p.x) and math.isfinite(p.y)):
            raise DegenerateVertex("non-finite coordinate")
    n = len(pts)
    if n < 3:
        raise TooFewVertices(f"need at least 3 vertices, got {n}")
    for i in range(n):
        if pts[i] == pts[(i + 1) % n]:
            raise DegenerateVertex(f"consecutive duplicate vertex at index {i}")
    # Fold-back spikes: collinear wedge with both edges on the same side.
    for i in range(n):
        a, b, c = pts[i - 1], pts[i], pts[(i + 1) % n]
        if orientation(a, b, c) == 0:
            if (a.x - b.x) * (c.x - b.x) + (a.y - b.y) * (c.y - b.y) > 0:
                raise SelfIntersecting(f"zero-angle spike at vertex {i}")
    for i in range(n):
        a, b = pts[i], pts[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            c, d = pts[j], pts[(j + 1) % n]
            if segments_intersect(a, b, c, d):
                raise SelfIntersecting(f"edges {i} and {j} intersect")
    area = _signed_area(pts)
    if area == 0.0:
        raise SelfIntersecting("polygon has zero area")
    if area < 0.0:
        pts.reverse()
    return Polygon(vertices=tuple(pts))


def point_in_polygon(pts, p) -> int:
    """+1 strictly inside, 0 on boundary, -1 outside (crossing number)."""
    n = len(pts)
    for i in range(n):
        if on_segment(pts[i], pts[(i + 1) % n], p):
            return 0
    crossings = 0
    py = p[1]
    for i in range(n):
        a = pts[i]
        b = pts[(i + 1) % n]
        if a[1] <= py < b[1]:
            if orientation(a, b, p) > 0:
                crossings += 1
        elif b[1] <= py < a[1]:
            if orientation(a, b, p) < 0:
                crossings += 1
    return 1 if crossings % 2 == 1 else -1


def point_in_triangle(a, b, c, p) -> bool:
    """True iff p is in the closed CCW triangle abc."""
    return (
        orientation(a, b, p) >= 0
        and orientation(b, c, p) >= 0
        and orientation(c, a, p) >= 0
    )


def triangulate_ring(pts, ring) -> list:
    """Ear-clip the CCW subpolygon given by vertex indices ``ring``.

    Returns a list of index triangles (triples into ``pts``).  O(m^2) with
    reflex bookkeeping, which is fine at the scales this package targets.
    """
    ring = list(ring)
    n = len(ring)
    if n < 3:
        raise GeoNNError("ring with fewer than 3 vertices")
    if n == 3:
        return [tuple(ring)]

    def convex(iprev, icur, inext):
        return orientation(pts[iprev], pts[icur], pts[inext]) > 0

    triangles = []
    guard = 0
    while len(ring) > 3:
        n = len(ring)
        clipped = False
        for k in range(n):
            ip, ic, inx = ring[k - 1], ring[k], ring[(k + 1) % n]
            if not convex(ip, ic, inx):
                continue
            a, b, c = pts[ip], pts[ic], pts[inx]
            blocked = False
            for other in ring:
                if other in (ip, ic, inx):
                    continue
                q = pts[other]
                # Only a vertex inside (or on) the candidate ear can block it.
                if point_in_triangle(a, b, c, q):
                    blocked = True
                    break
            if not blocked:
                triangles.append((ip, ic, inx))
                del ring[k]
                clipped = True
                break
        if not clipped:
            guard += 1
            if guard > 2:
                raise GeoNNError("ear clipping stalled; degenerate polygon?")
            # Retry tolerating collinear ears (zero-area corners).
            for k in range(len(ring)):
                ip, ic, inx = ring[k - 1], ring[k], ring[(k + 1) % len(ring)]
                if orientation(pts[ip], pts[ic], pts[inx]) == 0:
                    del ring[k]
                    clipped = True
                    break
            if not clipped:
                raise GeoNNError("ear clipping stalled; degenerate polygon?")
    triangles.append(tuple(ring))
    return triangles


def triangulate(polygon: Polygon) -> list:
    """Triangulate the polygon; returns the m - 3 diagonals.

    Every returned diagonal joins two non-adjacent vertices and lies in the
    polygon interior.
    """
    tris = triangulate_ring(polygon.vertices, range(polygon.m))
    return _diagonals_of(tris, polygon.m)


def _diagonals_of(triangles, m) -> list:
    seen = set()
    out = []
    for t in triangles:
        for u, v in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            if (u - v) % m in (1, m - 1):
                continue  # polygon edge
            key = (min(u, v), max(u, v))
            if key not in seen:
                seen.add(key)
                out.append(Diagonal(*key))
    return out


@dataclass
class DecompositionNode:
    """One node of the balanced decomposition tree.

    ``indices`` lists the sub-polygon's vertices as indices into the parent
    polygon, in CCW order.  Internal nodes carry the splitting diagonal and
    two children; leaves are triangles.
    """

    indices: tuple
    diagonal: Optional[Diagonal]
    left: Optional["DecompositionNode"]
    right: Optional["DecompositionNode"]
    depth: int

    @property
    def is_leaf(self) -> bool:
        return self.diagonal is None

    def walk(self):
        yield self
        if self.left is not None:
            yield from self.left.walk()
        if self.right is not None:
            yield from self.right.walk()

    def leaves(self):
        return [node for node in self.walk() if node.is_leaf]


def child_size_bound(m: int) -> int:
    """Guaranteed balance bound: each side keeps at most this many vertices."""
    return -((-2 * (m - 1)) // 3) + 1  # ceil(2(m-1)/3) + 1


def balanced_decomposition(polygon: Polygon) -> DecompositionNode:
    """Recursively split the polygon by triangulation diagonals.

    At each node the diagonal minimizing the larger side is chosen among
    the diagonals of an ear-clip triangulation, which guarantees the
    classic ceil(2(m'-1)/3)+1 balance bound and O(log m) depth.
    """
    pts = polygon.vertices

    def build(ring, depth):
        n = len(ring)
        if n == 3:
            return DecompositionNode(tuple(ring), None, None, None, depth)
        tris = triangulate_ring(pts, ring)
        pos = {v: k for k, v in enumerate(ring)}
        best = None
        for d in _diagonals_of_ring(tris, ring, pos):
            p, q = sorted((pos[d[0]], pos[d[1]]))
            s1 = q - p + 1
            s2 = n - (q - p) + 1
            worst = max(s1, s2)
            if best is None or worst < best[0]:
                best = (worst, p, q)
        worst, p, q = best
        bound = child_size_bound(n)
        if worst > bound:
            raise GeoNNError(
                f"decomposition balance violated: {worst} > {bound} for n={n}"
            )
        ring_a = ring[p : q + 1]
        ring_b = ring[q:] + ring[: p + 1]
        left = build(ring_a, depth + 1)
        right = build(ring_b, depth + 1)
        return DecompositionNode(
            tuple(ring), Diagonal(ring[p], ring[q]), left, right, depth
        )

    return build(list(range(polygon.m)), 0)


def _diagonals_of_ring(triangles, ring, pos):
    n = len(ring)
    seen = set()
    out = []
    for t in triangles:
        for u, v in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            if (pos[u] - pos[v]) % n in (1, n - 1):
                continue
            key = (min(u, v), max(u, v))
            if key not in seen:
                seen.add(key)
                out.append(key)
    return out


def polygon_from_json_dict(data: dict) -> Polygon:
    """Parse the ``{"vertices": [[x, y], ...]}`` wire format."""
    try:
        verts = data["vertices"]
    except (KeyError, TypeError):
        raise GeoNNError('polygon JSON must be {"vertices": [[x, y], ...]}')
    return validate_polygon(verts)


def split_polygon(polygon: Polygon, diag: Diagonal) -> tuple:
    """Split by a diagonal into the two CCW sub-rings (index lists).

    Returns ``(side_a, side_b)`` where side_a walks ``diag.a .. diag.b`` and
    side_b walks ``diag.b .. diag.a`` along the polygon's CCW order.
    """
    m = polygon.m
    a, b = diag.a % m, diag.b % m
    side_a = []
    i = a
    while True:
        side_a.append(i)
        if i == b:
            break
        i = (i + 1) % m
    side_b = []
    i = b
    while True:
        side_b.append(i)
        if i == a:
            break
        i = (i + 1) % m
    if len(side_a) < 3 or len(side_b) < 3:
        raise GeoNNError("diagonal endpoints are adjacent")
    return side_a, side_b


class DiagonalFrame:
    """Normalized coordinates for a diagonal: d vertical, a designated
    sub-polygon (P_r) locally to the right of it.

    The frame's y axis runs along the diagonal from its bottom endpoint to
    its top endpoint; x measures signed offset with P_r's interior at
    positive x near the diagonal.  The bottom/top naming matches the
    orientation convention used for site ordering along the diagonal.
    """

    def __init__(self, polygon: Polygon, diag: Diagonal, right_ring):
        self.polygon = polygon
        self.diag = diag
        self.right_ring = list(right_ring)
        pair = {diag.a % polygon.m, diag.b % polygon.m}
        n = len(self.right_ring)
        top_idx = bottom_idx = None
        for i in range(n):
            u, v = self.right_ring[i], self.right_ring[(i + 1) % n]
            if {u, v} == pair:
                top_idx, bottom_idx = u, v
                break
        if top_idx is None:
            raise GeoNNError("diagonal is not an edge of the given ring")
        self.top_idx = top_idx
        self.bottom_idx = bottom_idx
        self.top = polygon.vertices[top_idx]
        self.bottom = polygon.vertices[bottom_idx]
        dx = self.top.x - self.bottom.x
        dy = self.top.y - self.bottom.y
        self.length = math.hypot(dx, dy)
        self.uy = (dx / self.length, dy / self.length)
        self.ux = (self.uy[1], -self.uy[0])
        # Rotate the ring to start at the bottom endpoint; the walk then
        # follows the outer boundary from bottom to top.
        k = self.right_ring.index(bottom_idx)
        self.right_ring = self.right_ring[k:] + self.right_ring[:k]
        self._right_pts = [polygon.vertices[i] for i in self.right_ring]
        self.outer_params = [0.0]
        for i in range(1, n):
            p, q = self._right_pts[i - 1], self._right_pts[i]
            self.outer_params.append(
                self.outer_params[-1] + math.hypot(q.x - p.x, q.y - p.y)
            )

    @classmethod
    def for_sites(cls, polygon: Polygon, diag: Diagonal, site) -> "DiagonalFrame":
        """Frame whose P_r is the side *not* containing the given site."""
        side_a, side_b = split_polygon(polygon, diag)
        pts_a = [polygon.vertices[i] for i in side_a]
        if point_in_polygon(pts_a, site) > 0:
            return cls(polygon, diag, side_b)
        return cls(polygon, diag, side_a)

    def to_frame(self, p) -> Point:
        dx = p[0] - self.bottom.x
        dy = p[1] - self.bottom.y
        return Point(dx * self.ux[0] + dy * self.ux[1], dx * self.uy[0] + dy * self.uy[1])

    def from_frame(self, q) -> Point:
        return Point(
            self.bottom.x + q[0] * self.ux[0] + q[1] * self.uy[0],
            self.bottom.y + q[0] * self.ux[1] + q[1] * self.uy[1],
        )

    def x_of(self, p) -> float:
        return (p[0] - self.bottom.x) * self.ux[0] + (p[1] - self.bottom.y) * self.ux[1]

    def lam_of(self, p) -> float:
        """Parameter in [0, 1] along d (0 at bottom, 1 at top) of a point on d."""
        return (
            (p[0] - self.bottom.x) * self.uy[0] + (p[1] - self.bottom.y) * self.uy[1]
        ) / self.length

    def point_on_d(self, lam: float) -> Point:
        return Point(
            self.bottom.x + lam * self.length * self.uy[0],
            self.bottom.y + lam * self.length * self.uy[1],
        )

    def classify_right(self, p) -> int:
        """+1 strictly inside P_r, 0 on its boundary, -1 outside."""
        return point_in_polygon(self._right_pts, p)

    def right_points(self):
        return self._right_pts

    def outer_boundary(self):
        """P_r outer-boundary vertices from bottom to top (inclusive)."""
        return self._right_pts

    def boundary_param(self, p, edge_hint: Optional[int] = None) -> float:
        """Arc-length position of a point on the outer boundary of P_r."""
        pts = self._right_pts
        n = len(pts)
        rng = [edge_hint] if edge_hint is not None else range(n - 1)
        for i in rng:
            a, b = pts[i], pts[i + 1]
            if on_segment(a, b, p) or (
                abs((b.x - a.x) * (p[1] - a.y) - (b.y - a.y) * (p[0] - a.x)) < 1e-9
                and min(a.x, b.x) - 1e-9 <= p[0] <= max(a.x, b.x) + 1e-9
                and min(a.y, b.y) - 1e-9 <= p[1] <= max(a.y, b.y) + 1e-9
            ):
                return self.outer_params[i] + math.hypot(p[0] - a.x, p[1] - a.y)
        raise GeoNNError("point is not on the outer boundary of P_r")
