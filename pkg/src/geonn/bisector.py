"""Compact representation of the part of a two-site bisector that lies in
the sub-polygon across a diagonal.

A bisector restricted to P_r runs from its crossing w with the diagonal to
its exit z through the outer boundary.  Its internal vertices are exactly
the crossings with suffixes of the two extension-segment fans of the
pseudo-triangle spanned by z and the sites, which is what makes indexed
vertex access possible without ever materializing the O(m) arcs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .errors import (
    GeneralPositionViolation,
    GeoNNError,
    IndexOutOfRange,
)
from .geometry import (
    DEFAULT_TOLERANCES,
    DiagonalFrame,
    Diagonal,
    Point,
    Polygon,
    ToleranceConfig,
    segment_intersection_point,
)
from .paths import (
    ExtensionSegment,
    Funnel,
    PathEngine,
    PseudoTriangle,
    solve_equidistant_on_segment,
)


@dataclass(frozen=True)
class BisectorVertex:
    index: int
    point: Point
    segment: ExtensionSegment


def side_of(engine: PathEngine, s, t, q, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> int:
    """-1 if q is geodesically closer to s, +1 if closer to t, 0 on a tie."""
    ds = engine.distance(s, q)
    dt = engine.distance(t, q)
    if abs(ds - dt) <= tol.eps_dist * (1.0 + ds):
        return 0
    return -1 if ds < dt else 1


class DiagonalContext:
    """Engine plus normalized frame for one diagonal; builds bisectors of
    site pairs that live on the P_l side."""

    def __init__(self, engine: PathEngine, frame: DiagonalFrame,
                 tol: ToleranceConfig = DEFAULT_TOLERANCES):
        self.engine = engine
        self.frame = frame
        self.tol = tol
        self._funnels = {}
        self._right_set = frozenset(frame.right_points())

    @classmethod
    def for_sites(cls, engine: PathEngine, diag: Diagonal, site,
                  tol: ToleranceConfig = DEFAULT_TOLERANCES) -> "DiagonalContext":
        return cls(engine, DiagonalFrame.for_sites(engine.polygon, diag, site), tol)

    # -- basic measurements ------------------------------------------------

    def dist_to_bottom(self, site) -> float:
        return self.engine.distance_to_vertex(site, self.frame.bottom_idx)

    def dist_to_top(self, site) -> float:
        return self.engine.distance_to_vertex(site, self.frame.top_idx)

    def funnel(self, site) -> Funnel:
        key = (site[0], site[1])
        fun = self._funnels.get(key)
        if fun is None:
            fun = self.engine.funnel_to_segment(site, self.frame.bottom, self.frame.top)
            self._funnels[key] = fun
        return fun

    # -- w and z -----------------------------------------------------------

    def find_w(self, s, t) -> Optional[Point]:
        """Unique crossing of the bisector of s and t with the diagonal, or
        None when one site dominates the whole diagonal."""
        fs, ft = self.funnel(s), self.funnel(t)
        lam = self._crossing_on_funnels(fs, ft)
        if lam is None:
            return None
        if lam < self.tol.eps_param or lam > 1.0 - self.tol.eps_param:
            # Touching an endpoint of d is degenerate; treat as absent.
            return None
        return self.frame.point_on_d(lam)

    def _crossing_on_funnels(self, fs: Funnel, ft: Funnel) -> Optional[float]:
        def g(lam):
            return fs.distance_at(lam) - ft.distance_at(lam)

        g0, g1 = g(0.0), g(1.0)
        scale = 1.0 + max(fs.distance_at(0.0), ft.distance_at(0.0))
        if abs(g0) <= self.tol.eps_dist * scale or abs(g1) <= self.tol.eps_dist * scale:
            raise GeneralPositionViolation(
                "sites are equidistant from a segment endpoint"
            )
        if (g0 < 0) == (g1 < 0):
            return None
        lams = sorted(set(fs.breakpoints()) | set(ft.breakpoints()))
        lams = [l for l in lams if 0.0 < l < 1.0]
        # One sign flip overall, so 'same sign as at 0' is monotone.
        lo_lam, hi_lam = 0.0, 1.0
        lo, hi = 0, len(lams) - 1
        sign0 = g0 < 0
        while lo <= hi:
            mid = (lo + hi) // 2
            if (g(lams[mid]) < 0) == sign0:
                lo_lam = lams[mid]
                lo = mid + 1
            else:
                hi_lam = lams[mid]
                hi = mid - 1
        root_s, c_s = fs.root_at(0.5 * (lo_lam + hi_lam))
        root_t, c_t = ft.root_at(0.5 * (lo_lam + hi_lam))
        lam = solve_equidistant_on_segment(
            fs.seg_a, fs.seg_b, lo_lam, hi_lam, root_s, c_s, root_t, c_t
        )
        if lam is None:
            raise GeoNNError("funnel crossing localization failed")
        return lam

    def find_z(self, s, t, w) -> Point:
        """Exit of the bisector through the outer boundary of P_r.

        Walking the outer boundary from the bottom endpoint, vertices are
        first closer to the bottom site, then closer to the top one; z lies
        on the flip edge.
        """
        ring = self.frame.right_ring
        pts = self.engine.pts
        ds, _ = self.engine.vertex_tables(s)
        dt, _ = self.engine.vertex_tables(t)

        def g(i):
            idx = ring[i]
            val = ds[idx] - dt[idx]
            if abs(val) <= self.tol.eps_dist * (1.0 + ds[idx]):
                raise GeneralPositionViolation(
                    f"sites equidistant from polygon vertex {idx}"
                )
            return val

        n = len(ring)
        if not (g(0) < 0 and g(n - 1) > 0):
            raise GeoNNError("bisector does not separate the diagonal endpoints")
        lo, hi = 0, n - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if g(mid) < 0:
                lo = mid
            else:
                hi = mid
        a_pt, b_pt = pts[ring[lo]], pts[ring[hi]]
        fs = self.engine.funnel_to_segment(s, a_pt, b_pt)
        ft = self.engine.funnel_to_segment(t, a_pt, b_pt)
        lam = self._crossing_on_funnels(fs, ft)
        if lam is None:
            raise GeoNNError("no crossing found on the boundary flip edge")
        return Point(
            a_pt.x + lam * (b_pt.x - a_pt.x), a_pt.y + lam * (b_pt.y - a_pt.y)
        )

    # -- full representation -------------------------------------------------

    def build_bisector(self, s, t) -> Optional["BisectorRep"]:
        """Representation of the bisector of s and t restricted to P_r, or
        None when it does not enter P_r.  The site closer to the diagonal's
        bottom endpoint takes the s role."""
        s, t = Point(*s), Point(*t)
        dsb, dtb = self.dist_to_bottom(s), self.dist_to_bottom(t)
        if abs(dsb - dtb) <= self.tol.eps_dist * (1.0 + dsb):
            raise GeneralPositionViolation("sites equidistant from the bottom endpoint")
        if dsb > dtb:
            s, t = t, s
        w = self.find_w(s, t)
        if w is None:
            return None
        z = self.find_z(s, t, w)
        pt = self.engine.pseudo_triangle(z, s, t)
        rep = BisectorRep(self, s, t, w, z, pt)
        rep._compute_suffixes()
        return rep


class BisectorRep:
    """Bisector of (s, t) clipped to P_r, with indexed vertex access.

    ``a_s`` / ``a_t`` are the start indices of the crossing suffixes of the
    two extension fans; vertex_count = g' + h' is the number of internal
    bisector vertices between w and z.
    """

    def __init__(self, ctx: DiagonalContext, s, t, w, z, pt: PseudoTriangle):
        self.ctx = ctx
        self.s = s
        self.t = t
        self.w = w
        self.z = z
        self.pt = pt
        self.a_s = None
        self.a_t = None
        self._vertices = {}
        self._lam_w = ctx.frame.lam_of(w)
        xw, xz = ctx.frame.x_of(w), ctx.frame.x_of(z)
        self._param_dir = 1.0 if xz >= xw else -1.0
        self._param_org = xw

    # -- parameters ---------------------------------------------------------

    def param(self, p) -> float:
        """Monotone position of a bisector point from w (0) toward z."""
        return (self.ctx.frame.x_of(p) - self._param_org) * self._param_dir

    @property
    def g_size(self) -> int:
        return len(self.pt.F_s_t) - self.a_s

    @property
    def h_size(self) -> int:
        return len(self.pt.F_t_s) - self.a_t

    @property
    def vertex_count(self) -> int:
        return self.g_size + self.h_size

    # -- suffix computation ---------------------------------------------------

    def _compute_suffixes(self):
        self.a_s = self._suffix_start(self.pt.F_s_t, source_is_bottom=True)
        self.a_t = self._suffix_start(self.pt.F_t_s, source_is_bottom=False)

    def _crosses_restricted(self, fan, i, source_is_bottom) -> bool:
        """Does fan segment i cross the bisector inside P_r?"""
        if fan.start_side(i) != -1:
            return False
        seg = fan[i]
        if not seg.valid:
            return False
        frame = self.ctx.frame
        hit = segment_intersection_point(
            seg.origin, seg.endpoint, frame.bottom, frame.top
        )
        origin_in_pr = seg.origin in self.ctx._right_set
        if hit is None:
            return origin_in_pr
        lam_y = frame.lam_of(hit)
        below = lam_y < self._lam_w
        sign_y = -1 if (below == source_is_bottom) else 1
        if origin_in_pr:
            return sign_y == 1  # piece origin..hit: starts self-side
        return sign_y == -1  # piece hit..endpoint: ends other-side

    def _suffix_start(self, fan, source_is_bottom) -> int:
        n = len(fan)
        # First index whose origin is strictly closer to the fan's source
        # (the binary search along the shared geodesic).
        lo, hi, first_self = 0, n - 1, n
        while lo <= hi:
            mid = (lo + hi) // 2
            if fan.start_side(mid) == -1:
                first_self = mid
                hi = mid - 1
            else:
                lo = mid + 1
        # Then the first of those whose crossing happens inside P_r.
        lo, hi, ans = first_self, n - 1, n
        while lo <= hi:
            mid = (lo + hi) // 2
            if self._crosses_restricted(fan, mid, source_is_bottom):
                ans = mid
                hi = mid - 1
            else:
                lo = mid + 1
        return ans

    # -- vertex access ---------------------------------------------------------

    def vertex(self, i: int) -> BisectorVertex:
        """i-th internal vertex from w (1-based), per the fan counting rule."""
        if not 1 <= i <= self.vertex_count:
            raise IndexOutOfRange(f"bisector vertex {i} of {self.vertex_count}")
        got = self._vertices.get(i)
        if got is not None:
            return got
        v = self._locate_vertex(i)
        self._vertices[i] = v
        return v

    def _g_segment(self, k: int) -> ExtensionSegment:
        return self.pt.F_s_t[self.a_s + k - 1]

    def _h_segment(self, k: int) -> ExtensionSegment:
        return self.pt.F_t_s[self.a_t + k - 1]

    def _count_opposing_before(self, seg: ExtensionSegment, opposing, opp_site) -> int:
        """Number of opposing-suffix segments crossing ``seg`` at a point
        strictly closer to seg's own source than to ``opp_site``."""
        count = 0
        for f in opposing:
            if not f.valid:
                continue
            x = segment_intersection_point(seg.origin, seg.endpoint, f.origin, f.endpoint)
            if x is None:
                continue
            d_own = seg.source_distance_at(x)
            d_opp = f.source_distance_at(x)
            if d_own < d_opp:
                count += 1
        return count

    def _rank_g(self, k: int) -> int:
        seg = self._g_segment(k)
        opposing = [self._h_segment(j) for j in range(1, self.h_size + 1)]
        return k + self._count_opposing_before(seg, opposing, self.t)

    def _rank_h(self, k: int) -> int:
        seg = self._h_segment(k)
        opposing = [self._g_segment(j) for j in range(1, self.g_size + 1)]
        return k + self._count_opposing_before(seg, opposing, self.s)

    def _locate_vertex(self, i: int) -> BisectorVertex:
        lo, hi = 1, self.g_size
        while lo <= hi:
            mid = (lo + hi) // 2
            r = self._rank_g(mid)
            if r == i:
                seg = self._g_segment(mid)
                return BisectorVertex(i, self._solve_on_segment(seg, self.t), seg)
            if r < i:
                lo = mid + 1
            else:
                hi = mid - 1
        lo, hi = 1, self.h_size
        while lo <= hi:
            mid = (lo + hi) // 2
            r = self._rank_h(mid)
            if r == i:
                seg = self._h_segment(mid)
                return BisectorVertex(i, self._solve_on_segment(seg, self.s), seg)
            if r < i:
                lo = mid + 1
            else:
                hi = mid - 1
        raise GeoNNError("inconsistent bisector vertex ranks")

    def _solve_on_segment(self, seg: ExtensionSegment, other) -> Point:
        """Equidistant point on an extension segment: closed form on the
        segment's own side, localized root for the other site."""
        engine = self.ctx.engine

        def h(tau):
            p = seg.point_at(tau)
            return seg.source_distance_at(p) - engine.distance(other, p)

        lo, hi = 0.0, 1.0
        hlo = h(lo)
        for _ in range(30):
            mid = 0.5 * (lo + hi)
            hm = h(mid)
            if hm == 0.0:
                lo = hi = mid
                break
            if (hlo < 0) == (hm < 0):
                lo, hlo = mid, hm
            else:
                hi = mid
        probe = seg.point_at(0.5 * (lo + hi))
        path = engine.shortest_path(other, probe)
        if path.vertex_count >= 2:
            root = path.vertices[-2]
            c_other = path.length - math.hypot(probe.x - root.x, probe.y - root.y)
        else:
            root, c_other = Point(*other), 0.0
        lam = solve_equidistant_on_segment(
            seg.origin, seg.endpoint, 0.0, 1.0,
            seg.origin, seg.c_origin, root, c_other,
        )
        if lam is None:
            lam = 0.5 * (lo + hi)
        return seg.point_at(lam)

    # -- related-bisector intersection -----------------------------------------

    def point_at_index(self, i: int) -> Point:
        """Vertex i with w and z as indices 0 and vertex_count + 1."""
        if i == 0:
            return self.w
        if i == self.vertex_count + 1:
            return self.z
        return self.vertex(i).point

    def arc_range_of_point(self, p) -> int:
        """Index of the arc (edge) containing a point of this bisector:
        arc k joins vertex k and vertex k+1."""
        target = self.param(p)
        lo, hi = 0, self.vertex_count
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.param(self.point_at_index(mid)) <= target:
                lo = mid
            else:
                hi = mid - 1
        return lo


def intersect_related(b1: BisectorRep, b2: BisectorRep,
                      tol: ToleranceConfig = DEFAULT_TOLERANCES):
    """Intersection of two bisectors sharing a site, restricted to P_r.

    Returns (point, arc index in b1, arc index in b2) or None.  The search
    walks b1's vertices for the sign flip of the shared-versus-third-site
    distance, then solves the three-way equidistance on the localized arc.
    """
    shared = {b1.s, b1.t} & {b2.s, b2.t}
    if len(shared) != 1:
        raise GeoNNError("bisectors must share exactly one site")
    t_shared = shared.pop()
    s_site = b1.s if b1.t == t_shared else b1.t
    u_site = b2.s if b2.t == t_shared else b2.t
    engine = b1.ctx.engine

    def g(p):
        return engine.distance(t_shared, p) - engine.distance(u_site, p)

    n = b1.vertex_count
    g_lo = g(b1.point_at_index(0))
    g_hi = g(b1.point_at_index(n + 1))
    if (g_lo < 0) == (g_hi < 0):
        return None
    lo, hi = 0, n + 1
    sign_lo = g_lo < 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if (g(b1.point_at_index(mid)) < 0) == sign_lo:
            lo = mid
        else:
            hi = mid
    p_lo = b1.point_at_index(lo)
    p_hi = b1.point_at_index(hi)
    guess = Point(0.5 * (p_lo.x + p_hi.x), 0.5 * (p_lo.y + p_hi.y))
    point = _equidistant_three(engine, s_site, t_shared, u_site, guess, tol)
    if point is not None:
        # Accept only if it landed on the localized stretch of b1.
        par = b1.param(point)
        span = abs(b1.param(p_hi) - b1.param(p_lo)) + 1e-9
        if not (b1.param(p_lo) - 0.01 * span - 1e-9 <= par <= b1.param(p_hi) + 0.01 * span + 1e-9):
            point = None
    if point is None:
        point = _bisect_arc_crossing(engine, b1, lo, hi, t_shared, u_site, tol)
    if point is None:
        raise GeoNNError("failed to localize related-bisector intersection")
    return point, lo, b2.arc_range_of_point(point)


def _equidistant_three(engine: PathEngine, s, t, u, guess, tol, iters: int = 12):
    """Point equidistant from three sites via root unfolding plus the
    closed-form weighted circumcenter, iterated until the roots settle."""
    from .errors import PointOutsidePolygon

    pt = Point(*guess)
    last = None
    for _ in range(iters):
        roots = []
        try:
            for site in (s, t, u):
                path = engine.shortest_path(site, pt)
                if path.vertex_count >= 2:
                    r = path.vertices[-2]
                    c = path.length - math.hypot(pt.x - r.x, pt.y - r.y)
                else:
                    r, c = Point(*site), 0.0
                roots.append((r, c))
        except PointOutsidePolygon:
            return None
        nxt = _weighted_circumcenter(roots)
        if nxt is None:
            return None
        if last is not None and math.hypot(nxt.x - pt.x, nxt.y - pt.y) < 1e-14:
            pt = nxt
            break
        last = pt
        pt = nxt
    ds = engine.distance(s, pt)
    dt = engine.distance(t, pt)
    du = engine.distance(u, pt)
    scale = 1.0 + ds
    if abs(ds - dt) <= 1e-7 * scale and abs(dt - du) <= 1e-7 * scale:
        return pt
    return None


def _weighted_circumcenter(roots):
    """Solve |x-p1| + c1 = |x-p2| + c2 = |x-p3| + c3 in closed form."""
    (p1, c1), (p2, c2), (p3, c3) = roots
    d1 = c2 - c1
    d3 = c2 - c3
    a11 = -2.0 * (p1[0] - p2[0])
    a12 = -2.0 * (p1[1] - p2[1])
    a21 = -2.0 * (p3[0] - p2[0])
    a22 = -2.0 * (p3[1] - p2[1])
    det = a11 * a22 - a12 * a21
    if abs(det) < 1e-14:
        return None
    k1 = 2.0 * d1
    k2 = 2.0 * d3
    b1c = d1 * d1 - (p1[0] ** 2 + p1[1] ** 2) + (p2[0] ** 2 + p2[1] ** 2)
    b2c = d3 * d3 - (p3[0] ** 2 + p3[1] ** 2) + (p2[0] ** 2 + p2[1] ** 2)
    # x(rho) = x0 + rho * x1
    x0 = ((b1c * a22 - b2c * a12) / det, (a11 * b2c - a21 * b1c) / det)
    x1 = ((k1 * a22 - k2 * a12) / det, (a11 * k2 - a21 * k1) / det)
    qa = x1[0] * x1[0] + x1[1] * x1[1] - 1.0
    dx = x0[0] - p2[0]
    dy = x0[1] - p2[1]
    qb = 2.0 * (dx * x1[0] + dy * x1[1])
    qc = dx * dx + dy * dy
    best = None
    if abs(qa) < 1e-14:
        if qb != 0.0:
            cand = [-qc / qb]
        else:
            cand = []
    else:
        disc = qb * qb - 4.0 * qa * qc
        if disc < 0.0:
            return None
        rt = math.sqrt(disc)
        cand = [(-qb + rt) / (2.0 * qa), (-qb - rt) / (2.0 * qa)]
    for rho in cand:
        if rho < max(0.0, -d1, -d3) - 1e-12:
            continue
        x = Point(x0[0] + rho * x1[0], x0[1] + rho * x1[1])
        err = abs(math.hypot(x.x - p2[0], x.y - p2[1]) - rho)
        if best is None or err < best[0]:
            best = (err, x)
    return best[1] if best else None


def _bisect_arc_crossing(engine, b1: BisectorRep, lo, hi, t_shared, u_site, tol):
    """Fallback: bisect on the bisector's monotone parameter, materializing
    each probe point by a vertical-chord solve inside P_r."""
    p_lo = b1.point_at_index(lo)
    p_hi = b1.point_at_index(hi)

    def g(p):
        return engine.distance(t_shared, p) - engine.distance(u_site, p)

    a, ga = p_lo, g(p_lo)
    b = p_hi
    for _ in range(70):
        xc = 0.5 * (b1.ctx.frame.x_of(a) + b1.ctx.frame.x_of(b))
        pt = _point_on_bisector_at_x(engine, b1, xc)
        if pt is None:
            # Chord degenerate; fall back to the chord midpoint of the
            # current bracket.
            pt = Point(0.5 * (a.x + b.x), 0.5 * (a.y + b.y))
            if b1.ctx.frame.classify_right(pt) < 0:
                return None
        gm = g(pt)
        if gm == 0.0 or math.hypot(b.x - a.x, b.y - a.y) < 1e-13:
            return pt
        if (gm < 0) == (ga < 0):
            a, ga = pt, gm
        else:
            b = pt
    return pt


def _point_on_bisector_at_x(engine, b1: BisectorRep, xc):
    """The unique point of the restricted bisector on the frame-vertical
    line x = xc (the restriction is x-monotone), or None."""
    frame = b1.ctx.frame
    right = frame.right_points()
    n = len(right)
    ys = []
    fr = [frame.to_frame(p) for p in right]
    for i in range(n):
        a, b = fr[i], fr[(i + 1) % n]
        if (a.x - xc) * (b.x - xc) < 0:
            tpar = (xc - a.x) / (b.x - a.x)
            ys.append(a.y + tpar * (b.y - a.y))
        elif a.x == xc:
            ys.append(a.y)
    ys.sort()
    from .geometry import point_in_polygon

    for k in range(len(ys) - 1):
        y0, y1 = ys[k], ys[k + 1]
        if y1 - y0 < 1e-12:
            continue
        mid = frame.from_frame((xc, 0.5 * (y0 + y1)))
        if point_in_polygon(right, mid) <= 0:
            continue
        A = frame.from_frame((xc, y0 + 1e-12))
        B = frame.from_frame((xc, y1 - 1e-12))
        try:
            ga = engine.distance(b1.s, A) - engine.distance(b1.t, A)
            gb = engine.distance(b1.s, B) - engine.distance(b1.t, B)
        except Exception:
            continue
        if (ga < 0) == (gb < 0):
            continue
        lo, hi = 0.0, 1.0
        for _ in range(60):
            lam = 0.5 * (lo + hi)
            q = Point(A.x + lam * (B.x - A.x), A.y + lam * (B.y - A.y))
            gq = engine.distance(b1.s, q) - engine.distance(b1.t, q)
            if gq == 0.0:
                return q
            if (gq < 0) == (ga < 0):
                lo = lam
            else:
                hi = lam
        lam = 0.5 * (lo + hi)
        return Point(A.x + lam * (B.x - A.x), A.y + lam * (B.y - A.y))
    return None
