"""Topological Voronoi forest that a one-sided site group induces in the
sub-polygon across a diagonal.

Construction is incremental in the order the regions meet the diagonal,
which is also the order of increasing distance to its bottom endpoint.
Each insertion walks the new region's boundary across the existing
diagram, excising everything the new site captures.  Only degree-1 and
degree-3 nodes are materialized; edges keep handles to their bisector
representations and are never expanded into arc lists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .bisector import BisectorRep, DiagonalContext, _equidistant_three, intersect_related
from .errors import GeneralPositionViolation, GeoNNError, Tie
from .geometry import DEFAULT_TOLERANCES, Point

LEAF_D = "leaf-on-d"
LEAF_BOUNDARY = "leaf-on-boundary"
TRIPLE = "triple"


@dataclass
class DiagonalOrder:
    """Active sites bottom-to-top along the diagonal with their separators."""

    sites: list
    breakpoints: list


class ForestNode:
    __slots__ = ("point", "kind", "sites", "rho", "edges", "nid")

    def __init__(self, point, kind, sites, rho, nid):
        self.point = point
        self.kind = kind
        self.sites = tuple(sites)
        self.rho = rho
        self.edges = []
        self.nid = nid

    def degree(self):
        return len(self.edges)

    def __repr__(self):
        return f"ForestNode({self.kind}, sites={self.sites}, p={tuple(self.point)})"


class ForestEdge:
    """A maximal piece of one bisector between two forest nodes."""

    __slots__ = ("a_id", "b_id", "a_pt", "b_pt", "n1", "n2", "_rep", "ctx")

    def __init__(self, ctx, a_id, a_pt, b_id, b_pt, n1, n2):
        self.ctx = ctx
        self.a_id = a_id
        self.b_id = b_id
        self.a_pt = a_pt
        self.b_pt = b_pt
        self.n1 = n1
        self.n2 = n2
        self._rep = None

    @property
    def pair(self):
        return (self.a_id, self.b_id)

    def other(self, node):
        return self.n2 if node is self.n1 else self.n1

    def replace(self, old, new):
        if self.n1 is old:
            self.n1 = new
        elif self.n2 is old:
            self.n2 = new
        else:
            raise GeoNNError("node is not an endpoint of this edge")

    @property
    def bisector(self) -> BisectorRep:
        """Bisector representation handle (built on first use)."""
        if self._rep is None:
            self._rep = self.ctx.build_bisector(self.a_pt, self.b_pt)
            if self._rep is None:
                raise GeoNNError("forest edge bisector does not reach P_r")
        return self._rep

    def arc_range(self):
        """Sub-range of bisector arcs this edge spans (arc indices)."""
        rep = self.bisector
        return (
            rep.arc_range_of_point(self.n1.point),
            rep.arc_range_of_point(self.n2.point),
        )


def extract_active_sites(ctx: DiagonalContext, ordered_sites) -> DiagonalOrder:
    """Sites whose Voronoi regions meet the diagonal, bottom to top.

    ``ordered_sites`` must come sorted by increasing geodesic distance to
    the diagonal's bottom endpoint.  Runs the stack procedure: a new site
    either fails to reach the diagonal's top endpoint sooner than the
    current top of the stack, or pushes, popping every region it covers.
    """
    frame = ctx.frame
    tol = ctx.tol
    stack = []
    bps = []
    bp_lams = []
    for sid, p in ordered_sites:
        if not stack:
            stack.append((sid, p))
            continue
        tid, tpt = stack[-1]
        d_new = ctx.dist_to_top(p)
        d_top = ctx.dist_to_top(tpt)
        if abs(d_new - d_top) <= tol.eps_dist * (1.0 + d_top):
            raise GeneralPositionViolation(
                "sites equidistant from the top endpoint of d"
            )
        if d_new > d_top:
            continue  # never reaches d
        while True:
            tid, tpt = stack[-1]
            a = ctx.find_w(tpt, p)
            if a is None:
                raise GeoNNError("expected a diagonal crossing during extraction")
            a_lam = frame.lam_of(a)
            if len(stack) == 1 or a_lam > bp_lams[-1]:
                stack.append((sid, p))
                bps.append(a)
                bp_lams.append(a_lam)
                break
            stack.pop()
            bps.pop()
            bp_lams.pop()
    return DiagonalOrder(sites=[sid for sid, _ in stack], breakpoints=bps)


class VoronoiForest:
    """Immutable after construction; locate() may run concurrently."""

    def __init__(self, ctx: DiagonalContext, site_points: dict, order: DiagonalOrder,
                 nodes, edges, bp_nodes):
        self.ctx = ctx
        self.site_points = dict(site_points)
        self.order = order
        self.nodes = nodes
        self.edges = edges
        self.bp_nodes = bp_nodes
        self._chains = None
        self._index = {sid: k for k, sid in enumerate(order.sites)}

    # -- combinatorics ----------------------------------------------------

    def tree_count(self) -> int:
        seen = set()
        count = 0
        for n in self.nodes:
            if id(n) in seen:
                continue
            count += 1
            stack = [n]
            seen.add(id(n))
            while stack:
                cur = stack.pop()
                for e in cur.edges:
                    nxt = e.other(cur)
                    if id(nxt) not in seen:
                        seen.add(id(nxt))
                        stack.append(nxt)
        return count

    def degree3_count(self) -> int:
        return sum(1 for n in self.nodes if n.kind == TRIPLE)

    def d_leaf_count(self) -> int:
        return sum(1 for n in self.nodes if n.kind == LEAF_D)

    def boundary_leaf_count(self) -> int:
        return sum(1 for n in self.nodes if n.kind == LEAF_BOUNDARY)

    def to_json_dict(self) -> dict:
        ids = {id(n): k for k, n in enumerate(self.nodes)}
        return {
            "nodes": [
                {"x": n.point.x, "y": n.point.y, "kind": n.kind, "sites": list(n.sites)}
                for n in self.nodes
            ],
            "edges": [
                [ids[id(e.n1)], ids[id(e.n2)], {"s": e.a_id, "t": e.b_id}]
                for e in self.edges
            ],
        }

    # -- point location -----------------------------------------------------

    def _build_chains(self):
        idx = self._index
        chains = []
        for i, leaf in enumerate(self.bp_nodes):
            edges = []
            node = leaf
            prev = None
            while node.kind != LEAF_BOUNDARY:
                nxt = None
                for e in node.edges:
                    if e is prev:
                        continue
                    a, b = idx[e.a_id], idx[e.b_id]
                    if min(a, b) <= i < max(a, b):
                        nxt = e
                        break
                if nxt is None:
                    raise GeoNNError("separator chain is broken")
                edges.append(nxt)
                node = nxt.other(node)
                prev = nxt
            root_par = self.ctx.frame.boundary_param(node.point)
            chains.append((edges, node, root_par))
        return chains

    @property
    def chains(self):
        if self._chains is None:
            self._chains = self._build_chains()
        return self._chains

    def _below_chain(self, i: int, q, memo) -> bool:
        """Is q in the component of sites with order index <= i?"""
        frame = self.ctx.frame
        edges, root, root_par = self.chains[i]
        xq = frame.x_of(q)
        xr = frame.x_of(root.point)
        direction = 1.0 if xr >= 0 else -1.0
        t = xq * direction
        span = xr * direction
        if -1e-12 <= t <= span + 1e-12:
            # Find the chain edge whose x-extent covers q's x; the chain is
            # x-monotone from the diagonal to its boundary root.
            for e in edges:
                x1 = frame.x_of(e.n1.point) * direction
                x2 = frame.x_of(e.n2.point) * direction
                if min(x1, x2) - 1e-12 <= t <= max(x1, x2) + 1e-12:
                    a, b = e.a_id, e.b_id
                    if self._index[a] > self._index[b]:
                        a, b = b, a
                    side = self._side(a, b, q, memo)
                    if side == 0:
                        raise Tie("query equidistant from adjacent regions")
                    return side < 0
        # The vertical line misses the chain entirely; classify by the
        # outer-boundary stretch straight below q.
        par = self._boundary_param_below(q)
        return par < root_par

    def _side(self, a_id, b_id, q, memo) -> int:
        engine = self.ctx.engine
        tol = self.ctx.tol
        da = memo.get(a_id)
        if da is None:
            da = engine.distance(self.site_points[a_id], q)
            memo[a_id] = da
        db = memo.get(b_id)
        if db is None:
            db = engine.distance(self.site_points[b_id], q)
            memo[b_id] = db
        if abs(da - db) <= tol.eps_dist * (1.0 + da):
            return 0
        return -1 if da < db else 1

    def _boundary_param_below(self, q):
        frame = self.ctx.frame
        fq = frame.to_frame(q)
        ring = frame.right_points()
        best = None
        for i in range(len(ring) - 1):
            a = frame.to_frame(ring[i])
            b = frame.to_frame(ring[i + 1])
            if (a.x - fq.x) * (b.x - fq.x) > 0:
                continue
            if a.x == b.x:
                continue
            tt = (fq.x - a.x) / (b.x - a.x)
            y = a.y + tt * (b.y - a.y)
            if y <= fq.y + 1e-12:
                seg_len = math.hypot(b.x - a.x, b.y - a.y)
                par = frame.outer_params[i] + tt * seg_len
                if best is None or y > best[0]:
                    best = (y, par)
        if best is None:
            raise GeoNNError("no boundary found below the query point")
        return best[1]

    def locate(self, q, memo: Optional[dict] = None):
        """Group site geodesically closest to q (q must lie in P_r)."""
        sites = self.order.sites
        if len(sites) == 1:
            return sites[0]
        if memo is None:
            memo = {}
        lo, hi, ans = 0, len(sites) - 2, len(sites) - 1
        while lo <= hi:
            mid = (lo + hi) // 2
            if self._below_chain(mid, q, memo):
                ans = mid
                hi = mid - 1
            else:
                lo = mid + 1
        return sites[ans]


def build_forest(ctx: DiagonalContext, sites) -> VoronoiForest:
    """Forest of the Voronoi diagram the given sites induce in P_r.

    ``sites`` is a sequence of (id, point) with every point strictly on the
    P_l side.  Sites are ordered by distance to the diagonal's bottom
    endpoint, the active subset is extracted, and regions are inserted in
    diagonal order, each insertion exploring and excising the part of the
    existing diagram the new site captures.
    """
    if not sites:
        raise GeoNNError("empty site group")
    engine = ctx.engine
    tol = ctx.tol
    ordered = sorted(sites, key=lambda sp: (ctx.dist_to_bottom(sp[1]), sp[0]))
    for (i1, p1), (i2, p2) in zip(ordered, ordered[1:]):
        d1, d2 = ctx.dist_to_bottom(p1), ctx.dist_to_bottom(p2)
        if abs(d1 - d2) <= tol.eps_dist * (1.0 + d1):
            raise GeneralPositionViolation(
                "two sites equidistant from the bottom endpoint of d"
            )
    order = extract_active_sites(ctx, ordered)
    site_points = dict(sites)

    nodes = []
    edges = []
    bp_nodes = []
    nid = [0]

    def new_node(point, kind, involved, rho):
        n = ForestNode(point, kind, involved, rho, nid[0])
        nid[0] += 1
        nodes.append(n)
        return n

    def link(a_id, b_id, n1, n2):
        e = ForestEdge(ctx, a_id, site_points[a_id], b_id, site_points[b_id], n1, n2)
        edges.append(e)
        n1.edges.append(e)
        n2.edges.append(e)
        return e

    inserted = []
    for step, sid in enumerate(order.sites):
        p_new = site_points[sid]
        if not inserted:
            inserted.append(sid)
            continue
        prev_id = inserted[-1]
        a_new = order.breakpoints[step - 1]
        rho_a = engine.distance(p_new, a_new)
        leaf = new_node(a_new, LEAF_D, (prev_id, sid), rho_a)

        dist_memo = {}

        def d_new(node):
            got = dist_memo.get(node.nid)
            if got is None:
                got = engine.distance(p_new, node.point)
                dist_memo[node.nid] = got
            return got

        def in_new_region(node):
            return d_new(node) < node.rho * (1.0 - 1e-12) - tol.eps_dist

        cur_id = prev_id
        prev_node = leaf
        entry_edge = None
        guard = 0
        while True:
            guard += 1
            if guard > len(edges) + len(order.sites) + 4:
                raise GeoNNError("insertion walk did not terminate")
            crossed = []
            for e in edges:
                if e is entry_edge or cur_id not in e.pair:
                    continue
                if in_new_region(e.n1) != in_new_region(e.n2):
                    crossed.append(e)
            if not crossed:
                cur_pt = site_points[cur_id]
                w_pair = a_new if cur_id == prev_id else ctx.find_w(cur_pt, p_new)
                z_pt = ctx.find_z(cur_pt, p_new, w_pair)
                rho_z = engine.distance(p_new, z_pt)
                root = new_node(z_pt, LEAF_BOUNDARY, (cur_id, sid), rho_z)
                link(cur_id, sid, prev_node, root)
                break
            if len(crossed) > 1:
                raise GeoNNError("new region boundary crossed a region twice")
            exit_edge = crossed[0]
            x_id = exit_edge.a_id if exit_edge.b_id == cur_id else exit_edge.b_id
            inside = exit_edge.n1 if in_new_region(exit_edge.n1) else exit_edge.n2
            outside = exit_edge.other(inside)
            c_pt = _triple_point(
                ctx, sid, cur_id, x_id, site_points, inside.point, outside.point,
                exit_edge,
            )
            rho_c = engine.distance(p_new, c_pt)
            tri = new_node(c_pt, TRIPLE, (sid, cur_id, x_id), rho_c)
            exit_edge.replace(inside, tri)
            tri.edges.append(exit_edge)
            inside.edges.remove(exit_edge)
            link(cur_id, sid, prev_node, tri)
            prev_node = tri
            entry_edge = exit_edge
            cur_id = x_id
        inserted.append(sid)

        # Excise everything strictly inside the new region.
        dead = [n for n in nodes if n.kind and n.sites and sid not in n.sites and in_new_region(n)]
        dead_ids = {n.nid for n in dead}
        if dead_ids:
            keep_edges = []
            for e in edges:
                k1 = e.n1.nid in dead_ids
                k2 = e.n2.nid in dead_ids
                if k1 and k2:
                    continue
                if k1 or k2:
                    raise GeoNNError("edge survived with one excised endpoint")
                keep_edges.append(e)
            edges = keep_edges
            nodes = [n for n in nodes if n.nid not in dead_ids]
            for n in nodes:
                n.edges = [e for e in n.edges if e.n1.nid not in dead_ids and e.n2.nid not in dead_ids]
        bp_nodes.append(leaf)

    bp_nodes = [n for n in bp_nodes if any(n is m for m in nodes)]
    forest = VoronoiForest(ctx, site_points, order, nodes, edges, bp_nodes)
    return forest


def _triple_point(ctx, new_id, cur_id, x_id, site_points, p_in, p_out, edge):
    """Point equidistant from the three sites, localized near the crossed
    edge; falls back to the full bisector intersection when the fast solve
    drifts off the edge."""
    engine = ctx.engine
    guess = Point(0.5 * (p_in.x + p_out.x), 0.5 * (p_in.y + p_out.y))
    pt = _equidistant_three(
        engine, site_points[new_id], site_points[cur_id], site_points[x_id], guess,
        ctx.tol,
    )
    if pt is not None and _between_ish(ctx, pt, p_in, p_out):
        return pt
    b1 = edge.bisector
    b2 = ctx.build_bisector(site_points[cur_id], site_points[new_id])
    if b2 is None:
        raise GeoNNError("walk bisector does not enter P_r")
    got = intersect_related(b1, b2, ctx.tol)
    if got is None:
        raise GeoNNError("expected bisector intersection during insertion")
    return got[0]


def _between_ish(ctx, pt, a, b):
    """Sanity check: pt roughly between a and b in the frame's x order."""
    xa, xb, xp = ctx.frame.x_of(a), ctx.frame.x_of(b), ctx.frame.x_of(pt)
    lo, hi = min(xa, xb), max(xa, xb)
    slack = 1e-7 * (abs(hi - lo) + 1.0)
    return lo - slack <= xp <= hi + slack
