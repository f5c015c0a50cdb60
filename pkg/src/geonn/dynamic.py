"""Dynamic geodesic nearest-neighbor searching over a balanced polygon
decomposition.

Every internal decomposition node splits its sub-polygon by a diagonal;
sites on each side are partitioned into groups whose Voronoi forests live
in the opposite side and answer queries coming from there.  Leaf triangles
fall back to Euclidean searching.  Three update regimes are supported:
fully dynamic (sqrt-size groups, rebuilt on every update), insertion-only
(power-of-two groups merged binary-counter style), and offline (a segment
tree over site lifetimes, built once from the full operation sequence).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .bisector import DiagonalContext
from .errors import (
    DuplicateId,
    EmptyStructure,
    GeneralPositionViolation,
    GeoNNError,
    MalformedTimeline,
    PointOnBoundary,
    PointOutsidePolygon,
    UnknownId,
    UnsupportedInMode,
)
from .forest import VoronoiForest, build_forest
from .geometry import (
    DEFAULT_TOLERANCES,
    DiagonalFrame,
    Point,
    Polygon,
    ToleranceConfig,
    balanced_decomposition,
    on_segment,
    point_in_polygon,
)
from .paths import PathEngine

MODES = ("dynamic", "insert-only", "offline")


@dataclass
class SiteRecord:
    sid: int
    location: Point
    groups: list = field(default_factory=list)
    leaf: Optional["_LeafState"] = None


class Group:
    __slots__ = ("ids", "forest", "capacity_class", "ctx")

    def __init__(self, ctx, ids, capacity_class=0):
        self.ctx = ctx
        self.ids = list(ids)
        self.forest: Optional[VoronoiForest] = None
        self.capacity_class = capacity_class

    def __len__(self):
        return len(self.ids)


class _LeafState:
    """Euclidean nearest neighbor inside one decomposition triangle,
    bucketed so each update rebuilds only one static structure."""

    def __init__(self, indices, mode):
        self.indices = indices
        self.mode = mode
        self.buckets = []  # (ids list, points list, tree)

    def _rebuild(self, bucket):
        ids, pts, _ = bucket
        tree = cKDTree(np.asarray(pts)) if pts else None
        return (ids, pts, tree)

    def insert(self, sid, pt, n_leaf):
        if self.mode == "insert-only":
            ids, pts = [sid], [pt]
            new = self._rebuild((ids, pts, None))
            self.buckets.append(new)
            # Binary-counter merge of equal-size buckets.
            while True:
                sizes = {}
                merged = False
                for i, b in enumerate(self.buckets):
                    k = len(b[0])
                    if k in sizes:
                        j = sizes[k]
                        a = self.buckets[j]
                        fused = (a[0] + b[0], a[1] + b[1], None)
                        self.buckets = [
                            x for idx, x in enumerate(self.buckets) if idx not in (i, j)
                        ]
                        self.buckets.append(self._rebuild(fused))
                        merged = True
                        break
                    sizes[k] = i
                if not merged:
                    break
            return
        cap = max(1, math.isqrt(max(n_leaf, 1)))
        best = None
        for i, b in enumerate(self.buckets):
            if len(b[0]) < cap and (best is None or len(b[0]) < len(self.buckets[best][0])):
                best = i
        if best is None:
            self.buckets.append(self._rebuild(([sid], [pt], None)))
        else:
            ids, pts, _ = self.buckets[best]
            self.buckets[best] = self._rebuild((ids + [sid], pts + [pt], None))

    def delete(self, sid):
        for i, (ids, pts, _) in enumerate(self.buckets):
            if sid in ids:
                k = ids.index(sid)
                ids = ids[:k] + ids[k + 1 :]
                pts = pts[:k] + pts[k + 1 :]
                if ids:
                    self.buckets[i] = self._rebuild((ids, pts, None))
                else:
                    del self.buckets[i]
                return
        raise UnknownId(f"site {sid} not in leaf bucket")

    def query(self, q):
        best = None
        evals = 0
        for ids, pts, tree in self.buckets:
            if tree is None:
                continue
            k = min(2, len(ids))
            dist, idx = tree.query([q[0], q[1]], k=k)
            evals += len(ids)
            if k == 1:
                cands = [(float(dist), ids[int(idx)])]
            else:
                cands = [(float(d), ids[int(i)]) for d, i in zip(dist, idx)]
            for d, sid in cands:
                if best is None or d < best[0] - 1e-15 or (abs(d - best[0]) <= 1e-12 * (1 + d) and sid < best[1]):
                    best = (d, sid)
        return best, evals

    def site_count(self):
        return sum(len(b[0]) for b in self.buckets)

    def all_ids(self):
        out = []
        for b in self.buckets:
            out.extend(b[0])
        return out


class _NodeState:
    """Per internal decomposition node: contexts and groups for both sides."""

    def __init__(self, node, polygon, engine, tol):
        self.node = node
        self.diag = node.diagonal
        self.pa = polygon.vertices[self.diag.a]
        self.pb = polygon.vertices[self.diag.b]
        left, right = node.left, node.right
        self.left_pts = [polygon.vertices[i] for i in left.indices]
        self.right_pts = [polygon.vertices[i] for i in right.indices]
        # Forests for sites in one side live in the opposite side.
        self.ctx_left = DiagonalContext(
            engine, DiagonalFrame(polygon, self.diag, right.indices), tol
        )
        self.ctx_right = DiagonalContext(
            engine, DiagonalFrame(polygon, self.diag, left.indices), tol
        )
        self.groups = {"L": [], "R": []}

    def side_of(self, p, strict: bool) -> str:
        if on_segment(self.pa, self.pb, p):
            if strict:
                raise GeneralPositionViolation(
                    f"site {tuple(p)} lies on a decomposition diagonal"
                )
            return "L"
        if point_in_polygon(self.left_pts, p) >= 0:
            return "L"
        return "R"

    def ctx_for(self, side: str) -> DiagonalContext:
        return self.ctx_left if side == "L" else self.ctx_right


class NNStructure:
    """Maintains point sites in a simple polygon under geodesic nearest
    neighbor queries.  Single writer; queries are read-only."""

    def __init__(self, polygon: Polygon, mode: str = "dynamic",
                 tolerances: ToleranceConfig = DEFAULT_TOLERANCES):
        if mode not in ("dynamic", "insert-only"):
            raise UnsupportedInMode(
                "use build_offline for the offline regime" if mode == "offline"
                else f"unknown mode {mode!r}"
            )
        self.polygon = polygon
        self.mode = mode
        self.tol = tolerances
        self.engine = PathEngine(polygon, tolerances)
        self.root = balanced_decomposition(polygon)
        self.states = {}
        for node in self.root.walk():
            if not node.is_leaf:
                self.states[id(node)] = _NodeState(node, polygon, self.engine, tolerances)
        self.leaves = {}
        for leaf in self.root.leaves():
            self.leaves[id(leaf)] = _LeafState(leaf.indices, mode)
        self.sites = {}
        self.n_ref = 1
        self.counters = {
            "distance_evals": 0,
            "euclid_evals": 0,
            "rebuild_sites": 0,
            "queries": 0,
            "updates": 0,
        }
        self.per_query_evals = []

    # -- helpers --------------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.sites)

    def _route(self, p, strict: bool):
        """(internal-node states with sides, leaf state) along p's path."""
        node = self.root
        out = []
        while not node.is_leaf:
            state = self.states[id(node)]
            side = state.side_of(p, strict)
            out.append((state, side))
            node = node.left if side == "L" else node.right
        return out, self.leaves[id(node)]

    def _group_target(self) -> int:
        return max(1, math.isqrt(max(self.n_ref, 1)))

    def _rebuild_group(self, state: _NodeState, side: str, group: Group):
        pts = [(sid, self.sites[sid].location) for sid in group.ids]
        group.forest = build_forest(state.ctx_for(side), pts) if pts else None
        self.counters["rebuild_sites"] += len(pts)

    # -- updates ---------------------------------------------------------------

    def insert(self, sid, location):
        if sid in self.sites:
            raise DuplicateId(f"site id {sid} is already live")
        p = Point(float(location[0]), float(location[1]))
        cls = self.polygon.classify(p)
        if cls < 0:
            raise PointOutsidePolygon(f"{tuple(p)} is outside the polygon")
        if cls == 0:
            raise PointOnBoundary(f"{tuple(p)} lies on the polygon boundary")
        record = SiteRecord(sid, p)
        path, leaf = self._route(p, strict=True)
        self.sites[sid] = record
        self.counters["updates"] += 1
        for state, side in path:
            if self.mode == "insert-only":
                self._insert_counter_group(state, side, sid)
            else:
                self._insert_dynamic_group(state, side, sid)
        leaf.insert(sid, p, n_leaf=leaf.site_count() + 1)
        record.leaf = leaf
        if self.mode == "dynamic" and not (self.n_ref / 2 <= self.n <= 2 * self.n_ref):
            self._regroup()

    def _insert_dynamic_group(self, state, side, sid):
        groups = state.groups[side]
        target = self._group_target()
        best = min(groups, key=len) if groups else None
        if best is None:
            best = Group(state.ctx_for(side), [])
            groups.append(best)
        best.ids.append(sid)
        if len(best) > 2 * target:
            half = len(best) // 2
            g1 = Group(state.ctx_for(side), best.ids[:half])
            g2 = Group(state.ctx_for(side), best.ids[half:])
            groups.remove(best)
            groups.extend([g1, g2])
            self._rebuild_group(state, side, g1)
            self._rebuild_group(state, side, g2)
        else:
            self._rebuild_group(state, side, best)
        self._fix_group_backrefs(state, side)

    def _fix_group_backrefs(self, state, side):
        groups = state.groups[side]
        member = {}
        for g in groups:
            for sid in g.ids:
                member[sid] = g
        for sid, g in member.items():
            rec = self.sites[sid]
            rec.groups = [
                (st, sd, gr) for st, sd, gr in rec.groups
                if not (st is state and sd == side)
            ]
            rec.groups.append((state, side, g))

    def _insert_counter_group(self, state, side, sid):
        groups = state.groups[side]
        groups.append(Group(state.ctx_for(side), [sid], capacity_class=0))
        by_class = {}
        while True:
            by_class.clear()
            merged = False
            for i, g in enumerate(groups):
                if g.capacity_class in by_class:
                    j = by_class[g.capacity_class]
                    fused = Group(
                        state.ctx_for(side),
                        groups[j].ids + g.ids,
                        capacity_class=g.capacity_class + 1,
                    )
                    del groups[max(i, j)]
                    del groups[min(i, j)]
                    groups.append(fused)
                    merged = True
                    break
                by_class[g.capacity_class] = i
            if not merged:
                break
        # Rebuild only the newest (possibly fused) group.
        self._rebuild_group(state, side, groups[-1])
        self._fix_group_backrefs(state, side)

    def delete(self, sid):
        if self.mode != "dynamic":
            raise UnsupportedInMode("delete is only available in dynamic mode")
        rec = self.sites.get(sid)
        if rec is None:
            raise UnknownId(f"site id {sid} is not live")
        self.counters["updates"] += 1
        for state, side, group in rec.groups:
            group.ids.remove(sid)
            if group.ids:
                self._rebuild_group(state, side, group)
            else:
                state.groups[side].remove(group)
        rec.leaf.delete(sid)
        del self.sites[sid]
        if self.n and not (self.n_ref / 2 <= self.n <= 2 * self.n_ref):
            self._regroup()

    def _regroup(self):
        self.n_ref = max(self.n, 1)
        target = self._group_target()
        for state in self.states.values():
            for side in ("L", "R"):
                ids = [sid for g in state.groups[side] for sid in g.ids]
                state.groups[side] = []
                for k in range(0, len(ids), target):
                    g = Group(state.ctx_for(side), ids[k : k + target])
                    state.groups[side].append(g)
                    self._rebuild_group(state, side, g)
                self._fix_group_backrefs(state, side)

    def bulk_load(self, items):
        """Insert many sites, building each group forest once at the end.

        Semantically equivalent to a sequence of inserts; intended for
        benchmarking query behaviour at a given n without paying the
        per-insert rebuild cost.
        """
        if self.mode != "dynamic":
            raise UnsupportedInMode("bulk_load is a dynamic-mode facility")
        records = []
        for sid, location in items:
            if sid in self.sites:
                raise DuplicateId(f"site id {sid} is already live")
            p = Point(float(location[0]), float(location[1]))
            cls = self.polygon.classify(p)
            if cls < 0:
                raise PointOutsidePolygon(f"{tuple(p)} is outside the polygon")
            if cls == 0:
                raise PointOnBoundary(f"{tuple(p)} lies on the polygon boundary")
            rec = SiteRecord(sid, p)
            self.sites[sid] = rec
            records.append(rec)
        self.n_ref = max(self.n, 1)
        target = self._group_target()
        for rec in records:
            path, leaf = self._route(rec.location, strict=True)
            for state, side in path:
                groups = state.groups[side]
                if not groups or len(groups[-1]) >= target:
                    groups.append(Group(state.ctx_for(side), []))
                groups[-1].ids.append(rec.sid)
            leaf.insert(rec.sid, rec.location, n_leaf=leaf.site_count() + 1)
            rec.leaf = leaf
        for state in self.states.values():
            for side in ("L", "R"):
                for g in state.groups[side]:
                    self._rebuild_group(state, side, g)
                self._fix_group_backrefs(state, side)
        self.counters["updates"] += len(records)

    # -- queries ----------------------------------------------------------------

    def query(self, q):
        """(site id, geodesic distance) of the nearest live site."""
        if not self.sites:
            raise EmptyStructure("no live sites")
        p = Point(float(q[0]), float(q[1]))
        if self.polygon.classify(p) < 0:
            raise PointOutsidePolygon(f"{tuple(p)} is outside the polygon")
        self.counters["queries"] += 1
        memo = {}
        best = None

        def offer(sid, dist):
            nonlocal best
            if best is None or dist < best[1] - 1e-15 or (
                abs(dist - best[1]) <= 1e-12 * (1.0 + dist) and sid < best[0]
            ):
                best = (sid, dist)

        node = self.root
        while not node.is_leaf:
            state = self.states[id(node)]
            side = state.side_of(p, strict=False)
            opposite = "R" if side == "L" else "L"
            for group in state.groups[opposite]:
                if group.forest is None:
                    continue
                sid = group.forest.locate(p, memo)
                d = memo.get(sid)
                if d is None:
                    d = self.engine.distance(self.sites[sid].location, p)
                    memo[sid] = d
                offer(sid, d)
            node = node.left if side == "L" else node.right
        leaf = self.leaves[id(node)]
        got, evals = leaf.query(p)
        self.counters["euclid_evals"] += evals
        if got is not None:
            offer(got[1], got[0])
        self.counters["distance_evals"] += len(memo)
        self.per_query_evals.append(len(memo))
        if best is None:
            raise GeoNNError("no candidate found; structure inconsistent")
        return best

    # -- verification --------------------------------------------------------------

    def audit(self):
        """Structural invariant check; returns a list of violations."""
        problems = []
        live = set(self.sites)
        for sid, rec in self.sites.items():
            path, leaf = self._route(rec.location, strict=False)
            for state, side in path:
                holders = [g for g in state.groups[side] if sid in g.ids]
                if len(holders) != 1:
                    problems.append(
                        f"site {sid} in {len(holders)} groups at node depth "
                        f"{state.node.depth} side {side}"
                    )
            others = [
                (st, sd)
                for st in self.states.values()
                for sd in ("L", "R")
                if (st, sd) not in [(s, d) for s, d in path]
                and any(sid in g.ids for g in st.groups[sd])
            ]
            if others:
                problems.append(f"site {sid} appears off its root-to-leaf path")
            if rec.leaf is not leaf or sid not in leaf.all_ids():
                problems.append(f"site {sid} missing from its leaf bucket")
        for state in self.states.values():
            for side in ("L", "R"):
                for g in state.groups[side]:
                    stray = [x for x in g.ids if x not in live]
                    if stray:
                        problems.append(f"dead ids {stray} in a group")
                    if self.mode == "dynamic" and len(g) > 2 * self._group_target():
                        problems.append(
                            f"group of size {len(g)} exceeds twice the target "
                            f"{self._group_target()}"
                        )
                    if self.mode == "insert-only" and len(g) != 2 ** g.capacity_class:
                        problems.append("insert-only group size is not its power class")
                    if g.ids and g.forest is None:
                        problems.append("nonempty group without a forest")
                    if g.forest is not None:
                        f = g.forest
                        z = len(f.order.sites)
                        if z != 1 + f.degree3_count() + f.tree_count():
                            problems.append("forest Euler relation violated")
        return problems


def new(polygon: Polygon, mode: str = "dynamic",
        tolerances: ToleranceConfig = DEFAULT_TOLERANCES) -> NNStructure:
    return NNStructure(polygon, mode, tolerances)


# ---------------------------------------------------------------------------
# Offline regime
# ---------------------------------------------------------------------------


@dataclass
class Op:
    kind: str  # "I", "D", "Q"
    time: int
    sid: Optional[int] = None
    point: Optional[Point] = None


class _SegTree:
    """Segment tree over time slots; canonical nodes carry site subsets."""

    def __init__(self, lo, hi):
        self.lo = lo
        self.hi = hi
        self.left = None
        self.right = None
        self.payload = []  # (sid, point)
        self.built = None

    def insert(self, a, b, item):
        if a <= self.lo and self.hi <= b:
            self.payload.append(item)
            return
        mid = (self.lo + self.hi) // 2
        if self.left is None:
            self.left = _SegTree(self.lo, mid)
            self.right = _SegTree(mid, self.hi)
        if a < mid:
            self.left.insert(a, b, item)
        if b > mid:
            self.right.insert(a, b, item)

    def stab(self, t):
        node = self
        while node is not None:
            if node.payload:
                yield node
            if node.left is None:
                return
            mid = (node.lo + node.hi) // 2
            node = node.left if t < mid else node.right


class OfflineNN:
    """Offline regime: the full op timeline is known; every canonical
    segment-tree node gets one immutable forest, and queries at time t stab
    O(log N) of them per decomposition node."""

    def __init__(self, polygon: Polygon, ops,
                 tolerances: ToleranceConfig = DEFAULT_TOLERANCES):
        self.polygon = polygon
        self.tol = tolerances
        self.ops = list(ops)
        self.engine = PathEngine(polygon, tolerances)
        self.root = balanced_decomposition(polygon)
        self.counters = {"distance_evals": 0, "queries": 0, "rebuild_sites": 0}
        n_time = len(self.ops) + 2
        intervals = {}
        live = {}
        for op in self.ops:
            if op.kind == "I":
                if op.sid in live:
                    raise MalformedTimeline(f"insert of live id {op.sid}")
                cls = polygon.classify(op.point)
                if cls < 0:
                    raise PointOutsidePolygon(f"{tuple(op.point)} outside polygon")
                if cls == 0:
                    raise PointOnBoundary(f"{tuple(op.point)} on polygon boundary")
                live[op.sid] = (op.point, op.time)
            elif op.kind == "D":
                if op.sid not in live:
                    raise MalformedTimeline(f"delete of unknown id {op.sid}")
                pt, t0 = live.pop(op.sid)
                intervals.setdefault(op.sid, []).append((pt, t0, op.time))
        for sid, (pt, t0) in live.items():
            intervals.setdefault(sid, []).append((pt, t0, n_time))

        self.states = {}
        self.trees = {}
        for node in self.root.walk():
            if node.is_leaf:
                continue
            state = _NodeState(node, polygon, self.engine, tolerances)
            self.states[id(node)] = state
            self.trees[id(node)] = {"L": _SegTree(0, n_time), "R": _SegTree(0, n_time)}
        self.leaf_trees = {}
        for leaf in self.root.leaves():
            self.leaf_trees[id(leaf)] = _SegTree(0, n_time)

        for sid, spans in intervals.items():
            for pt, t0, t1 in spans:
                node = self.root
                while not node.is_leaf:
                    state = self.states[id(node)]
                    side = state.side_of(pt, strict=True)
                    self.trees[id(node)][side].insert(t0, t1, (sid, pt))
                    node = node.left if side == "L" else node.right
                self.leaf_trees[id(node)].insert(t0, t1, (sid, pt))

        # Build every canonical forest / leaf structure once.
        for node in self.root.walk():
            if node.is_leaf:
                self._build_leaf_payloads(self.leaf_trees[id(node)])
            else:
                state = self.states[id(node)]
                for side in ("L", "R"):
                    self._build_payloads(self.trees[id(node)][side], state, side)

    def _build_payloads(self, seg, state, side):
        stack = [seg]
        while stack:
            nd = stack.pop()
            if nd.payload:
                nd.built = build_forest(state.ctx_for(side), nd.payload)
                self.counters["rebuild_sites"] += len(nd.payload)
            if nd.left is not None:
                stack.extend((nd.left, nd.right))

    def _build_leaf_payloads(self, seg):
        stack = [seg]
        while stack:
            nd = stack.pop()
            if nd.payload:
                pts = np.asarray([[p.x, p.y] for _, p in nd.payload])
                nd.built = (list(nd.payload), cKDTree(pts))
            if nd.left is not None:
                stack.extend((nd.left, nd.right))

    def query_at(self, time: int, q):
        """(site id, distance) among sites alive at the given time."""
        p = Point(float(q[0]), float(q[1]))
        if self.polygon.classify(p) < 0:
            raise PointOutsidePolygon(f"{tuple(p)} is outside the polygon")
        self.counters["queries"] += 1
        memo = {}
        best = None

        def offer(sid, dist):
            nonlocal best
            if best is None or dist < best[1] - 1e-15 or (
                abs(dist - best[1]) <= 1e-12 * (1.0 + dist) and sid < best[0]
            ):
                best = (sid, dist)

        node = self.root
        while not node.is_leaf:
            state = self.states[id(node)]
            side = state.side_of(p, strict=False)
            opposite = "R" if side == "L" else "L"
            for seg in self.trees[id(node)][opposite].stab(time):
                forest = seg.built
                if forest is None:
                    continue
                sid = forest.locate(p, memo)
                d = memo.get(sid)
                if d is None:
                    d = self.engine.distance(forest.site_points[sid], p)
                    memo[sid] = d
                offer(sid, d)
            node = node.left if side == "L" else node.right
        for seg in self.leaf_trees[id(node)].stab(time):
            if seg.built is None:
                continue
            payload, tree = seg.built
            k = min(2, len(payload))
            dist, idx = tree.query([p.x, p.y], k=k)
            pairs = [(float(dist), int(idx))] if k == 1 else list(zip(map(float, dist), map(int, idx)))
            for d, i in pairs:
                offer(payload[i][0], d)
        self.counters["distance_evals"] += len(memo)
        if best is None:
            raise EmptyStructure(f"no sites alive at time {time}")
        return best

    def run(self):
        """Answers for the timeline's own queries, in order."""
        out = []
        for op in self.ops:
            if op.kind == "Q":
                out.append((op.time, self.query_at(op.time, op.point)))
        return out


def build_offline(polygon: Polygon, ops,
                  tolerances: ToleranceConfig = DEFAULT_TOLERANCES) -> OfflineNN:
    """Offline structure from a complete op sequence (times = positions)."""
    return OfflineNN(polygon, ops, tolerances)
