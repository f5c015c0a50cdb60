import math
import random

import pytest

from geonn.bisector import DiagonalContext
from geonn.errors import GeneralPositionViolation
from geonn.forest import (
    LEAF_BOUNDARY,
    LEAF_D,
    TRIPLE,
    VoronoiForest,
    build_forest,
    extract_active_sites,
)
from geonn.geometry import Diagonal, Point, triangulate
from geonn.oracle import BruteForceOracle
from geonn.paths import PathEngine
from conftest import random_interior_point, random_star_polygon

R2 = 0.5 / math.sqrt(2.0)


def _ctx(polygon, diag, site):
    return DiagonalContext.for_sites(PathEngine(polygon), diag, site)


def check_forest_invariants(forest: VoronoiForest):
    z = len(forest.order.sites)
    assert z == 1 + forest.degree3_count() + forest.tree_count()
    assert forest.d_leaf_count() == z - 1
    assert forest.boundary_leaf_count() == forest.tree_count()
    engine = forest.ctx.engine
    for n in forest.nodes:
        dists = [engine.distance(forest.site_points[s], n.point) for s in n.sites]
        for d in dists[1:]:
            assert d == pytest.approx(dists[0], rel=1e-9)
        if n.kind == TRIPLE:
            assert len(n.sites) == 3 and n.degree() == 3
        else:
            assert n.degree() == 1


def test_extract_two_sites_square(square):
    ctx = _ctx(square, Diagonal(0, 2), (0.2, 0.9))
    sites = [(1, Point(0.2, 0.9)), (2, Point(0.7, 0.8))]
    ordered = sorted(sites, key=lambda sp: ctx.dist_to_bottom(sp[1]))
    order = extract_active_sites(ctx, ordered)
    assert order.sites == [1, 2]
    assert len(order.breakpoints) == 1
    bp = order.breakpoints[0]
    assert bp.x == pytest.approx(0.35, abs=1e-9)
    assert bp.y == pytest.approx(0.35, abs=1e-9)


def test_extract_single_site(square):
    ctx = _ctx(square, Diagonal(0, 2), (0.2, 0.9))
    order = extract_active_sites(ctx, [(7, Point(0.2, 0.9))])
    assert order.sites == [7]
    assert order.breakpoints == []


def test_build_forest_two_sites(square):
    ctx = _ctx(square, Diagonal(0, 2), (0.2, 0.9))
    forest = build_forest(ctx, [(1, Point(0.2, 0.9)), (2, Point(0.7, 0.8))])
    check_forest_invariants(forest)
    assert forest.tree_count() == 1
    assert forest.degree3_count() == 0
    assert len(forest.edges) == 1
    kinds = sorted(n.kind for n in forest.nodes)
    assert kinds == sorted([LEAF_D, LEAF_BOUNDARY])
    leaf_d = next(n for n in forest.nodes if n.kind == LEAF_D)
    leaf_b = next(n for n in forest.nodes if n.kind == LEAF_BOUNDARY)
    assert leaf_d.point.x == pytest.approx(0.35, abs=1e-9)
    assert leaf_b.point.x == pytest.approx(0.28, abs=1e-9)
    assert leaf_b.point.y == pytest.approx(0.0, abs=1e-9)


def test_build_forest_three_sites_circumcenter(square):
    s = Point(0.1, 0.35)
    t = Point(0.6 - R2, 0.35 + R2)
    u = Point(0.6, 0.85)
    ctx = _ctx(square, Diagonal(0, 2), s)
    forest = build_forest(ctx, [(1, s), (2, t), (3, u)])
    check_forest_invariants(forest)
    assert len(forest.order.sites) == 3
    assert forest.degree3_count() == 1
    assert forest.tree_count() == 1
    tri = next(n for n in forest.nodes if n.kind == TRIPLE)
    assert tri.point.x == pytest.approx(0.6, abs=1e-9)
    assert tri.point.y == pytest.approx(0.35, abs=1e-9)


def test_locate_two_sites(square):
    ctx = _ctx(square, Diagonal(0, 2), (0.2, 0.9))
    forest = build_forest(ctx, [(1, Point(0.2, 0.9)), (2, Point(0.7, 0.8))])
    assert forest.locate((0.9, 0.2)) == 2
    # On d just below / above the breakpoint (0.35, 0.35): the bottom side
    # belongs to the site closer to the bottom endpoint.
    assert forest.locate((0.34, 0.34)) == 1
    assert forest.locate((0.36, 0.36)) == 2


def _random_group_case(m, k, seed):
    poly = random_star_polygon(m, seed)
    engine = PathEngine(poly)
    diags = triangulate(poly)
    rng = random.Random(seed * 31 + 1)
    diag = diags[rng.randrange(len(diags))]
    probe = random_interior_point(poly, rng)
    ctx = DiagonalContext.for_sites(engine, diag, probe)
    # Gather k sites strictly inside P_l.
    sites = []
    attempts = 0
    while len(sites) < k and attempts < 500:
        attempts += 1
        p = random_interior_point(poly, rng)
        if ctx.frame.classify_right(p) < 0:
            sites.append((len(sites) + 1, p))
    if len(sites) < max(2, k // 2):
        return None
    return poly, engine, ctx, sites, rng


@pytest.mark.parametrize("seed", [21, 22, 23, 24, 25])
def test_random_forest_matches_oracle(seed):
    case = _random_group_case(16, 8, seed)
    if case is None:
        pytest.skip("could not place sites")
    poly, engine, ctx, sites, rng = case
    try:
        forest = build_forest(ctx, sites)
    except GeneralPositionViolation:
        pytest.skip("degenerate random configuration")
    check_forest_invariants(forest)
    oracle = BruteForceOracle(poly)
    order_oracle = oracle.sample_diagonal_order(
        sites, ctx.frame.diag, resolution=800
    )
    assert forest.order.sites == order_oracle
    # Point location agrees with brute force on random queries in P_r.
    checked = 0
    while checked < 30:
        q = random_interior_point(poly, rng)
        if ctx.frame.classify_right(q) <= 0:
            continue
        want_id, want_d = oracle.nn_among(sites, q)
        got_d_by = {sid: engine.distance(dict(sites)[sid], q) for sid in forest.order.sites}
        got = forest.locate(q)
        # Skip queries too close to a region border for a strict check.
        ds = sorted(engine.distance(p, q) for _, p in sites)
        if ds[1] - ds[0] < 1e-7:
            checked += 1
            continue
        assert got == want_id, (q, got, want_id)
        assert got_d_by[got] == pytest.approx(want_d, rel=1e-9)
        checked += 1


def test_extraction_matches_oracle_order():
    for seed in (31, 32, 33):
        case = _random_group_case(14, 10, seed)
        if case is None:
            continue
        poly, engine, ctx, sites, rng = case
        ordered = sorted(sites, key=lambda sp: (ctx.dist_to_bottom(sp[1]), sp[0]))
        try:
            order = extract_active_sites(ctx, ordered)
        except GeneralPositionViolation:
            continue
        oracle = BruteForceOracle(poly)
        assert order.sites == oracle.sample_diagonal_order(
            sites, ctx.frame.diag, resolution=1200
        )


def test_forest_json_dump(square):
    ctx = _ctx(square, Diagonal(0, 2), (0.2, 0.9))
    forest = build_forest(ctx, [(1, Point(0.2, 0.9)), (2, Point(0.7, 0.8))])
    dump = forest.to_json_dict()
    assert len(dump["nodes"]) == 2
    assert len(dump["edges"]) == 1
    i, j, pair = dump["edges"][0]
    assert {pair["s"], pair["t"]} == {1, 2}
