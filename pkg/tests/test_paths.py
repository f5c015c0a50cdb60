import math
import random

import pytest

from geonn.errors import IndexOutOfRange, PointOutsidePolygon
from geonn.geometry import Diagonal, orientation, validate_polygon
from geonn.oracle import BruteForceOracle
from geonn.paths import GeodesicPath, PathEngine, path_vertex
from conftest import comb_polygon, random_interior_point, random_star_polygon


@pytest.fixture(scope="module")
def square_engine(square):
    return PathEngine(square)


@pytest.fixture(scope="module")
def lshape_engine(lshape):
    return PathEngine(lshape)


def _convex_suffix_scan(vs):
    """O(n^2) reference: smallest j with all turn signs in vs[j:] consistent."""
    n = len(vs)
    for j in range(n):
        signs = set()
        for k in range(j + 1, n - 1):
            s = orientation(vs[k - 1], vs[k], vs[k + 1])
            if s:
                signs.add(s)
        if len(signs) <= 1:
            return j
    return n - 1


def test_straight_path_in_square(square_engine):
    path = square_engine.shortest_path((0.2, 0.2), (0.8, 0.6))
    assert path.vertex_count == 2
    assert path.length == pytest.approx(math.sqrt(0.52), rel=1e-12)


def test_lshape_path_bends(lshape_engine):
    path = lshape_engine.shortest_path((0.5, 1.5), (1.5, 0.5))
    assert [tuple(v) for v in path.vertices] == [(0.5, 1.5), (1.0, 1.0), (1.5, 0.5)]
    assert path.length == pytest.approx(math.sqrt(2.0), rel=1e-12)


def test_path_vertex_indexing(lshape_engine):
    path = lshape_engine.shortest_path((0.5, 1.5), (1.5, 0.5))
    assert path_vertex(path, 0) == (0.5, 1.5)
    assert path_vertex(path, 1) == (1.0, 1.0)
    with pytest.raises(IndexOutOfRange):
        path_vertex(path, 3)


def test_outside_point_raises(square_engine):
    with pytest.raises(PointOutsidePolygon):
        square_engine.shortest_path((0.5, 0.5), (1.5, 0.5))


def test_engine_matches_oracle_on_random_polygons():
    rng = random.Random(1234)
    for seed, m in ((5, 20), (6, 50)):
        poly = random_star_polygon(m, seed)
        engine = PathEngine(poly)
        oracle = BruteForceOracle(poly)
        for _ in range(60):
            p = random_interior_point(poly, rng)
            q = random_interior_point(poly, rng)
            d_engine = engine.distance(p, q)
            d_oracle = oracle.distance(p, q)
            assert d_engine == pytest.approx(d_oracle, rel=1e-9), (p, q, seed)


def test_path_internal_vertices_are_polygon_vertices():
    poly = random_star_polygon(40, 77)
    engine = PathEngine(poly)
    rng = random.Random(99)
    vset = set(poly.vertices)
    for _ in range(40):
        p = random_interior_point(poly, rng)
        q = random_interior_point(poly, rng)
        path = engine.shortest_path(p, q)
        for v in path.vertices[1:-1]:
            assert v in vset
        assert path.vertices[0] == p and path.vertices[-1] == q
        # Materialized list agrees with tree-indexed access.
        for i in range(path.vertex_count):
            assert path.vertex(i) == path.vertices[i]


def test_distance_symmetry_and_convexity_property():
    poly = random_star_polygon(30, 5150)
    engine = PathEngine(poly)
    rng = random.Random(31)
    for _ in range(30):
        p = random_interior_point(poly, rng)
        q = random_interior_point(poly, rng)
        assert engine.distance(p, q) == pytest.approx(engine.distance(q, p), rel=1e-12)


def test_longest_convex_suffix_straight_and_single_bend(square_engine, lshape_engine):
    straight = square_engine.shortest_path((0.2, 0.2), (0.8, 0.6))
    assert straight.longest_convex_suffix() == 0
    bend = lshape_engine.shortest_path((0.5, 1.5), (1.5, 0.5))
    assert bend.longest_convex_suffix() == 0


def test_longest_convex_suffix_matches_scan_on_comb():
    poly = comb_polygon(4)
    engine = PathEngine(poly)
    rng = random.Random(8)
    checked = 0
    for _ in range(60):
        p = random_interior_point(poly, rng)
        q = random_interior_point(poly, rng)
        path = engine.shortest_path(p, q)
        if path.vertex_count < 4:
            continue
        assert path.longest_convex_suffix() == _convex_suffix_scan(path.vertices)
        rev = path.reverse()
        assert rev.longest_convex_prefix() == (
            rev.vertex_count - 1 - _convex_suffix_scan(path.vertices)
        )
        checked += 1
    assert checked >= 10


def test_funnel_square_apex_is_source(square_engine):
    fun = square_engine.funnel_to_diagonal((0.2, 0.9), Diagonal(0, 2))
    assert fun.apex == (0.2, 0.9)
    assert fun.left_chain.vertex_count == 2
    assert fun.right_chain.vertex_count == 2


def test_funnel_distance_matches_engine_on_samples():
    poly = random_star_polygon(40, 2024)
    engine = PathEngine(poly)
    # Use a diagonal of the triangulation so it is interior for sure.
    from geonn.geometry import triangulate

    diag = triangulate(poly)[0]
    rng = random.Random(3)
    src = random_interior_point(poly, rng)
    fun = engine.funnel_to_diagonal(src, diag)
    a = poly.vertices[diag.a]
    b = poly.vertices[diag.b]
    for lam in [0.01, 0.1, 0.25, 0.4, 0.5, 0.61, 0.75, 0.9, 0.99]:
        pt = (a.x + lam * (b.x - a.x), a.y + lam * (b.y - a.y))
        assert fun.distance_at(lam) == pytest.approx(engine.distance(src, pt), rel=1e-9)
    # Apex is the last common vertex of the two endpoint paths.
    pa = engine.shortest_path(src, a).vertices
    pb = engine.shortest_path(src, b).vertices
    k = 1
    while k < min(len(pa), len(pb)) and pa[k] == pb[k]:
        k += 1
    assert fun.apex == pa[k - 1]


def test_pseudo_triangle_square_trivial(square_engine):
    pt = square_engine.pseudo_triangle((0.28, 0.0), (0.2, 0.9), (0.7, 0.8))
    assert pt.s_hat == (0.2, 0.9)
    assert pt.t_hat == (0.7, 0.8)
    assert pt.chain_st.vertex_count == 2
    assert pt.chain_tz.vertex_count == 2
    assert pt.chain_zs.vertex_count == 2
    assert len(pt.F_s_t) == 0
    assert len(pt.F_t_s) == 0


def _divergence_corner(engine, a, b1, b2):
    """Last common vertex of the paths a->b1 and a->b2."""
    p1 = engine.shortest_path(a, b1).vertices
    p2 = engine.shortest_path(a, b2).vertices
    k = 1
    while k < min(len(p1), len(p2)) and p1[k] == p2[k]:
        k += 1
    return p1[k - 1]


def test_pseudo_triangle_corners_are_path_divergence_points():
    poly = comb_polygon(3)
    engine = PathEngine(poly)
    rng = random.Random(17)
    checked = 0
    spans = [(0.05, 0.95), (2.05, 2.95), (4.05, 4.95), (6.05, 6.95)]
    for _ in range(40):
        s = random_interior_point(poly, rng)
        t = random_interior_point(poly, rng)
        # Pick z on one of the bottom boundary edges between the teeth.
        lo, hi = spans[rng.randrange(len(spans))]
        z = (rng.uniform(lo, hi), 0.0)
        try:
            pt = engine.pseudo_triangle(z, s, t)
        except Exception:
            continue
        s_hat = _divergence_corner(engine, s, t, z)
        t_hat = _divergence_corner(engine, t, s, z)
        assert pt.s_hat == s_hat
        assert pt.t_hat == t_hat
        assert pt.chain_st.is_convex()
        assert pt.chain_tz.is_convex()
        assert pt.chain_zs.is_convex()
        checked += 1
    assert checked >= 15


def test_pseudo_triangle_fans_on_lshape(lshape_engine):
    # Sites in the upper arm, z on the right edge of the lower arm: the
    # geodesics wrap the reflex corner, so the fans are nonempty.
    s, t = (0.3, 1.8), (0.35, 1.2)
    z = (2.0, 0.4)
    pt = lshape_engine.pseudo_triangle(z, s, t)
    fan = pt.F_s_t
    segs = [fan[i] for i in range(len(fan))]
    for seg in segs:
        assert seg.valid
        # Starts on one of the s-side chains, ends on the t-z chain.
        starts = list(pt.chain_st.vertices) + list(pt.chain_zs.vertices)
        assert seg.origin in starts
    # Pairwise disjoint (strict interiors).
    from geonn.geometry import segments_intersect

    for i in range(len(segs)):
        for j in range(i + 1, len(segs)):
            a, b = segs[i], segs[j]
            shrink = lambda sgm: (
                sgm.point_at(1e-6), sgm.point_at(1.0 - 1e-6)
            )
            p1, p2 = shrink(a)
            q1, q2 = shrink(b)
            assert not segments_intersect(p1, p2, q1, q2)


def test_concat_and_subpath(lshape_engine):
    path = lshape_engine.shortest_path((0.5, 1.5), (1.5, 0.5))
    a = path.subpath(0, 1)
    b = path.subpath(1, 2)
    joined = a.concat(b)
    assert joined.vertices == path.vertices
    assert joined.length == pytest.approx(path.length, rel=1e-12)
