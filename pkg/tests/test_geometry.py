import math

import pytest
from hypothesis import given, strategies as st

from geonn.errors import DegenerateVertex, SelfIntersecting, TooFewVertices
from geonn.geometry import (
    Diagonal,
    balanced_decomposition,
    child_size_bound,
    orientation,
    point_in_polygon,
    triangulate,
    triangulate_ring,
    validate_polygon,
)
from conftest import LSHAPE, SQUARE, random_star_polygon


def test_orientation_basic():
    assert orientation((0, 0), (1, 0), (0, 1)) == 1
    assert orientation((0, 0), (1, 1), (2, 2)) == 0
    assert orientation((0, 0), (0, 1), (1, 1)) == -1


def test_orientation_near_degenerate_is_exact():
    # Points nearly collinear; float determinant underflows to noise.
    a = (0.1, 0.1)
    b = (0.30000000000000004, 0.30000000000000004)
    c = (0.2, 0.2)
    assert orientation(a, b, c) == 0
    eps = 2.0 ** -52
    assert orientation(a, b, (0.2, 0.2 + 0.2 * eps)) == 1
    assert orientation(a, b, (0.2, 0.2 - 0.2 * eps)) == -1


coords = st.floats(min_value=-100, max_value=100, allow_nan=False)


@given(coords, coords, coords, coords, coords, coords, coords, coords)
def test_orientation_antisymmetric_and_translation_invariant(ax, ay, bx, by, cx, cy, tx, ty):
    a, b, c = (ax, ay), (bx, by), (cx, cy)
    assert orientation(a, b, c) == -orientation(b, a, c)
    shifted = orientation((ax + tx, ay + ty), (bx + tx, by + ty), (cx + tx, cy + ty))
    # Translation by representable offsets may not be exact in floats, but the
    # predicate must agree whenever the determinant is comfortably nonzero.
    det = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    if abs(det) > 1e-6:
        assert shifted == orientation(a, b, c)


def test_validate_unit_square():
    poly = validate_polygon(SQUARE)
    assert poly.m == 4
    assert poly.area() == pytest.approx(1.0)


def test_validate_bowtie_rejected():
    with pytest.raises(SelfIntersecting):
        validate_polygon([(0, 0), (1, 1), (1, 0), (0, 1)])


def test_validate_cw_square_reversed():
    poly = validate_polygon([(0, 0), (0, 1), (1, 1), (1, 0)])
    assert poly.m == 4
    # CCW after normalization: positive signed area.
    assert orientation(poly.vertices[0], poly.vertices[1], poly.vertices[2]) == 1


def test_validate_rejects_small_and_duplicates():
    with pytest.raises(TooFewVertices):
        validate_polygon([(0, 0), (1, 0)])
    with pytest.raises(DegenerateVertex):
        validate_polygon([(0, 0), (0, 0), (1, 0), (1, 1)])


def test_triangulate_square_and_triangle():
    square = validate_polygon(SQUARE)
    diags = triangulate(square)
    assert len(diags) == 1
    assert tuple(diags[0]) in {(0, 2), (1, 3)}
    tri = validate_polygon([(0, 0), (1, 0), (0, 1)])
    assert triangulate(tri) == []


def test_triangulate_lshape_diagonals_interior():
    poly = validate_polygon(LSHAPE)
    diags = triangulate(poly)
    assert len(diags) == 3
    for d in diags:
        a, b = poly.vertices[d.a], poly.vertices[d.b]
        mid = ((a.x + b.x) / 2.0, (a.y + b.y) / 2.0)
        # Independent interiority check on the midpoint.
        assert point_in_polygon(poly.vertices, mid) == 1


@pytest.mark.parametrize("m,seed", [(10, 1), (25, 2), (50, 3), (80, 4)])
def test_triangulate_random_counts_and_area(m, seed):
    poly = random_star_polygon(m, seed)
    tris = triangulate_ring(poly.vertices, range(poly.m))
    assert len(tris) == poly.m - 2
    area = 0.0
    for (i, j, k) in tris:
        a, b, c = poly.vertices[i], poly.vertices[j], poly.vertices[k]
        area += 0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x))
    assert area == pytest.approx(poly.area(), rel=1e-9)


def test_decomposition_triangle_single_leaf():
    tri = validate_polygon([(0, 0), (1, 0), (0, 1)])
    root = balanced_decomposition(tri)
    assert root.is_leaf and root.diagonal is None and root.depth == 0


def test_decomposition_square():
    square = validate_polygon(SQUARE)
    root = balanced_decomposition(square)
    assert not root.is_leaf
    assert root.left.is_leaf and root.right.is_leaf
    assert max(n.depth for n in root.walk()) == 1


def test_decomposition_regular_64gon_depth():
    pts = [
        (math.cos(2 * math.pi * i / 64), math.sin(2 * math.pi * i / 64))
        for i in range(64)
    ]
    root = balanced_decomposition(validate_polygon(pts))
    depth = max(n.depth for n in root.walk())
    assert depth <= 12


@pytest.mark.parametrize("m,seed", [(12, 11), (40, 12), (90, 13)])
def test_decomposition_invariants(m, seed):
    poly = random_star_polygon(m, seed)
    root = balanced_decomposition(poly)
    leaf_area = 0.0
    for node in root.walk():
        n = len(node.indices)
        if node.is_leaf:
            assert n == 3
            a, b, c = (poly.vertices[i] for i in node.indices)
            leaf_area += 0.5 * abs(
                (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
            )
        else:
            bound = child_size_bound(n)
            assert len(node.left.indices) <= bound
            assert len(node.right.indices) <= bound
            # Children cover the parent ring, sharing the diagonal endpoints.
            assert len(node.left.indices) + len(node.right.indices) == n + 2
    assert leaf_area == pytest.approx(poly.area(), rel=1e-9)
    depth = max(n.depth for n in root.walk())
    assert depth <= math.ceil(math.log(m, 1.5)) + 2


def test_point_in_polygon_classification():
    poly = validate_polygon(LSHAPE)
    assert point_in_polygon(poly.vertices, (0.5, 0.5)) == 1
    assert point_in_polygon(poly.vertices, (1.5, 1.5)) == -1
    assert point_in_polygon(poly.vertices, (1.0, 0.5)) == 1
    assert point_in_polygon(poly.vertices, (2.0, 0.5)) == 0
    assert point_in_polygon(poly.vertices, (1.0, 1.5)) == 0


def test_diagonal_type_roundtrip():
    d = Diagonal(2, 5)
    assert d.a == 2 and d.b == 5
