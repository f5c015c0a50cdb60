import math
import random

import pytest

from geonn.geometry import Point, Polygon, validate_polygon

SQUARE = [(0, 0), (1, 0), (1, 1), (0, 1)]
LSHAPE = [(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)]


@pytest.fixture(scope="session")
def square() -> Polygon:
    return validate_polygon(SQUARE)


@pytest.fixture(scope="session")
def lshape() -> Polygon:
    return validate_polygon(LSHAPE)


def comb_polygon(teeth: int = 4) -> Polygon:
    """A comb with downward teeth; geodesics across it zig-zag."""
    pts = [(0.0, 0.0)]
    for t in range(teeth):
        x = 1.0 + 2.0 * t
        pts.extend([(x, 0.0), (x + 0.5, 1.6), (x + 1.0, 0.0)])
    xmax = 1.0 + 2.0 * teeth
    pts.extend([(xmax, 0.0), (xmax, 2.0), (0.0, 2.0)])
    return validate_polygon(pts)


def random_star_polygon(m: int, seed: int, rmin: float = 0.25, rmax: float = 1.0) -> Polygon:
    """Random star-shaped polygon around the origin with m vertices.

    Star-shaped polygons are always simple, and wild radius variation gives
    plenty of reflex vertices, so geodesics genuinely bend.
    """
    rng = random.Random(seed)
    angles = sorted(rng.uniform(0.0, 2.0 * math.pi) for _ in range(m))
    # Reject near-duplicate angles to stay clear of degenerate slivers.
    for i in range(1, m):
        if angles[i] - angles[i - 1] < 1e-3:
            return random_star_polygon(m, seed + 7919, rmin, rmax)
    pts = []
    for a in angles:
        r = rng.uniform(rmin, rmax)
        pts.append((r * math.cos(a), r * math.sin(a)))
    try:
        return validate_polygon(pts)
    except Exception:
        return random_star_polygon(m, seed + 104729, rmin, rmax)


def random_interior_point(polygon: Polygon, rng: random.Random) -> Point:
    xs = [p.x for p in polygon.vertices]
    ys = [p.y for p in polygon.vertices]
    while True:
        p = Point(rng.uniform(min(xs), max(xs)), rng.uniform(min(ys), max(ys)))
        if polygon.classify(p) > 0:
            return p


@pytest.fixture(scope="session")
def comb() -> Polygon:
    return comb_polygon()
