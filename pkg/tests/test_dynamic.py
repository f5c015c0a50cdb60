import math
import random

import pytest

from geonn.dynamic import NNStructure, Op, build_offline, new
from geonn.errors import (
    DuplicateId,
    EmptyStructure,
    MalformedTimeline,
    PointOnBoundary,
    PointOutsidePolygon,
    UnknownId,
    UnsupportedInMode,
)
from geonn.geometry import Point, validate_polygon
from geonn.oracle import BruteForceOracle
from conftest import random_interior_point, random_star_polygon


def test_new_square_structure(square):
    nn = new(square, "dynamic")
    assert len(nn.states) == 1
    assert len(nn.leaves) == 2
    assert nn.n == 0


def test_single_leaf_triangle():
    tri = validate_polygon([(0, 0), (2, 0), (0, 2)])
    nn = new(tri, "dynamic")
    nn.insert(1, (0.5, 0.5))
    nn.insert(2, (1.0, 0.2))
    sid, d = nn.query((1.1, 0.1))
    assert sid == 2
    assert d == pytest.approx(math.hypot(0.1, 0.1), rel=1e-12)


def test_square_two_site_query(square):
    nn = new(square, "dynamic")
    nn.insert(1, (0.2, 0.9))
    nn.insert(2, (0.7, 0.8))
    sid, d = nn.query((0.9, 0.2))
    assert sid == 2
    assert d == pytest.approx(math.sqrt(0.4), rel=1e-12)
    assert nn.audit() == []


def test_insert_errors(square):
    nn = new(square, "dynamic")
    nn.insert(1, (0.5, 0.25))
    with pytest.raises(DuplicateId):
        nn.insert(1, (0.6, 0.25))
    with pytest.raises(PointOutsidePolygon):
        nn.insert(2, (1.5, 0.5))
    with pytest.raises(PointOnBoundary):
        nn.insert(3, (0.5, 0.0))


def test_delete_and_requery(square):
    nn = new(square, "dynamic")
    nn.insert(1, (0.2, 0.9))
    nn.insert(2, (0.7, 0.8))
    nn.delete(2)
    assert nn.query((0.9, 0.2))[0] == 1
    with pytest.raises(UnknownId):
        nn.delete(2)
    nn.insert(2, (0.7, 0.8))
    assert nn.query((0.9, 0.2))[0] == 2
    assert nn.audit() == []


def test_delete_unsupported_in_insert_only(square):
    nn = new(square, "insert-only")
    nn.insert(1, (0.5, 0.25))
    with pytest.raises(UnsupportedInMode):
        nn.delete(1)


def test_empty_structure_query(square):
    nn = new(square, "dynamic")
    with pytest.raises(EmptyStructure):
        nn.query((0.5, 0.5))


def test_insert_only_binary_counter(square):
    nn = new(square, "insert-only")
    rng = random.Random(2)
    for i in range(1, 5):
        nn.insert(i, random_interior_point(square, rng))
    # After 4 inserts each node-side holding k sites has groups with sizes
    # forming the binary representation of k.
    for state in nn.states.values():
        for side in ("L", "R"):
            sizes = sorted(len(g) for g in state.groups[side])
            k = sum(sizes)
            binary = [2 ** i for i in range(8) if k & (1 << i)]
            assert sizes == sorted(binary)
    assert nn.audit() == []


def _run_script(nn, oracle, script, check_every=True):
    for op, args in script:
        if op == "I":
            sid, p = args
            nn.insert(sid, p)
            oracle.register(sid, p)
        elif op == "D":
            (sid,) = args
            nn.delete(sid)
            oracle.unregister(sid)
        else:
            (q,) = args
            want = oracle.nn(q)
            got = nn.query(q)
            ds = sorted(
                oracle.distance(pt, q) for pt, _ in oracle._sites.values()
            ) if False else None
            assert got[0] == want[0], (q, got, want)
            assert got[1] == pytest.approx(want[1], rel=1e-9)


def _random_script(poly, rng, n_ops, allow_delete=True, min_gap=1e-7):
    live = {}
    next_id = 1
    script = []
    pending_oracle = BruteForceOracle(poly)
    for _ in range(n_ops):
        r = rng.random()
        if not live or r < 0.45:
            p = random_interior_point(poly, rng)
            script.append(("I", (next_id, p)))
            pending_oracle.register(next_id, p)
            live[next_id] = p
            next_id += 1
        elif allow_delete and r < 0.6 and len(live) > 1:
            sid = rng.choice(sorted(live))
            script.append(("D", (sid,)))
            pending_oracle.unregister(sid)
            del live[sid]
        else:
            for _ in range(40):
                q = random_interior_point(poly, rng)
                ds = sorted(
                    pending_oracle.distance(p, q) for p in live.values()
                )
                if len(ds) < 2 or ds[1] - ds[0] > min_gap:
                    break
            script.append(("Q", (q,)))
    return script


@pytest.mark.parametrize("seed", [1, 2])
def test_random_scripts_match_oracle(seed):
    poly = random_star_polygon(14, 400 + seed)
    rng = random.Random(seed)
    script = _random_script(poly, rng, 40)
    nn = new(poly, "dynamic")
    oracle = BruteForceOracle(poly)
    _run_script(nn, oracle, script)
    assert nn.audit() == []


def test_insert_only_matches_oracle():
    poly = random_star_polygon(12, 777)
    rng = random.Random(5)
    script = _random_script(poly, rng, 35, allow_delete=False)
    nn = new(poly, "insert-only")
    oracle = BruteForceOracle(poly)
    _run_script(nn, oracle, script)
    assert nn.audit() == []


def test_audit_negative_control(square):
    nn = new(square, "dynamic")
    nn.insert(1, (0.2, 0.9))
    nn.insert(2, (0.7, 0.8))
    # Corrupt a group deliberately.
    state = next(iter(nn.states.values()))
    for side in ("L", "R"):
        if state.groups[side]:
            state.groups[side][0].ids.append(999)
            break
    problems = nn.audit()
    assert problems


def test_offline_timeline_square(square):
    ops = [
        Op("I", 1, sid=1, point=Point(0.2, 0.9)),
        Op("I", 2, sid=2, point=Point(0.7, 0.8)),
        Op("Q", 3, point=Point(0.9, 0.2)),
        Op("D", 4, sid=2),
        Op("Q", 5, point=Point(0.9, 0.2)),
    ]
    off = build_offline(square, ops)
    answers = off.run()
    assert [t for t, _ in answers] == [3, 5]
    assert answers[0][1][0] == 2
    assert answers[1][1][0] == 1
    assert answers[0][1][1] == pytest.approx(math.sqrt(0.4), rel=1e-9)


def test_offline_malformed(square):
    with pytest.raises(MalformedTimeline):
        build_offline(square, [Op("D", 1, sid=5)])
    with pytest.raises(MalformedTimeline):
        build_offline(
            square,
            [Op("I", 1, sid=1, point=Point(0.5, 0.25)),
             Op("I", 2, sid=1, point=Point(0.5, 0.75))],
        )


def test_offline_matches_time_aware_oracle():
    poly = random_star_polygon(12, 31337)
    rng = random.Random(9)
    script = _random_script(poly, rng, 40)
    ops = []
    for i, (kind, args) in enumerate(script, start=1):
        if kind == "I":
            ops.append(Op("I", i, sid=args[0], point=args[1]))
        elif kind == "D":
            ops.append(Op("D", i, sid=args[0]))
        else:
            ops.append(Op("Q", i, point=args[0]))
    off = build_offline(poly, ops)
    answers = dict(off.run())
    oracle = BruteForceOracle(poly)
    live = {}
    for i, (kind, args) in enumerate(script, start=1):
        if kind == "I":
            oracle.register(args[0], args[1])
        elif kind == "D":
            oracle.unregister(args[0])
        else:
            want = oracle.nn(args[0])
            got = answers[i]
            assert got[0] == want[0]
            assert got[1] == pytest.approx(want[1], rel=1e-9)


def test_counters_move(square):
    nn = new(square, "dynamic")
    nn.insert(1, (0.2, 0.9))
    nn.insert(2, (0.7, 0.8))
    # The square's decomposition diagonal is (1, 3); query from the leaf
    # opposite the sites so the Voronoi forests are actually consulted.
    sid, d = nn.query((0.05, 0.05))
    assert sid == 1
    assert d == pytest.approx(math.hypot(0.15, 0.85), rel=1e-12)
    assert nn.counters["queries"] == 1
    assert nn.counters["distance_evals"] >= 1
    assert nn.counters["rebuild_sites"] >= 2
    assert len(nn.per_query_evals) == 1


def test_bulk_load_equivalent(square):
    rng = random.Random(77)
    pts = [(i, random_interior_point(square, rng)) for i in range(1, 13)]
    nn1 = new(square, "dynamic")
    nn1.bulk_load(pts)
    nn2 = new(square, "dynamic")
    for sid, p in pts:
        nn2.insert(sid, p)
    for _ in range(15):
        q = random_interior_point(square, rng)
        assert nn1.query(q)[0] == nn2.query(q)[0]
    assert nn1.audit() == []
