"""Command-line interface: run op scripts, verify against the brute-force
oracle, benchmark with instrumentation counters, render diagrams to SVG,
and solve value-constrained nearest-neighbor matching by a sweep over the
offline structure.

Script format (one op per line, timestamps implicit in line order):
    I <id> <x> <y>    insert a site
    D <id>            delete a site
    Q <x> <y>         query; prints "<id> <distance>" with 12 significant digits
"""

from __future__ import annotations

import argparse
import json
import math
import random
import sys
import time

from .dynamic import Op, build_offline, new
from .errors import EmptyStructure, GeoNNError, PointOutsidePolygon
from .geometry import Point, Polygon, polygon_from_json_dict
from .oracle import BruteForceOracle


class ScriptError(Exception):
    """Semantic error while executing an op script (exit code 3)."""

    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ScriptParseError(Exception):
    """Malformed op script (exit code 2)."""

    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


def load_polygon(path) -> Polygon:
    with open(path) as fh:
        data = json.load(fh)
    return polygon_from_json_dict(data)


def parse_script(path):
    """[(line_no, kind, payload)] where payload is (id, Point) / (id,) / (Point,)."""
    ops = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            kind = parts[0].upper()
            try:
                if kind == "I" and len(parts) == 4:
                    ops.append((lineno, "I", (int(parts[1]), Point(float(parts[2]), float(parts[3])))))
                elif kind == "D" and len(parts) == 2:
                    ops.append((lineno, "D", (int(parts[1]),)))
                elif kind == "Q" and len(parts) == 3:
                    ops.append((lineno, "Q", (Point(float(parts[1]), float(parts[2])),)))
                else:
                    raise ValueError("unrecognized op")
            except ValueError as exc:
                raise ScriptParseError(lineno, f"cannot parse op: {exc}")
    return ops


def _script_to_timeline(ops):
    out = []
    for lineno, kind, payload in ops:
        if kind == "I":
            out.append(Op("I", lineno, sid=payload[0], point=payload[1]))
        elif kind == "D":
            out.append(Op("D", lineno, sid=payload[0]))
        else:
            out.append(Op("Q", lineno, point=payload[0]))
    return out


def _format_answer(sid, dist) -> str:
    return f"{sid} {dist:.12g}"


def cmd_run(args, out=sys.stdout):
    polygon = load_polygon(args.polygon)
    ops = parse_script(args.ops)
    if args.mode == "offline":
        off = build_offline(polygon, _script_to_timeline(ops))
        for lineno, kind, payload in ops:
            if kind != "Q":
                continue
            try:
                sid, dist = off.query_at(lineno, payload[0])
            except EmptyStructure:
                raise ScriptError(lineno, "query with no live sites")
            print(_format_answer(sid, dist), file=out)
        return 0
    nn = new(polygon, args.mode)
    for lineno, kind, payload in ops:
        try:
            if kind == "I":
                nn.insert(*payload)
            elif kind == "D":
                nn.delete(*payload)
            else:
                sid, dist = nn.query(payload[0])
                print(_format_answer(sid, dist), file=out)
        except GeoNNError as exc:
            raise ScriptError(lineno, _describe(exc))
    return 0


def _describe(exc) -> str:
    from . import errors

    names = {
        errors.UnknownId: "unknown id",
        errors.DuplicateId: "duplicate id",
        errors.PointOutsidePolygon: "point outside polygon",
        errors.PointOnBoundary: "point on polygon boundary",
        errors.EmptyStructure: "query with no live sites",
        errors.UnsupportedInMode: "operation unsupported in this mode",
    }
    return names.get(type(exc), str(exc))


def cmd_verify(args, out=sys.stdout):
    polygon = load_polygon(args.polygon)
    ops = parse_script(args.ops)
    oracle = BruteForceOracle(polygon)
    answers = {}
    if args.mode == "offline":
        off = build_offline(polygon, _script_to_timeline(ops))
        for lineno, kind, payload in ops:
            if kind == "Q":
                answers[lineno] = off.query_at(lineno, payload[0])
        nn = None
    else:
        nn = new(polygon, args.mode)
    count = 0
    for lineno, kind, payload in ops:
        try:
            if kind == "I":
                if nn is not None:
                    nn.insert(*payload)
                oracle.register(*payload)
            elif kind == "D":
                if nn is not None:
                    nn.delete(*payload)
                oracle.unregister(*payload)
            else:
                got = answers[lineno] if nn is None else nn.query(payload[0])
                want = oracle.nn(payload[0])
                count += 1
                ok = got[0] == want[0] and (
                    abs(got[1] - want[1]) <= 1e-9 * (1.0 + want[1])
                )
                if not ok:
                    print(
                        f"MISMATCH at query {count} (line {lineno}): "
                        f"got {_format_answer(*got)} want {_format_answer(*want)}",
                        file=out,
                    )
                    return 1
        except GeoNNError as exc:
            raise ScriptError(lineno, _describe(exc))
    print(f"OK {count} queries", file=out)
    return 0


def _sample_inside(polygon, rng):
    xs = [p.x for p in polygon.vertices]
    ys = [p.y for p in polygon.vertices]
    while True:
        p = Point(rng.uniform(min(xs), max(xs)), rng.uniform(min(ys), max(ys)))
        if polygon.classify(p) > 0:
            return p


def cmd_bench(args, out=sys.stdout):
    polygon = load_polygon(args.polygon)
    rng = random.Random(args.seed)
    n = args.n
    nn = new(polygon, args.mode if args.mode != "offline" else "dynamic")
    t0 = time.perf_counter()
    sites = []
    sid = 0
    while len(sites) < n:
        sid += 1
        p = _sample_inside(polygon, rng)
        sites.append((sid, p))
    if nn.mode == "dynamic":
        nn.bulk_load(sites)
    else:
        for s, p in sites:
            nn.insert(s, p)
    queries = [_sample_inside(polygon, rng) for _ in range(n)]
    nn.per_query_evals.clear()
    for q in queries:
        nn.query(q)
    wall_ms = (time.perf_counter() - t0) * 1000.0
    evals = sorted(nn.per_query_evals)
    mean_evals = sum(evals) / len(evals)
    p95 = evals[min(len(evals) - 1, int(math.ceil(0.95 * len(evals))) - 1)]
    mean_rebuild = nn.counters["rebuild_sites"] / max(nn.counters["updates"], 1)
    print("n,queries,mean_dist_evals,mean_rebuild_sites,p95_dist_evals,wall_ms", file=out)
    print(
        f"{n},{len(queries)},{mean_evals:.6g},{mean_rebuild:.6g},{p95},{wall_ms:.1f}",
        file=out,
    )
    return 0


_PALETTE = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
    "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
]


def cmd_render(args, out=sys.stdout):
    polygon = load_polygon(args.polygon)
    with open(args.sites) as fh:
        raw = json.load(fh)
    sites = [(int(r["id"]), Point(float(r["x"]), float(r["y"]))) for r in raw]
    nn = new(polygon, "dynamic")
    nn.bulk_load(sites)
    res = args.resolution
    xs = [p.x for p in polygon.vertices]
    ys = [p.y for p in polygon.vertices]
    x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    dx = (x1 - x0) / res
    dy = (y1 - y0) / res
    cells = []
    for i in range(res):
        for j in range(res):
            cx = x0 + (i + 0.5) * dx
            cy = y0 + (j + 0.5) * dy
            if polygon.classify((cx, cy)) <= 0:
                continue
            try:
                sid, _ = nn.query((cx, cy))
            except (EmptyStructure, PointOutsidePolygon):
                continue
            cells.append((i, j, sid))
    forest_nodes = []
    for state in nn.states.values():
        for side in ("L", "R"):
            for g in state.groups[side]:
                if g.forest is not None:
                    for nd in g.forest.to_json_dict()["nodes"]:
                        forest_nodes.append((nd["x"], nd["y"], nd["kind"]))

    def sx(x):
        return (x - x0) / (x1 - x0) * 800.0

    def sy(y):
        return 800.0 - (y - y0) / (y1 - y0) * 800.0

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<svg xmlns="http://www.w3.org/2000/svg" width="800" height="800" '
        'viewBox="0 0 800 800">',
    ]
    w = 800.0 / res
    for i, j, sid in cells:
        color = _PALETTE[sid % len(_PALETTE)]
        lines.append(
            f'<rect x="{sx(x0 + i * dx):.2f}" y="{sy(y0 + (j + 1) * dy):.2f}" '
            f'width="{w:.2f}" height="{w:.2f}" fill="{color}" stroke="none"/>'
        )
    outline = " ".join(f"{sx(p.x):.2f},{sy(p.y):.2f}" for p in polygon.vertices)
    lines.append(f'<polygon points="{outline}" fill="none" stroke="black" stroke-width="2"/>')
    for x, y, kind in forest_nodes:
        lines.append(
            f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="black" '
            f'stroke="white"><title>{kind}</title></circle>'
        )
    for sid, p in sites:
        lines.append(
            f'<circle cx="{sx(p.x):.2f}" cy="{sy(p.y):.2f}" r="5" '
            f'fill="white" stroke="black" stroke-width="2"/>'
        )
    lines.append("</svg>")
    svg = "\n".join(lines)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(svg)
    else:
        print(svg, file=out)
    return 0


def _load_valued_points(path):
    with open(path) as fh:
        raw = json.load(fh)
    return [
        (int(r["id"]), Point(float(r["x"]), float(r["y"])), float(r["v"]))
        for r in raw
    ]


def cmd_migrate(args, out=sys.stdout):
    polygon = load_polygon(args.polygon)
    red = _load_valued_points(args.red)
    blue = _load_valued_points(args.blue)
    eps = args.epsilon
    if eps < 0:
        raise ScriptError(0, "epsilon must be nonnegative")
    # Sweep a window of width 2*eps over the values: blues enter when the
    # lowest compatible red appears and leave when no later red can use them.
    blues = sorted(blue, key=lambda r: (r[2], r[0]))
    reds = sorted(red, key=lambda r: (r[2], r[0]))
    ops = []
    t = 0
    inserted = 0
    live = []
    red_time = {}
    for rid, rpt, rv in reds:
        while inserted < len(blues) and blues[inserted][2] <= rv + eps:
            t += 1
            ops.append(Op("I", t, sid=blues[inserted][0], point=blues[inserted][1]))
            live.append(blues[inserted])
            inserted += 1
        while live and live[0][2] < rv - eps:
            t += 1
            ops.append(Op("D", t, sid=live[0][0]))
            live.pop(0)
        t += 1
        ops.append(Op("Q", t, point=rpt))
        red_time[rid] = (t, rpt)
    off = build_offline(polygon, ops)
    results = {}
    for rid, rpt, rv in reds:
        tq, qpt = red_time[rid]
        try:
            sid, dist = off.query_at(tq, qpt)
            results[rid] = (sid, dist)
        except EmptyStructure:
            results[rid] = None
    for rid, rpt, rv in red:
        got = results[rid]
        if got is None:
            print(f"{rid} none", file=out)
        else:
            print(f"{rid} {_format_answer(*got)}", file=out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geonn",
        description="Geodesic nearest-neighbor structures in a simple polygon",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, ops=False):
        p.add_argument("--polygon", required=True, help="polygon JSON file")
        if ops:
            p.add_argument("--ops", required=True, help="operation script file")
        p.add_argument(
            "--mode", default="dynamic", choices=["dynamic", "insert-only", "offline"]
        )

    p_run = sub.add_parser("run", help="execute an op script")
    common(p_run, ops=True)
    p_verify = sub.add_parser("verify", help="run a script against the oracle")
    common(p_verify, ops=True)
    p_bench = sub.add_parser("bench", help="instrumented random workload")
    common(p_bench)
    p_bench.add_argument("--n", type=int, required=True, help="sites and queries")
    p_bench.add_argument("--seed", type=int, default=0)
    p_render = sub.add_parser("render", help="sampled diagram as SVG")
    p_render.add_argument("--polygon", required=True)
    p_render.add_argument("--sites", required=True, help="sites JSON file")
    p_render.add_argument("--resolution", type=int, default=160)
    p_render.add_argument("--out", default=None)
    p_migrate = sub.add_parser("migrate", help="value-constrained matching")
    p_migrate.add_argument("--polygon", required=True)
    p_migrate.add_argument("--red", required=True)
    p_migrate.add_argument("--blue", required=True)
    p_migrate.add_argument("--epsilon", type=float, required=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": cmd_run,
        "verify": cmd_verify,
        "bench": cmd_bench,
        "render": cmd_render,
        "migrate": cmd_migrate,
    }
    try:
        return handlers[args.command](args)
    except ScriptError as exc:
        print(str(exc), file=sys.stderr)
        return 3
    except (json.JSONDecodeError, OSError, GeoNNError, KeyError, TypeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
