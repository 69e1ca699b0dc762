"""Command-line driver: graph generation, SSSP / transshipment / routing audits.

Reports are deterministic for a fixed seed (wall time goes to stderr, or into the
JSON only with --timing); batch mode emits one CSV row per instance. Exit codes:
0 ok, 2 format error, 3 disconnected, 4 weight range, 5 duplicate edge,
6 solver cap exceeded, 7 requested check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time

import numpy as np

from . import generators, graphs, oracles
from .graphs import (
    DisconnectedGraphError,
    DuplicateEdgeError,
    GraphError,
    GraphFormatError,
    WeightRangeError,
    dump_graph,
    load_graph,
    parse_demand,
)
from .routing import (
    RoutingParams,
    build_routing,
    default_params,
    derive_seed,
    pair_competitiveness,
    route,
)
from .simulator import network
from .sssp import DEFAULT_KNOBS, SolverKnobs, sssp
from .transshipment import SolverError, solve_transshipment

EXIT_OK = 0
EXIT_FORMAT = 2
EXIT_DISCONNECTED = 3
EXIT_WEIGHT = 4
EXIT_DUPLICATE = 5
EXIT_SOLVER = 6
EXIT_CHECK_FAILED = 7


def _load_or_generate(args) -> graphs.Graph:
    if args.input:
        with open(args.input) as fh:
            return load_graph(fh.read())
    if args.generate:
        return generators.generate(args.generate, seed=args.seed)
    raise GraphFormatError("either --input or --generate is required")


def _make_routing(g, args, seed):
    net = network(g, trace=bool(args.trace_rounds))
    params = default_params(g, seed)
    if args.rho or args.imax or args.g:
        params = RoutingParams(
            rho=float(args.rho) if args.rho else params.rho,
            i_max=int(args.imax) if args.imax else params.i_max,
            g=int(args.g) if args.g else params.g,
            seed=seed,
        )
    return net, build_routing(net, params)


def _emit(report: dict, args, started: float) -> None:
    elapsed = time.perf_counter() - started
    if getattr(args, "timing", False):
        report["wall_time_s"] = elapsed
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print(f"elapsed: {elapsed:.3f}s", file=sys.stderr)


def _knobs(args) -> SolverKnobs:
    if getattr(args, "floor", None) is None:
        return DEFAULT_KNOBS
    return SolverKnobs(tolerance_floor=float(args.floor))


def cmd_generate(args) -> int:
    g = generators.generate(args.spec, seed=args.seed)
    text = dump_graph(g)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _sssp_once(g, args, seed) -> dict:
    net, R = _make_routing(g, args, seed)
    source = int(args.source) - 1
    res = sssp(net, R, source, args.eps, derive_seed(seed, "sssp"), _knobs(args))
    report = {
        "command": "sssp",
        "n": g.n,
        "m": g.m,
        "eps": args.eps,
        "seed": seed,
        "source": int(args.source),
        "rounds": res.rounds,
        "loop_iterations": res.loop_iterations,
        "alpha_hat": R.alpha_hat,
        "result": res.to_dict(),
    }
    if not args.no_oracle:
        exact, _, _ = oracles.dijkstra(g, source)
        stretch = [
            res.dist[v] / exact[v] if exact[v] > 0 else 1.0
            for v in range(g.n)
        ]
        report["stretch_max"] = float(max(stretch))
        report["result"]["stretch_max"] = report["stretch_max"]
        report["ok"] = bool(report["stretch_max"] <= (1 + args.eps) * (1 + 1e-9))
    if args.trace_rounds:
        net.write_trace(args.trace_rounds)
    return report


def cmd_sssp(args) -> int:
    started = time.perf_counter()
    if args.batch:
        return _batch(args, _sssp_once, started)
    g = _load_or_generate(args)
    report = _sssp_once(g, args, args.seed)
    _emit(report, args, started)
    return EXIT_OK if report.get("ok", True) else EXIT_CHECK_FAILED


def _demand_for(g, args, seed) -> np.ndarray:
    if args.demand:
        with open(args.demand) as fh:
            return parse_demand(fh.read(), g.n)
    if args.pair:
        s, t = (int(x) for x in args.pair.split(","))
        d = np.zeros(g.n)
        d[s - 1], d[t - 1] = 1.0, -1.0
        return d
    rng = np.random.default_rng(derive_seed(seed, "demand"))
    d = rng.standard_normal(g.n)
    d -= d.mean()
    return d


def _transship_once(g, args, seed) -> dict:
    net, R = _make_routing(g, args, seed)
    d = _demand_for(g, args, seed)
    sol = solve_transshipment(net, R, d, args.eps)
    report = {
        "command": "transship",
        "n": g.n,
        "m": g.m,
        "eps": args.eps,
        "seed": seed,
        "cost": sol.cost,
        "dual": sol.dual,
        "rounds": sol.rounds,
        "iterations": sol.iterations,
        "alpha_hat": R.alpha_hat,
        "residual": float(np.abs(net.apply_B(sol.flow) - d).sum()),
    }
    if not args.no_oracle:
        opt = oracles.exact_transshipment(g, d).opt
        report["opt"] = opt
        report["cost_ratio"] = sol.cost / opt if opt > 0 else 1.0
        report["ok"] = bool(report["cost_ratio"] <= (1 + args.eps) * (1 + 1e-9))
    if args.trace_rounds:
        net.write_trace(args.trace_rounds)
    return report


def cmd_transship(args) -> int:
    started = time.perf_counter()
    if args.batch:
        return _batch(args, _transship_once, started)
    g = _load_or_generate(args)
    report = _transship_once(g, args, args.seed)
    _emit(report, args, started)
    return EXIT_OK if report.get("ok", True) else EXIT_CHECK_FAILED


def _route_audit_once(g, args, seed) -> dict:
    net, R = _make_routing(g, args, seed)
    rng = np.random.default_rng(derive_seed(seed, "audit"))
    worst_resid = 0.0
    for _ in range(args.pairs):
        d = rng.standard_normal(g.n)
        d -= d.mean()
        f = route(R, d)
        resid = float(np.abs(graphs.apply_B(g, f) - d).sum())
        worst_resid = max(worst_resid, resid / max(1.0, float(np.abs(d).sum())))
    ratio = pair_competitiveness(R, pairs=args.pairs, seed=seed)
    report = {
        "command": "route_audit",
        "n": g.n,
        "m": g.m,
        "seed": seed,
        "build_rounds": R.build_rounds,
        "route_rounds": R.route_rounds,
        "route_transpose_rounds": R.route_t_rounds,
        "max_pair_ratio": ratio,
        "max_routing_residual": worst_resid,
        "ok": bool(worst_resid <= 1e-9),
    }
    if args.trace_rounds:
        net.write_trace(args.trace_rounds)
    return report


def cmd_route_audit(args) -> int:
    started = time.perf_counter()
    g = _load_or_generate(args)
    report = _route_audit_once(g, args, args.seed)
    _emit(report, args, started)
    return EXIT_OK if report["ok"] else EXIT_CHECK_FAILED


def _batch(args, runner, started: float) -> int:
    rows = []
    all_ok = True
    for i in range(args.batch):
        seed = derive_seed(args.seed, "batch", i)
        g = generators.generate(args.generate, seed=seed)
        report = runner(g, args, seed)
        report["instance"] = i
        rows.append(report)
        all_ok &= report.get("ok", True)
    if args.format == "csv":
        cols = sorted({k for r in rows for k in r if not isinstance(r[k], (dict, list))})
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=cols, extrasaction="ignore")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: r.get(k) for k in cols})
        text = buf.getvalue()
    else:
        text = json.dumps(rows, sort_keys=True, indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print(f"elapsed: {time.perf_counter() - started:.3f}s", file=sys.stderr)
    return EXIT_OK if all_ok else EXIT_CHECK_FAILED


def _add_common(sp) -> None:
    sp.add_argument("--input")
    sp.add_argument("--generate")
    sp.add_argument("--eps", type=float, default=0.1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--rho", type=float)
    sp.add_argument("--imax", type=int)
    sp.add_argument("--g", type=int)
    sp.add_argument("--floor", type=float, help="inner solve tolerance floor (default 0.02)")
    sp.add_argument("--no-oracle", action="store_true")
    sp.add_argument("--out")
    sp.add_argument("--format", choices=["json", "csv"], default="json")
    sp.add_argument("--trace-rounds", dest="trace_rounds")
    sp.add_argument("--timing", action="store_true")
    sp.add_argument("--batch", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="minorflow")
    sub = ap.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write an edge-list file from a generator spec")
    gen.add_argument("--spec", required=True)
    gen.add_argument("--seed", type=int, default=None)
    gen.add_argument("--out")
    gen.set_defaults(fn=cmd_generate)

    ss = sub.add_parser("sssp", help="approximate shortest-path tree with oracle audit")
    _add_common(ss)
    ss.add_argument("--source", type=int, default=1)
    ss.set_defaults(fn=cmd_sssp)

    ts = sub.add_parser("transship", help="approximate transshipment with oracle audit")
    _add_common(ts)
    ts.add_argument("--demand", help="demand file with lines 'v d_v'")
    ts.add_argument("--pair", help="unit pair demand 's,t' (1-based)")
    ts.set_defaults(fn=cmd_transship)

    ra = sub.add_parser("route-audit", help="routing exactness and competitiveness audit")
    _add_common(ra)
    ra.add_argument("--pairs", type=int, default=64)
    ra.set_defaults(fn=cmd_route_audit)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except DuplicateEdgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DUPLICATE
    except DisconnectedGraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DISCONNECTED
    except WeightRangeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_WEIGHT
    except (GraphFormatError, GraphError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
