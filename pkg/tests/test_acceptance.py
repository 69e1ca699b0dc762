"""Acceptance suite: one criterion per test, one printed PASS/FAIL line each.

Run with `pytest tests/test_acceptance.py -v -s`. Tolerances are pinned here;
elapsed wall time per criterion is printed for budget transparency.
"""

import math
import time

import numpy as np

from minorflow.cli import main as cli_main
from minorflow.generators import generate
from minorflow.graphs import Graph, GraphError, apply_B, dual_feasibility
from minorflow.ldd import QUALITY_CONSTANT, sample_ldd, verify_ldd
from minorflow.oracles import (
    dfs_tree_sums,
    dijkstra,
    exact_transshipment,
    kruskal,
    pointer_chase_cycles,
)
from minorflow.primitives import find_cycles, mst_boruvka, root_forest, subtree_sums
from minorflow.routing import build_routing, default_params, route, route_transpose
from minorflow.simulator import network
from minorflow.sssp import esssp, sssp
from minorflow.transshipment import solve_transshipment

from conftest import make_routing, random_connected_graph, random_proper_demand


def _log2ceil(n: int) -> int:
    return int(math.ceil(math.log2(max(n, 2))))


def _report(name: str, ok: bool, detail: str, started: float) -> None:
    status = "PASS" if ok else "FAIL"
    print(f"[ACCEPTANCE] {name}: {status} ({detail}; {time.perf_counter() - started:.1f}s)")
    assert ok, f"{name}: {detail}"


def derive_seed_local(i: int, s: int) -> int:
    return 1_000_003 * i + 97 * s + 13


def _heavy_weight_graph(seed: int) -> Graph:
    """Random connected graph with n in [5,100] and weights in [1, n**4]."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 101))
    p = min(1.0, 3.0 / max(n - 1, 1) + 0.1 * rng.random())
    for _ in range(200):
        pairs = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
        w = rng.integers(1, n**4 + 1, size=len(pairs)).astype(float)
        try:
            return Graph.from_edges(
                n, [(u + 1, v + 1, w[i]) for i, (u, v) in enumerate(pairs)]
            )
        except GraphError:
            continue
    raise AssertionError("could not draw a connected heavy graph")


def _suite_graph(seed: int, n_max: int) -> Graph:
    kinds = ["er", "geometric", "tree", "grid"]
    rng = np.random.default_rng(seed)
    kind = kinds[seed % len(kinds)]
    n = int(rng.integers(max(8, n_max // 3), n_max + 1))
    if kind == "er":
        p = min(1.0, 3.0 / max(n - 1, 1) + 0.15 * rng.random())
        return generate(f"er:{n}:{p:.4f}:w1-16", seed=seed)
    if kind == "geometric":
        return generate(f"geometric:{n}:{max(0.35, 2.2 / math.sqrt(n)):.3f}:w1-16", seed=seed)
    if kind == "tree":
        return generate(f"tree:{n}:w1-16", seed=seed)
    side = max(2, int(math.sqrt(n)))
    return generate(f"grid:{side}x{side}:w1-16", seed=seed)


def test_criterion_1_routing_exactness():
    started = time.perf_counter()
    worst = 0.0
    for i in range(50):
        g = _heavy_weight_graph(1000 + i)
        net, R = make_routing(g, seed=i)
        rng = np.random.default_rng(5000 + i)
        for _ in range(100):
            d = random_proper_demand(rng, g.n)
            resid = float(np.abs(apply_B(g, route(R, d)) - d).sum())
            worst = max(worst, resid / max(1.0, float(np.abs(d).sum())))
    _report(
        "criterion 1 routing exactness (50 graphs x 100 demands)",
        worst <= 1e-9,
        f"worst relative residual {worst:.2e}",
        started,
    )


def test_criterion_2_adjointness():
    started = time.perf_counter()
    worst = 0.0
    for i in range(5):
        g = random_connected_graph(2000 + i, n_lo=8, n_hi=60, w_hi=16)
        net, R = make_routing(g, seed=i)
        rng = np.random.default_rng(6000 + i)
        for _ in range(100):
            d = random_proper_demand(rng, g.n)
            c = rng.standard_normal(g.m)
            lhs = float(route(R, d) @ c)
            rhs = float(d @ route_transpose(R, c))
            worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs)))
    _report(
        "criterion 2 adjointness (500 pairs)",
        worst <= 1e-8,
        f"worst relative mismatch {worst:.2e}",
        started,
    )


def test_criterion_3_ldd_properties():
    started = time.perf_counter()
    # (a) radius + structure hold surely on every sample across a graph suite
    violations = 0
    samples = 0
    for i in range(25):
        g = random_connected_graph(3000 + i, n_lo=5, n_hi=40, w_hi=8)
        net = network(g)
        for s in range(40):
            rho = 1.0 + (s % 6) * 4.0
            p = sample_ldd(net, rho, derive_seed_local(i, s))
            samples += 1
            if verify_ldd(g, p):
                violations += 1
    # (b) separation frequency on a unit path at 99% confidence
    g = generate("path:100:unit")
    net = network(g)
    rho = 200.0
    n_samples = 10_000
    lam = QUALITY_CONSTANT * math.log(g.n) / rho
    dists = [1, 2, 4, 8]
    pairs = {d: [(x, x + d) for x in range(0, g.n - d, 7)] for d in dists}
    cut = {d: np.zeros(len(pairs[d])) for d in dists}
    for s in range(n_samples):
        p = sample_ldd(net, rho, 770_000 + s)
        comp = p.component_of
        for d in dists:
            for j, (x, y) in enumerate(pairs[d]):
                if comp[x] != comp[y]:
                    cut[d][j] += 1
    margin = 3.0 * math.sqrt(math.log(1 / 0.01) / n_samples)
    sep_ok = True
    sep_detail = []
    for d in dists:
        freq = float(cut[d].max()) / n_samples
        bound = lam * d + margin
        sep_ok &= freq <= bound
        sep_detail.append(f"d={d}: {freq:.4f}<={bound:.4f}")
    _report(
        "criterion 3 ldd properties (radius surely + separation)",
        violations == 0 and samples == 1000 and sep_ok,
        f"{samples} samples, {violations} violations; " + ", ".join(sep_detail),
        started,
    )


def test_criterion_4_transshipment_approximation():
    started = time.perf_counter()
    eps = 0.1
    all_ok = True
    worst_ratio = 0.0
    worst_dual = math.inf
    for i in range(30):
        g = _suite_graph(4000 + i, n_max=60)
        net, R = make_routing(g, seed=i)
        rng = np.random.default_rng(8000 + i)
        d = random_proper_demand(rng, g.n)
        sol = solve_transshipment(net, R, d, eps)
        opt = exact_transshipment(g, d).opt
        resid = float(np.abs(apply_B(g, sol.flow) - d).sum())
        ok = (
            sol.cost <= (1 + eps) * opt * (1 + 1e-9)
            and resid <= 1e-9 * max(1.0, float(np.abs(d).sum()))
            and dual_feasibility(g, sol.potential) <= 1 + 1e-9
            and sol.dual >= opt / (1 + eps) * (1 - 1e-9)
        )
        all_ok &= ok
        worst_ratio = max(worst_ratio, sol.cost / opt)
        worst_dual = min(worst_dual, sol.dual / opt)
    _report(
        "criterion 4 transshipment approximation (30 instances, eps=0.1)",
        all_ok,
        f"worst cost/opt {worst_ratio:.4f}, worst dual/opt {worst_dual:.4f}",
        started,
    )


def test_criterion_5_sssp_stretch():
    started = time.perf_counter()
    eps = 0.2
    all_ok = True
    worst = 0.0
    for i in range(20):
        g = _suite_graph(9000 + i, n_max=50)
        net, R = make_routing(g, seed=i)
        source = i % g.n
        res = sssp(net, R, source, eps, seed=500 + i)
        exact, _, _ = dijkstra(g, source)
        inst_ok = True
        for v in range(g.n):
            if v == source:
                inst_ok &= res.dist[v] == 0.0
                continue
            stretch = res.dist[v] / exact[v]
            worst = max(worst, stretch)
            inst_ok &= stretch <= (1 + eps) * (1 + 1e-9)
            p = int(res.parent[v])
            e = int(res.parent_edge[v])
            inst_ok &= abs(res.dist[v] - res.dist[p] - g.weight[e]) <= 1e-9 * max(1.0, res.dist[v])
        # pointer chains must reach the source
        for v in range(g.n):
            u, hops = v, 0
            while u != source:
                u = int(res.parent[u])
                hops += 1
                inst_ok &= hops <= g.n
                if hops > g.n:
                    break
        all_ok &= inst_ok
    _report(
        "criterion 5 sssp stretch (20 instances, eps=0.2)",
        all_ok,
        f"worst per-vertex stretch {worst:.4f}",
        started,
    )


def test_criterion_6_esssp_expectation():
    started = time.perf_counter()
    eps = 0.5
    all_ok = True
    details = []
    for i in range(5):
        g = generate("er:30:0.18:w1-16", seed=12_000 + i)
        net, R = make_routing(g, seed=i)
        source = 0
        d = np.ones(g.n)
        d[source] = -(g.n - 1)
        exact, _, _ = dijkstra(g, source)
        base = float(sum(d[v] * exact[v] for v in range(g.n) if v != source))
        ratios = []
        for s in range(200):
            mask = esssp(net, R, source, d, eps, seed=31337 + 1000 * i + s)
            rf = root_forest(net, mask, [source])
            num = float(sum(d[v] * rf.depth_dist[v] for v in range(g.n) if v != source))
            ratios.append(num / base)
        mean = float(np.mean(ratios))
        sem = float(np.std(ratios)) / math.sqrt(len(ratios))
        bound = (1 + eps) * (1 + 3 * sem / max(mean, 1e-12))
        all_ok &= mean <= bound
        details.append(f"inst{i}: mean {mean:.4f} <= {bound:.4f}")
    _report(
        "criterion 6 esssp expectation (5 instances x 200 seeds, eps=0.5)",
        all_ok,
        "; ".join(details),
        started,
    )


def test_criterion_7_round_accounting():
    started = time.perf_counter()
    ok = True
    details = []
    # (a) Boruvka within 2*ceil(log2 n) + 3 recorded rounds, constant across the suite
    worst_ratio = 0.0
    for i in range(15):
        g = random_connected_graph(13_000 + i, n_lo=8, n_hi=80)
        net = network(g)
        mst_boruvka(net)
        bound = 2 * _log2ceil(g.n) + 3
        worst_ratio = max(worst_ratio, net.round_counter / bound)
        ok &= net.round_counter <= bound
    details.append(f"mst rounds/bound worst {worst_ratio:.2f}")
    # (b) basic vector primitives cost exactly one round each
    g = random_connected_graph(13_100, n_hi=20)
    net = network(g)
    r0 = net.round_counter
    net.dot_nodes(np.ones(g.n), np.ones(g.n))
    net.norm(np.ones(g.m), p=1, kind="edge")
    net.apply_B(np.zeros(g.m))
    net.apply_Bt(np.zeros(g.n))
    net.apply_W(np.zeros(g.m))
    ok &= net.round_counter - r0 == 5
    details.append(f"5 primitives cost {net.round_counter - r0} rounds")
    # (c) build_routing total within g*i_max*polylog(n), polylog exponent 1
    for i in range(8):
        g = random_connected_graph(13_200 + i, n_lo=10, n_hi=80, w_hi=16)
        net = network(g)
        R = build_routing(net, default_params(g, seed=i))
        L = _log2ceil(g.n)
        bound = 4 * R.params.g * R.params.i_max * (2 * L + 4) + 8 * (2 * L + 4)
        ok &= R.build_rounds <= bound
    details.append("build rounds within 4*g*i_max*(2*log2(n)+4) + 8*(2*log2(n)+4)")
    _report("criterion 7 round accounting", ok, "; ".join(details), started)


def test_criterion_8_subroutine_oracle_equivalence():
    started = time.perf_counter()
    ok = True
    for i in range(100):
        g = random_connected_graph(14_000 + i, n_lo=5, n_hi=40)
        mask = mst_boruvka(network(g))
        w, edges = kruskal(g)
        ok &= sorted(np.flatnonzero(mask).tolist()) == edges
        ok &= abs(float(g.weight[mask].sum()) - w) <= 1e-9 * max(1.0, w)
    for i in range(100):
        g = random_connected_graph(15_000 + i, n_lo=5, n_hi=40)
        rng = np.random.default_rng(16_000 + i)
        succ = np.arange(g.n)
        out_eid = np.full(g.n, -1)
        for v in range(g.n):
            if rng.random() < 0.1:
                continue
            nbrs, eids = g.neighbors(v)
            j = int(rng.integers(len(nbrs)))
            succ[v], out_eid[v] = int(nbrs[j]), int(eids[j])
        rep = find_cycles(network(g), succ, out_eid, np.random.default_rng(i))
        ok &= rep.on_cycle.tolist() == pointer_chase_cycles(succ).tolist()
    for i in range(100):
        g = random_connected_graph(17_000 + i, n_lo=5, n_hi=40)
        net = network(g)
        rf = root_forest(net, mst_boruvka(net), [i % g.n])
        x = np.random.default_rng(18_000 + i).standard_normal(g.n)
        desc, anc = subtree_sums(net, rf, x)
        odesc, oanc = dfs_tree_sums(g.n, rf.parent, x)
        ok &= bool(np.allclose(desc, odesc) and np.allclose(anc, oanc))
    _report(
        "criterion 8 subroutine oracle equivalence (3 x 100 instances)",
        ok,
        "mst=kruskal, cycles=pointer-chase, sums=dfs",
        started,
    )


def test_criterion_9_determinism(tmp_path):
    started = time.perf_counter()
    runs = {
        "gen": ["generate", "--spec", "er:30:0.2:w1-16:seed7"],
        "sssp": ["sssp", "--generate", "er:20:0.25:w1-8", "--eps", "0.2", "--seed", "4"],
        "transship": ["transship", "--generate", "er:20:0.25:w1-8", "--eps", "0.1", "--seed", "9"],
        "audit": ["route-audit", "--generate", "er:25:0.2:w1-8", "--pairs", "32", "--seed", "2"],
        "batch": [
            "transship", "--generate", "er:12:0.3:w1-4", "--batch", "3",
            "--format", "csv", "--eps", "0.2", "--seed", "11",
        ],
    }
    ok = True
    for name, args in runs.items():
        a = tmp_path / f"{name}_a.out"
        b = tmp_path / f"{name}_b.out"
        assert cli_main(args + ["--out", str(a)]) == 0
        assert cli_main(args + ["--out", str(b)]) == 0
        ok &= a.read_bytes() == b.read_bytes()
    _report(
        "criterion 9 determinism (byte-identical reports)",
        ok,
        f"{len(runs)} pipelines rerun",
        started,
    )
