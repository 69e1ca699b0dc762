"""Composite l1-oblivious routing built from sampled LDD levels plus a spanning tree.

Level i holds g decompositions of radius rho**i; routing a demand walks the levels,
sending a 1/g fraction of the current residual to each decomposition's centers
along its shortest-path forest, and ships whatever remains to the root of an MST.
The operator is linear, evaluable from the left and the right, and exact:
B (R d) = d for every proper demand.

Evaluation has two interchangeable paths: a compositional one that walks the
levels charging honest round costs, and a dense matrix fast path materialized at
build time (the compositional map applied to the identity) that charges the exact
round cost recorded from one compositional run. Tests pin their equality.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import graphs
from .graphs import Graph, GraphError
from .ldd import LddPartition, sample_ldd
from .primitives import RootedForest, mst_boruvka, root_forest, tree_pipeline_rounds
from .simulator import MinorNetwork


def derive_seed(master: int, *labels) -> int:
    """Stable 63-bit child seed from a master seed and a label path."""
    text = repr((int(master),) + tuple(labels)).encode()
    return int.from_bytes(hashlib.sha256(text).digest()[:8], "big") >> 1


@dataclass(frozen=True)
class RoutingParams:
    rho: float
    i_max: int
    g: int
    seed: int

    def validate(self, graph: Graph) -> None:
        if graph.n <= 1:
            return
        if self.rho < 2:
            raise GraphError(f"rho must be >= 2, got {self.rho}")
        if self.i_max < 1 or self.g < 1:
            raise GraphError("i_max and g must be >= 1")
        target = float(graph.n) ** (graph.weight_exponent + 1)
        if self.rho**self.i_max < target:
            raise GraphError(
                f"rho**i_max = {self.rho ** self.i_max} below n**(C+1) = {target}"
            )


def default_params(graph: Graph, seed: int, g_cap: int = 64, c_g: float = 4.0) -> RoutingParams:
    """Desk-scale defaults: i_max ~ (log2 n)^{1/4}, minimal rho, g ~ c_g log2 n."""
    n = graph.n
    if n <= 1:
        return RoutingParams(rho=2.0, i_max=1, g=1, seed=seed)
    log2n = math.log2(n)
    i_max = max(1, round(log2n**0.25))
    target = float(n) ** (graph.weight_exponent + 1)
    rho = max(2, math.ceil(target ** (1.0 / i_max)))
    while float(rho) ** i_max < target:
        rho += 1
    g = min(g_cap, max(1, math.ceil(c_g * log2n)))
    return RoutingParams(rho=float(rho), i_max=i_max, g=g, seed=seed)


@dataclass
class RoutingOperator:
    net: MinorNetwork
    params: RoutingParams
    levels: list  # list of lists of LddPartition, level i sampled at radius rho**i
    tree: RootedForest
    tree_partition: LddPartition
    dense: np.ndarray  # m x n, the full operator
    route_rounds: int = 0
    route_t_rounds: int = 0
    build_rounds: int = 0
    alpha_hat: float | None = None
    solve_cache: dict = field(default_factory=dict, repr=False)

    @property
    def graph(self) -> Graph:
        return self.net.graph


# -- single-partition routing ---------------------------------------------------


def _partition_signs(g: Graph, p: LddPartition) -> tuple[np.ndarray, np.ndarray]:
    """Nodes with a parent edge and the canonical sign of child-to-parent flow."""
    has = np.flatnonzero(p.sp_parent != np.arange(g.n))
    sign = np.where(g.edge_u[p.sp_parent_edge[has]] == has, 1.0, -1.0)
    return has, sign


def _ldd_route_mat(g: Graph, p: LddPartition, D: np.ndarray) -> np.ndarray:
    """Forest routing toward centers: on each parent edge, the signed descendant sum."""
    desc = D.copy()
    order, bounds, max_depth = p.levels()
    for d in range(max_depth, 0, -1):
        nodes = order[bounds[d] : bounds[d + 1]]
        np.add.at(desc, p.sp_parent[nodes], desc[nodes])
    F = np.zeros((g.m,) + D.shape[1:])
    has, sign = _partition_signs(g, p)
    if has.size:
        F[p.sp_parent_edge[has]] = (sign.reshape((-1,) + (1,) * (D.ndim - 1))) * desc[has]
    return F


def _ldd_route_t_mat(g: Graph, p: LddPartition, C: np.ndarray) -> np.ndarray:
    """Adjoint: per node, the signed sum of C over its center-to-node forest path."""
    q = np.zeros((g.n,) + C.shape[1:])
    has, sign = _partition_signs(g, p)
    if has.size:
        q[has] = (sign.reshape((-1,) + (1,) * (C.ndim - 1))) * C[p.sp_parent_edge[has]]
    anc = np.zeros_like(q)
    order, bounds, max_depth = p.levels()
    for d in range(1, max_depth + 1):
        nodes = order[bounds[d] : bounds[d + 1]]
        anc[nodes] = anc[p.sp_parent[nodes]] + q[p.sp_parent[nodes]]
    return anc + q


def _apply_B_mat(g: Graph, F: np.ndarray) -> np.ndarray:
    out = np.zeros((g.n,) + F.shape[1:])
    np.add.at(out, g.edge_u, F)
    np.subtract.at(out, g.edge_v, F)
    return out


def _apply_Bt_mat(g: Graph, X: np.ndarray) -> np.ndarray:
    return X[g.edge_u] - X[g.edge_v]


def ldd_route(net: MinorNetwork, p: LddPartition, d: np.ndarray) -> np.ndarray:
    """Flow R(P)·d for one decomposition (demand need not be proper)."""
    d = graphs.node_vector(net.graph, d)
    net.charge(tree_pipeline_rounds(net.graph.n), "ldd_route")
    return _ldd_route_mat(net.graph, p, d)


def ldd_route_transpose(net: MinorNetwork, p: LddPartition, c: np.ndarray) -> np.ndarray:
    """Node vector R(P)^T·c for one decomposition."""
    c = graphs.edge_vector(net.graph, c)
    net.charge(tree_pipeline_rounds(net.graph.n), "ldd_route_transpose")
    return _ldd_route_t_mat(net.graph, p, c)


# -- composite operator ----------------------------------------------------------


def _route_impl(R: RoutingOperator, D: np.ndarray, charge: bool) -> np.ndarray:
    g = R.graph
    net = R.net
    tcost = tree_pipeline_rounds(g.n)
    cur = D
    F = np.zeros((g.m,) + D.shape[1:])
    for level in R.levels:
        fl = np.zeros_like(F)
        for p in level:
            fl += _ldd_route_mat(g, p, cur)
            if charge:
                net.charge(tcost, "ldd_route")
        fl /= len(level)
        F += fl
        cur = cur - _apply_B_mat(g, fl)
        if charge:
            net.charge(1, "apply_B")
    F += _ldd_route_mat(g, R.tree_partition, cur)
    if charge:
        net.charge(tcost, "tree_route")
    return F


def _route_t_impl(R: RoutingOperator, C: np.ndarray, charge: bool) -> np.ndarray:
    g = R.graph
    net = R.net
    tcost = tree_pipeline_rounds(g.n)
    a = _ldd_route_t_mat(g, R.tree_partition, C)
    if charge:
        net.charge(tcost, "tree_route_transpose")
    for level in reversed(R.levels):
        x_i = np.zeros((g.n,) + C.shape[1:])
        bta = _apply_Bt_mat(g, a)
        corr = np.zeros_like(x_i)
        for p in level:
            x_i += _ldd_route_t_mat(g, p, C)
            corr += _ldd_route_t_mat(g, p, bta)
            if charge:
                net.charge(2 * tcost, "ldd_route_transpose")
        if charge:
            net.charge(1, "apply_Bt")
        a = x_i / len(level) + a - corr / len(level)
    return a


def build_routing(net: MinorNetwork, params: RoutingParams) -> RoutingOperator:
    """Sample all levels, build the spanning tree, and materialize the operator."""
    g = net.graph
    params.validate(g)
    r0 = net.round_counter
    n = g.n

    levels: list[list[LddPartition]] = []
    if n > 1:
        for i in range(1, params.i_max + 1):
            radius = float(params.rho) ** i
            levels.append(
                [
                    sample_ldd(net, radius, derive_seed(params.seed, "ldd", i, j))
                    for j in range(params.g)
                ]
            )

    mst = mst_boruvka(net)
    tree = root_forest(net, mst, [0])
    tree_partition = LddPartition(
        rho=float("inf"),
        component_of=np.zeros(n, dtype=np.int64),
        sp_parent=tree.parent,
        sp_parent_edge=tree.parent_edge,
        root_dist=tree.depth_dist,
        depth=tree.depth,
    )

    R = RoutingOperator(
        net=net,
        params=params,
        levels=levels,
        tree=tree,
        tree_partition=tree_partition,
        dense=np.zeros((g.m, n)),
    )
    R.dense = _route_impl(R, np.eye(n), charge=False)

    # one honest compositional run calibrates the per-evaluation round cost
    probe = np.zeros(n)
    if n > 1:
        probe[0], probe[1] = 1.0, -1.0
    before = net.round_counter
    got = _route_impl(R, probe, charge=True)
    R.route_rounds = net.round_counter - before
    if not np.allclose(got, R.dense @ probe, atol=1e-9):
        raise AssertionError("dense routing disagrees with compositional routing")
    before = net.round_counter
    cprobe = np.zeros(g.m)
    if g.m:
        cprobe[0] = 1.0
    got_t = _route_t_impl(R, cprobe, charge=True)
    R.route_t_rounds = net.round_counter - before
    if not np.allclose(got_t, R.dense.T @ cprobe, atol=1e-9):
        raise AssertionError("dense transpose disagrees with compositional transpose")

    R.build_rounds = net.round_counter - r0
    return R


def route(R: RoutingOperator, d: np.ndarray, compositional: bool = False) -> np.ndarray:
    """Flow R·d for a proper demand; B(Rd) = d up to float tolerance."""
    d = graphs.node_vector(R.graph, d)
    if not graphs.is_proper(d):
        raise GraphError("route requires a proper demand")
    if compositional:
        return _route_impl(R, d, charge=True)
    R.net.charge(R.route_rounds, "route")
    return R.dense @ d


def route_transpose(R: RoutingOperator, c: np.ndarray, compositional: bool = False) -> np.ndarray:
    """Node vector R^T·c, the adjoint of route."""
    c = graphs.edge_vector(R.graph, c)
    if compositional:
        return _route_t_impl(R, c, charge=True)
    R.net.charge(R.route_t_rounds, "route_transpose")
    return R.dense.T @ c


def estimate_alpha_hat(R: RoutingOperator, pairs: int = 64) -> float:
    """Empirical competitiveness: worst routed-cost/distance over random pairs,
    times a safety factor of 2, floored at 2."""
    if R.alpha_hat is not None:
        return R.alpha_hat
    from .oracles import dijkstra  # local import to keep oracle use explicit

    g = R.graph
    worst = 1.0
    if g.n >= 2:
        rng = np.random.default_rng(derive_seed(R.params.seed, "alpha_hat"))
        dist_cache: dict[int, np.ndarray] = {}
        for _ in range(pairs):
            s = int(rng.integers(g.n))
            t = int(rng.integers(g.n))
            if s == t:
                continue
            if s not in dist_cache:
                dist_cache[s] = dijkstra(g, s)[0]
            d = np.zeros(g.n)
            d[s], d[t] = 1.0, -1.0
            cost = graphs.flow_cost(g, route(R, d))
            worst = max(worst, cost / float(dist_cache[s][t]))
    R.alpha_hat = max(2.0, 2.0 * worst)
    return R.alpha_hat


def pair_competitiveness(R: RoutingOperator, pairs: int = 64, seed: int | None = None) -> float:
    """Max routed-cost/distance ratio over sampled pairs (diagnostic, no safety factor)."""
    from .oracles import dijkstra

    g = R.graph
    if g.n < 2:
        return 1.0
    rng = np.random.default_rng(derive_seed(seed if seed is not None else R.params.seed, "audit"))
    worst = 0.0
    dist_cache: dict[int, np.ndarray] = {}
    for _ in range(pairs):
        s = int(rng.integers(g.n))
        t = int(rng.integers(g.n))
        if s == t:
            continue
        if s not in dist_cache:
            dist_cache[s] = dijkstra(g, s)[0]
        d = np.zeros(g.n)
        d[s], d[t] = 1.0, -1.0
        worst = max(worst, graphs.flow_cost(g, route(R, d)) / float(dist_cache[s][t]))
    return worst


def routing_diagnostics(R: RoutingOperator, d: np.ndarray, oracle=None) -> list[dict]:
    """Residual-mass trajectory per level; with an oracle callback, the potential
    opt(d_i) + ||d_i||_1 * rho^i is reported as well (diagnostic only)."""
    g = R.graph
    cur = graphs.node_vector(g, d)
    rows = []
    for i, level in enumerate(R.levels, start=1):
        fl = np.zeros(g.m)
        for p in level:
            fl += _ldd_route_mat(g, p, cur)
        fl /= len(level)
        cur = cur - _apply_B_mat(g, fl)
        row = {"level": i, "residual_l1": float(np.abs(cur).sum()), "rho_i": R.params.rho**i}
        if oracle is not None:
            opt = float(oracle(cur))
            row["opt"] = opt
            row["potential"] = opt + row["residual_l1"] * row["rho_i"]
        rows.append(row)
    return rows


def operator_to_json(R: RoutingOperator) -> str:
    return json.dumps(
        {
            "params": {
                "rho": R.params.rho,
                "i_max": R.params.i_max,
                "g": R.params.g,
                "seed": R.params.seed,
            },
            "levels": [[json.loads(p.to_json()) for p in level] for level in R.levels],
            "tree": {
                "in_forest": R.tree.in_forest.tolist(),
                "parent": R.tree.parent.tolist(),
                "parent_edge": R.tree.parent_edge.tolist(),
                "depth_dist": R.tree.depth_dist.tolist(),
                "depth": R.tree.depth.tolist(),
            },
        },
        sort_keys=True,
    )


def operator_from_json(net: MinorNetwork, text: str) -> RoutingOperator:
    """Rebuild a routing operator from serialized partitions (test fixtures).

    The dense matrix and per-evaluation round costs are rematerialized without
    sampling, so the reloaded operator routes identically to the original.
    """
    obj = json.loads(text)
    params = RoutingParams(**obj["params"])
    levels = [
        [LddPartition.from_json(json.dumps(p)) for p in level] for level in obj["levels"]
    ]
    t = obj["tree"]
    tree = RootedForest(
        in_forest=np.asarray(t["in_forest"], dtype=bool),
        parent=np.asarray(t["parent"], dtype=np.int64),
        parent_edge=np.asarray(t["parent_edge"], dtype=np.int64),
        depth_dist=np.asarray(t["depth_dist"], dtype=np.float64),
        depth=np.asarray(t["depth"], dtype=np.int64),
    )
    n = net.graph.n
    tree_partition = LddPartition(
        rho=float("inf"),
        component_of=np.zeros(n, dtype=np.int64),
        sp_parent=tree.parent,
        sp_parent_edge=tree.parent_edge,
        root_dist=tree.depth_dist,
        depth=tree.depth,
    )
    R = RoutingOperator(
        net=net,
        params=params,
        levels=levels,
        tree=tree,
        tree_partition=tree_partition,
        dense=np.zeros((net.graph.m, n)),
    )
    R.dense = _route_impl(R, np.eye(n), charge=False)
    probe = np.zeros(n)
    if n > 1:
        probe[0], probe[1] = 1.0, -1.0
    before = net.round_counter
    _route_impl(R, probe, charge=True)
    R.route_rounds = net.round_counter - before
    before = net.round_counter
    _route_t_impl(R, np.zeros(net.graph.m), charge=True)
    R.route_t_rounds = net.round_counter - before
    return R
