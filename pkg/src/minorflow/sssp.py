"""Approximate SSSP trees: expectation-good trees from flow sampling, then boosting.

An ESSSP tree is sampled from an approximate transshipment flow: every vertex
picks an outgoing edge with probability proportional to its positive out-flow,
the sampled graph's cycles are found and contracted (with distances through the
contracted component folded into the surviving edge weights), and the procedure
recurses until one supervertex remains. The SSSP loop repeatedly takes such a
tree plus a transshipment potential, keeps per-vertex parent pointers whenever
the new tree improves them, raises potentials by max-updates, and removes
vertices once their tree distance is within (1+eps) of their potential, which
itself never exceeds the true distance (so the final stretch bound holds
unconditionally).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import graphs
from .graphs import Graph, GraphError
from .primitives import find_cycles, root_forest, tree_pipeline_rounds
from .routing import RoutingOperator, build_routing, default_params, derive_seed
from .simulator import MinorNetwork
from .transshipment import SolverError, solve_transshipment


def _log2(n: int) -> float:
    return math.log2(max(n, 2))


@dataclass(frozen=True)
class SolverKnobs:
    """Desk-scale tuning knobs for the chained tolerances.

    tolerance_floor > 0 keeps inner transshipment solves from targeting gaps the
    MWU cannot reach in reasonable time; 0 restores the literal formulas.
    """

    tolerance_floor: float = 0.02
    esssp_epsilon_c: float = 0.25  # c in eps' = c * eps / log2(n)
    sssp_tree_c: float = 1.0  # constant in the tree call's eps * c / log2(n)
    sssp_loop_c: int = 8
    esssp_depth_c: int = 4


DEFAULT_KNOBS = SolverKnobs()


def _solve_eps(formula_eps: float, knobs: SolverKnobs) -> float:
    return min(0.9, max(formula_eps, knobs.tolerance_floor))


def sample_out_edges(
    g: Graph, f: np.ndarray, source: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """One outgoing edge per vertex, sampled proportionally to its positive out-flow.

    The source always carries a self-loop; a vertex without positive out-flow
    keeps a self-loop too (only possible for zero-demand vertices once the flow
    routes the demand exactly). succ[v] == v encodes the self-loop.
    """
    n = g.n
    tol_f = 1e-12 * max(1.0, float(np.abs(f).max()) if g.m else 1.0)
    succ = np.arange(n, dtype=np.int64)
    out_eid = np.full(n, -1, dtype=np.int64)
    for u in range(n):
        if u == source:
            continue
        nbrs, eids = g.neighbors(u)
        amt = np.where(g.edge_u[eids] == u, f[eids], -f[eids])
        amt = np.where(amt > tol_f, amt, 0.0)
        total = float(amt.sum())
        if total <= 0.0:
            continue
        pick = int(rng.choice(len(eids), p=amt / total))
        succ[u] = int(nbrs[pick])
        out_eid[u] = int(eids[pick])
    return succ, out_eid


def esssp(
    net: MinorNetwork,
    R: RoutingOperator,
    source: int,
    d: np.ndarray,
    eps: float,
    seed: int,
    knobs: SolverKnobs = DEFAULT_KNOBS,
    depth: int = 0,
    max_depth: int | None = None,
) -> np.ndarray:
    """Sample a spanning tree whose expected demand-weighted distances are good.

    Requires d proper with d_v >= 0 off the source. Returns a bool edge mask.
    """
    g = R.graph
    n = g.n
    d = graphs.node_vector(g, d)
    scale = max(1.0, float(np.abs(d).sum()))
    if not graphs.is_proper(d):
        raise GraphError("esssp demand is not proper")
    off = np.delete(d, source) if n > 1 else np.zeros(0)
    if off.size and float(off.min()) < -1e-9 * scale:
        raise GraphError("esssp demand must be nonnegative off the source")
    if max_depth is None:
        max_depth = knobs.esssp_depth_c * int(math.ceil(_log2(n))) + 8
    if depth > max_depth:
        raise SolverError("esssp recursion depth cap exceeded")
    mask = np.zeros(g.m, dtype=bool)
    if n == 1:
        return mask
    if float(np.abs(off).sum()) <= 1e-12 * scale:
        return R.tree.in_forest.copy()  # zero demand: any spanning tree is optimal

    eps_prime = knobs.esssp_epsilon_c * eps / _log2(n)
    sol = solve_transshipment(net, R, d, _solve_eps(eps_prime, knobs))
    f = sol.flow

    rng = np.random.default_rng(derive_seed(seed, "sample", depth))
    succ, out_eid = sample_out_edges(g, f, source, rng)

    report = find_cycles(net, succ, out_eid, np.random.default_rng(derive_seed(seed, "cycles", depth)))
    comp = report.component

    # Per-component cycle weight and distance-to-cycle along sampled chains.
    w_cycle = np.zeros(n)
    cyc_eids = np.flatnonzero(report.cycle_edges)
    if cyc_eids.size:
        np.add.at(w_cycle, comp[g.edge_u[cyc_eids]], g.weight[cyc_eids])
    dtc = np.zeros(n)
    known = report.on_cycle.copy()
    while not known.all():
        ready = ~known & known[succ]
        if not ready.any():
            raise RuntimeError("sampled graph has a chain that reaches no cycle")
        dtc[ready] = g.weight[out_eid[ready]] + dtc[succ[ready]]
        known |= ready
    net.charge(tree_pipeline_rounds(n), "esssp contraction")

    leaders = np.unique(comp)
    k = len(leaders)
    new_of = np.zeros(n, dtype=np.int64)
    new_of[leaders] = np.arange(k)
    sid = new_of[comp]

    if k > 1:
        # Contracted graph: minimum reweighted edge per supervertex pair.
        best: dict[tuple[int, int], tuple[float, int]] = {}
        for e in range(g.m):
            a, b = int(sid[g.edge_u[e]]), int(sid[g.edge_v[e]])
            if a == b:
                continue
            wp = (
                float(g.weight[e])
                + dtc[g.edge_u[e]]
                + dtc[g.edge_v[e]]
                + w_cycle[comp[g.edge_u[e]]]
                + w_cycle[comp[g.edge_v[e]]]
            )
            key = (a, b) if a < b else (b, a)
            cand = (wp, e)
            if key not in best or cand < best[key]:
                best[key] = cand
        orig_of_edge: list[int] = []
        edges = []
        for (a, b), (wp, e) in sorted(best.items()):
            edges.append((a, b, wp))
            orig_of_edge.append(e)
        w_max = max(wp for wp, _ in best.values())
        exponent = max(4, int(math.ceil(math.log(max(w_max, 2.0)) / math.log(max(k, 2)))))
        g2 = Graph.from_edges(k, edges, one_based=False, weight_exponent=exponent)
        child_net = MinorNetwork(
            graph=g2,
            bit_budget=net.bit_budget,
            strict_budget=net.strict_budget,
            _counter=net._counter,
        )
        R2 = build_routing(child_net, default_params(g2, derive_seed(seed, "params", depth)))
        d2 = np.zeros(k)
        np.add.at(d2, sid, d)
        eps_next = (1.0 + eps) / (1.0 + 3.0 * eps_prime) - 1.0
        if eps_next <= 0:  # telescoping keeps the chained budgets positive
            raise SolverError("esssp tolerance chain collapsed")
        sub_mask = esssp(
            child_net,
            R2,
            int(sid[source]),
            d2,
            eps_next,
            derive_seed(seed, "rec", depth),
            knobs,
            depth + 1,
            max_depth,
        )
        for j in np.flatnonzero(sub_mask).tolist():
            mask[orig_of_edge[j]] = True

    # Per component: all sampled edges minus the smallest-id cycle edge.
    real = np.flatnonzero(out_eid >= 0)
    mask[out_eid[real]] = True
    if cyc_eids.size:
        drop: dict[int, int] = {}
        for e in cyc_eids.tolist():
            c = int(comp[g.edge_u[e]])
            if c not in drop or e < drop[c]:
                drop[c] = e
        for e in drop.values():
            mask[e] = False

    if int(mask.sum()) != n - 1:
        raise RuntimeError("esssp assembled a non-spanning edge set")
    return mask


@dataclass
class SsspResult:
    parent: np.ndarray  # node -> node, self at the source
    parent_edge: np.ndarray
    dist: np.ndarray
    rounds: int
    loop_iterations: int

    def to_dict(self) -> dict:
        return {
            "parent": [int(p) + 1 for p in self.parent],
            "dist": [float(x) for x in self.dist],
            "rounds": self.rounds,
            "loop_iterations": self.loop_iterations,
        }


def _pointer_distances(
    net: MinorNetwork, g: Graph, parent: np.ndarray, parent_edge: np.ndarray, source: int
) -> np.ndarray:
    """Distances to the source through the parent-pointer tree; inf off-tree."""
    mask = np.zeros(g.m, dtype=bool)
    pe = parent_edge[parent_edge >= 0]
    mask[pe] = True
    roots = np.flatnonzero(parent == np.arange(g.n))
    rf = root_forest(net, mask, roots.tolist())
    root_of = np.arange(g.n, dtype=np.int64)
    order = np.argsort(rf.depth, kind="stable")
    for v in order.tolist():
        root_of[v] = root_of[rf.parent[v]]
    dist = np.where(root_of == source, rf.depth_dist, math.inf)
    return dist


def sssp(
    net: MinorNetwork,
    R: RoutingOperator,
    source: int,
    eps: float,
    seed: int,
    knobs: SolverKnobs = DEFAULT_KNOBS,
) -> SsspResult:
    """(1+eps)-approximate shortest-path tree from the source via parent merging."""
    g = R.graph
    n = g.n
    if not (0 < eps < 1):
        raise GraphError(f"eps must lie in (0,1), got {eps}")
    if not (0 <= source < n):
        raise GraphError(f"source {source} out of range")
    rounds0 = net.round_counter
    parent = np.arange(n, dtype=np.int64)
    parent_edge = np.full(n, -1, dtype=np.int64)
    phi = np.zeros(n)
    active = np.ones(n, dtype=bool)
    active[source] = False
    cap = knobs.sssp_loop_c * int(math.ceil(_log2(n))) + 8

    iters = 0
    while active.any():
        iters += 1
        if iters > cap:
            raise SolverError(f"sssp loop exceeded its iteration cap ({cap})")
        d = active.astype(np.float64)
        d[source] = -float(active.sum())
        sol = solve_transshipment(net, R, d, _solve_eps(eps / 10.0, knobs))
        phi_star = sol.potential - sol.potential[source]

        eps_tree = knobs.sssp_tree_c * eps / _log2(n)
        tmask = esssp(net, R, source, d, eps_tree, derive_seed(seed, "tree", iters), knobs)
        rf_star = root_forest(net, tmask, [source])

        dist_cur = _pointer_distances(net, g, parent, parent_edge, source)
        improve = rf_star.depth_dist <= dist_cur
        improve[source] = False
        parent[improve] = rf_star.parent[improve]
        parent_edge[improve] = rf_star.parent_edge[improve]

        phi = np.maximum(phi, phi_star)
        dist_new = _pointer_distances(net, g, parent, parent_edge, source)
        settle = active & (dist_new <= (1.0 + eps) * phi * (1.0 + 1e-9) + 1e-12)
        active &= ~settle

    dist = _pointer_distances(net, g, parent, parent_edge, source)
    return SsspResult(
        parent=parent,
        parent_edge=parent_edge,
        dist=dist,
        rounds=net.round_counter - rounds0,
        loop_iterations=iters,
    )
