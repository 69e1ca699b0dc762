"""Model-level building blocks: MST, components, tree rooting, tree sums, cycles.

Borůvka MST and connected components run as genuine simulator rounds. Tree rooting
and subtree/ancestor sums are computed centrally and charged a documented polylog
round constant (the usual cost of a distributed tree-contraction pipeline); the
cycle finder runs the sample/contract/backtrack scheme for functional graphs with
its walks charged per level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graphs import GraphError
from .oracles import UnionFind
from .simulator import AggregationOp, MinorNetwork, OP_MIN


def _log2ceil(n: int) -> int:
    return int(math.ceil(math.log2(max(n, 2))))


def tree_pipeline_rounds(n: int) -> int:
    """Charged round cost of the rooting / tree-sum pipelines."""
    return 2 * _log2ceil(n) + 4


# -- minimum spanning tree -----------------------------------------------------

OP_MIN_KEY = AggregationOp("min_key", (float("inf"), float("inf")), min)


def mst_boruvka(net: MinorNetwork) -> np.ndarray:
    """Borůvka MST over the simulator; returns a bool mask over edges.

    Ties are broken by the lexicographic key (weight, edge id), shared with the
    Kruskal oracle, which makes minima unique. Two rounds per phase: one
    aggregation round in which every supernode learns its minimum incident key,
    and one consensus+aggregation round in which edges mark themselves.
    """
    g = net.graph
    in_mst = np.zeros(g.m, dtype=bool)
    if g.n <= 1 or g.m == 0:
        return in_mst
    key = [(float(g.weight[e]), float(e)) for e in range(g.m)]

    for _ in range(_log2ceil(g.n) + 1):
        # Round 1: every supernode of the current contraction learns the minimum
        # key among its incident minor edges.
        _, min_key = net.run_round(
            contract_choice=in_mst,
            node_input=None,
            consensus_op=None,
            edge_fn=lambda e, ya, yb: (key[e], key[e]),
            agg_op=OP_MIN_KEY,
        )
        if all(v == OP_MIN_KEY.identity for v in min_key):
            break  # single supernode remains
        # Round 2: each edge compares its key against both endpoint supernodes'
        # minima (distributed via consensus) and marks itself.
        marked: list[int] = []

        def edge_mark(e: int, ya, yb) -> tuple[bool, bool]:
            hit = key[e] == ya or key[e] == yb
            if hit:
                marked.append(e)
            return (hit, hit)

        net.run_round(
            contract_choice=in_mst,
            node_input=min_key,
            consensus_op=OP_MIN_KEY,
            edge_fn=edge_mark,
            agg_op=AggregationOp("or", False, lambda a, b: a or b),
        )
        if not marked:
            break
        in_mst[np.asarray(marked, dtype=np.int64)] = True
    else:
        raise RuntimeError("Boruvka did not converge within log2(n) phases")
    return in_mst


def connected_components(net: MinorNetwork, subgraph: np.ndarray) -> np.ndarray:
    """Component leader (minimum node id) per node; exactly one round."""
    ids = np.arange(net.graph.n, dtype=np.float64)
    leaders, _ = net.vec_round(np.asarray(subgraph, dtype=bool), ids, OP_MIN)
    return leaders.astype(np.int64)


# -- rooted forests ------------------------------------------------------------


@dataclass
class RootedForest:
    in_forest: np.ndarray  # bool per edge
    parent: np.ndarray  # node -> node, self at roots
    parent_edge: np.ndarray  # node -> edge id, -1 at roots
    depth_dist: np.ndarray  # weighted distance to the root
    depth: np.ndarray  # hop depth, 0 at roots

    def roots(self) -> np.ndarray:
        return np.flatnonzero(self.parent == np.arange(len(self.parent)))


def root_forest(net: MinorNetwork, forest: np.ndarray, roots) -> RootedForest:
    """Orient a forest toward explicit per-tree roots and compute root distances.

    Trees that consist of a single node without forest edges root at themselves.
    Raises on cycles or on a tree with zero or multiple designated roots.
    """
    g = net.graph
    forest = np.asarray(forest, dtype=bool)
    n = g.n
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for e in np.flatnonzero(forest).tolist():
        u, v = int(g.edge_u[e]), int(g.edge_v[e])
        adj[u].append((v, e))
        adj[v].append((u, e))

    parent = np.arange(n, dtype=np.int64)
    parent_edge = np.full(n, -1, dtype=np.int64)
    depth_dist = np.zeros(n)
    depth = np.zeros(n, dtype=np.int64)
    visited = np.zeros(n, dtype=bool)

    root_list = sorted(int(r) for r in roots)
    if len(set(root_list)) != len(root_list):
        raise GraphError("duplicate roots")
    queue: list[int] = []
    for r in root_list:
        visited[r] = True
        queue.append(r)
    head = 0
    while head < len(queue):
        u = queue[head]
        head += 1
        for v, e in adj[u]:
            if e == parent_edge[u]:
                continue
            if visited[v]:
                raise GraphError("claimed forest contains a cycle or multiple roots per tree")
            visited[v] = True
            parent[v] = u
            parent_edge[v] = e
            depth_dist[v] = depth_dist[u] + g.weight[e]
            depth[v] = depth[u] + 1
            queue.append(v)
    for v in range(n):
        if not visited[v] and adj[v]:
            raise GraphError(f"tree containing node {v} has no designated root")
    net.charge(tree_pipeline_rounds(n), "root_forest")
    return RootedForest(forest, parent, parent_edge, depth_dist, depth)


def subtree_sums(
    net: MinorNetwork, rf: RootedForest, x: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Descendant sums (inclusive) and strict-ancestor sums (root inclusive)."""
    n = len(rf.parent)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (n,):
        raise GraphError("subtree_sums input length mismatch")
    desc = x.copy()
    anc = np.zeros(n)
    if n:
        max_depth = int(rf.depth.max())
        order = np.argsort(rf.depth, kind="stable")
        # level-synchronous sweeps: leaves up for descendants, root down for ancestors
        bounds = np.searchsorted(rf.depth[order], np.arange(max_depth + 2))
        for d in range(max_depth, 0, -1):
            nodes = order[bounds[d] : bounds[d + 1]]
            np.add.at(desc, rf.parent[nodes], desc[nodes])
        for d in range(1, max_depth + 1):
            nodes = order[bounds[d] : bounds[d + 1]]
            anc[nodes] = anc[rf.parent[nodes]] + x[rf.parent[nodes]]
    net.charge(tree_pipeline_rounds(n), "subtree_sums")
    return desc, anc


# -- cycles of functional graphs -------------------------------------------------


@dataclass
class CycleReport:
    on_cycle: np.ndarray  # bool per node (self-loop nodes included)
    cycle_edges: np.ndarray  # bool per base edge
    component: np.ndarray  # weak-component leader per node
    levels_used: int


SAMPLE_PROBABILITY = 0.1


def find_cycles(
    net: MinorNetwork,
    succ: np.ndarray,
    out_eid: np.ndarray,
    rng: np.random.Generator,
) -> CycleReport:
    """All directed cycles of a functional graph laid over the base network.

    succ[v] is v's unique successor (succ[v] == v encodes a self-loop, with
    out_eid[v] == -1); otherwise out_eid[v] is the base edge connecting v and
    succ[v]. Vertices repeatedly sample themselves, edges from sampled to
    unsampled vertices survive contraction, and walks from sampled vertices
    detect the cycle, which is then unwound level by level.
    """
    g = net.graph
    n = g.n
    succ = np.asarray(succ, dtype=np.int64)
    out_eid = np.asarray(out_eid, dtype=np.int64)
    if succ.shape != (n,) or out_eid.shape != (n,):
        raise GraphError("functional graph arrays must cover every node")
    for v in range(n):
        if succ[v] == v:
            if out_eid[v] != -1:
                raise GraphError(f"self-loop at {v} must carry no edge id")
        else:
            e = int(out_eid[v])
            if e < 0 or e >= g.m:
                raise GraphError(f"node {v} has no valid out-edge")
            if {int(g.edge_u[e]), int(g.edge_v[e])} != {v, int(succ[v])}:
                raise GraphError(f"out-edge of {v} does not match its successor")

    uf = UnionFind(n)
    for v in range(n):
        uf.union(v, int(succ[v]))
    comp = uf.leaders()
    net.charge(1, "components")

    on_cycle = np.zeros(n, dtype=bool)
    cycle_edges = np.zeros(g.m, dtype=bool)

    # Components that contain a self-loop: the self-loop is the cycle.
    selfloops = np.flatnonzero(succ == np.arange(n))
    resolved = set()
    for v in selfloops.tolist():
        on_cycle[v] = True
        resolved.add(int(comp[v]))

    pending = sorted(set(int(c) for c in comp) - resolved)
    if not pending:
        return CycleReport(on_cycle, cycle_edges, comp, 0)

    cutoff = 4 * _log2ceil(n) + 10
    max_levels = 40 * _log2ceil(n) + 150

    # Level 0 structure: supernodes are the nodes themselves.
    sid_of = [np.arange(n, dtype=np.int64)]
    sup_succ = [succ.copy()]
    sup_exit = [np.arange(n, dtype=np.int64)]  # member whose out-edge leaves the sid

    def walk_hops(level: int, a: int, b: int) -> list[int]:
        """Tail nodes of the succ-walk from a to b (b's own hop excluded)."""
        if level == 0:
            hops = []
            v = a
            while v != b:
                hops.append(v)
                v = int(succ[v])
            return hops
        sid = sid_of[level]
        hops: list[int] = []
        entry = a
        while sid[entry] != sid[b]:
            t = int(sup_exit[level][sid[entry]])
            hops += walk_hops(level - 1, entry, t)
            hops.append(t)
            entry = int(succ[t])
        return hops + walk_hops(level - 1, entry, b)

    def extract_cycle_tails(level: int, start: int) -> list[int]:
        """Tail nodes of the component's unique cycle, unwound from `level`."""
        if level == 0:
            seen: dict[int, int] = {}
            seq = []
            v = start
            while v not in seen:
                seen[v] = len(seq)
                seq.append(v)
                v = int(succ[v])
            return seq[seen[v] :]
        sid, ss, se = sid_of[level], sup_succ[level], sup_exit[level]
        seen = {}
        seq = []
        s = int(sid[start])
        while s not in seen:
            seen[s] = len(seq)
            seq.append(s)
            s = int(ss[s])
        cyc = seq[seen[s] :]
        if len(cyc) == 1 and int(se[cyc[0]]) < 0:
            # whole cycle lives inside one supernode: descend
            member = start if sid[start] == cyc[0] else int(np.flatnonzero(sid == cyc[0])[0])
            return extract_cycle_tails(level - 1, member)
        tails: list[int] = []
        exits = [int(se[s]) for s in cyc]
        for k in range(len(cyc)):
            entry = int(succ[exits[k - 1]])
            tails += walk_hops(level - 1, entry, exits[k])
            tails.append(exits[k])
        return tails

    level = 0
    while pending:
        if level >= max_levels:
            raise RuntimeError("find_cycles failed to converge (sampling cap exceeded)")
        sid, ss, se = sid_of[level], sup_succ[level], sup_exit[level]
        nsup = len(ss)
        sampled = rng.random(nsup) < SAMPLE_PROBABILITY
        net.charge(2, "find_cycles sample+contract")

        # Walks from sampled supernodes, smallest id first per component.
        comp_of_sid = np.full(nsup, -1, dtype=np.int64)
        comp_of_sid[sid] = comp  # any member determines the component
        done_now = []
        for c in pending:
            winner = -1
            for s in np.flatnonzero(sampled & (comp_of_sid == np.int64(c))).tolist():
                visited = {s}
                v = int(ss[s])
                ok = False
                for _ in range(cutoff):
                    if v in visited:
                        ok = True
                        break
                    if sampled[v]:
                        break
                    visited.add(v)
                    v = int(ss[v])
                if ok:
                    winner = s
                    break
            if winner >= 0:
                member = int(np.flatnonzero(sid == winner)[0])
                tails = extract_cycle_tails(level, member)
                for t in tails:
                    on_cycle[t] = True
                    on_cycle[int(succ[t])] = True
                    cycle_edges[int(out_eid[t])] = True
                done_now.append(c)
        net.charge(cutoff, "find_cycles walks")
        for c in done_now:
            pending.remove(c)
        if not pending:
            break

        # Contraction: keep edges from sampled supernodes to unsampled ones.
        kept = sampled & ~sampled[ss] & (ss != np.arange(nsup))
        uf2 = UnionFind(nsup)
        for s in np.flatnonzero(~kept).tolist():
            uf2.union(s, int(ss[s]))
        labels = uf2.leaders()
        uniq, new_of_old = np.unique(labels, return_inverse=True)
        k = len(uniq)
        new_exit = np.full(k, -1, dtype=np.int64)
        for s in np.flatnonzero(kept).tolist():
            new_exit[new_of_old[s]] = se[s]
        new_succ = np.arange(k, dtype=np.int64)
        for ns in range(k):
            ex = int(new_exit[ns])
            if ex >= 0:
                new_succ[ns] = new_of_old[sid[int(succ[ex])]]
        sid_of.append(new_of_old[sid])
        sup_succ.append(new_succ)
        sup_exit.append(new_exit)
        level += 1

    return CycleReport(on_cycle, cycle_edges, comp, level)
