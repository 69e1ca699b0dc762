"""Exact reference solvers used for testing and acceptance checks.

Everything here runs centrally, is excluded from round accounting, and exists to
verify the simulated algorithms: Dijkstra / Bellman-Ford, Kruskal under the shared
(w, edge id) tie-break, exact uncapacitated min-cost flow via successive shortest
augmenting paths on the demand-support transportation problem, DFS tree sums,
pointer-chasing cycle detection and union-find components.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .graphs import Graph, GraphError, is_proper


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True

    def leaders(self) -> np.ndarray:
        """Map every element to the minimum id in its component."""
        n = len(self.parent)
        roots = [self.find(x) for x in range(n)]
        best: dict[int, int] = {}
        for x, r in enumerate(roots):
            if r not in best or x < best[r]:
                best[r] = x
        return np.asarray([best[r] for r in roots], dtype=np.int64)


def dijkstra(g: Graph, source: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact distances from source (0-based); returns (dist, parent_node, parent_edge)."""
    dist = np.full(g.n, math.inf)
    parent = np.full(g.n, -1, dtype=np.int64)
    parent_edge = np.full(g.n, -1, dtype=np.int64)
    dist[source] = 0.0
    heap = [(0.0, source)]
    done = np.zeros(g.n, dtype=bool)
    while heap:
        du, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        nbrs, eids = g.neighbors(u)
        for v, eid in zip(nbrs.tolist(), eids.tolist()):
            nd = du + g.weight[eid]
            if nd < dist[v]:
                dist[v] = nd
                parent[v] = u
                parent_edge[v] = eid
                heapq.heappush(heap, (nd, v))
    return dist, parent, parent_edge


def bellman_ford(g: Graph, source: int) -> np.ndarray:
    dist = np.full(g.n, math.inf)
    dist[source] = 0.0
    for _ in range(g.n):
        before = dist.copy()
        np.minimum.at(dist, g.edge_v, before[g.edge_u] + g.weight)
        np.minimum.at(dist, g.edge_u, before[g.edge_v] + g.weight)
        if np.array_equal(before, dist):
            break
    return dist


def kruskal(g: Graph) -> tuple[float, list[int]]:
    """Exact MST under the (weight, edge id) tie-break; returns (weight, edge ids)."""
    order = sorted(range(g.m), key=lambda e: (g.weight[e], e))
    uf = UnionFind(g.n)
    picked: list[int] = []
    total = 0.0
    for e in order:
        if uf.union(int(g.edge_u[e]), int(g.edge_v[e])):
            picked.append(e)
            total += float(g.weight[e])
    return total, sorted(picked)


def dfs_tree_sums(
    n: int, parent: np.ndarray, x: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Recursive-definition oracle for descendant and strict-ancestor sums.

    parent[v] == v marks a root. desc includes v itself; anc excludes v and
    includes the root.
    """
    children: list[list[int]] = [[] for _ in range(n)]
    roots = []
    for v in range(n):
        p = int(parent[v])
        if p == v:
            roots.append(v)
        else:
            children[p].append(v)
    desc = np.array(x, dtype=np.float64)
    anc = np.zeros(n)
    for r in roots:
        stack = [(r, False)]
        while stack:
            v, processed = stack.pop()
            if processed:
                for c in children[v]:
                    desc[v] += desc[c]
            else:
                stack.append((v, True))
                for c in children[v]:
                    anc[c] = anc[v] + x[v]
                    stack.append((c, False))
    return desc, anc


def pointer_chase_cycles(succ: np.ndarray) -> np.ndarray:
    """Nodes lying on the unique cycle of each component of a functional graph."""
    n = len(succ)
    color = np.zeros(n, dtype=np.int8)  # 0 unseen, 1 on stack, 2 done
    on_cycle = np.zeros(n, dtype=bool)
    for start in range(n):
        if color[start]:
            continue
        path = []
        v = start
        while color[v] == 0:
            color[v] = 1
            path.append(v)
            v = int(succ[v])
        if color[v] == 1:  # new cycle: everything from v onward in path
            idx = path.index(v)
            for u in path[idx:]:
                on_cycle[u] = True
        for u in path:
            color[u] = 2
    return on_cycle


# -- exact transshipment -------------------------------------------------------


class _ResidualNetwork:
    """Tiny residual network for successive shortest augmenting paths."""

    def __init__(self, n: int):
        self.n = n
        self.head: list[list[int]] = [[] for _ in range(n)]
        self.to: list[int] = []
        self.cap: list[float] = []
        self.cost: list[float] = []

    def add(self, u: int, v: int, cap: float, cost: float) -> int:
        idx = len(self.to)
        self.head[u].append(idx)
        self.to.append(v)
        self.cap.append(cap)
        self.cost.append(cost)
        self.head[v].append(idx + 1)
        self.to.append(u)
        self.cap.append(0.0)
        self.cost.append(-cost)
        return idx

    def min_cost_flow(self, s: int, t: int, tol: float) -> None:
        """Push max flow from s to t at min cost (supplies encoded as s-arc caps)."""
        pot = [0.0] * self.n
        while True:
            dist = [math.inf] * self.n
            pred_arc = [-1] * self.n
            dist[s] = 0.0
            heap = [(0.0, s)]
            done = [False] * self.n
            while heap:
                du, u = heapq.heappop(heap)
                if done[u]:
                    continue
                done[u] = True
                for a in self.head[u]:
                    if self.cap[a] <= tol:
                        continue
                    v = self.to[a]
                    rc = self.cost[a] + pot[u] - pot[v]
                    if rc < 0.0:  # numerical slack only
                        rc = 0.0
                    if du + rc < dist[v] - 1e-15:
                        dist[v] = du + rc
                        pred_arc[v] = a
                        heapq.heappush(heap, (dist[v], v))
            if not math.isfinite(dist[t]):
                return
            amount = math.inf
            v = t
            while v != s:
                a = pred_arc[v]
                amount = min(amount, self.cap[a])
                v = self.to[a ^ 1]
            if amount <= tol:
                return
            v = t
            while v != s:
                a = pred_arc[v]
                self.cap[a] -= amount
                self.cap[a ^ 1] += amount
                v = self.to[a ^ 1]
            for v in range(self.n):
                if math.isfinite(dist[v]):
                    pot[v] += dist[v]


@dataclass
class OracleReport:
    opt: float
    flow: np.ndarray


def exact_transshipment(g: Graph, d: np.ndarray, tol: float = 1e-12) -> OracleReport:
    """Exact uncapacitated min-cost flow cost and a witness flow routing d.

    Runs Dijkstra from every positive-demand node, then solves the transportation
    problem between surplus and deficit nodes by successive shortest augmenting
    paths on the complete bipartite cost matrix (uncapacitated optimal flows
    decompose into shortest paths, so this is exact). The witness moves each
    transport amount along an actual shortest path of the graph.
    """
    if not is_proper(d):
        raise GraphError("demand is not proper")
    scale = max(1.0, float(np.abs(d).sum()))
    sources = [v for v in range(g.n) if d[v] > tol * scale]
    sinks = [v for v in range(g.n) if d[v] < -tol * scale]
    flow = np.zeros(g.m)
    if not sources or not sinks:
        return OracleReport(0.0, flow)

    sp = {s: dijkstra(g, s) for s in sources}
    ns, nt = len(sources), len(sinks)
    net = _ResidualNetwork(ns + nt + 2)
    sigma, tau = ns + nt, ns + nt + 1
    big = float(np.abs(d).sum())
    ship_arcs = {}
    for i, s in enumerate(sources):
        net.add(sigma, i, float(d[s]), 0.0)
        for j, t in enumerate(sinks):
            ship_arcs[(i, j)] = net.add(i, ns + j, big, float(sp[s][0][t]))
    for j, t in enumerate(sinks):
        net.add(ns + j, tau, float(-d[t]), 0.0)
    net.min_cost_flow(sigma, tau, tol * scale)

    total = 0.0
    for (i, j), a in ship_arcs.items():
        amt = net.cap[a ^ 1]  # reverse cap equals shipped amount
        if amt <= tol * scale:
            continue
        s, t = sources[i], sinks[j]
        total += amt * float(sp[s][0][t])
        _, parent, parent_edge = sp[s]
        v = t
        while v != s:
            e = int(parent_edge[v])
            p = int(parent[v])
            # flow moves p -> v; canonical orientation is edge_u -> edge_v
            if int(g.edge_u[e]) == p:
                flow[e] += amt
            else:
                flow[e] -= amt
            v = p
    return OracleReport(total, flow)
