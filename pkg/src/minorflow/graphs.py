"""Weighted undirected graphs with canonical edge orientation and incidence operators.

Nodes are externally numbered 1..n (file formats, CLI); internally all arrays are
0-based. Every edge is stored once as (u, v, w) with u < v, which fixes the signs
of the incidence operator: pushing one unit of flow along edge e = (u, v) removes
a unit from u and delivers it to v.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

DEFAULT_TOL = 1e-9
DEFAULT_WEIGHT_EXPONENT = 4


class GraphError(ValueError):
    """Base class for graph construction and format errors."""


class GraphFormatError(GraphError):
    pass


class DuplicateEdgeError(GraphError):
    pass


class DisconnectedGraphError(GraphError):
    pass


class WeightRangeError(GraphError):
    pass


class DimensionMismatchError(GraphError):
    pass


@dataclass(eq=False)
class Graph:
    """Simple connected undirected graph with positive weights in [1, n**C]."""

    n: int
    edge_u: np.ndarray  # int64, 0-based, edge_u[e] < edge_v[e]
    edge_v: np.ndarray
    weight: np.ndarray  # float64, >= 1
    weight_exponent: int = DEFAULT_WEIGHT_EXPONENT
    _adj: tuple | None = field(default=None, repr=False)

    @property
    def m(self) -> int:
        return len(self.weight)

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges: Iterable[tuple[int, int, float]],
        one_based: bool = True,
        weight_exponent: int = DEFAULT_WEIGHT_EXPONENT,
        validate: bool = True,
    ) -> "Graph":
        off = 1 if one_based else 0
        us, vs, ws = [], [], []
        for u, v, w in edges:
            u, v = int(u) - off, int(v) - off
            if u == v:
                raise GraphFormatError(f"self-loop at node {u + off}")
            if not (0 <= u < n and 0 <= v < n):
                raise GraphFormatError(f"node id out of range: ({u + off}, {v + off})")
            if u > v:
                u, v = v, u
            us.append(u)
            vs.append(v)
            ws.append(float(w))
        g = cls(
            n=n,
            edge_u=np.asarray(us, dtype=np.int64),
            edge_v=np.asarray(vs, dtype=np.int64),
            weight=np.asarray(ws, dtype=np.float64),
            weight_exponent=weight_exponent,
        )
        if validate:
            g.validate()
        return g

    def validate(self) -> None:
        if self.n < 1:
            raise GraphFormatError("graph must have at least one node")
        seen = set()
        for u, v in zip(self.edge_u.tolist(), self.edge_v.tolist()):
            if (u, v) in seen:
                raise DuplicateEdgeError(f"duplicate edge ({u + 1}, {v + 1})")
            seen.add((u, v))
        if self.m:
            w_max_allowed = float(self.n) ** self.weight_exponent
            lo = float(self.weight.min())
            hi = float(self.weight.max())
            if lo < 1.0:
                raise WeightRangeError(f"weight {lo} below 1")
            if hi > w_max_allowed:
                raise WeightRangeError(
                    f"weight {hi} exceeds n**{self.weight_exponent} = {w_max_allowed}"
                )
        if not self._connected():
            raise DisconnectedGraphError("graph is not connected")

    def _connected(self) -> bool:
        if self.n == 1:
            return True
        parent = list(range(self.n))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        comps = self.n
        for u, v in zip(self.edge_u.tolist(), self.edge_v.tolist()):
            ru, rv = find(u), find(v)
            if ru != rv:
                parent[ru] = rv
                comps -= 1
        return comps == 1

    # -- adjacency (CSR over both directions), built lazily ------------------

    def adjacency(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (indptr, neighbor, via_edge) covering both edge directions."""
        if self._adj is None:
            ends = np.concatenate([self.edge_u, self.edge_v])
            other = np.concatenate([self.edge_v, self.edge_u])
            eids = np.concatenate([np.arange(self.m), np.arange(self.m)])
            order = np.argsort(ends, kind="stable")
            ends, other, eids = ends[order], other[order], eids[order]
            indptr = np.zeros(self.n + 1, dtype=np.int64)
            np.add.at(indptr, ends + 1, 1)
            np.cumsum(indptr, out=indptr)
            self._adj = (indptr, other, eids)
        return self._adj

    def neighbors(self, u: int) -> tuple[np.ndarray, np.ndarray]:
        indptr, other, eids = self.adjacency()
        return other[indptr[u] : indptr[u + 1]], eids[indptr[u] : indptr[u + 1]]

    def max_weight(self) -> float:
        return float(self.weight.max()) if self.m else 1.0


# -- vector helpers -----------------------------------------------------------


def node_vector(g: Graph, values: Sequence[float] | None = None) -> np.ndarray:
    out = np.zeros(g.n) if values is None else np.asarray(values, dtype=np.float64)
    if out.shape != (g.n,):
        raise DimensionMismatchError(f"node vector length {out.shape} != {g.n}")
    if not np.all(np.isfinite(out)):
        raise GraphFormatError("node vector has non-finite entries")
    return out


def edge_vector(g: Graph, values: Sequence[float] | None = None) -> np.ndarray:
    out = np.zeros(g.m) if values is None else np.asarray(values, dtype=np.float64)
    if out.shape != (g.m,):
        raise DimensionMismatchError(f"edge vector length {out.shape} != {g.m}")
    if not np.all(np.isfinite(out)):
        raise GraphFormatError("edge vector has non-finite entries")
    return out


def is_proper(d: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    """A demand is proper iff its entries sum to zero."""
    return abs(float(d.sum())) <= tol * max(1.0, float(np.abs(d).sum()))


# -- incidence / weight operators --------------------------------------------


def apply_B(g: Graph, f: np.ndarray) -> np.ndarray:
    """Demand routed by flow f: (Bf)_u = sum of f over edges leaving u minus entering."""
    f = edge_vector(g, f)
    out = np.zeros(g.n)
    np.add.at(out, g.edge_u, f)
    np.subtract.at(out, g.edge_v, f)
    return out


def apply_Bt(g: Graph, phi: np.ndarray) -> np.ndarray:
    """Potential differences per oriented edge: (Bt phi)_e = phi_u - phi_v."""
    phi = node_vector(g, phi)
    return phi[g.edge_u] - phi[g.edge_v]


def apply_W(g: Graph, f: np.ndarray) -> np.ndarray:
    f = edge_vector(g, f)
    return g.weight * f


def flow_cost(g: Graph, f: np.ndarray) -> float:
    """Cost of a flow: sum of w_e * |f_e|."""
    f = edge_vector(g, f)
    return float(np.abs(g.weight * f).sum())


def dual_feasibility(g: Graph, phi: np.ndarray) -> float:
    """max_e |phi_u - phi_v| / w_e; potentials are feasible iff this is <= 1."""
    if g.m == 0:
        return 0.0
    return float(np.max(np.abs(apply_Bt(g, phi)) / g.weight))


# -- file formats -------------------------------------------------------------


def load_graph(text: str, weight_exponent: int = DEFAULT_WEIGHT_EXPONENT) -> Graph:
    """Parse the edge-list format: header "n m", then m lines "u v w" (1-based)."""
    lines = [ln for ln in (raw.strip() for raw in text.splitlines()) if ln and not ln.startswith("#")]
    if not lines:
        raise GraphFormatError("empty graph document")
    head = lines[0].split()
    if len(head) != 2:
        raise GraphFormatError(f"bad header line: {lines[0]!r}")
    try:
        n, m = int(head[0]), int(head[1])
    except ValueError as exc:
        raise GraphFormatError(f"bad header line: {lines[0]!r}") from exc
    if len(lines) - 1 != m:
        raise GraphFormatError(f"expected {m} edge lines, found {len(lines) - 1}")
    edges = []
    for ln in lines[1:]:
        part = ln.split()
        if len(part) != 3:
            raise GraphFormatError(f"bad edge line: {ln!r}")
        try:
            u, v, w = int(part[0]), int(part[1]), float(part[2])
        except ValueError as exc:
            raise GraphFormatError(f"bad edge line: {ln!r}") from exc
        edges.append((u, v, w))
    return Graph.from_edges(n, edges, one_based=True, weight_exponent=weight_exponent)


def dump_graph(g: Graph) -> str:
    lines = [f"{g.n} {g.m}"]
    for u, v, w in zip(g.edge_u.tolist(), g.edge_v.tolist(), g.weight.tolist()):
        wtxt = repr(int(w)) if float(w).is_integer() else repr(w)
        lines.append(f"{u + 1} {v + 1} {wtxt}")
    return "\n".join(lines) + "\n"


def parse_demand(text: str, n: int) -> np.ndarray:
    """Parse demand lines "v d_v" (1-based); unlisted nodes default to zero."""
    d = np.zeros(n)
    for ln in (raw.strip() for raw in text.splitlines()):
        if not ln or ln.startswith("#"):
            continue
        part = ln.split()
        if len(part) != 2:
            raise GraphFormatError(f"bad demand line: {ln!r}")
        try:
            v, val = int(part[0]), float(part[1])
        except ValueError as exc:
            raise GraphFormatError(f"bad demand line: {ln!r}") from exc
        if not (1 <= v <= n):
            raise GraphFormatError(f"demand node {v} out of range")
        d[v - 1] = val
    return d


def vector_to_json(x: np.ndarray) -> str:
    """Serialize a node/edge vector as a JSON array indexed by id."""
    return json.dumps([float(v) for v in x])


def vector_from_json(text: str) -> np.ndarray:
    return np.asarray(json.loads(text), dtype=np.float64)
