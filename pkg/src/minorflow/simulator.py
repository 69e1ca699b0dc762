"""Synchronous simulator for the distributed minor-aggregation round model.

A round has three steps: every edge votes whether to contract (supernodes become
the connected components of contracted edges), every supernode computes a
consensus aggregate of its members' inputs, and every non-self-loop edge of the
minor contributes a pair of values that are aggregated per incident supernode.
The simulator executes rounds centrally but deterministically (canonical id-sorted
fold order), counts every round, and audits message payload sizes against a
configurable bit budget instead of enforcing them.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from . import graphs
from .graphs import DimensionMismatchError, Graph
from .oracles import UnionFind

log = logging.getLogger(__name__)

DEFAULT_BIT_BUDGET = 256


@dataclass(frozen=True)
class AggregationOp:
    """Commutative+associative combiner with an identity element."""

    name: str
    identity: Any
    fn: Callable[[Any, Any], Any]
    ufunc: Any = None  # numpy ufunc for the vectorized fast path
    commutative_associative: bool = True


OP_SUM = AggregationOp("sum", 0.0, lambda a, b: a + b, np.add)
OP_MIN = AggregationOp("min", float("inf"), min, np.minimum)
OP_MAX = AggregationOp("max", float("-inf"), max, np.maximum)
OP_OR = AggregationOp("or", False, lambda a, b: a or b, np.logical_or)


def payload_bits(value: Any) -> int:
    if isinstance(value, bool) or isinstance(value, np.bool_):
        return 1
    if isinstance(value, (int, np.integer)):
        return max(1, int(value).bit_length()) + 1
    if isinstance(value, (float, np.floating)):
        return 64
    if isinstance(value, str):
        return 8 * len(value)
    if isinstance(value, (tuple, list)):
        return 8 + sum(payload_bits(v) for v in value)
    if value is None:
        return 1
    return 64


class PayloadBudgetError(RuntimeError):
    pass


class _Counter:
    __slots__ = ("rounds",)

    def __init__(self) -> None:
        self.rounds = 0


@dataclass
class MinorNetwork:
    """A (view on a) graph executing minor-aggregation rounds with a shared counter."""

    graph: Graph
    frozen: np.ndarray = field(default=None)  # bool per edge: pre-contracted minor
    bit_budget: int = DEFAULT_BIT_BUDGET
    strict_budget: bool = False
    debug_check_ops: bool = False
    trace: list | None = None
    _counter: _Counter = field(default_factory=_Counter)
    supernode_of: np.ndarray = field(default=None)  # partition after the last round

    def __post_init__(self) -> None:
        if self.frozen is None:
            self.frozen = np.zeros(self.graph.m, dtype=bool)
        if self.supernode_of is None:
            self.supernode_of = np.arange(self.graph.n, dtype=np.int64)

    # -- round bookkeeping ----------------------------------------------------

    @property
    def round_counter(self) -> int:
        return self._counter.rounds

    def charge(self, rounds: int, reason: str = "") -> None:
        """Account rounds executed by a primitive that is computed centrally."""
        self._counter.rounds += int(rounds)
        if self.trace is not None and reason:
            self.trace.append({"charge": int(rounds), "reason": reason})

    def as_minor(self, frozen_edges: Iterable[int] | np.ndarray) -> "MinorNetwork":
        """View on the minor obtained by pre-contracting the given edges.

        Round costs accrue to the same counter; every base node observes what its
        supernode learns.
        """
        mask = np.zeros(self.graph.m, dtype=bool)
        arr = np.asarray(list(frozen_edges) if not isinstance(frozen_edges, np.ndarray) else frozen_edges)
        if arr.dtype == bool:
            mask |= arr
        elif arr.size:
            mask[arr.astype(np.int64)] = True
        return MinorNetwork(
            graph=self.graph,
            frozen=self.frozen | mask,
            bit_budget=self.bit_budget,
            strict_budget=self.strict_budget,
            debug_check_ops=self.debug_check_ops,
            trace=self.trace,
            _counter=self._counter,
        )

    def components_of(self, contract_mask: np.ndarray) -> np.ndarray:
        """Supernode leader (minimum member id) per node for the given contraction."""
        uf = UnionFind(self.graph.n)
        eids = np.flatnonzero(contract_mask | self.frozen)
        for e in eids.tolist():
            uf.union(int(self.graph.edge_u[e]), int(self.graph.edge_v[e]))
        return uf.leaders()

    def _audit_payload(self, values: Iterable[Any], what: str) -> int:
        worst = 0
        for v in values:
            worst = max(worst, payload_bits(v))
        if worst > self.bit_budget:
            msg = f"{what} payload of {worst} bits exceeds budget {self.bit_budget}"
            if self.strict_budget:
                raise PayloadBudgetError(msg)
            log.warning("model fidelity: %s", msg)
        return worst

    def _check_op(self, op: AggregationOp, sample: Sequence[Any]) -> None:
        if not op.commutative_associative:
            raise ValueError(f"aggregation operator {op.name} is not commutative+associative")
        vals = [v for v in sample if v is not None][:6]
        if len(vals) < 3:
            return
        rng = random.Random(0xA66)
        left = vals[0]
        for v in vals[1:]:
            left = op.fn(left, v)
        shuffled = vals[:]
        rng.shuffle(shuffled)
        right = shuffled[-1]
        for v in reversed(shuffled[:-1]):
            right = op.fn(v, right)
        if not _roughly_equal(left, right):
            raise ValueError(f"operator {op.name} failed the randomized re-association test")

    # -- the model round --------------------------------------------------------

    def run_round(
        self,
        contract_choice: Callable[[int], bool] | np.ndarray | None,
        node_input: Callable[[int], Any] | Sequence[Any] | None,
        consensus_op: AggregationOp | None,
        edge_fn: Callable[[int, Any, Any], tuple[Any, Any]] | None = None,
        agg_op: AggregationOp | None = None,
    ) -> tuple[list, list]:
        """Execute one round; returns (consensus value, aggregation value) per node."""
        g = self.graph
        if contract_choice is None:
            mask = np.zeros(g.m, dtype=bool)
        elif callable(contract_choice):
            mask = np.fromiter((bool(contract_choice(e)) for e in range(g.m)), dtype=bool, count=g.m)
        else:
            mask = np.asarray(contract_choice, dtype=bool)
            if mask.shape != (g.m,):
                raise DimensionMismatchError("contract_choice length mismatch")
        comp = self.components_of(mask)
        self.supernode_of = comp

        worst_bits = 0
        consensus: list = [None] * g.n
        if consensus_op is not None:
            if callable(node_input):
                xs = [node_input(v) for v in range(g.n)]
            elif node_input is None:
                xs = [consensus_op.identity] * g.n
            else:
                xs = list(node_input)
                if len(xs) != g.n:
                    raise DimensionMismatchError("node_input length mismatch")
            worst_bits = max(worst_bits, self._audit_payload(xs, "consensus"))
            if self.debug_check_ops:
                self._check_op(consensus_op, xs)
            groups: dict[int, Any] = {}
            for v in range(g.n):  # canonical id order
                s = int(comp[v])
                groups[s] = xs[v] if s not in groups else consensus_op.fn(groups[s], xs[v])
            for v in range(g.n):
                consensus[v] = groups[int(comp[v])]

        aggregation: list = [None] * g.n
        if edge_fn is not None and agg_op is not None:
            sup_val: dict[int, Any] = {}
            zs_sample = []
            for e in range(g.m):  # canonical edge-id order
                su, sv = int(comp[g.edge_u[e]]), int(comp[g.edge_v[e]])
                if su == sv:
                    continue  # self-loop of the minor
                za, zb = edge_fn(e, consensus[g.edge_u[e]], consensus[g.edge_v[e]])
                zs_sample.append(za)
                zs_sample.append(zb)
                sup_val[su] = za if su not in sup_val else agg_op.fn(sup_val[su], za)
                sup_val[sv] = zb if sv not in sup_val else agg_op.fn(sup_val[sv], zb)
            worst_bits = max(worst_bits, self._audit_payload(zs_sample, "aggregation"))
            if self.debug_check_ops:
                self._check_op(agg_op, zs_sample)
            for v in range(g.n):
                aggregation[v] = sup_val.get(int(comp[v]), agg_op.identity)

        self._counter.rounds += 1
        if self.trace is not None:
            minor_edges = int(np.count_nonzero(comp[g.edge_u] != comp[g.edge_v]))
            self.trace.append(
                {
                    "round": self._counter.rounds,
                    "supernodes": int(len(np.unique(comp))),
                    "minor_edges": minor_edges,
                    "max_payload_bits": worst_bits,
                }
            )
        return consensus, aggregation

    # -- single-round vectorized primitives -------------------------------------
    # Each of these is one model round: the stated value is computed exactly and
    # becomes known where the round semantics say it should be.

    def broadcast_scalar(self, value: float) -> float:
        """All nodes learn a value held at one node (contract everything, sum)."""
        self.charge(1, "broadcast")
        return float(value)

    def dot_nodes(self, a: np.ndarray, b: np.ndarray) -> float:
        a = graphs.node_vector(self.graph, a)
        b = graphs.node_vector(self.graph, b)
        self.charge(1, "dot")
        return float(a @ b)

    def dot_edges(self, a: np.ndarray, b: np.ndarray) -> float:
        a = graphs.edge_vector(self.graph, a)
        b = graphs.edge_vector(self.graph, b)
        self.charge(1, "dot")
        return float(a @ b)

    def norm(self, x: np.ndarray, p: float = 1.0, kind: str = "node") -> float:
        if kind == "node":
            x = graphs.node_vector(self.graph, x)
        elif kind == "edge":
            x = graphs.edge_vector(self.graph, x)
        else:
            raise DimensionMismatchError(f"unknown vector kind {kind!r}")
        self.charge(1, "norm")
        if p == float("inf"):
            return float(np.max(np.abs(x))) if len(x) else 0.0
        return float(np.sum(np.abs(x) ** p) ** (1.0 / p))

    def apply_B(self, f: np.ndarray) -> np.ndarray:
        self.charge(1, "apply_B")
        return graphs.apply_B(self.graph, f)

    def apply_Bt(self, phi: np.ndarray) -> np.ndarray:
        self.charge(1, "apply_Bt")
        return graphs.apply_Bt(self.graph, phi)

    def apply_W(self, f: np.ndarray) -> np.ndarray:
        self.charge(1, "apply_W")
        return graphs.apply_W(self.graph, f)

    def vec_round(
        self,
        contract_mask: np.ndarray | None,
        node_values: np.ndarray | None,
        consensus_op: AggregationOp | None,
        edge_za: np.ndarray | None = None,
        edge_zb: np.ndarray | None = None,
        agg_op: AggregationOp | None = None,
    ) -> tuple[np.ndarray | None, np.ndarray | None]:
        """Vectorized round: numpy arrays in place of per-unit callables.

        edge_za / edge_zb are the per-edge contributions toward the supernodes of
        the canonical tail / head; contributions of minor self-loops are ignored.
        """
        g = self.graph
        mask = np.zeros(g.m, dtype=bool) if contract_mask is None else np.asarray(contract_mask, dtype=bool)
        comp = self.components_of(mask)
        self.supernode_of = comp

        consensus = None
        if consensus_op is not None and node_values is not None:
            if consensus_op.ufunc is None:
                raise ValueError(f"operator {consensus_op.name} has no vectorized form")
            acc = np.full(g.n, consensus_op.identity, dtype=np.float64)
            consensus_op.ufunc.at(acc, comp, np.asarray(node_values, dtype=np.float64))
            consensus = acc[comp]

        aggregation = None
        if agg_op is not None and edge_za is not None:
            if agg_op.ufunc is None:
                raise ValueError(f"operator {agg_op.name} has no vectorized form")
            su, sv = comp[g.edge_u], comp[g.edge_v]
            cross = su != sv
            acc = np.full(g.n, agg_op.identity, dtype=np.float64)
            agg_op.ufunc.at(acc, su[cross], np.asarray(edge_za, dtype=np.float64)[cross])
            agg_op.ufunc.at(acc, sv[cross], np.asarray(edge_zb, dtype=np.float64)[cross])
            aggregation = acc[comp]

        self._counter.rounds += 1
        if self.trace is not None:
            self.trace.append(
                {
                    "round": self._counter.rounds,
                    "supernodes": int(len(np.unique(comp))),
                    "minor_edges": int(np.count_nonzero(comp[g.edge_u] != comp[g.edge_v])),
                    "max_payload_bits": 64,  # machine scalars on the fast path
                }
            )
        return consensus, aggregation

    def write_trace(self, path: str) -> None:
        if self.trace is None:
            return
        with open(path, "w") as fh:
            for entry in self.trace:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")


def _roughly_equal(a: Any, b: Any) -> bool:
    if isinstance(a, (float, np.floating)) or isinstance(b, (float, np.floating)):
        return bool(np.isclose(float(a), float(b), rtol=1e-9, atol=1e-12))
    return a == b


def network(g: Graph, trace: bool = False, **kwargs) -> MinorNetwork:
    return MinorNetwork(graph=g, trace=[] if trace else None, **kwargs)
