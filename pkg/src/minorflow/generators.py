"""Deterministic graph generators for benchmarks and tests.

Spec strings follow "kind:size[:param]:weights[:seedN]", e.g. "path:5:unit",
"grid:3x3:unit", "er:50:0.2:w1-16:seed7", "geometric:40:0.3:w1-8:seed3",
"tree:20:w1-4:seed1". Weights are either "unit" or integer-uniform "wA-B".
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graphs import Graph, GraphError

MAX_CONNECT_RETRIES = 100


@dataclass(frozen=True)
class WeightSpec:
    lo: int = 1
    hi: int = 1

    def draw(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if self.lo == self.hi:
            return np.full(count, float(self.lo))
        return rng.integers(self.lo, self.hi + 1, size=count).astype(np.float64)


def _parse_weights(token: str) -> WeightSpec:
    if token == "unit":
        return WeightSpec(1, 1)
    if token.startswith("w") and "-" in token:
        lo, hi = token[1:].split("-", 1)
        return WeightSpec(int(lo), int(hi))
    raise GraphError(f"bad weight spec {token!r}")


def gen_path(n: int, weights: WeightSpec, rng: np.random.Generator) -> Graph:
    if n < 1:
        raise GraphError("size must be >= 1")
    w = weights.draw(rng, max(n - 1, 0))
    return Graph.from_edges(n, [(i + 1, i + 2, w[i]) for i in range(n - 1)])


def gen_tree(n: int, weights: WeightSpec, rng: np.random.Generator) -> Graph:
    if n < 1:
        raise GraphError("size must be >= 1")
    edges = []
    w = weights.draw(rng, max(n - 1, 0))
    for v in range(1, n):
        p = int(rng.integers(0, v))
        edges.append((p + 1, v + 1, w[v - 1]))
    return Graph.from_edges(n, edges)


def gen_grid(rows: int, cols: int, weights: WeightSpec, rng: np.random.Generator) -> Graph:
    if rows < 1 or cols < 1:
        raise GraphError("grid sides must be >= 1")
    pairs = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c + 1
            if c + 1 < cols:
                pairs.append((v, v + 1))
            if r + 1 < rows:
                pairs.append((v, v + cols))
    w = weights.draw(rng, len(pairs))
    return Graph.from_edges(rows * cols, [(u, v, w[i]) for i, (u, v) in enumerate(pairs)])


def gen_er(n: int, p: float, weights: WeightSpec, rng: np.random.Generator) -> Graph:
    if n < 1:
        raise GraphError("size must be >= 1")
    for _ in range(MAX_CONNECT_RETRIES):
        pairs = [(u + 1, v + 1) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
        w = weights.draw(rng, len(pairs))
        try:
            return Graph.from_edges(n, [(u, v, w[i]) for i, (u, v) in enumerate(pairs)])
        except GraphError:
            continue
    raise GraphError(f"could not draw a connected er graph in {MAX_CONNECT_RETRIES} tries")


def gen_geometric(n: int, radius: float, weights: WeightSpec, rng: np.random.Generator) -> Graph:
    if n < 1:
        raise GraphError("size must be >= 1")
    for _ in range(MAX_CONNECT_RETRIES):
        pts = rng.random((n, 2))
        pairs = []
        for u in range(n):
            for v in range(u + 1, n):
                if math.dist(pts[u], pts[v]) <= radius:
                    pairs.append((u + 1, v + 1))
        w = weights.draw(rng, len(pairs))
        try:
            return Graph.from_edges(n, [(u, v, w[i]) for i, (u, v) in enumerate(pairs)])
        except GraphError:
            continue
    raise GraphError(f"could not draw a connected geometric graph in {MAX_CONNECT_RETRIES} tries")


def generate(spec: str, seed: int | None = None) -> Graph:
    """Build a graph from a spec string; an explicit seed overrides ":seedN"."""
    parts = spec.split(":")
    if not parts:
        raise GraphError("empty generator spec")
    kind = parts[0]
    rest = parts[1:]
    spec_seed = 0
    if rest and rest[-1].startswith("seed"):
        spec_seed = int(rest[-1][4:])
        rest = rest[:-1]
    if seed is not None:
        spec_seed = seed
    rng = np.random.default_rng(spec_seed)
    wspec = _parse_weights(rest[-1]) if rest else WeightSpec()
    args = rest[:-1]
    if kind == "path":
        return gen_path(int(args[0]), wspec, rng)
    if kind == "tree":
        return gen_tree(int(args[0]), wspec, rng)
    if kind == "grid":
        r, c = args[0].split("x", 1)
        return gen_grid(int(r), int(c), wspec, rng)
    if kind == "er":
        return gen_er(int(args[0]), float(args[1]), wspec, rng)
    if kind == "geometric":
        return gen_geometric(int(args[0]), float(args[1]), wspec, rng)
    raise GraphError(f"unknown generator kind {kind!r}")
