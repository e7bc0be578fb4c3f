"""Weighted graphs, partitions, weight blending and the CPM objective."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..errors import SizeMismatch, UnknownLabel
from ..repo_graph.model import AdjacencyMatrix
from ..summarize import SimilarityMatrix

VARIANTS = ("blended", "adjacency_only", "similarity_only")


class WeightedGraph:
    """Undirected graph with non-negative weights, stored as neighbor dicts."""

    def __init__(self, n: int, edges: Iterable[tuple[int, int, float]] = ()):
        self.n = n
        self.adj: list[dict[int, float]] = [dict() for _ in range(n)]
        for i, j, w in edges:
            if i == j:
                raise ValueError(f"self-loop ({i}, {i}) not allowed")
            if w < 0:
                raise ValueError(f"negative weight on ({i}, {j})")
            if w == 0:
                continue
            self.adj[i][j] = float(w)
            self.adj[j][i] = float(w)

    @classmethod
    def from_dense(cls, w: np.ndarray, threshold: float = 0.0) -> "WeightedGraph":
        w = np.asarray(w, dtype=float)
        if w.shape[0] != w.shape[1]:
            raise SizeMismatch("weight matrix is not square")
        iu, ju = np.triu_indices(w.shape[0], k=1)
        vals = w[iu, ju]
        keep = (vals > 0) & (vals >= threshold)
        return cls(w.shape[0], zip(iu[keep].tolist(), ju[keep].tolist(), vals[keep].tolist()))

    def weight(self, i: int, j: int) -> float:
        return self.adj[i].get(j, 0.0)

    def edges(self) -> list[tuple[int, int, float]]:
        return [(i, j, w) for i in range(self.n) for j, w in sorted(self.adj[i].items()) if i < j]

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        for i, j, w in self.edges():
            out[i, j] = out[j, i] = w
        return out

    def subgraph(self, nodes: Sequence[int]) -> "WeightedGraph":
        index = {v: k for k, v in enumerate(nodes)}
        edges = []
        for v in nodes:
            for u, w in self.adj[v].items():
                if u in index and index[v] < index[u]:
                    edges.append((index[v], index[u], w))
        return WeightedGraph(len(nodes), edges)

    def total_weight(self) -> float:
        return sum(w for _, _, w in self.edges())

    def __repr__(self):
        return f"WeightedGraph(n={self.n}, m={sum(len(a) for a in self.adj) // 2})"


@dataclass(frozen=True)
class Partition:
    """Community labels, always dense 0..k-1 in first-occurrence order."""

    labels: tuple[int, ...]

    def __init__(self, labels: Iterable[int]):
        remap: dict = {}
        dense = []
        for lab in labels:
            if lab not in remap:
                remap[lab] = len(remap)
            dense.append(remap[lab])
        object.__setattr__(self, "labels", tuple(dense))

    @classmethod
    def singletons(cls, n: int) -> "Partition":
        return cls(range(n))

    @classmethod
    def from_communities(cls, communities: Iterable[Iterable[int]], n: int) -> "Partition":
        labels = [-1] * n
        for c, members in enumerate(communities):
            for v in members:
                labels[v] = c
        if any(lab < 0 for lab in labels):
            raise ValueError("communities do not cover every node")
        return cls(labels)

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def k(self) -> int:
        return max(self.labels) + 1 if self.labels else 0

    def communities(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.k)]
        for v, c in enumerate(self.labels):
            out[c].append(v)
        return out

    def sizes(self) -> list[int]:
        out = [0] * self.k
        for c in self.labels:
            out[c] += 1
        return out

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, v: int) -> int:
        return self.labels[v]


def blend_weights(
    adj: AdjacencyMatrix,
    sim: SimilarityMatrix,
    alpha: float = 0.5,
    variant: str = "blended",
    tau: float = 0.05,
) -> WeightedGraph:
    """w = alpha * a + (1 - alpha) * s off the diagonal; entries below ``tau`` are dropped."""
    if adj.n != sim.n:
        raise SizeMismatch(f"adjacency has {adj.n} nodes, similarity has {sim.n}")
    if adj.level != sim.level:
        raise SizeMismatch(f"adjacency level {adj.level!r} != similarity level {sim.level!r}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha {alpha} outside [0, 1]")
    a = adj.to_dense()
    s = np.array(sim.values, dtype=float)
    if variant == "blended":
        w = alpha * a + (1.0 - alpha) * s
    elif variant == "adjacency_only":
        w = a
    elif variant == "similarity_only":
        w = s
    else:
        raise ValueError(f"unknown variant {variant!r}")
    w = w.copy()
    np.fill_diagonal(w, 0.0)
    return WeightedGraph.from_dense(w, threshold=tau)


def _check_cover(g: WeightedGraph, p: Partition):
    if p.n != g.n:
        raise SizeMismatch(f"partition covers {p.n} nodes, graph has {g.n}")


def cpm_quality(g: WeightedGraph, p: Partition, gamma: float) -> float:
    """Sum over communities of internal edge weight minus gamma * C(n_c, 2)."""
    _check_cover(g, p)
    internal = 0.0
    for i, j, w in g.edges():
        if p[i] == p[j]:
            internal += w
    penalty = sum(n * (n - 1) / 2 for n in p.sizes())
    return internal - gamma * penalty


def cpm_merge_delta(g: WeightedGraph, p: Partition, c1: int, c2: int, gamma: float) -> float:
    """Change in CPM quality when communities c1 and c2 are merged."""
    _check_cover(g, p)
    labels = set(p.labels)
    for c in (c1, c2):
        if c not in labels:
            raise UnknownLabel(f"no community labeled {c}")
    if c1 == c2:
        raise ValueError("cannot merge a community with itself")
    cross = 0.0
    for i, j, w in g.edges():
        if {p[i], p[j]} == {c1, c2}:
            cross += w
    sizes = p.sizes()
    return cross - gamma * sizes[c1] * sizes[c2]


def is_connected_community(g: WeightedGraph, members: Sequence[int]) -> bool:
    if len(members) <= 1:
        return True
    inside = set(members)
    seen = {members[0]}
    stack = [members[0]]
    while stack:
        v = stack.pop()
        for u, w in g.adj[v].items():
            if w > 0 and u in inside and u not in seen:
                seen.add(u)
                stack.append(u)
    return len(seen) == len(inside)
