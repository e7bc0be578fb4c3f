"""Resolution auto-tuning: stability, separation and small-cluster fraction over a log grid."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Optional, Sequence

import numpy as np

from ..errors import SizeMismatch
from ..summarize import SimilarityMatrix
from .graph import Partition, WeightedGraph
from .leiden import leiden

DEFAULT_WEIGHTS = (1.0, 1.0, -1.0)  # stability, separation, small-cluster fraction
TIE_TOL = 1e-12


def adjusted_rand_index(p1: Partition, p2: Partition) -> float:
    """ARI from the contingency table; 1.0 when both partitions are identical."""
    if p1.n != p2.n:
        raise SizeMismatch(f"partitions cover {p1.n} and {p2.n} nodes")
    n = p1.n
    table: dict[tuple[int, int], int] = {}
    for a, b in zip(p1.labels, p2.labels):
        table[(a, b)] = table.get((a, b), 0) + 1
    index = sum(comb(c, 2) for c in table.values())
    sum_a = sum(comb(c, 2) for c in p1.sizes())
    sum_b = sum(comb(c, 2) for c in p2.sizes())
    total = comb(n, 2)
    if total == 0:
        return 1.0
    expected = sum_a * sum_b / total
    max_index = (sum_a + sum_b) / 2
    if max_index == expected:
        # only reachable when both partitions are all-singletons or both a single block
        return 1.0
    return (index - expected) / (max_index - expected)


def stability(g: WeightedGraph, gamma: float, seeds: Sequence[int], runs: Optional[list] = None) -> float:
    """Mean pairwise ARI over Leiden runs with the given seeds."""
    if len(seeds) < 2:
        raise ValueError("stability needs at least two seeds")
    if runs is None:
        runs = [leiden(g, gamma, s) for s in seeds]
    pairs = list(combinations(range(len(runs)), 2))
    return sum(adjusted_rand_index(runs[a], runs[b]) for a, b in pairs) / len(pairs)


def separation(p: Partition, sim: SimilarityMatrix) -> float:
    """Size-weighted mean within-cluster similarity minus mean cross-cluster similarity.

    Only clusters with at least two members contribute to the within term; a
    term with no pairs to average is 0.
    """
    if p.n != sim.n:
        raise SizeMismatch(f"partition covers {p.n} nodes, similarity has {sim.n}")
    s = sim.values
    labels = np.asarray(p.labels)
    num = den = 0.0
    for members in p.communities():
        if len(members) < 2:
            continue
        idx = np.asarray(members)
        block = s[np.ix_(idx, idx)]
        iu = np.triu_indices(len(members), k=1)
        num += len(members) * float(block[iu].mean())
        den += len(members)
    within = num / den if den else 0.0
    iu, ju = np.triu_indices(p.n, k=1)
    cross = labels[iu] != labels[ju]
    out = float(s[iu[cross], ju[cross]].mean()) if cross.any() else 0.0
    return within - out


def small_cluster_fraction(p: Partition, max_size: int = 2) -> float:
    """Fraction of nodes sitting in clusters of size <= max_size."""
    if p.n == 0:
        return 0.0
    return sum(n for n in p.sizes() if n <= max_size) / p.n


def gamma_grid(gamma_min: float, gamma_max: float, points: int) -> list[float]:
    if gamma_min <= 0 or gamma_max < gamma_min:
        raise ValueError("need 0 < gamma_min <= gamma_max")
    if points < 2:
        raise ValueError("grid needs at least two points")
    return [float(x) for x in np.logspace(np.log10(gamma_min), np.log10(gamma_max), points)]


@dataclass
class GammaRecord:
    gamma: float
    stability: float
    separation: float
    small_cluster_fraction: float
    combined_score: float
    representative_partition: Partition

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "stability": self.stability,
            "separation": self.separation,
            "small_cluster_fraction": self.small_cluster_fraction,
            "combined_score": self.combined_score,
            "representative_partition": list(self.representative_partition.labels),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GammaRecord":
        return cls(
            d["gamma"],
            d["stability"],
            d["separation"],
            d["small_cluster_fraction"],
            d["combined_score"],
            Partition(d["representative_partition"]),
        )


@dataclass
class GammaSelection:
    grid: list[float]
    records: list[GammaRecord]
    chosen_gamma: float
    weights: tuple[float, float, float] = DEFAULT_WEIGHTS
    seeds: list[int] = field(default_factory=list)

    @property
    def chosen(self) -> GammaRecord:
        return self.records[self.grid.index(self.chosen_gamma)]

    @property
    def partition(self) -> Partition:
        return self.chosen.representative_partition

    def to_dict(self) -> dict:
        return {
            "grid": list(self.grid),
            "chosen_gamma": self.chosen_gamma,
            "weights": list(self.weights),
            "seeds": list(self.seeds),
            "records": [r.to_dict() for r in self.records],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GammaSelection":
        return cls(
            list(d["grid"]),
            [GammaRecord.from_dict(r) for r in d["records"]],
            d["chosen_gamma"],
            tuple(d["weights"]),
            list(d["seeds"]),
        )


def select_best(scores: Sequence[float]) -> int:
    """Index of the maximum score; ties go to the earliest (smallest gamma)."""
    top = max(scores)
    return next(i for i, s in enumerate(scores) if s >= top - TIE_TOL)


def auto_tune_gamma(
    g: WeightedGraph,
    sim: SimilarityMatrix,
    gamma_min: float = 1e-3,
    gamma_max: float = 1.0,
    points: int = 16,
    restarts: int = 5,
    seeds: Optional[Sequence[int]] = None,
    weights: tuple[float, float, float] = DEFAULT_WEIGHTS,
) -> GammaSelection:
    grid = gamma_grid(gamma_min, gamma_max, points)
    seeds = list(seeds) if seeds is not None else list(range(1, restarts + 1))
    if len(seeds) < 2:
        raise ValueError("auto-tuning needs at least two restart seeds")
    w_stab, w_sep, w_small = weights
    records = []
    for gamma in grid:
        runs = [leiden(g, gamma, s) for s in seeds]
        rep = runs[0]
        stab = stability(g, gamma, seeds, runs)
        sep = separation(rep, sim)
        small = small_cluster_fraction(rep)
        score = w_stab * stab + w_sep * sep + w_small * small
        records.append(GammaRecord(gamma, stab, sep, small, score, rep))
    best = select_best([r.combined_score for r in records])
    return GammaSelection(grid, records, grid[best], tuple(weights), seeds)
