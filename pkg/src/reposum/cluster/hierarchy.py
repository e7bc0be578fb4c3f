"""File-level then method-level clustering, plus the ablation layouts."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..repo_graph.model import AdjacencyMatrix, RepoModel
from ..summarize import SimilarityMatrix
from .graph import Partition, blend_weights
from .tuning import DEFAULT_WEIGHTS, GammaSelection, auto_tune_gamma

LEVELS = ("hierarchical", "file_only", "method_only")


@dataclass
class ClusterConfig:
    alpha: float = 0.5
    variant: str = "blended"  # blended | adjacency_only | similarity_only
    levels: str = "hierarchical"  # hierarchical | file_only | method_only
    gamma_min: float = 1e-3
    gamma_max: float = 1.0
    grid_points: int = 16
    restarts: int = 5
    tau: float = 0.05
    seed: int = 1
    weights: tuple[float, float, float] = DEFAULT_WEIGHTS

    @property
    def seeds(self) -> list[int]:
        return list(range(self.seed, self.seed + self.restarts))


@dataclass
class Hierarchy:
    file_partition: Partition
    # file cluster -> (method ids in that cluster, partition over them)
    method_partitions: dict[int, tuple[list[int], Partition]]
    method_clusters: list[list[int]]  # global method cluster id -> sorted method ids
    cluster_file_cluster: list[int]  # global method cluster id -> file cluster
    file_selection: Optional[GammaSelection] = None
    method_selections: dict[int, GammaSelection] = field(default_factory=dict)

    def cluster_of_method(self) -> dict[int, int]:
        return {m: c for c, members in enumerate(self.method_clusters) for m in members}

    def check(self, model: RepoModel) -> list[str]:
        problems = []
        seen: dict[int, int] = {}
        for c, members in enumerate(self.method_clusters):
            if not members:
                problems.append(f"method cluster {c} is empty")
            fcs = {self.file_partition[model.methods[m].file_id] for m in members}
            if len(fcs) > 1:
                problems.append(f"method cluster {c} spans file clusters {sorted(fcs)}")
            elif fcs and fcs != {self.cluster_file_cluster[c]}:
                problems.append(f"method cluster {c} recorded under the wrong file cluster")
            for m in members:
                if m in seen:
                    problems.append(f"method {m} in clusters {seen[m]} and {c}")
                seen[m] = c
        missing = set(range(len(model.methods))) - set(seen)
        if missing:
            problems.append(f"methods without a cluster: {sorted(missing)[:10]}")
        return problems

    def to_dict(self) -> dict:
        return {
            "file_partition": list(self.file_partition.labels),
            "method_partitions": {
                str(fc): {"method_ids": ids, "labels": list(p.labels)}
                for fc, (ids, p) in sorted(self.method_partitions.items())
            },
            "method_clusters": [list(c) for c in self.method_clusters],
            "cluster_file_cluster": list(self.cluster_file_cluster),
            "file_selection": self.file_selection.to_dict() if self.file_selection else None,
            "method_selections": {str(k): v.to_dict() for k, v in sorted(self.method_selections.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Hierarchy":
        return cls(
            Partition(d["file_partition"]),
            {
                int(fc): (list(v["method_ids"]), Partition(v["labels"]))
                for fc, v in d["method_partitions"].items()
            },
            [list(c) for c in d["method_clusters"]],
            list(d["cluster_file_cluster"]),
            GammaSelection.from_dict(d["file_selection"]) if d.get("file_selection") else None,
            {int(k): GammaSelection.from_dict(v) for k, v in d.get("method_selections", {}).items()},
        )


def _cluster(adj: AdjacencyMatrix, sim: SimilarityMatrix, cfg: ClusterConfig):
    """Partition of one matrix pair, with the tuning record (None for trivial sizes)."""
    n = adj.n
    if n <= 1:
        return Partition([0] * n), None
    g = blend_weights(adj, sim, cfg.alpha, cfg.variant, cfg.tau)
    sel = auto_tune_gamma(
        g,
        sim,
        cfg.gamma_min,
        cfg.gamma_max,
        cfg.grid_points,
        seeds=cfg.seeds,
        weights=cfg.weights,
    )
    return sel.partition, sel


def hierarchical_cluster(
    model: RepoModel,
    adj_f: AdjacencyMatrix,
    adj_m: AdjacencyMatrix,
    sim_f: SimilarityMatrix,
    sim_m: SimilarityMatrix,
    config: Optional[ClusterConfig] = None,
) -> Hierarchy:
    cfg = config or ClusterConfig()
    if cfg.levels not in LEVELS:
        raise ValueError(f"unknown levels {cfg.levels!r}")

    file_selection = None
    if cfg.levels == "method_only":
        file_partition = Partition([0] * len(model.files))
    else:
        file_partition, file_selection = _cluster(adj_f, sim_f, cfg)

    members_by_fc: dict[int, list[int]] = {}
    for m in model.methods:
        members_by_fc.setdefault(file_partition[m.file_id], []).append(m.method_id)

    method_partitions: dict[int, tuple[list[int], Partition]] = {}
    selections: dict[int, GammaSelection] = {}
    clusters: list[list[int]] = []
    owner: list[int] = []
    for fc in sorted(members_by_fc):
        ids = sorted(members_by_fc[fc])
        if cfg.levels == "file_only":
            part = Partition([0] * len(ids))
        else:
            # calls leaving the file cluster are dropped by slicing
            part, sel = _cluster(adj_m.submatrix(ids), sim_m.submatrix(ids), cfg)
            if sel is not None:
                selections[fc] = sel
        method_partitions[fc] = (ids, part)
        for community in part.communities():
            clusters.append(sorted(ids[k] for k in community))
            owner.append(fc)

    return Hierarchy(file_partition, method_partitions, clusters, owner, file_selection, selections)
