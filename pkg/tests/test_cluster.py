import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import adjusted_rand_score

from reposum.cluster import (
    ClusterConfig,
    Partition,
    WeightedGraph,
    adjusted_rand_index,
    auto_tune_gamma,
    blend_weights,
    cpm_merge_delta,
    cpm_quality,
    hierarchical_cluster,
    leiden,
    separation,
    small_cluster_fraction,
)
from reposum.cluster.graph import is_connected_community
from reposum.cluster.leiden import best_single_move
from reposum.cluster.tuning import gamma_grid, select_best, stability
from reposum.errors import SizeMismatch, UnknownLabel
from reposum.repo_graph.model import AdjacencyMatrix, build_adjacency
from reposum.summarize import SimilarityMatrix

from conftest import random_weights, synthetic_model
from oracles import ari_pairs, cpm_value

labels_st = st.lists(st.integers(0, 4), min_size=1, max_size=14)


def sim_of(values):
    return SimilarityMatrix("file", np.asarray(values, dtype=float))


FOUR = sim_of(
    [
        [1.0, 0.9, 0.1, 0.1],
        [0.9, 1.0, 0.1, 0.1],
        [0.1, 0.1, 1.0, 0.7],
        [0.1, 0.1, 0.7, 1.0],
    ]
)


# --------------------------------------------------------------------------- graph and CPM


def test_partition_normalizes_labels():
    p = Partition([7, 7, 3, 9, 3])
    assert p.labels == (0, 0, 1, 2, 1)
    assert p.communities() == [[0, 1], [2, 4], [3]]
    assert p.sizes() == [2, 2, 1]
    assert Partition.from_communities([[2], [0, 1]], 3).labels == (0, 0, 1)
    with pytest.raises(ValueError):
        Partition.from_communities([[0]], 2)


def test_weighted_graph_rejects_bad_edges():
    with pytest.raises(ValueError):
        WeightedGraph(2, [(0, 0, 1.0)])
    with pytest.raises(ValueError):
        WeightedGraph(2, [(0, 1, -1.0)])
    with pytest.raises(SizeMismatch):
        WeightedGraph.from_dense(np.zeros((2, 3)))


def test_blend_weights_formula():
    adj = AdjacencyMatrix.from_relations("file", 3, [(0, 1)])
    sim = sim_of([[1, 0.4, 0.02], [0.4, 1, 0.5], [0.02, 0.5, 1]])
    g = blend_weights(adj, sim, alpha=0.25, tau=0.05)
    assert g.weight(0, 1) == pytest.approx(0.25 + 0.75 * 0.4)
    assert g.weight(1, 2) == pytest.approx(0.75 * 0.5)
    assert g.weight(0, 2) == 0.0  # 0.015 falls below tau
    assert blend_weights(adj, sim, variant="adjacency_only").edges() == [(0, 1, 1.0)]
    assert blend_weights(adj, sim, variant="similarity_only").weight(1, 2) == 0.5
    with pytest.raises(ValueError):
        blend_weights(adj, sim, alpha=1.5)
    with pytest.raises(SizeMismatch):
        blend_weights(AdjacencyMatrix.from_relations("file", 2, []), sim)


def test_cpm_quality_hand_example():
    g = WeightedGraph(3, [(0, 1, 1.0), (1, 2, 0.5)])
    assert cpm_quality(g, Partition([0, 0, 0]), 0.5) == pytest.approx(1.5 - 0.5 * 3)
    assert cpm_quality(g, Partition([0, 0, 1]), 0.5) == pytest.approx(0.5)
    assert cpm_quality(g, Partition([0, 1, 2]), 0.5) == 0.0
    with pytest.raises(SizeMismatch):
        cpm_quality(g, Partition([0, 0]), 0.5)
    with pytest.raises(UnknownLabel):
        cpm_merge_delta(g, Partition([0, 0, 1]), 0, 5, 0.5)


@given(st.integers(2, 9), st.integers(0, 10**6), st.floats(0.05, 1.5))
def test_cpm_matches_oracle_and_merge_delta(n, seed, gamma):
    rng = random.Random(seed)
    w = random_weights(rng, n)
    g = WeightedGraph.from_dense(w)
    p = Partition([rng.randint(0, 3) for _ in range(n)])
    assert cpm_quality(g, p, gamma) == pytest.approx(cpm_value(w, p.labels, gamma), abs=1e-9)
    if p.k >= 2:
        merged = Partition([0 if lab == 1 else lab for lab in p.labels])
        delta = cpm_merge_delta(g, p, 0, 1, gamma)
        assert cpm_quality(g, merged, gamma) - cpm_quality(g, p, gamma) == pytest.approx(delta, abs=1e-9)


# --------------------------------------------------------------------------- Leiden


def test_leiden_separates_two_cliques():
    edges = [(i, j, 1.0) for i in range(4) for j in range(i + 1, 4)]
    edges += [(i, j, 1.0) for i in range(4, 8) for j in range(i + 1, 8)]
    edges.append((3, 4, 0.1))
    p = leiden(WeightedGraph(8, edges), 0.5, seed=3)
    assert p.labels == (0, 0, 0, 0, 1, 1, 1, 1)


def test_leiden_high_gamma_gives_singletons():
    g = WeightedGraph(3, [(0, 1, 0.2), (1, 2, 0.2)])
    assert leiden(g, 1.0).k == 3
    with pytest.raises(ValueError):
        leiden(g, 0.0)


@settings(max_examples=40)
@given(st.integers(1, 14), st.integers(0, 10**6), st.sampled_from([0.1, 0.3, 0.7]))
def test_leiden_invariants(n, seed, gamma):
    rng = random.Random(seed)
    g = WeightedGraph.from_dense(random_weights(rng, n, density=0.4))
    p = leiden(g, gamma, seed=seed)
    assert p.n == n
    assert all(is_connected_community(g, c) for c in p.communities())
    assert cpm_quality(g, p, gamma) >= -1e-12  # never worse than singletons
    gain, _, _ = best_single_move(g, p, gamma)
    assert gain <= 1e-9
    assert leiden(g, gamma, seed=seed) == p


# --------------------------------------------------------------------------- tuning


def test_ari_known_values():
    assert adjusted_rand_index(Partition([0, 0, 1, 1]), Partition([5, 5, 2, 2])) == 1.0
    assert adjusted_rand_index(Partition([0, 0, 1, 1]), Partition([0, 1, 0, 1])) == pytest.approx(-0.5)
    with pytest.raises(SizeMismatch):
        adjusted_rand_index(Partition([0]), Partition([0, 0]))


@given(labels_st, st.data())
def test_ari_matches_sklearn_and_pair_oracle(a, data):
    b = data.draw(st.lists(st.integers(0, 4), min_size=len(a), max_size=len(a)))
    ours = adjusted_rand_index(Partition(a), Partition(b))
    assert ours == pytest.approx(ari_pairs(a, b), abs=1e-12)
    assert ours == pytest.approx(adjusted_rand_score(a, b), abs=1e-9)


def test_separation_examples():
    assert separation(Partition([0, 0, 1, 1]), FOUR) == pytest.approx(0.8 - 0.1)
    # one cluster: no cross pairs, so the cross term is 0
    assert separation(Partition([0, 0, 0, 0]), FOUR) == pytest.approx(2.0 / 6)
    # singletons: no within pairs
    assert separation(Partition([0, 1, 2, 3]), FOUR) == pytest.approx(-2.0 / 6)
    # size-weighted within: (3 * mean(0.9, 0.1, 0.1) + 0) / 3, cross mean of 3 pairs
    assert separation(Partition([0, 0, 0, 1]), FOUR) == pytest.approx(1.1 / 3 - 0.9 / 3)
    with pytest.raises(SizeMismatch):
        separation(Partition([0, 0]), FOUR)


def test_small_cluster_fraction():
    assert small_cluster_fraction(Partition([0, 0, 1, 1, 1])) == pytest.approx(0.4)
    assert small_cluster_fraction(Partition([0, 1, 1, 1])) == pytest.approx(0.25)
    assert small_cluster_fraction(Partition([0, 0, 0])) == 0.0
    assert small_cluster_fraction(Partition([])) == 0.0


def test_gamma_grid_and_tie_break():
    grid = gamma_grid(0.001, 1.0, 4)
    assert grid == pytest.approx([0.001, 0.01, 0.1, 1.0])
    with pytest.raises(ValueError):
        gamma_grid(0, 1, 4)
    with pytest.raises(ValueError):
        gamma_grid(0.1, 1, 1)
    assert select_best([0.2, 0.5, 0.5, 0.1]) == 1
    assert select_best([0.3]) == 0


def test_stability_needs_two_seeds():
    g = WeightedGraph(2, [(0, 1, 1.0)])
    with pytest.raises(ValueError):
        stability(g, 0.5, [1])
    assert stability(g, 0.5, [1, 2, 3]) == 1.0


def test_auto_tune_records_and_weights():
    g = blend_weights(AdjacencyMatrix.from_relations("file", 4, [(0, 1), (2, 3)]), FOUR, alpha=0.5)
    sel = auto_tune_gamma(g, FOUR, 0.01, 1.0, 5, seeds=[1, 2, 3])
    assert len(sel.records) == 5
    for r in sel.records:
        assert r.combined_score == pytest.approx(r.stability + r.separation - r.small_cluster_fraction)
    best = max(r.combined_score for r in sel.records)
    first = next(r for r in sel.records if r.combined_score >= best - 1e-12)
    assert sel.chosen is first
    # pairs score 1 + 0.7 - 1.0 (every node is in a size-2 cluster); one block scores 1 + 1/3 - 0
    assert sel.partition.labels == (0, 0, 0, 0)
    assert sel.chosen.combined_score == pytest.approx(1 + 1 / 3)
    custom = auto_tune_gamma(g, FOUR, 0.01, 1.0, 5, seeds=[1, 2], weights=(0.0, 0.0, 1.0))
    # pairs and singletons both score 1.0 here; the tie goes to the smaller gamma (pairs)
    assert custom.chosen.combined_score == 1.0
    assert custom.partition.labels == (0, 0, 1, 1)


# --------------------------------------------------------------------------- hierarchy


def _inputs(model, rng):
    adj_f, adj_m = build_adjacency(model, "file"), build_adjacency(model, "method")
    from conftest import random_unit_vectors

    def sim(n, level):
        v = random_unit_vectors(rng, n)
        return SimilarityMatrix(level, np.clip(v @ v.T, 0, 1))

    return adj_f, adj_m, sim(len(model.files), "file"), sim(len(model.methods), "method")


@settings(max_examples=15)
@given(st.integers(0, 10**6), st.sampled_from(["hierarchical", "file_only", "method_only"]))
def test_hierarchy_invariants(seed, levels):
    rng = random.Random(seed)
    model = synthetic_model(rng)
    cfg = ClusterConfig(levels=levels, grid_points=3, restarts=2)
    h = hierarchical_cluster(model, *_inputs(model, rng), cfg)
    assert h.check(model) == []
    if levels == "method_only":
        assert set(h.file_partition.labels) == {0}
    if levels == "file_only":
        assert len(h.method_clusters) == h.file_partition.k
    again = type(h).from_dict(h.to_dict())
    assert again.to_dict() == h.to_dict()


def test_hierarchy_check_detects_spanning_cluster():
    model = synthetic_model(random.Random(4), n_files=3)
    h = hierarchical_cluster(model, *_inputs(model, random.Random(4)), ClusterConfig(levels="method_only", grid_points=2, restarts=2))
    h.file_partition = Partition(range(len(model.files)))
    spans = [c for c in h.method_clusters if len({model.methods[m].file_id for m in c}) > 1]
    if spans:
        assert any("spans file clusters" in p for p in h.check(model))
    h.method_clusters = h.method_clusters[1:]
    assert any("without a cluster" in p or "recorded under" in p for p in h.check(model))


def test_hierarchy_rejects_unknown_levels():
    model = synthetic_model(random.Random(1))
    with pytest.raises(ValueError):
        hierarchical_cluster(model, *_inputs(model, random.Random(1)), ClusterConfig(levels="flat"))
