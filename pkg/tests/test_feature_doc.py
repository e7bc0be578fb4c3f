import json

import numpy as np
import pytest

from reposum.cluster import Hierarchy, Partition
from reposum.config import RunConfig
from reposum.errors import AuthError, GatewayError, MissingFeature
from reposum.feature_doc import (
    DEGRADED_BADGE,
    Epic,
    Feature,
    TraceLink,
    build_document_tree,
    derive_trace_links,
    epic_prompt,
    feature_prompt,
    generate_documentation,
    generate_epic,
    generate_feature,
    render_documentation,
)
from reposum.gateway import Gateway, make_gateway
from reposum.pipeline import run_pipeline
from reposum.repo_graph import parse_repository
from reposum.repo_graph.model import MethodNode
from reposum.summarize import MethodSummary


class ScriptedProvider:
    name = "scripted"

    def __init__(self, replies):
        self.replies = list(replies)
        self.prompts = []

    def complete(self, req):
        self.prompts.append(req.prompt)
        r = self.replies.pop(0)
        if isinstance(r, Exception):
            raise r
        return r

    def embed(self, text):
        return np.ones(4)


@pytest.fixture
def tiny(fixtures_dir):
    return parse_repository(fixtures_dir / "tiny")


def summaries_for(model):
    return [MethodSummary(m.method_id, f"does {m.name}", [f"step of {m.name}"]) for m in model.methods]


def tiny_hierarchy(split: bool) -> Hierarchy:
    # split: {m1, m2} in file cluster 0 (A), {m3} in file cluster 1 (B)
    if split:
        return Hierarchy(Partition([0, 1]), {0: ([0, 1], Partition([0, 0])), 1: ([2], Partition([0]))}, [[0, 1], [2]], [0, 1])
    return Hierarchy(Partition([0, 0]), {0: ([0, 1, 2], Partition([0, 0, 0]))}, [[0, 1, 2]], [0])


# --------------------------------------------------------------------------- prompts and features


def test_feature_prompt_lists_members_and_steps(tiny):
    members = list(zip(tiny.methods, summaries_for(tiny)))[:2]
    prompt, tier = feature_prompt(4, members, 4096)
    assert tier == "full"
    assert "CLUSTER: c_4" in prompt
    assert "- FQN: tiny.core.A.m1\n  DESCRIPTION: does m1\n  WORKFLOW: step of m1" in prompt
    for word in ("entities", "operations", "title"):
        assert word in prompt


def test_stub_feature_for_pair(tiny, no_network):
    members = list(zip(tiny.methods, summaries_for(tiny)))[:2]
    f = generate_feature(7, members, make_gateway())
    assert f.title == "STUB-FEATURE(c_7)"
    assert "tiny.core.A.m1" in f.description and "tiny.core.A.m2" in f.description
    assert f.prompt_tier == "full" and not f.degraded
    assert np.isclose(np.linalg.norm(f.embedding), 1.0)


def test_singleton_feature_uses_its_description(tiny):
    f = generate_feature(0, [(tiny.methods[2], MethodSummary(2, "creates an A and runs it"))], make_gateway())
    assert "creates an A and runs it" in f.description


def test_large_cluster_falls_back_under_budget(caplog):
    members = []
    for k in range(200):
        m = MethodNode(k, f"big.Svc.op{k}", 0, (k + 1, k + 1), "x", f"op{k}")
        members.append((m, MethodSummary(k, f"performs operation number {k} on the record store", ["a step"] * 5)))
    budget = 2000
    prompt, tier = feature_prompt(0, members, budget)
    assert tier == "truncated"
    assert len(prompt) <= budget * 4
    assert "more methods omitted]" in prompt
    f = generate_feature(0, members, make_gateway(), budget=budget)
    assert f.prompt_tier == "truncated"
    assert any("fell back" in r.message for r in caplog.records)
    _, mid = feature_prompt(0, members, 5000)  # fits without workflows (about 4400 tokens)
    assert mid == "description_only"


def test_feature_retry_and_degraded(tiny):
    members = list(zip(tiny.methods, summaries_for(tiny)))[:1]
    prov = ScriptedProvider(["junk", '{"title": "Count things", "description": "Counts."}'])
    assert generate_feature(0, members, Gateway(prov)).title == "Count things"
    prov = ScriptedProvider([GatewayError("down")])
    f = generate_feature(3, members, Gateway(prov))
    assert f.degraded and f.title == "Method cluster 3" and f.description == "does m1"
    with pytest.raises(AuthError):
        generate_feature(0, members, Gateway(ScriptedProvider([AuthError("401")])))
    with pytest.raises(ValueError):
        generate_feature(0, [], make_gateway())


def test_epics(tiny):
    a = Feature(0, "Add an item", "adds", 0)
    b = Feature(1, "Remove an item", "removes", 1)
    e = generate_epic(2, [a, b], make_gateway())
    assert e.title == "STUB-EPIC(fc_2)"
    assert "Add an item" in e.description and "Remove an item" in e.description
    assert e.feature_ids == [0, 1]
    one = generate_epic(5, [a], Gateway(ScriptedProvider([])))
    assert (one.title, one.description, one.feature_ids) == ("Add an item", "adds", [0])
    bad = generate_epic(4, [a, b], Gateway(ScriptedProvider([GatewayError("x")])))
    assert bad.degraded and bad.title == "File cluster 4"
    prompt = epic_prompt(9, [a, b])
    assert "FILE_CLUSTER: fc_9" in prompt and "- TITLE: Remove an item" in prompt


# --------------------------------------------------------------------------- trace links and tree


def test_trace_links_lift_to_files(tiny):
    h = tiny_hierarchy(split=True)
    feats = [Feature(0, "t", "d", 0), Feature(1, "t", "d", 1)]
    links = derive_trace_links(h, feats, tiny)
    assert links == [TraceLink(0, (0, 1), (0,)), TraceLink(1, (2,), (1,))]
    links = derive_trace_links(tiny_hierarchy(split=False), [Feature(0, "t", "d", 0)], tiny)
    assert links == [TraceLink(0, (0, 1, 2), (0, 1))]
    with pytest.raises(MissingFeature):
        derive_trace_links(h, feats[:1], tiny)


def test_trace_link_dict_has_names(tiny):
    d = TraceLink(0, (0, 2), (0, 1)).to_dict(tiny)
    assert d["fqns"] == ["tiny.core.A.m1", "tiny.app.B.m3"]
    assert d["paths"] == ["A.java", "B.java"]
    assert TraceLink.from_dict(d) == TraceLink(0, (0, 2), (0, 1))


def test_generate_documentation_bijection(tiny):
    h = tiny_hierarchy(split=True)
    features, epics, links, tree = generate_documentation(tiny, h, summaries_for(tiny), make_gateway(), parallel=3)
    assert len(features) == len(h.method_clusters)
    covered = sorted(m for l in links for m in l.method_ids)
    assert covered == [0, 1, 2]
    assert tree.check() == []
    assert [e.feature_ids for e in epics] == [[0], [1]]


def test_tree_check_flags_problems(tiny):
    f = Feature(0, "t", "d", 0)
    tree = build_document_tree(tiny, [Epic(0, "e", "d", 0, [0]), Epic(1, "e", "d", 1, [0])], [f], [TraceLink(0, (0,), (1,))])
    problems = tree.check()
    assert any("under epics" in p for p in problems)
    assert any("not justified" in p for p in problems)


def test_feature_round_trip():
    f = Feature(1, "T", "D", 1, np.array([0.6, 0.8]), "truncated", True, ["cart"], ["add"])
    assert Feature.from_dict(json.loads(json.dumps(f.to_dict()))).to_dict() == f.to_dict()
    e = Epic(0, "E", "D", 0, [1, 2], True)
    assert Epic.from_dict(e.to_dict()) == e


# --------------------------------------------------------------------------- rendering


def test_render_structure_and_badges(tiny, tmp_path):
    feats = [Feature(0, "Count", "d", 0, degraded=True), Feature(1, "Run", "d", 1)]
    links = derive_trace_links(tiny_hierarchy(split=True), feats, tiny)
    epics = [Epic(0, "E0", "d", 0, [0], degraded=True), Epic(1, "E1", "d", 1, [1])]
    tree = build_document_tree(tiny, epics, feats, links, "abc")
    written = render_documentation(tree, tmp_path)
    names = sorted(p.name for p in written)
    assert names == ["epic-000.md", "epic-001.md", "index.md"]
    index = (tmp_path / "index.md").read_text()
    for page in names[:2]:
        assert f"]({page})" in index
    assert sorted(p.name for p in tmp_path.iterdir()) == names  # no orphan pages
    assert f"[E0](epic-000.md) {DEGRADED_BADGE} (1 feature)" in index
    page = (tmp_path / "epic-000.md").read_text()
    assert "config_hash: abc" in page
    assert f"## Feature 0: Count {DEGRADED_BADGE}" in page
    assert "- `tiny.core.A.m1` (A.java, lines 7-10)" in page


def test_render_empty(tiny, tmp_path):
    render_documentation(build_document_tree(tiny, [], [], []), tmp_path)
    assert "No features were generated for this repository." in (tmp_path / "index.md").read_text()


def test_golden_docs_for_tiny(fixtures_dir, tmp_path, no_network):
    cfg = RunConfig(repo=str(fixtures_dir / "tiny"), out=str(tmp_path / "out"))
    out = run_pipeline(cfg)
    golden = fixtures_dir / "golden" / "tiny"
    produced = sorted(p.name for p in (out / "docs").iterdir())
    assert produced == sorted(p.name for p in golden.iterdir())
    for name in produced:
        assert (out / "docs" / name).read_bytes() == (golden / name).read_bytes(), name
    rows = json.loads((out / "trace_links.json").read_text())["links"]
    assert [(r["fqns"], r["paths"]) for r in rows] == [
        (["tiny.core.A.m1", "tiny.core.A.m2", "tiny.app.B.m3"], ["A.java", "B.java"])
    ]
