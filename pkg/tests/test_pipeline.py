import json

import pytest

from reposum.config import RunConfig, load_config
from reposum.errors import ConfigError, DependencyError, SchemaViolation
from reposum.pipeline import (
    LOCK,
    MANIFEST,
    OUTPUTS,
    Pipeline,
    checksum,
    directory_lock,
    run_pipeline,
    validate_artifacts,
)


@pytest.fixture
def tiny_cfg(fixtures_dir, tmp_path):
    return RunConfig(repo=str(fixtures_dir / "tiny"), out=str(tmp_path / "out"))


def all_checksums(out):
    return {name: checksum(out / name) for names in OUTPUTS.values() for name in names}


# --------------------------------------------------------------------------- config


def test_config_defaults_and_hash_stability(tmp_path):
    a = RunConfig()
    b = RunConfig(repo="/elsewhere", out=str(tmp_path))
    assert a.hash() == b.hash()  # locations are not run parameters
    c = load_config(None, {"cluster": {"alpha": 0.3}})
    assert c.cluster.alpha == 0.3 and c.hash() != a.hash()
    assert json.loads(a.canonical_json())["cluster"]["weights"] == [1.0, 1.0, -1.0]


def test_config_file_and_overrides(tmp_path):
    p = tmp_path / "reposum.toml"
    p.write_text('seed = 7\n[cluster]\nalpha = 0.25\nrestarts = 3\n[provider]\nname = "stub"\n')
    cfg = load_config(str(p), {"cluster": {"alpha": None, "restarts": 4}, "seed": None})
    assert (cfg.seed, cfg.cluster.alpha, cfg.cluster.restarts) == (7, 0.25, 4)
    assert cfg.cluster_config().seeds == [7, 8, 9, 10]


@pytest.mark.parametrize(
    "text, match",
    [
        ("[cluster]\nalpha = 2.0\n", "alpha"),
        ("[cluster]\nvariant = 'nope'\n", "variant"),
        ("[eval]\njudge_temperature = 0.5\n", "judge_temperature"),
        ("[cluster]\nrestarts = 1\n", "restarts"),
        ("[clustr]\nalpha = 0.5\n", "unknown config keys"),
        ("[cluster]\nalfa = 0.5\n", "unknown keys"),
        ("[cluster\n", "invalid TOML"),
    ],
)
def test_config_rejects(tmp_path, text, match):
    p = tmp_path / "c.toml"
    p.write_text(text)
    with pytest.raises(ConfigError, match=match):
        load_config(str(p))


def test_missing_config_file():
    with pytest.raises(ConfigError, match="not found"):
        load_config("/nonexistent/reposum.toml")


# --------------------------------------------------------------------------- pipeline


def test_tiny_pipeline_artifacts_and_resume(tiny_cfg, no_network):
    p = Pipeline(tiny_cfg)
    assert p.run() == {phase: "ok" for phase in ("analyze", "summarize", "cluster", "docgen")}
    out = p.out
    for names in OUTPUTS.values():
        for name in names:
            assert (out / name).exists()
    manifest = json.loads((out / MANIFEST).read_text())
    assert manifest["config_hash"] == tiny_cfg.hash()
    assert manifest["phases"]["docgen"]["inputs"]["clusters.json"] == manifest["phases"]["cluster"]["outputs"]["clusters.json"]
    assert validate_artifacts(out).problems == []

    before = all_checksums(out)
    again = Pipeline(tiny_cfg)
    assert set(again.run().values()) == {"cached"}
    assert all_checksums(out) == before


def test_determinism_across_directories(tiny_cfg, tmp_path):
    a = run_pipeline(tiny_cfg)
    b = run_pipeline(tiny_cfg, out=tmp_path / "second")
    assert all_checksums(a) == all_checksums(b)


def test_alpha_change_reruns_cluster_and_docgen_only(fixtures_dir, tmp_path):
    base = RunConfig(repo=str(fixtures_dir / "shop"), out=str(tmp_path / "o"))
    Pipeline(base).run()
    changed = load_config(None, {"repo": base.repo, "out": base.out, "cluster": {"alpha": 0.3}})
    statuses = Pipeline(changed).run()
    assert statuses == {"analyze": "cached", "summarize": "cached", "cluster": "ok", "docgen": "ok"}


def test_force_reruns_everything(tiny_cfg):
    run_pipeline(tiny_cfg)
    assert set(Pipeline(tiny_cfg, force=True).run().values()) == {"ok"}


def test_tampered_artifact_is_dependency_error(tiny_cfg):
    out = run_pipeline(tiny_cfg)
    clusters = out / "clusters.json"
    data = json.loads(clusters.read_text())
    data["seed"] = 99
    clusters.write_text(json.dumps(data))
    with pytest.raises(DependencyError, match="clusters.json changed"):
        Pipeline(tiny_cfg).run_phase("docgen")
    # rerunning the producer repairs the chain
    assert Pipeline(tiny_cfg).run_phase("cluster") == "ok"
    assert Pipeline(tiny_cfg).run_phase("docgen") == "ok"  # a rerun producer marks docgen stale


def test_missing_upstream_is_dependency_error(tiny_cfg):
    with pytest.raises(DependencyError, match="run analyze first"):
        Pipeline(tiny_cfg).run_phase("summarize")


def test_failed_phase_recorded(fixtures_dir, tmp_path):
    cfg = RunConfig(repo=str(tmp_path / "nowhere"), out=str(tmp_path / "o"))
    with pytest.raises(Exception):
        Pipeline(cfg).run()
    manifest = json.loads((tmp_path / "o" / MANIFEST).read_text())
    assert manifest["phases"]["analyze"]["status"] == "failed"
    assert "RootNotFound" in manifest["phases"]["analyze"]["error"]


def test_lock_prevents_concurrent_runs(tiny_cfg, tmp_path):
    out = tmp_path / "out"
    with directory_lock(out):
        assert (out / LOCK).exists()
        with pytest.raises(ConfigError, match="locked"):
            Pipeline(tiny_cfg).run()


def test_warnings_aggregate_into_manifest(tiny_cfg):
    out = run_pipeline(tiny_cfg)
    analyze = json.loads((out / MANIFEST).read_text())["phases"]["analyze"]
    assert any("println" in w for w in analyze["warnings"])


# --------------------------------------------------------------------------- validation


def test_validate_detects_asymmetric_matrix(tiny_cfg):
    out = run_pipeline(tiny_cfg)
    graph = json.loads((out / "graph.json").read_text())
    graph["adjacency"]["method"]["entries"] = graph["adjacency"]["method"]["entries"][1:]
    (out / "graph.json").write_text(json.dumps(graph))
    with pytest.raises(SchemaViolation) as err:
        validate_artifacts(out)
    assert any("graph.json" in p and "asymmetric" in p for p in err.value.problems)


def test_validate_detects_bad_similarity(tiny_cfg):
    out = run_pipeline(tiny_cfg)
    path = out / "ss_matrix.method.json"
    sim = json.loads(path.read_text())
    sim["entries"][0][2] = 1.5
    path.write_text(json.dumps(sim))
    with pytest.raises(SchemaViolation) as err:
        validate_artifacts(out)
    assert any("ss_matrix.method.json" in p for p in err.value.problems)


def test_validate_missing_features_with_docgen_required(tiny_cfg):
    out = run_pipeline(tiny_cfg)
    (out / "features.json").unlink()
    with pytest.raises(DependencyError):
        validate_artifacts(out, require=("docs",))
    with pytest.raises(DependencyError):
        validate_artifacts(out, require=("features.json",))


def test_validate_partial_dir(tiny_cfg):
    p = Pipeline(tiny_cfg)
    p.run(until="summarize")
    report = validate_artifacts(p.out)
    assert report.problems == [] and "clusters.json" not in report.checked
