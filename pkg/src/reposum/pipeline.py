"""Phase orchestration over an artifact directory, with a checksum manifest for resume."""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import logging
import os
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import filelock
import numpy as np

from . import __version__
from .cluster.hierarchy import Hierarchy, hierarchical_cluster
from .config import RunConfig
from .errors import ConfigError, DependencyError, SchemaViolation
from .feature_doc import (
    Epic,
    Feature,
    TraceLink,
    build_document_tree,
    generate_documentation,
    render_documentation,
)
from .gateway import Gateway, make_gateway
from .repo_graph.model import AdjacencyMatrix, RepoModel, build_adjacency
from .repo_graph.parse import discover_sources, parse_repository
from .repo_graph.profiles import get_profile
from .summarize import FileSummary, MethodSummary, SimilarityMatrix, summarize_repository

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
LOCK = ".reposum.lock"
CACHE_DIR = "cache"
PHASES = ("analyze", "summarize", "cluster", "docgen")

# phase -> files it writes (docs/ is a directory)
OUTPUTS = {
    "analyze": ("graph.json",),
    "summarize": ("summaries.json", "ss_matrix.file.json", "ss_matrix.method.json"),
    "cluster": ("clusters.json",),
    "docgen": ("features.json", "trace_links.json", "docs"),
}
INPUTS = {
    "analyze": (),
    "summarize": ("graph.json",),
    "cluster": ("graph.json", "ss_matrix.file.json", "ss_matrix.method.json"),
    "docgen": ("graph.json", "summaries.json", "clusters.json"),
}
PRODUCER = {name: phase for phase, names in OUTPUTS.items() for name in names}


# --------------------------------------------------------------------------- file helpers


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def checksum(path: Path) -> str:
    """File digest, or a digest over (relative path, digest) pairs for a directory."""
    if path.is_dir():
        h = hashlib.sha256()
        for p in sorted(q for q in path.rglob("*") if q.is_file()):
            h.update(f"{p.relative_to(path).as_posix()}\0{sha256_file(p)}\n".encode())
        return h.hexdigest()
    return sha256_file(path)


def write_json(path: Path, data) -> None:
    text = json.dumps(data, indent=1, sort_keys=True) + "\n"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def read_json(path: Path):
    return json.loads(path.read_text(encoding="utf-8"))


def _digest(*parts) -> str:
    return hashlib.sha256(json.dumps(parts, sort_keys=True).encode()).hexdigest()


def source_digest(root, language: str = "java") -> str:
    root = Path(root)
    h = hashlib.sha256()
    for rel in discover_sources(root, get_profile(language)):
        h.update(f"{rel}\0{sha256_file(root / rel)}\n".encode())
    return h.hexdigest()


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


# --------------------------------------------------------------------------- manifest


@dataclass
class PhaseRecord:
    status: str  # ok | failed | cached
    input_key: str = ""
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    started: str = ""
    finished: str = ""
    warnings: list[str] = field(default_factory=list)
    error: str = ""


@dataclass
class RunManifest:
    config_hash: str = ""
    tool_version: str = __version__
    phases: dict[str, PhaseRecord] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema": "reposum/manifest/v1",
            "config_hash": self.config_hash,
            "tool_version": self.tool_version,
            "phases": {k: vars(v) for k, v in self.phases.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        return cls(d.get("config_hash", ""), d.get("tool_version", ""),
                   {k: PhaseRecord(**v) for k, v in d.get("phases", {}).items()})

    @classmethod
    def load(cls, out: Path) -> "RunManifest":
        path = out / MANIFEST
        return cls.from_dict(read_json(path)) if path.exists() else cls()

    def save(self, out: Path) -> None:
        write_json(out / MANIFEST, self.to_dict())


class _WarningCollector(logging.Handler):
    def __init__(self):
        super().__init__(logging.WARNING)
        self.messages: list[str] = []

    def emit(self, record):
        self.messages.append(record.getMessage())


@contextmanager
def collect_warnings():
    handler = _WarningCollector()
    root = logging.getLogger("reposum")
    root.addHandler(handler)
    try:
        yield handler.messages
    finally:
        root.removeHandler(handler)


@contextmanager
def directory_lock(out: Path):
    out.mkdir(parents=True, exist_ok=True)
    lock = filelock.FileLock(str(out / LOCK), timeout=0)
    try:
        lock.acquire()
    except filelock.Timeout as exc:
        raise ConfigError(f"{out} is locked by another run") from exc
    try:
        yield
    finally:
        lock.release()


# --------------------------------------------------------------------------- artifact loaders


def load_model(out: Path) -> RepoModel:
    return RepoModel.from_dict(read_json(out / "graph.json")["model"])


def load_summaries(out: Path) -> tuple[list[MethodSummary], list[FileSummary]]:
    d = read_json(out / "summaries.json")
    return [MethodSummary.from_dict(x) for x in d["methods"]], [FileSummary.from_dict(x) for x in d["files"]]


def load_similarity(out: Path, level: str) -> SimilarityMatrix:
    return SimilarityMatrix.from_dict(read_json(out / f"ss_matrix.{level}.json"))


def load_hierarchy(out: Path) -> Hierarchy:
    return Hierarchy.from_dict(read_json(out / "clusters.json")["hierarchy"])


def load_features(out: Path) -> tuple[list[Feature], list[Epic]]:
    d = read_json(out / "features.json")
    return [Feature.from_dict(x) for x in d["features"]], [Epic.from_dict(x) for x in d["epics"]]


def load_trace_links(out: Path) -> list[TraceLink]:
    return [TraceLink.from_dict(x) for x in read_json(out / "trace_links.json")["links"]]


# --------------------------------------------------------------------------- phases


class Pipeline:
    def __init__(self, config: RunConfig, out=None, gateway: Optional[Gateway] = None, force: bool = False):
        self.config = config
        self.out = Path(out or config.out)
        self.force = force
        self._gateway = gateway
        self.manifest = RunManifest()
        self.statuses: dict[str, str] = {}

    @property
    def gateway(self) -> Gateway:
        if self._gateway is None:
            settings = vars(self.config.provider).copy()
            self._gateway = make_gateway(settings, cache_dir=self.out / CACHE_DIR)
        return self._gateway

    def _input_key(self, phase: str, inputs: dict[str, str]) -> str:
        c = self.config
        if phase == "analyze":
            root = Path(c.repo).resolve()
            return _digest(phase, str(root), c.analyze.language, source_digest(root, c.analyze.language))
        if phase == "summarize":
            return _digest(phase, c.section_hash("provider", "summarize"), inputs)
        if phase == "cluster":
            return _digest(phase, c.section_hash("cluster"), c.seed, inputs)
        return _digest(phase, c.hash(), inputs)

    def _check_inputs(self, phase: str) -> dict[str, str]:
        sums = {}
        for name in INPUTS[phase]:
            path = self.out / name
            if not path.exists():
                raise DependencyError(f"{phase} needs {name}; run {PRODUCER[name]} first")
            sums[name] = checksum(path)
            rec = self.manifest.phases.get(PRODUCER[name])
            if rec is not None and rec.outputs.get(name) not in (None, sums[name]):
                raise DependencyError(f"{name} changed since {PRODUCER[name]} wrote it")
        return sums

    def _cached(self, phase: str, key: str) -> bool:
        rec = self.manifest.phases.get(phase)
        if self.force or rec is None or rec.status not in ("ok", "cached") or rec.input_key != key:
            return False
        for name, digest in rec.outputs.items():
            path = self.out / name
            if not path.exists() or checksum(path) != digest:
                return False
        return True

    def run_phase(self, phase: str) -> str:
        with directory_lock(self.out):
            return self._run_phase(phase)

    def _run_phase(self, phase: str) -> str:
        self.manifest = RunManifest.load(self.out)
        self.manifest.config_hash = self.config.hash()
        self.manifest.tool_version = __version__
        inputs = self._check_inputs(phase)
        key = self._input_key(phase, inputs)
        if self._cached(phase, key):
            self.manifest.phases[phase].status = "cached"
            self.manifest.save(self.out)
            logger.info("phase %s: cached", phase)
            self.statuses[phase] = "cached"
            return "cached"
        rec = PhaseRecord("running", key, inputs, started=_now())
        self.manifest.phases[phase] = rec
        # downstream records are stale once this phase reruns
        for later in PHASES[PHASES.index(phase) + 1 :]:
            if later in self.manifest.phases:
                self.manifest.phases[later].status = "stale"
        with collect_warnings() as warned:
            try:
                getattr(self, f"_{phase}")()
            except Exception as exc:
                rec.status, rec.error, rec.finished = "failed", f"{type(exc).__name__}: {exc}", _now()
                rec.warnings = list(warned)
                self.manifest.save(self.out)
                self.statuses[phase] = "failed"
                raise
        rec.outputs = {name: checksum(self.out / name) for name in OUTPUTS[phase]}
        rec.status, rec.finished, rec.warnings = "ok", _now(), list(warned)
        self.manifest.save(self.out)
        logger.info("phase %s: ok", phase)
        self.statuses[phase] = "ok"
        return "ok"

    def run(self, until: str = "docgen") -> dict[str, str]:
        with directory_lock(self.out):
            for phase in PHASES[: PHASES.index(until) + 1]:
                self._run_phase(phase)
        return dict(self.statuses)

    # -- phase bodies

    def _analyze(self):
        model = parse_repository(self.config.repo, self.config.analyze.language)
        problems = model.check()
        if problems:
            raise SchemaViolation(problems)
        write_json(
            self.out / "graph.json",
            {
                "schema": "reposum/graph/v1",
                "model": model.to_dict(),
                "adjacency": {
                    "file": build_adjacency(model, "file").to_dict(),
                    "method": build_adjacency(model, "method").to_dict(),
                },
            },
        )

    def _summarize(self):
        model = load_model(self.out)
        s = self.config.summarize
        result = summarize_repository(model, self.gateway, parallel=s.parallel, window_budget=s.window_budget)
        write_json(
            self.out / "summaries.json",
            {
                "schema": "reposum/summaries/v1",
                "methods": [x.to_dict() for x in result.methods],
                "files": [x.to_dict() for x in result.files],
            },
        )
        write_json(self.out / "ss_matrix.file.json", result.sim_file.to_dict())
        write_json(self.out / "ss_matrix.method.json", result.sim_method.to_dict())

    def _cluster(self):
        graph = read_json(self.out / "graph.json")
        model = RepoModel.from_dict(graph["model"])
        adj_f = AdjacencyMatrix.from_dict(graph["adjacency"]["file"])
        adj_m = AdjacencyMatrix.from_dict(graph["adjacency"]["method"])
        h = hierarchical_cluster(
            model, adj_f, adj_m, load_similarity(self.out, "file"), load_similarity(self.out, "method"),
            self.config.cluster_config(),
        )
        problems = h.check(model) if self.config.cluster.levels == "hierarchical" else []
        if problems:
            raise SchemaViolation(problems)
        write_json(
            self.out / "clusters.json",
            {"schema": "reposum/clusters/v1", "config": vars(self.config.cluster), "seed": self.config.seed,
             "hierarchy": h.to_dict()},
        )

    def _docgen(self):
        model = load_model(self.out)
        methods, _ = load_summaries(self.out)
        h = load_hierarchy(self.out)
        d = self.config.docgen
        features, epics, links, tree = generate_documentation(
            model, h, methods, self.gateway, parallel=d.parallel, budget=d.feature_budget,
            config_hash=self.config.hash(),
        )
        problems = tree.check()
        if problems:
            raise SchemaViolation(problems)
        write_json(
            self.out / "features.json",
            {"schema": "reposum/features/v1", "features": [f.to_dict() for f in features],
             "epics": [e.to_dict() for e in epics]},
        )
        write_json(
            self.out / "trace_links.json",
            {"schema": "reposum/trace_links/v1", "links": [l.to_dict(model) for l in links]},
        )
        docs = self.out / "docs"
        if docs.exists():
            for p in sorted(docs.rglob("*"), reverse=True):
                p.unlink() if p.is_file() else p.rmdir()
        render_documentation(tree, docs)


def run_pipeline(config: RunConfig, out=None, gateway: Optional[Gateway] = None, force: bool = False) -> Path:
    p = Pipeline(config, out, gateway, force)
    p.run()
    return p.out


# --------------------------------------------------------------------------- validation


@dataclass
class ValidationReport:
    checked: list[str]
    problems: list[str]

    @property
    def ok(self) -> bool:
        return not self.problems


def check_similarity_dict(d: dict, name: str) -> list[str]:
    problems = []
    n = d.get("n")
    if not isinstance(n, int) or n < 0:
        return [f"{name}: missing size"]
    seen: dict = {}
    for e in d.get("entries", []):
        i, j, v = e
        if not (0 <= i < n and 0 <= j < n):
            problems.append(f"{name}: entry ({i}, {j}) out of range")
            continue
        if i == j:
            problems.append(f"{name}: diagonal entry ({i}, {j}) stored")
        if not 0.0 <= v <= 1.0:
            problems.append(f"{name}: entry ({i}, {j}) value {v} outside [0, 1]")
        if (i, j) in seen:
            problems.append(f"{name}: duplicate entry ({i}, {j})")
        seen[(i, j)] = v
    for (i, j), v in seen.items():
        if i > j:
            mirror = seen.get((j, i))
            if mirror is not None and mirror != v:
                problems.append(f"{name}: asymmetric entry ({i}, {j}) = {v} vs ({j}, {i}) = {mirror}")
            elif d.get("storage") == "upper":
                problems.append(f"{name}: lower-triangle entry ({i}, {j}) in upper storage")
    return problems


def validate_artifacts(out, require: tuple[str, ...] = ()) -> ValidationReport:
    """Check every artifact present in ``out``; raises on violations or missing dependencies."""
    out = Path(out)
    if not out.is_dir():
        raise DependencyError(f"{out} is not an artifact directory")
    for name in require:
        if not (out / name).exists():
            raise DependencyError(f"missing {name} (produced by {PRODUCER.get(name, '?')})")
    present = [name for name in PRODUCER if (out / name).exists()]
    for name in present:
        for phase_input in INPUTS[PRODUCER[name]]:
            if not (out / phase_input).exists():
                raise DependencyError(f"{name} present but its input {phase_input} is missing")
    if (out / "docs").exists() and not (out / "features.json").exists():
        raise DependencyError("docs present but features.json is missing")

    problems: list[str] = []
    checked: list[str] = []
    model = None
    try:
        if "graph.json" in present:
            checked.append("graph.json")
            graph = read_json(out / "graph.json")
            model = RepoModel.from_dict(graph["model"])
            problems += [f"graph.json: {p}" for p in model.check()]
            for level in ("file", "method"):
                try:
                    adj = AdjacencyMatrix.from_dict(graph["adjacency"][level])
                except SchemaViolation as exc:
                    problems += [f"graph.json adjacency.{level}: {p}" for p in exc.problems]
                    continue
                size = len(model.files) if level == "file" else len(model.methods)
                if adj.n != size:
                    problems.append(f"graph.json adjacency.{level}: size {adj.n} != {size}")
        for level in ("file", "method"):
            name = f"ss_matrix.{level}.json"
            if name in present:
                checked.append(name)
                d = read_json(out / name)
                problems += check_similarity_dict(d, name)
                if model is not None:
                    size = len(model.files) if level == "file" else len(model.methods)
                    if d.get("n") != size:
                        problems.append(f"{name}: size {d.get('n')} != {size}")
        if "summaries.json" in present and model is not None:
            checked.append("summaries.json")
            methods, files = load_summaries(out)
            if [s.method_id for s in methods] != list(range(len(model.methods))):
                problems.append("summaries.json: method summaries do not match graph methods")
            if [s.file_id for s in files] != list(range(len(model.files))):
                problems.append("summaries.json: file summaries do not match graph files")
            for s in methods + files:
                if s.embedding is not None and not np.isclose(np.linalg.norm(s.embedding), 1.0):
                    problems.append(f"summaries.json: embedding not unit length ({s})"[:120])
        hierarchy = None
        if "clusters.json" in present and model is not None:
            checked.append("clusters.json")
            d = read_json(out / "clusters.json")
            hierarchy = Hierarchy.from_dict(d["hierarchy"])
            if d.get("config", {}).get("levels", "hierarchical") == "hierarchical":
                problems += [f"clusters.json: {p}" for p in hierarchy.check(model)]
        if "features.json" in present and model is not None and hierarchy is not None:
            checked += ["features.json", "trace_links.json"]
            features, epics = load_features(out)
            links = load_trace_links(out)
            if sorted(f.method_cluster_id for f in features) != list(range(len(hierarchy.method_clusters))):
                problems.append("features.json: features are not in bijection with method clusters")
            tree = build_document_tree(model, epics, features, links)
            problems += [f"features.json: {p}" for p in tree.check()]
            for link in links:
                if list(link.method_ids) != sorted(hierarchy.method_clusters[link.feature_id]):
                    problems.append(f"trace_links.json: feature {link.feature_id} methods differ from its cluster")
    except (KeyError, TypeError, ValueError) as exc:
        problems.append(f"malformed artifact: {type(exc).__name__}: {exc}")
    if problems:
        raise SchemaViolation(problems)
    return ValidationReport(checked, problems)

