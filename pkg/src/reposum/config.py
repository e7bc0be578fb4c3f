"""Run configuration: one TOML file, one section per module."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import tomli

from .cluster.graph import VARIANTS
from .cluster.hierarchy import LEVELS, ClusterConfig
from .errors import ConfigError


@dataclass
class ProviderSettings:
    name: str = "stub"  # "stub" or any label for an OpenAI-compatible endpoint
    base_url: str = ""
    model_name: str = "stub"
    embedding_model: str = ""
    api_key_env: str = "REPOSUM_API_KEY"
    temperature: float = 0.2
    max_tokens: int = 1024
    requests_per_second: float = 0.0
    retries: int = 2
    backoff: float = 1.0
    embedding_dim: int = 256


@dataclass
class AnalyzeSettings:
    language: str = "java"


@dataclass
class SummarizeSettings:
    window_budget: int = 4096
    parallel: int = 4


@dataclass
class ClusterSettings:
    alpha: float = 0.5
    variant: str = "blended"
    levels: str = "hierarchical"
    gamma_min: float = 1e-3
    gamma_max: float = 1.0
    grid_points: int = 16
    restarts: int = 5
    tau: float = 0.05
    # coefficients of stability, separation, small-cluster fraction
    weights: list[float] = field(default_factory=lambda: [1.0, 1.0, -1.0])


@dataclass
class DocgenSettings:
    feature_budget: int = 4096
    parallel: int = 4


@dataclass
class EvalSettings:
    judges: str = "stub"  # "stub" or two comma-separated model names
    tiebreaker: str = "stub"
    judge_temperature: float = 0.0
    candidates: int = 5
    ks: list[int] = field(default_factory=lambda: [1, 2, 3])
    strict_trace: bool = True
    parallel: int = 4


@dataclass
class RunConfig:
    repo: str = "."
    out: str = "reposum-out"
    seed: int = 1
    provider: ProviderSettings = field(default_factory=ProviderSettings)
    analyze: AnalyzeSettings = field(default_factory=AnalyzeSettings)
    summarize: SummarizeSettings = field(default_factory=SummarizeSettings)
    cluster: ClusterSettings = field(default_factory=ClusterSettings)
    docgen: DocgenSettings = field(default_factory=DocgenSettings)
    eval: EvalSettings = field(default_factory=EvalSettings)

    def validate(self) -> "RunConfig":
        problems = []
        c = self.cluster
        if not 0.0 <= c.alpha <= 1.0:
            problems.append(f"cluster.alpha={c.alpha} outside [0, 1]")
        if c.variant not in VARIANTS:
            problems.append(f"cluster.variant={c.variant!r} not one of {VARIANTS}")
        if c.levels not in LEVELS:
            problems.append(f"cluster.levels={c.levels!r} not one of {LEVELS}")
        if not 0 < c.gamma_min <= c.gamma_max:
            problems.append("cluster.gamma_min must be positive and at most gamma_max")
        if c.grid_points < 1:
            problems.append("cluster.grid_points must be at least 1")
        if c.restarts < 2:
            problems.append("cluster.restarts must be at least 2")
        if len(c.weights) != 3:
            problems.append("cluster.weights needs three coefficients")
        if not 0.0 <= c.tau < 1.0:
            problems.append(f"cluster.tau={c.tau} outside [0, 1)")
        if self.summarize.window_budget < 64:
            problems.append("summarize.window_budget must be at least 64 tokens")
        if self.docgen.feature_budget < 64:
            problems.append("docgen.feature_budget must be at least 64 tokens")
        for name in ("summarize", "docgen", "eval"):
            if getattr(self, name).parallel < 1:
                problems.append(f"{name}.parallel must be at least 1")
        if self.eval.judge_temperature != 0.0:
            problems.append("eval.judge_temperature must be 0")
        if self.eval.candidates < 1 or any(k < 1 for k in self.eval.ks):
            problems.append("eval.candidates and eval.ks must be positive")
        if self.provider.temperature < 0:
            problems.append("provider.temperature must be non-negative")
        if problems:
            raise ConfigError("; ".join(problems))
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def canonical_json(self) -> str:
        # locations are not run parameters; the graph checksum pins the source tree
        d = self.to_dict()
        d.pop("out")
        d.pop("repo")
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def section_hash(self, *names: str) -> str:
        d = self.to_dict()
        part = {n: d[n] for n in names}
        return hashlib.sha256(json.dumps(part, sort_keys=True).encode()).hexdigest()

    def cluster_config(self) -> ClusterConfig:
        c = self.cluster
        return ClusterConfig(
            alpha=c.alpha, variant=c.variant, levels=c.levels, gamma_min=c.gamma_min, gamma_max=c.gamma_max,
            grid_points=c.grid_points, restarts=c.restarts, tau=c.tau, seed=self.seed,
            weights=tuple(c.weights),
        )

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        kwargs = {}
        for f in dataclasses.fields(cls):
            if f.name not in d:
                continue
            value = d.pop(f.name)
            kwargs[f.name] = _section(SECTIONS[f.name], value, f.name) if f.name in SECTIONS else value
        if d:
            raise ConfigError(f"unknown config keys: {sorted(d)}")
        return cls(**kwargs).validate()


SECTIONS = {
    "provider": ProviderSettings,
    "analyze": AnalyzeSettings,
    "summarize": SummarizeSettings,
    "cluster": ClusterSettings,
    "docgen": DocgenSettings,
    "eval": EvalSettings,
}


def _section(kind, value, name):
    if not isinstance(value, dict):
        raise ConfigError(f"[{name}] must be a table")
    known = {f.name for f in dataclasses.fields(kind)}
    extra = set(value) - known
    if extra:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(extra)}")
    return kind(**value)


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> RunConfig:
    data: dict = {}
    if path:
        try:
            data = tomli.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    for k, v in (overrides or {}).items():
        if isinstance(v, dict):
            section = dict(data.get(k, {}))
            section.update({sk: sv for sk, sv in v.items() if sv is not None})
            data[k] = section
        elif v is not None:
            data[k] = v
    return RunConfig.from_dict(data)
