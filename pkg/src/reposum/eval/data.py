"""Ground-truth and commit fixtures."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..errors import SchemaViolation
from ..repo_graph.model import RepoModel
from .metrics import Commit


@dataclass
class GroundTruthFeature:
    gt_id: str
    text: str
    files: list[str] = field(default_factory=list)
    fqns: list[str] = field(default_factory=list)


@dataclass
class GroundTruth:
    features: list[GroundTruthFeature]

    @property
    def trace_links(self) -> set[tuple[str, str]]:
        return {(f.gt_id, p) for f in self.features for p in f.files}

    @property
    def method_links(self) -> set[tuple[str, str]]:
        return {(f.gt_id, q) for f in self.features for q in f.fqns}

    def unresolved(self, model: RepoModel) -> dict[str, list]:
        """Links that name no file or method of ``model``."""
        paths = {f.path for f in model.files}
        fqns = {m.fqn for m in model.methods}
        return {
            "files": sorted((g, p) for g, p in self.trace_links if p not in paths),
            "fqns": sorted((g, q) for g, q in self.method_links if q not in fqns),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        problems = []
        if not isinstance(d, dict) or not isinstance(d.get("features"), list):
            raise SchemaViolation(["ground truth needs a 'features' list"])
        feats, seen = [], set()
        for k, raw in enumerate(d["features"]):
            if not isinstance(raw, dict) or "id" not in raw or not isinstance(raw.get("text"), str):
                problems.append(f"features[{k}]: needs 'id' and 'text'")
                continue
            gid = str(raw["id"])
            if gid in seen:
                problems.append(f"features[{k}]: duplicate id {gid!r}")
            seen.add(gid)
            files, fqns = [], []
            for j, link in enumerate(raw.get("links", [])):
                if isinstance(link, dict) and isinstance(link.get("file"), str):
                    files.append(link["file"])
                elif isinstance(link, dict) and isinstance(link.get("fqn"), str):
                    fqns.append(link["fqn"])
                else:
                    problems.append(f"features[{k}].links[{j}]: needs 'file' or 'fqn'")
            feats.append(GroundTruthFeature(gid, raw["text"], sorted(set(files)), sorted(set(fqns))))
        if problems:
            raise SchemaViolation(problems)
        return cls(feats)

    def to_dict(self) -> dict:
        return {
            "features": [
                {"id": f.gt_id, "text": f.text, "links": [{"file": p} for p in f.files] + [{"fqn": q} for q in f.fqns]}
                for f in self.features
            ]
        }


def load_ground_truth(path) -> GroundTruth:
    return GroundTruth.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def load_commits(path) -> list[Commit]:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(d, dict) or not isinstance(d.get("commits"), list):
        raise SchemaViolation(["commits file needs a 'commits' list"])
    out, problems = [], []
    for k, c in enumerate(d["commits"]):
        if not isinstance(c, dict) or not isinstance(c.get("message"), str) or not isinstance(c.get("changed_fqns"), list):
            problems.append(f"commits[{k}]: needs 'message' and 'changed_fqns'")
            continue
        out.append(Commit(str(c.get("id", k)), c["message"], tuple(str(x) for x in c["changed_fqns"])))
    if problems:
        raise SchemaViolation(problems)
    return out


def known_fqns(model: Optional[RepoModel]) -> Optional[set]:
    return None if model is None else {m.fqn for m in model.methods}
