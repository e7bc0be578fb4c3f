"""Features per method cluster, epics per file cluster, trace links and markdown docs."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .cluster.hierarchy import Hierarchy
from .errors import AuthError, GatewayError, MalformedResponse, MissingFeature
from .gateway import Gateway, parse_json_reply
from .repo_graph.model import MethodNode, RepoModel
from .summarize import MethodSummary
from .text import estimate_tokens

logger = logging.getLogger(__name__)

PROMPT_TIERS = ("full", "description_only", "truncated")
DEGRADED_BADGE = "**[DEGRADED]**"


@dataclass
class Feature:
    feature_id: int
    title: str
    description: str
    method_cluster_id: int
    embedding: Optional[np.ndarray] = None
    prompt_tier: str = "full"
    degraded: bool = False
    entities: list[str] = field(default_factory=list)
    operations: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "feature_id": self.feature_id,
            "title": self.title,
            "description": self.description,
            "method_cluster_id": self.method_cluster_id,
            "prompt_tier": self.prompt_tier,
            "degraded": self.degraded,
            "entities": list(self.entities),
            "operations": list(self.operations),
            "embedding": None if self.embedding is None else [float(x) for x in self.embedding],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Feature":
        emb = np.asarray(d["embedding"]) if d.get("embedding") is not None else None
        return cls(
            d["feature_id"], d["title"], d["description"], d["method_cluster_id"], emb,
            d.get("prompt_tier", "full"), d.get("degraded", False),
            list(d.get("entities", [])), list(d.get("operations", [])),
        )


@dataclass
class Epic:
    epic_id: int
    title: str
    description: str
    file_cluster_id: int
    feature_ids: list[int]
    degraded: bool = False

    def to_dict(self) -> dict:
        return {
            "epic_id": self.epic_id,
            "title": self.title,
            "description": self.description,
            "file_cluster_id": self.file_cluster_id,
            "feature_ids": list(self.feature_ids),
            "degraded": self.degraded,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Epic":
        return cls(d["epic_id"], d["title"], d["description"], d["file_cluster_id"], list(d["feature_ids"]),
                   d.get("degraded", False))


@dataclass(frozen=True)
class TraceLink:
    feature_id: int
    method_ids: tuple[int, ...]
    file_ids: tuple[int, ...]

    def to_dict(self, model: Optional[RepoModel] = None) -> dict:
        d = {"feature_id": self.feature_id, "method_ids": list(self.method_ids), "file_ids": list(self.file_ids)}
        if model is not None:
            d["fqns"] = [model.methods[m].fqn for m in self.method_ids]
            d["paths"] = [model.files[f].path for f in self.file_ids]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TraceLink":
        return cls(d["feature_id"], tuple(d["method_ids"]), tuple(d["file_ids"]))


# --------------------------------------------------------------------------- prompts

_FEATURE_HEAD = """You are given a cluster of Java methods that together implement one piece of functionality.
Each method is represented by its summary rather than its code. Work through these steps:
1. List the entities (domain objects, data) that the methods share.
2. List the operations the methods perform on those entities.
3. From steps 1 and 2, write one functional feature: a short title phrased the way a feature list in
   user documentation would phrase it, and a one- or two-sentence description.
Reply with one JSON object with keys "entities", "operations", "title", "description".
"""


def _member_block(fqn: str, summary: MethodSummary, tier: str) -> str:
    lines = [f"- FQN: {fqn}", f"  DESCRIPTION: {summary.description}"]
    if tier == "full" and summary.workflow:
        lines.append("  WORKFLOW: " + "; ".join(summary.workflow))
    return "\n".join(lines)


def feature_prompt(cluster_id: int, members: Sequence[tuple[MethodNode, MethodSummary]], budget: int):
    """Prompt for one method cluster and the tier used to fit it within ``budget`` tokens."""
    head = f"{_FEATURE_HEAD}\nCLUSTER: c_{cluster_id}\nMETHODS:\n"
    for tier in ("full", "description_only"):
        body = "\n".join(_member_block(m.fqn, s, tier) for m, s in members)
        prompt = head + body
        if estimate_tokens(prompt) <= budget:
            return prompt, tier
    limit = budget * 4
    blocks, used = [], len(head)
    for k, (m, s) in enumerate(members):
        block = _member_block(m.fqn, s, "description_only")
        marker = f"\n- [truncated: {len(members) - k} more methods omitted]"
        if used + len(block) + 1 + len(marker) > limit:
            blocks.append(marker.strip("\n"))
            break
        blocks.append(block)
        used += len(block) + 1
    return head + "\n".join(blocks), "truncated"


def epic_prompt(file_cluster_id: int, features: Sequence[Feature]) -> str:
    lines = [
        "The functional features below are implemented by one group of closely related source files.",
        "Aggregate them into an epic: the higher-level capability they provide together. For example,",
        '"Add an item to the cart" and "Remove an item from the cart" aggregate into',
        '"Shopping cart management".',
        'Reply with one JSON object with keys "title" and "description".',
        "",
        f"FILE_CLUSTER: fc_{file_cluster_id}",
        "FEATURES:",
    ]
    for f in features:
        lines += [f"- TITLE: {f.title}", f"  DESCRIPTION: {f.description}"]
    return "\n".join(lines)


# --------------------------------------------------------------------------- operations


def generate_feature(
    cluster_id: int,
    members: Sequence[tuple[MethodNode, MethodSummary]],
    gateway: Gateway,
    embedder=None,
    budget: int = 4096,
    retries: int = 2,
) -> Feature:
    if not members:
        raise ValueError(f"method cluster {cluster_id} is empty")
    prompt, tier = feature_prompt(cluster_id, members, budget)
    if tier != "full":
        logger.warning("feature prompt for cluster %d fell back to tier %r", cluster_id, tier)
    req = gateway.request("feature", prompt)
    feature = None
    for attempt in range(retries + 1):
        if attempt:
            gateway.invalidate(req)
        try:
            data = parse_json_reply(gateway.complete(req))
            title = str(data.get("title", "")).strip()
            description = str(data.get("description", "")).strip()
            if not title or not description:
                raise MalformedResponse("feature reply lacks title or description")
            feature = Feature(
                cluster_id, title, description, cluster_id, prompt_tier=tier,
                entities=[str(x) for x in data.get("entities") or []],
                operations=[str(x) for x in data.get("operations") or []],
            )
            break
        except AuthError:
            raise
        except MalformedResponse as exc:
            logger.warning("malformed feature for cluster %d (attempt %d): %s", cluster_id, attempt + 1, exc)
        except GatewayError as exc:
            logger.warning("gateway failure for cluster %d: %s", cluster_id, exc)
            break
    if feature is None:
        feature = Feature(
            cluster_id,
            f"Method cluster {cluster_id}",
            " ".join(s.description for _, s in members),
            cluster_id,
            prompt_tier=tier,
            degraded=True,
        )
    embedder = embedder or gateway
    feature.embedding = np.asarray(embedder.embed(f"{feature.title}. {feature.description}"), dtype=float)
    return feature


def generate_epic(file_cluster_id: int, features: Sequence[Feature], gateway: Gateway, retries: int = 2) -> Epic:
    if not features:
        raise ValueError(f"file cluster {file_cluster_id} has no features")
    ids = [f.feature_id for f in features]
    if len(features) == 1:
        only = features[0]
        return Epic(file_cluster_id, only.title, only.description, file_cluster_id, ids, only.degraded)
    req = gateway.request("epic", epic_prompt(file_cluster_id, features))
    for attempt in range(retries + 1):
        if attempt:
            gateway.invalidate(req)
        try:
            data = parse_json_reply(gateway.complete(req))
            title = str(data.get("title", "")).strip()
            if not title:
                raise MalformedResponse("epic reply lacks a title")
            description = str(data.get("description", "")).strip() or title
            return Epic(file_cluster_id, title, description, file_cluster_id, ids)
        except AuthError:
            raise
        except MalformedResponse as exc:
            logger.warning("malformed epic for file cluster %d (attempt %d): %s", file_cluster_id, attempt + 1, exc)
        except GatewayError as exc:
            logger.warning("gateway failure for file cluster %d: %s", file_cluster_id, exc)
            break
    return Epic(
        file_cluster_id,
        f"File cluster {file_cluster_id}",
        "; ".join(f.title for f in features),
        file_cluster_id,
        ids,
        degraded=True,
    )


def derive_trace_links(hierarchy: Hierarchy, features: Sequence[Feature], model: RepoModel) -> list[TraceLink]:
    by_cluster = {f.method_cluster_id: f for f in features}
    links = []
    for cid, members in enumerate(hierarchy.method_clusters):
        feature = by_cluster.get(cid)
        if feature is None:
            raise MissingFeature(f"method cluster {cid} has no feature")
        method_ids = tuple(sorted(members))
        file_ids = tuple(sorted({model.methods[m].file_id for m in method_ids}))
        links.append(TraceLink(feature.feature_id, method_ids, file_ids))
    return links


# --------------------------------------------------------------------------- document tree


@dataclass
class DocumentTree:
    repo_name: str
    config_hash: str
    epics: list[Epic]
    features: dict[int, Feature]
    links: dict[int, TraceLink]
    model: RepoModel

    def check(self) -> list[str]:
        problems = []
        placed: dict[int, int] = {}
        for e in self.epics:
            if not e.feature_ids:
                problems.append(f"epic {e.epic_id} has no features")
            for fid in e.feature_ids:
                if fid in placed:
                    problems.append(f"feature {fid} under epics {placed[fid]} and {e.epic_id}")
                placed[fid] = e.epic_id
        for fid in self.features:
            if fid not in placed:
                problems.append(f"feature {fid} not under any epic")
        for fid, link in self.links.items():
            method_files = {self.model.methods[m].file_id for m in link.method_ids}
            if set(link.file_ids) != method_files:
                problems.append(f"feature {fid} links files not justified by its methods")
        return problems


def build_document_tree(
    model: RepoModel,
    epics: Sequence[Epic],
    features: Sequence[Feature],
    links: Sequence[TraceLink],
    config_hash: str = "",
) -> DocumentTree:
    return DocumentTree(
        repo_name=Path(model.repo_root).name,
        config_hash=config_hash,
        epics=sorted(epics, key=lambda e: e.epic_id),
        features={f.feature_id: f for f in features},
        links={l.feature_id: l for l in links},
        model=model,
    )


def generate_documentation(
    model: RepoModel,
    hierarchy: Hierarchy,
    summaries: Sequence[MethodSummary],
    gateway: Gateway,
    embedder=None,
    parallel: int = 4,
    budget: int = 4096,
    config_hash: str = "",
) -> tuple[list[Feature], list[Epic], list[TraceLink], DocumentTree]:
    summary_of = {s.method_id: s for s in summaries}

    def one(cid: int) -> Feature:
        members = [(model.methods[m], summary_of[m]) for m in hierarchy.method_clusters[cid]]
        return generate_feature(cid, members, gateway, embedder, budget)

    with ThreadPoolExecutor(max_workers=max(1, parallel)) as pool:
        features = list(pool.map(one, range(len(hierarchy.method_clusters))))

    by_fc: dict[int, list[Feature]] = {}
    for f in features:
        by_fc.setdefault(hierarchy.cluster_file_cluster[f.method_cluster_id], []).append(f)
    with ThreadPoolExecutor(max_workers=max(1, parallel)) as pool:
        epics = list(pool.map(lambda fc: generate_epic(fc, by_fc[fc], gateway), sorted(by_fc)))

    links = derive_trace_links(hierarchy, features, model)
    tree = build_document_tree(model, epics, features, links, config_hash)
    return features, epics, links, tree


# --------------------------------------------------------------------------- rendering


def _epic_page(epic: Epic) -> str:
    return f"epic-{epic.epic_id:03d}.md"


def render_documentation(tree: DocumentTree, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    front = ["---", f"repository: {tree.repo_name}", f"config_hash: {tree.config_hash}", "---", ""]
    index = front + [f"# {tree.repo_name}: functional documentation", ""]
    if not tree.epics:
        index += ["No features were generated for this repository.", ""]
    else:
        index += ["## Epics", ""]
        for e in tree.epics:
            badge = f" {DEGRADED_BADGE}" if e.degraded else ""
            count = len(e.feature_ids)
            index.append(f"- [{e.title}]({_epic_page(e)}){badge} ({count} feature{'s' if count != 1 else ''})")
        index.append("")
    path = out / "index.md"
    path.write_text("\n".join(index), encoding="utf-8")
    written.append(path)

    for e in tree.epics:
        lines = front + [f"# {e.title}", ""]
        if e.degraded:
            lines += [DEGRADED_BADGE, ""]
        lines += [e.description, "", "[Back to index](index.md)", ""]
        for fid in sorted(e.feature_ids):
            f = tree.features[fid]
            link = tree.links[fid]
            badge = f" {DEGRADED_BADGE}" if f.degraded else ""
            lines += [f"## Feature {fid}: {f.title}{badge}", "", f.description, "", "### Files", ""]
            lines += [f"- `{tree.model.files[i].path}`" for i in link.file_ids]
            lines += ["", "### Methods", ""]
            for m in link.method_ids:
                node = tree.model.methods[m]
                lines.append(f"- `{node.fqn}` ({tree.model.files[node.file_id].path}, lines {node.span[0]}-{node.span[1]})")
            lines.append("")
        path = out / _epic_page(e)
        path.write_text("\n".join(lines), encoding="utf-8")
        written.append(path)
    return written
