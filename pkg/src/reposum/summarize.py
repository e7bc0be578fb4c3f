"""Method- and file-level summaries and the semantic-similarity matrices built from them."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import AuthError, DimensionMismatch, EmbedderError, GatewayError, MalformedResponse
from .gateway import Gateway, parse_json_reply
from .repo_graph.model import FileNode, Level, MethodNode, RepoModel
from .text import estimate_tokens

logger = logging.getLogger(__name__)

SUMMARY_RETRIES = 2
MAX_NEIGHBOR_CHARS = 1200


@dataclass
class MethodSummary:
    method_id: int
    description: str
    workflow: list[str] = field(default_factory=list)
    quality: str = ""
    embedding: Optional[np.ndarray] = None
    degraded: bool = False

    def to_dict(self) -> dict:
        return {
            "method_id": self.method_id,
            "description": self.description,
            "workflow": list(self.workflow),
            "quality": self.quality,
            "degraded": self.degraded,
            "embedding": _vec(self.embedding),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MethodSummary":
        emb = np.asarray(d["embedding"]) if d.get("embedding") is not None else None
        return cls(d["method_id"], d["description"], list(d["workflow"]), d["quality"], emb, d["degraded"])


@dataclass
class FileSummary:
    file_id: int
    description: str
    mode: str  # full_source | method_summary_substitution
    embedding: Optional[np.ndarray] = None
    degraded: bool = False
    prompt_chars: int = 0

    def to_dict(self) -> dict:
        return {
            "file_id": self.file_id,
            "description": self.description,
            "mode": self.mode,
            "degraded": self.degraded,
            "prompt_chars": self.prompt_chars,
            "embedding": _vec(self.embedding),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FileSummary":
        emb = np.asarray(d["embedding"]) if d.get("embedding") is not None else None
        return cls(d["file_id"], d["description"], d["mode"], emb, d["degraded"], d.get("prompt_chars", 0))


def _vec(v) -> Optional[list[float]]:
    return None if v is None else [float(x) for x in v]


@dataclass
class SimilarityMatrix:
    level: Level
    values: np.ndarray  # dense n x n

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def get(self, i: int, j: int) -> float:
        return float(self.values[i, j])

    def submatrix(self, nodes: Sequence[int]) -> "SimilarityMatrix":
        idx = np.asarray(nodes, dtype=int)
        return SimilarityMatrix(self.level, self.values[np.ix_(idx, idx)])

    def to_dict(self) -> dict:
        iu, ju = np.triu_indices(self.n, k=1)
        vals = self.values[iu, ju]
        keep = vals > 0
        return {
            "level": self.level,
            "n": self.n,
            "storage": "upper",
            "entries": [[int(i), int(j), float(s)] for i, j, s in zip(iu[keep], ju[keep], vals[keep])],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimilarityMatrix":
        n = d["n"]
        s = np.zeros((n, n))
        for i, j, v in d["entries"]:
            s[i, j] = s[j, i] = v
        np.fill_diagonal(s, 1.0)
        return cls(d["level"], s)


# --------------------------------------------------------------------------- prompts


def method_prompt(method: MethodNode, callees: Sequence[MethodNode], others: Sequence[MethodNode]) -> str:
    lines = [
        "You are documenting a Java code base for a developer who is new to it.",
        "Summarize the method below. Reply with one JSON object with keys:",
        '  "description": one or two sentences on what the method does,',
        '  "workflow": ordered list of its internal execution steps,',
        '  "quality": performance and other non-functional notes.',
        "",
        f"FQN: {method.fqn}",
        f"CALLS: {', '.join(c.fqn for c in callees)}",
        f"RELATED: {', '.join(o.fqn for o in others)}",
        "SOURCE:",
        method.source_text or method.signature,
        "",
        "RELATED CODE:",
    ]
    for n in list(callees) + list(others):
        body = n.source_text or n.signature
        if len(body) > MAX_NEIGHBOR_CHARS:
            body = body[:MAX_NEIGHBOR_CHARS] + "\n/* ... truncated ... */"
        lines += [f"// {n.fqn}", body]
    return "\n".join(lines)


def file_prompt(file: FileNode, body: str, mode: str, methods: Sequence[MethodNode]) -> str:
    return "\n".join(
        [
            "Outline the functionality of the Java source file below for a developer new to the code base.",
            'Reply with one JSON object with key "description" (a short outline of what the file provides).',
            "",
            f"FILE: {file.path}",
            f"PACKAGE: {file.package}",
            f"MODE: {mode}",
            "METHODS:",
            *[f"- METHOD: {m.fqn}" for m in methods],
            "SOURCE:",
            body,
        ]
    )


def signature_description(method: MethodNode) -> str:
    owner = method.fqn.rsplit(".", 1)[0]
    return f"Declares {method.name} in {owner}: {method.signature or method.name}"


# --------------------------------------------------------------------------- operations


def summarize_method(
    method: MethodNode,
    neighbors: Sequence[MethodNode],
    gateway: Gateway,
    callees: Optional[Iterable[int]] = None,
    retries: int = SUMMARY_RETRIES,
) -> MethodSummary:
    if method.bodiless:
        return MethodSummary(method.method_id, signature_description(method))

    if callees is None:
        callee_set = {n.method_id for n in neighbors if f"{n.name}(" in method.source_text}
    else:
        callee_set = set(callees)
    calls = [n for n in neighbors if n.method_id in callee_set]
    others = [n for n in neighbors if n.method_id not in callee_set]
    req = gateway.request("summarize_method", method_prompt(method, calls, others))

    for attempt in range(retries + 1):
        if attempt:
            gateway.invalidate(req)
        try:
            data = parse_json_reply(gateway.complete(req))
            description = str(data.get("description", "")).strip()
            if not description:
                raise MalformedResponse("empty description")
            workflow = data.get("workflow") or []
            if isinstance(workflow, str):
                workflow = [workflow]
            return MethodSummary(
                method.method_id,
                description,
                [str(s) for s in workflow],
                str(data.get("quality", "") or ""),
            )
        except AuthError:
            raise
        except MalformedResponse as exc:
            logger.warning("malformed summary for %s (attempt %d): %s", method.fqn, attempt + 1, exc)
        except GatewayError as exc:
            logger.warning("gateway failure summarizing %s: %s", method.fqn, exc)
            break
    return MethodSummary(method.method_id, signature_description(method), degraded=True)


def substitute_method_bodies(source: str, methods: Sequence[tuple[MethodNode, MethodSummary]]) -> str:
    """Replace each method's line span with its signature and a summary comment."""
    lines = source.splitlines()
    for m, s in sorted(methods, key=lambda p: p[0].span[0], reverse=True):
        start, end = m.span
        if m.bodiless or start < 1 or end > len(lines):
            continue
        indent = lines[start - 1][: len(lines[start - 1]) - len(lines[start - 1].lstrip())]
        repl = [f"{indent}/* {s.description} */", f"{indent}{m.signature} {{ ... }}"]
        lines[start - 1 : end] = repl
    return "\n".join(lines)


def summarize_file(
    file: FileNode,
    methods: Sequence[tuple[MethodNode, MethodSummary]],
    gateway: Gateway,
    window_budget: int,
    source: str,
    retries: int = SUMMARY_RETRIES,
) -> FileSummary:
    if estimate_tokens(source) <= window_budget:
        mode, body = "full_source", source
    else:
        mode = "method_summary_substitution"
        body = substitute_method_bodies(source, methods)
        limit = window_budget * 4
        if len(body) > limit:
            body = body[:limit] + "\n/* ... truncated ... */"
    prompt = file_prompt(file, body, mode, [m for m, _ in methods])
    req = gateway.request("summarize_file", prompt)
    for attempt in range(retries + 1):
        if attempt:
            gateway.invalidate(req)
        try:
            data = parse_json_reply(gateway.complete(req))
            description = str(data.get("description", "")).strip()
            if not description:
                raise MalformedResponse("empty description")
            return FileSummary(file.file_id, description, mode, prompt_chars=len(prompt))
        except AuthError:
            raise
        except MalformedResponse as exc:
            logger.warning("malformed file summary for %s (attempt %d): %s", file.path, attempt + 1, exc)
        except GatewayError as exc:
            logger.warning("gateway failure summarizing %s: %s", file.path, exc)
            break
    names = ", ".join(m.name for m, _ in methods) or "no methods"
    return FileSummary(file.file_id, f"File {file.path} ({names})", mode, degraded=True, prompt_chars=len(prompt))


def embed_descriptions(texts: Sequence[str], embedder) -> list[np.ndarray]:
    out = []
    for text in texts:
        if not isinstance(text, str) or not text.strip():
            raise EmbedderError("cannot embed an empty description")
        try:
            vec = np.asarray(embedder.embed(text), dtype=float)
        except EmbedderError:
            raise
        except GatewayError as exc:
            raise EmbedderError(str(exc)) from exc
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise EmbedderError(f"zero embedding for {text!r}")
        out.append(vec / norm)
    return out


def similarity_matrix(vectors: Sequence[np.ndarray], level: Level) -> SimilarityMatrix:
    if len(vectors) == 0:
        return SimilarityMatrix(level, np.zeros((0, 0)))
    dims = {len(v) for v in vectors}
    if len(dims) != 1:
        raise DimensionMismatch(f"vectors have differing dimensions {sorted(dims)}")
    v = np.vstack(vectors).astype(float)
    upper = np.triu(np.clip(v @ v.T, 0.0, 1.0), k=1)
    s = upper + upper.T
    np.fill_diagonal(s, 1.0)
    return SimilarityMatrix(level, s)


@dataclass
class SummaryResult:
    methods: list[MethodSummary]
    files: list[FileSummary]
    sim_file: SimilarityMatrix
    sim_method: SimilarityMatrix
    warnings: list[str] = field(default_factory=list)


def summarize_repository(
    model: RepoModel,
    gateway: Gateway,
    embedder=None,
    parallel: int = 4,
    window_budget: int = 4096,
    read_source=None,
) -> SummaryResult:
    """Run method summaries, then file summaries, then embeddings and SS matrices."""
    from pathlib import Path

    embedder = embedder or gateway
    if read_source is None:

        def read_source(f: FileNode) -> str:
            return (Path(model.repo_root) / f.path).read_text(encoding="utf-8")

    neighbors: dict[int, set[int]] = {m.method_id: set() for m in model.methods}
    callees: dict[int, set[int]] = {m.method_id: set() for m in model.methods}
    for a, b in model.calls:
        neighbors[a].add(b)
        neighbors[b].add(a)
        callees[a].add(b)

    def one_method(m: MethodNode) -> MethodSummary:
        nbrs = [model.methods[k] for k in sorted(neighbors[m.method_id])]
        return summarize_method(m, nbrs, gateway, callees=callees[m.method_id])

    with ThreadPoolExecutor(max_workers=max(1, parallel)) as pool:
        msums = list(pool.map(one_method, model.methods))

    def one_file(f: FileNode) -> FileSummary:
        pairs = [(m, msums[m.method_id]) for m in model.methods_of(f.file_id)]
        return summarize_file(f, pairs, gateway, window_budget, read_source(f))

    with ThreadPoolExecutor(max_workers=max(1, parallel)) as pool:
        fsums = list(pool.map(one_file, model.files))

    for s, v in zip(msums, embed_descriptions([s.description for s in msums], embedder)):
        s.embedding = v
    for s, v in zip(fsums, embed_descriptions([s.description for s in fsums], embedder)):
        s.embedding = v

    warnings = [f"degraded summary for method {model.methods[s.method_id].fqn}" for s in msums if s.degraded]
    warnings += [f"degraded summary for file {model.files[s.file_id].path}" for s in fsums if s.degraded]
    return SummaryResult(
        msums,
        fsums,
        similarity_matrix([s.embedding for s in fsums], "file"),
        similarity_matrix([s.embedding for s in msums], "method"),
        warnings,
    )
