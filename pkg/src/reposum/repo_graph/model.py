"""Core entities produced by repository analysis."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Literal

Level = Literal["file", "method"]

GRAPH_SCHEMA = "reposum/graph/v1"


@dataclass(frozen=True)
class FileNode:
    file_id: int
    path: str
    package: str


@dataclass(frozen=True)
class MethodNode:
    method_id: int
    fqn: str
    file_id: int
    span: tuple[int, int]
    source_text: str
    # unqualified name and parameter count, used by call resolution and prompts
    name: str = ""
    arity: int = 0
    signature: str = ""

    @property
    def bodiless(self) -> bool:
        return not self.source_text


@dataclass
class RepoModel:
    repo_root: str
    files: list[FileNode]
    methods: list[MethodNode]
    imports: set[tuple[int, int]] = field(default_factory=set)
    calls: set[tuple[int, int]] = field(default_factory=set)
    warnings: list[str] = field(default_factory=list)

    def file(self, file_id: int) -> FileNode:
        return self.files[file_id]

    def method(self, method_id: int) -> MethodNode:
        return self.methods[method_id]

    def methods_of(self, file_id: int) -> list[MethodNode]:
        return [m for m in self.methods if m.file_id == file_id]

    def by_fqn(self) -> dict[str, MethodNode]:
        return {m.fqn: m for m in self.methods}

    def by_path(self) -> dict[str, FileNode]:
        return {f.path: f for f in self.files}

    def check(self) -> list[str]:
        """Return a list of invariant violations (empty when the model is valid)."""
        problems = []
        file_ids = {f.file_id for f in self.files}
        method_ids = {m.method_id for m in self.methods}
        if len(file_ids) != len(self.files):
            problems.append("duplicate file_id")
        if len({f.path for f in self.files}) != len(self.files):
            problems.append("duplicate file path")
        if len(method_ids) != len(self.methods):
            problems.append("duplicate method_id")
        if len({m.fqn for m in self.methods}) != len(self.methods):
            problems.append("duplicate fqn")
        for m in self.methods:
            if m.file_id not in file_ids:
                problems.append(f"method {m.method_id} references unknown file {m.file_id}")
            if m.span[0] > m.span[1]:
                problems.append(f"method {m.method_id} has inverted span {m.span}")
        for kind, pairs, ids in (("imports", self.imports, file_ids), ("calls", self.calls, method_ids)):
            for a, b in pairs:
                if a == b:
                    problems.append(f"self-loop in {kind}: ({a}, {b})")
                if a not in ids or b not in ids:
                    problems.append(f"dangling id in {kind}: ({a}, {b})")
        return problems

    def to_dict(self) -> dict:
        return {
            "repo_root": self.repo_root,
            "files": [
                {"file_id": f.file_id, "path": f.path, "package": f.package} for f in self.files
            ],
            "methods": [
                {
                    "method_id": m.method_id,
                    "fqn": m.fqn,
                    "file_id": m.file_id,
                    "span": list(m.span),
                    "name": m.name,
                    "arity": m.arity,
                    "signature": m.signature,
                    "source_text": m.source_text,
                }
                for m in self.methods
            ],
            "imports": [list(p) for p in sorted(self.imports)],
            "calls": [list(p) for p in sorted(self.calls)],
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RepoModel":
        return cls(
            repo_root=data["repo_root"],
            files=[FileNode(f["file_id"], f["path"], f["package"]) for f in data["files"]],
            methods=[
                MethodNode(
                    method_id=m["method_id"],
                    fqn=m["fqn"],
                    file_id=m["file_id"],
                    span=(m["span"][0], m["span"][1]),
                    source_text=m["source_text"],
                    name=m.get("name", ""),
                    arity=m.get("arity", 0),
                    signature=m.get("signature", ""),
                )
                for m in data["methods"]
            ],
            imports={(a, b) for a, b in data["imports"]},
            calls={(a, b) for a, b in data["calls"]},
            warnings=list(data.get("warnings", [])),
        )


@dataclass(frozen=True)
class AdjacencyMatrix:
    """Binary symmetric relation matrix stored as its upper-triangle pairs."""

    level: Level
    n: int
    pairs: frozenset[tuple[int, int]]  # i < j

    @classmethod
    def from_relations(cls, level: Level, n: int, relations: Iterable[tuple[int, int]]):
        pairs = frozenset((min(a, b), max(a, b)) for a, b in relations if a != b)
        return cls(level, n, pairs)

    @property
    def entries(self) -> list[tuple[int, int, int]]:
        """Both orientations of every nonzero entry, sorted."""
        out = []
        for i, j in self.pairs:
            out.append((i, j, 1))
            out.append((j, i, 1))
        return sorted(out)

    def get(self, i: int, j: int) -> int:
        return 1 if (min(i, j), max(i, j)) in self.pairs and i != j else 0

    def to_dense(self):
        import numpy as np

        a = np.zeros((self.n, self.n))
        for i, j in self.pairs:
            a[i, j] = a[j, i] = 1.0
        return a

    def submatrix(self, nodes: list[int]) -> "AdjacencyMatrix":
        index = {node: k for k, node in enumerate(nodes)}
        rel = [(index[i], index[j]) for i, j in self.pairs if i in index and j in index]
        return AdjacencyMatrix.from_relations(self.level, len(nodes), rel)

    def to_dict(self) -> dict:
        return {"level": self.level, "n": self.n, "entries": [list(e) for e in self.entries]}

    @classmethod
    def from_dict(cls, data: dict) -> "AdjacencyMatrix":
        problems = check_adjacency_dict(data)
        if problems:
            from ..errors import SchemaViolation

            raise SchemaViolation(problems)
        rel = [(i, j) for i, j, v in data["entries"] if v]
        return cls.from_relations(data["level"], data["n"], rel)


def check_adjacency_dict(data: dict) -> list[str]:
    problems = []
    n = data.get("n", 0)
    seen = {}
    for i, j, v in data.get("entries", []):
        if not (0 <= i < n and 0 <= j < n):
            problems.append(f"entry ({i}, {j}) out of range")
        if i == j:
            problems.append(f"nonzero diagonal entry ({i}, {j})")
        if v not in (0, 1):
            problems.append(f"entry ({i}, {j}) has non-binary value {v}")
        seen[(i, j)] = v
    for (i, j), v in seen.items():
        if seen.get((j, i)) != v:
            problems.append(f"asymmetric entry ({i}, {j})")
    return problems


def build_adjacency(model: RepoModel, level: Level) -> AdjacencyMatrix:
    if level == "file":
        return AdjacencyMatrix.from_relations("file", len(model.files), model.imports)
    if level == "method":
        return AdjacencyMatrix.from_relations("method", len(model.methods), model.calls)
    raise ValueError(f"unknown level {level!r}")
