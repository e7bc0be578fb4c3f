"""Build a :class:`RepoModel` from a source tree.

Call targets are resolved by name and arity inside the repository. The receiver
narrows the candidate set when its static type can be read off a declaration
(local, parameter, field) or a type name; calls whose target lives outside the
repository are dropped with a warning.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..errors import EmptyModel, NoSourceFiles, RootNotFound
from .model import FileNode, MethodNode, RepoModel
from .profiles import FileFacts, LanguageProfile, RawCall, RawMethod, get_profile

logger = logging.getLogger(__name__)

_SKIP_DIRS = {".git", ".hg", ".svn", "node_modules", "build", "target", "out", ".idea"}


@dataclass
class _TypeInfo:
    qname: str  # package-qualified
    file_id: int
    local_name: str  # nested path inside the file
    supertypes: list[str] = field(default_factory=list)  # resolved qualified names
    raw_supertypes: list[str] = field(default_factory=list)
    field_types: dict[str, str] = field(default_factory=dict)
    members: dict[tuple[str, int], list[int]] = field(default_factory=lambda: defaultdict(list))
    ctors: dict[int, list[int]] = field(default_factory=lambda: defaultdict(list))


def discover_sources(root: Path, profile: LanguageProfile) -> list[str]:
    found = []
    for path in root.rglob("*"):
        rel = path.relative_to(root)
        if any(part in _SKIP_DIRS or part.startswith(".") for part in rel.parts[:-1]):
            continue
        if path.is_file() and profile.matches(path.name):
            found.append(rel.as_posix())
    return sorted(found)


def parse_repository(root, language_profile: str = "java") -> RepoModel:
    root = Path(root)
    if not root.is_dir():
        raise RootNotFound(f"repository root not found: {root}")
    profile = get_profile(language_profile)
    paths = discover_sources(root, profile)
    if not paths:
        raise NoSourceFiles(f"no {profile.name} source files under {root}")

    warnings: list[str] = []
    facts: list[FileFacts] = []
    for rel in paths:
        raw = (root / rel).read_bytes()
        try:
            raw.decode("utf-8")
        except UnicodeDecodeError:
            warnings.append(f"{rel}: not valid UTF-8, skipped")
            continue
        f = profile.extract(rel, raw)
        if f.has_errors:
            if not f.types:
                warnings.append(f"{rel}: unparseable, skipped")
                continue
            warnings.append(f"{rel}: syntax errors, extracted partially")
        facts.append(f)
    if not facts:
        raise EmptyModel(f"all {len(paths)} source files under {root} failed to parse")

    model = _assemble(str(root.resolve()), facts, warnings)
    for w in model.warnings:
        logger.warning(w)
    return model


def _method_fqns(package: str, methods: list[RawMethod]) -> list[str]:
    prefix = f"{package}." if package else ""
    by_name: dict[tuple[str, str], list[int]] = defaultdict(list)
    for k, m in enumerate(methods):
        by_name[(m.owner, m.name)].append(k)
    fqns = [""] * len(methods)
    for (owner, name), idxs in by_name.items():
        base = f"{prefix}{owner}.{name}"
        if len(idxs) == 1:
            fqns[idxs[0]] = base
            continue
        by_arity: dict[int, list[int]] = defaultdict(list)
        for k in idxs:
            by_arity[methods[k].arity].append(k)
        for arity, same in by_arity.items():
            if len(same) == 1:
                fqns[same[0]] = f"{base}/{arity}"
            else:
                for ordinal, k in enumerate(same, start=1):
                    fqns[k] = f"{base}/{arity}#{ordinal}"
    return fqns


def _assemble(root: str, facts: list[FileFacts], warnings: list[str]) -> RepoModel:
    files = [FileNode(i, f.path, f.package) for i, f in enumerate(facts)]
    methods: list[MethodNode] = []
    raw_by_id: list[tuple[int, RawMethod]] = []
    types: dict[str, _TypeInfo] = {}
    by_package: dict[str, list[str]] = defaultdict(list)

    for fid, f in enumerate(facts):
        prefix = f"{f.package}." if f.package else ""
        for t in f.types:
            q = prefix + t.name
            if q in types:
                warnings.append(f"{f.path}: duplicate type {q}, later declaration ignored")
                continue
            types[q] = _TypeInfo(q, fid, t.name, raw_supertypes=t.supertypes, field_types=t.field_types)
            if "." not in t.name:
                by_package[f.package].append(q)
        ordered = sorted(f.methods, key=lambda m: m.start_byte)
        for m, fqn in zip(ordered, _method_fqns(f.package, ordered)):
            mid = len(methods)
            methods.append(
                MethodNode(mid, fqn, fid, m.span, m.source_text, m.name, m.arity, m.signature)
            )
            raw_by_id.append((fid, m))
            info = types.get(prefix + m.owner)
            if info is not None:
                if m.is_constructor:
                    info.ctors[m.arity].append(mid)
                else:
                    info.members[(m.name, m.arity)].append(mid)

    resolver = _Resolver(facts, types, by_package)
    for info in types.values():
        info.supertypes = [
            q for q in (resolver.resolve_type(s, info.file_id, info.local_name) for s in info.raw_supertypes) if q
        ]

    imports: set[tuple[int, int]] = set()
    for fid in range(len(facts)):
        for target in resolver.imported_files(fid):
            if target != fid:
                imports.add((fid, target))

    by_name_arity: dict[tuple[str, int], list[int]] = defaultdict(list)
    for m in methods:
        by_name_arity[(m.name, m.arity)].append(m.method_id)
    ctor_ids = {mid for info in types.values() for ids in info.ctors.values() for mid in ids}

    calls: set[tuple[int, int]] = set()
    for mid, (fid, raw) in enumerate(raw_by_id):
        for call in raw.calls:
            targets, reason = resolver.resolve_call(fid, raw, call, by_name_arity, ctor_ids)
            if not targets:
                if reason:
                    warnings.append(f"{methods[mid].fqn}:{call.line}: {reason}")
                continue
            for t in targets:
                if t != mid:
                    calls.add((mid, t))

    return RepoModel(root, files, methods, imports, calls, warnings)


class _Resolver:
    def __init__(self, facts: list[FileFacts], types: dict[str, _TypeInfo], by_package):
        self.facts = facts
        self.types = types
        self.by_package = by_package

    def resolve_type(self, simple: str, fid: int, owner: str = "") -> Optional[str]:
        """Qualified name of type ``simple`` as seen from file ``fid`` inside ``owner``."""
        f = self.facts[fid]
        prefix = f"{f.package}." if f.package else ""
        parts = owner.split(".") if owner else []
        # innermost enclosing scopes first
        for depth in range(len(parts), -1, -1):
            q = prefix + ".".join(parts[:depth] + [simple])
            if q in self.types:
                return q
        for imp in f.imports:
            if imp.static or imp.wildcard:
                continue
            if imp.target.rsplit(".", 1)[-1] == simple and imp.target in self.types:
                return imp.target
        q = prefix + simple
        if q in self.types:
            return q
        for imp in f.imports:
            if imp.wildcard and not imp.static:
                q = f"{imp.target}.{simple}"
                if q in self.types:
                    return q
        return None

    def imported_files(self, fid: int) -> set[int]:
        f = self.facts[fid]
        out = set()
        for imp in f.imports:
            if imp.wildcard:
                # package.* or static Type.*
                if imp.static and imp.target in self.types:
                    out.add(self.types[imp.target].file_id)
                    continue
                for q in self.by_package.get(imp.target, []):
                    if q.rsplit(".", 1)[-1] in f.type_refs:
                        out.add(self.types[q].file_id)
                continue
            target = imp.target
            if imp.static:
                target = target.rsplit(".", 1)[0]
            if target in self.types:
                out.add(self.types[target].file_id)
        for q in self.by_package.get(f.package, []):
            info = self.types[q]
            if info.file_id != fid and info.local_name in f.type_refs:
                out.add(info.file_id)
        return out

    def _ancestors(self, q: str) -> list[str]:
        out, queue, seen = [], [q], set()
        while queue:
            cur = queue.pop(0)
            if cur in seen or cur not in self.types:
                continue
            seen.add(cur)
            out.append(cur)
            queue.extend(self.types[cur].supertypes)
        return out

    def _lookup(self, q: str, name: str, arity: int) -> list[int]:
        for t in self._ancestors(q):
            hits = self.types[t].members.get((name, arity))
            if hits:
                return list(hits)
        return []

    def _variable_type(self, fid: int, raw: RawMethod, var: str) -> Optional[str]:
        if var in raw.local_types:
            return raw.local_types[var]
        f = self.facts[fid]
        prefix = f"{f.package}." if f.package else ""
        parts = raw.owner.split(".")
        for depth in range(len(parts), 0, -1):
            info = self.types.get(prefix + ".".join(parts[:depth]))
            if info is None:
                continue
            for t in self._ancestors(info.qname):
                if var in self.types[t].field_types:
                    return self.types[t].field_types[var]
        return None

    def resolve_call(self, fid, raw: RawMethod, call: RawCall, by_name_arity, ctor_ids):
        f = self.facts[fid]
        prefix = f"{f.package}." if f.package else ""
        owner_q = prefix + raw.owner
        kind = call.receiver_kind

        if kind in ("ctor_this", "ctor_super"):
            info = self.types.get(owner_q)
            if info is None:
                return [], None
            scope = [owner_q] if kind == "ctor_this" else info.supertypes[:1]
            for q in scope:
                hits = self.types[q].ctors.get(call.arity)
                if hits:
                    return list(hits), None
            return [], None

        if kind == "new":
            q = self.resolve_type(call.receiver, fid, raw.owner)
            if q is None:
                return [], None  # external type
            hits = self.types[q].ctors.get(call.arity)
            return (list(hits), None) if hits else ([], None)

        if kind in ("none", "this", "super"):
            parts = raw.owner.split(".")
            scopes = [prefix + ".".join(parts[:d]) for d in range(len(parts), 0, -1)]
            if kind == "super":
                info = self.types.get(owner_q)
                scopes = info.supertypes if info else []
            elif kind == "this":
                scopes = scopes[:1]
            for q in scopes:
                hits = self._lookup(q, call.name, call.arity)
                if hits:
                    return hits, None
            if kind == "none":
                for imp in f.imports:
                    if imp.static and not imp.wildcard and imp.target.endswith("." + call.name):
                        q = imp.target.rsplit(".", 1)[0]
                        if q in self.types:
                            hits = self._lookup(q, call.name, call.arity)
                            if hits:
                                return hits, None
                    elif imp.static and imp.wildcard and imp.target in self.types:
                        hits = self._lookup(imp.target, call.name, call.arity)
                        if hits:
                            return hits, None
            return [], f"unresolved call {call.name}/{call.arity} (external or inherited from outside the repository)"

        if kind == "name":
            tname = self._variable_type(fid, raw, call.receiver)
            if tname is None and call.receiver[:1].isupper():
                tname = call.receiver
            if tname is not None:
                q = self.resolve_type(tname, fid, raw.owner)
                if q is None:
                    return [], f"external call {tname}.{call.name}/{call.arity} dropped"
                hits = self._lookup(q, call.name, call.arity)
                if hits:
                    return hits, None
                return [], f"unresolved call {tname}.{call.name}/{call.arity} dropped"

        # receiver type unknown: fall back to a unique repository-wide name+arity match
        cands = [m for m in by_name_arity.get((call.name, call.arity), []) if m not in ctor_ids]
        if len(cands) == 1:
            return cands, None
        if not cands:
            return [], f"external call {call.name}/{call.arity} dropped"
        return [], f"ambiguous call {call.name}/{call.arity} ({len(cands)} candidates) dropped"
