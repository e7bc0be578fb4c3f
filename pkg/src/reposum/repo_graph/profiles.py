"""Language profiles: file extensions, grammar, and extraction of raw facts.

A profile turns one source file into a :class:`FileFacts` record. Cross-file
resolution (imports, call targets) is done by :mod:`reposum.repo_graph.parse`
over the facts of all files, using the lookup rules of an object-oriented
language with packages, nested types and single/multiple supertypes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import tree_sitter_java
from tree_sitter import Language, Node, Parser


@dataclass
class RawCall:
    # none | this | super | name | new | expr | ctor_this | ctor_super
    receiver_kind: str
    receiver: Optional[str]
    name: str
    arity: int
    line: int


@dataclass
class RawMethod:
    name: str
    arity: int
    owner: str  # nested type path inside the file, e.g. "Outer.Inner"
    span: tuple[int, int]
    start_byte: int
    source_text: str
    signature: str
    is_constructor: bool = False
    calls: list[RawCall] = field(default_factory=list)
    local_types: dict[str, str] = field(default_factory=dict)


@dataclass
class TypeDecl:
    name: str  # nested path inside the file
    kind: str
    supertypes: list[str] = field(default_factory=list)
    field_types: dict[str, str] = field(default_factory=dict)


@dataclass
class ImportDecl:
    target: str
    wildcard: bool = False
    static: bool = False


@dataclass
class FileFacts:
    path: str
    package: str
    imports: list[ImportDecl] = field(default_factory=list)
    types: list[TypeDecl] = field(default_factory=list)
    methods: list[RawMethod] = field(default_factory=list)
    type_refs: set[str] = field(default_factory=set)
    has_errors: bool = False


class LanguageProfile:
    name: str = ""
    extensions: tuple[str, ...] = ()

    def matches(self, path: str) -> bool:
        return path.endswith(self.extensions)

    def extract(self, path: str, source: bytes) -> FileFacts:
        raise NotImplementedError


_TYPE_DECLS = {
    "class_declaration": "class",
    "interface_declaration": "interface",
    "enum_declaration": "enum",
    "record_declaration": "record",
    "annotation_type_declaration": "annotation",
}
_METHOD_DECLS = {"method_declaration", "constructor_declaration", "compact_constructor_declaration"}
_LOCAL_DECLS = {
    "local_variable_declaration",
    "formal_parameter",
    "spread_parameter",
    "catch_formal_parameter",
    "enhanced_for_statement",
    "resource",
}


def _text(node: Optional[Node]) -> str:
    return node.text.decode("utf-8", "replace") if node is not None else ""


def _type_name(node: Optional[Node]) -> Optional[str]:
    """Simple name of a type node, generics and array dimensions stripped."""
    if node is None:
        return None
    t = node.type
    if t == "type_identifier":
        return _text(node)
    if t == "generic_type" or t == "array_type":
        for child in node.named_children:
            name = _type_name(child)
            if name:
                return name
        return None
    if t == "scoped_type_identifier":
        ids = [c for c in node.named_children if c.type == "type_identifier"]
        return _text(ids[-1]) if ids else None
    return None


def _arg_count(args: Optional[Node]) -> int:
    if args is None:
        return 0
    return sum(1 for c in args.named_children if c.type not in ("line_comment", "block_comment"))


class JavaProfile(LanguageProfile):
    name = "java"
    extensions = (".java",)

    def __init__(self):
        self._parser = Parser(Language(tree_sitter_java.language()))

    def extract(self, path: str, source: bytes) -> FileFacts:
        tree = self._parser.parse(source)
        root = tree.root_node
        facts = FileFacts(path=path, package="", has_errors=root.has_error)
        for child in root.named_children:
            if child.type == "package_declaration":
                for c in child.named_children:
                    if c.type in ("scoped_identifier", "identifier"):
                        facts.package = _text(c)
            elif child.type == "import_declaration":
                facts.imports.append(self._import(child))
        self._walk_types(root, [], facts)
        self._collect_refs(root, facts)
        return facts

    def _import(self, node: Node) -> ImportDecl:
        target = ""
        wildcard = static = False
        for c in node.children:
            if c.type in ("scoped_identifier", "identifier"):
                target = _text(c)
            elif c.type == "asterisk":
                wildcard = True
            elif c.type == "static":
                static = True
        return ImportDecl(target, wildcard, static)

    def _collect_refs(self, root: Node, facts: FileFacts) -> None:
        stack = [root]
        while stack:
            node = stack.pop()
            if node.type in ("package_declaration", "import_declaration"):
                continue
            if node.type in ("type_identifier", "identifier"):
                facts.type_refs.add(_text(node))
            stack.extend(node.children)

    def _walk_types(self, node: Node, owner: list[str], facts: FileFacts) -> None:
        for child in node.named_children:
            if child.type in _TYPE_DECLS:
                name = _text(child.child_by_field_name("name"))
                path = owner + [name]
                decl = TypeDecl(".".join(path), _TYPE_DECLS[child.type])
                decl.supertypes = self._supertypes(child)
                body = child.child_by_field_name("body")
                facts.types.append(decl)
                if body is not None:
                    self._walk_body(body, path, decl, facts)
            elif child.type not in _METHOD_DECLS:
                self._walk_types(child, owner, facts)

    def _supertypes(self, decl: Node) -> list[str]:
        out = []
        for c in decl.named_children:
            if c.type in ("superclass", "super_interfaces", "extends_interfaces"):
                stack = [c]
                while stack:
                    n = stack.pop()
                    if n.type in ("type_identifier", "generic_type", "scoped_type_identifier"):
                        name = _type_name(n)
                        if name:
                            out.append(name)
                        continue
                    stack.extend(reversed(n.named_children))
        return out

    def _walk_body(self, body: Node, owner: list[str], decl: TypeDecl, facts: FileFacts) -> None:
        for member in body.named_children:
            if member.type in _METHOD_DECLS:
                facts.methods.append(self._method(member, owner, decl))
            elif member.type == "field_declaration":
                tname = _type_name(member.child_by_field_name("type"))
                for d in member.named_children:
                    if d.type == "variable_declarator" and tname:
                        decl.field_types[_text(d.child_by_field_name("name"))] = tname
            elif member.type in _TYPE_DECLS:
                name = _text(member.child_by_field_name("name"))
                inner = TypeDecl(".".join(owner + [name]), _TYPE_DECLS[member.type])
                inner.supertypes = self._supertypes(member)
                facts.types.append(inner)
                inner_body = member.child_by_field_name("body")
                if inner_body is not None:
                    self._walk_body(inner_body, owner + [name], inner, facts)
            elif member.type == "enum_body_declarations":
                self._walk_body(member, owner, decl, facts)

    def _method(self, node: Node, owner: list[str], decl: TypeDecl) -> RawMethod:
        is_ctor = node.type != "method_declaration"
        name = owner[-1] if is_ctor else _text(node.child_by_field_name("name"))
        params = node.child_by_field_name("parameters")
        arity = 0
        local_types: dict[str, str] = {}
        if params is not None:
            for p in params.named_children:
                if p.type in ("formal_parameter", "spread_parameter", "receiver_parameter"):
                    if p.type != "receiver_parameter":
                        arity += 1
                    self._record_local(p, local_types)
        body = node.child_by_field_name("body")
        sig_end = body.start_byte if body is not None else node.end_byte
        signature = " ".join(
            node.text[: sig_end - node.start_byte].decode("utf-8", "replace").split()
        ).rstrip(";")
        method = RawMethod(
            name=name,
            arity=arity,
            owner=".".join(owner),
            span=(node.start_point[0] + 1, node.end_point[0] + 1),
            start_byte=node.start_byte,
            source_text=_text(node) if body is not None else "",
            signature=signature,
            is_constructor=is_ctor,
            local_types=local_types,
        )
        if body is not None:
            self._collect_calls(body, method)
        return method

    def _record_local(self, node: Node, local_types: dict[str, str]) -> None:
        tname = _type_name(node.child_by_field_name("type"))
        if not tname:
            return
        name_node = node.child_by_field_name("name")
        if name_node is not None:
            local_types[_text(name_node)] = tname
        for d in node.named_children:
            if d.type == "variable_declarator":
                local_types[_text(d.child_by_field_name("name"))] = tname
            elif d.type == "variable_declarator_id":
                local_types[_text(d.child_by_field_name("name"))] = tname

    def _collect_calls(self, body: Node, method: RawMethod) -> None:
        stack = [body]
        found: list[tuple[int, RawCall]] = []
        while stack:
            n = stack.pop()
            t = n.type
            if t in _LOCAL_DECLS:
                self._record_local(n, method.local_types)
            if t == "method_invocation":
                obj = n.child_by_field_name("object")
                name = _text(n.child_by_field_name("name"))
                arity = _arg_count(n.child_by_field_name("arguments"))
                kind, recv = self._receiver(obj)
                found.append((n.start_byte, RawCall(kind, recv, name, arity, n.start_point[0] + 1)))
            elif t == "object_creation_expression":
                tname = _type_name(n.child_by_field_name("type"))
                if tname:
                    arity = _arg_count(n.child_by_field_name("arguments"))
                    found.append((n.start_byte, RawCall("new", tname, tname, arity, n.start_point[0] + 1)))
            elif t == "explicit_constructor_invocation":
                ctor = n.child_by_field_name("constructor")
                kind = "ctor_super" if ctor is not None and ctor.type == "super" else "ctor_this"
                arity = _arg_count(n.child_by_field_name("arguments"))
                found.append((n.start_byte, RawCall(kind, None, "", arity, n.start_point[0] + 1)))
            stack.extend(n.children)
        method.calls = [c for _, c in sorted(found, key=lambda x: x[0])]

    def _receiver(self, obj: Optional[Node]) -> tuple[str, Optional[str]]:
        if obj is None:
            return "none", None
        if obj.type == "this":
            return "this", None
        if obj.type == "super":
            return "super", None
        if obj.type == "identifier":
            return "name", _text(obj)
        if obj.type == "field_access":
            target = obj.child_by_field_name("object")
            if target is not None and target.type == "this":
                return "name", _text(obj.child_by_field_name("field"))
        if obj.type == "object_creation_expression":
            tname = _type_name(obj.child_by_field_name("type"))
            if tname:
                return "new", tname
        if obj.type == "parenthesized_expression" and obj.named_children:
            return self._receiver(obj.named_children[0])
        return "expr", None


PROFILES: dict[str, type[LanguageProfile]] = {"java": JavaProfile}


def get_profile(name: str) -> LanguageProfile:
    try:
        return PROFILES[name]()
    except KeyError:
        raise ValueError(f"unknown language profile {name!r}; available: {sorted(PROFILES)}") from None
