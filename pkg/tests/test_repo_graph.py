import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from reposum.errors import EmptyModel, NoSourceFiles, RootNotFound, SchemaViolation
from reposum.repo_graph import parse_repository
from reposum.repo_graph.model import AdjacencyMatrix, FileNode, MethodNode, RepoModel, build_adjacency


@pytest.fixture
def tiny(fixtures_dir):
    return parse_repository(fixtures_dir / "tiny")


def test_tiny_fixture_matches_hand_enumerated_graph(tiny):
    assert [f.path for f in tiny.files] == ["A.java", "B.java"]
    assert [m.fqn for m in tiny.methods] == ["tiny.core.A.m1", "tiny.core.A.m2", "tiny.app.B.m3"]
    assert [m.file_id for m in tiny.methods] == [0, 0, 1]
    assert tiny.imports == {(1, 0)}
    assert tiny.calls == {(0, 1), (2, 0)}
    assert tiny.check() == []


def test_tiny_adjacency(tiny):
    f = build_adjacency(tiny, "file")
    assert f.entries == [(0, 1, 1), (1, 0, 1)]
    m = build_adjacency(tiny, "method")
    assert m.entries == [(0, 1, 1), (0, 2, 1), (1, 0, 1), (2, 0, 1)]


def test_single_method_file(tmp_path):
    (tmp_path / "Solo.java").write_text("package s;\nclass Solo {\n  int one() { return 1; }\n}\n")
    model = parse_repository(tmp_path)
    assert len(model.files) == 1 and len(model.methods) == 1
    assert model.imports == set() and model.calls == set()
    assert model.methods[0].span == (3, 3)
    assert not build_adjacency(model, "method").pairs


def test_external_calls_dropped_with_warning(fixtures_dir):
    model = parse_repository(fixtures_dir / "external")
    fqns = [m.fqn for m in model.methods]
    assert fqns == ["ext.Report.lines", "ext.Report.header"]
    assert model.calls == {(0, 1)}
    assert any("List.add" in w for w in model.warnings)
    assert any("format" in w for w in model.warnings)


def test_shop_relations(fixtures_dir):
    model = parse_repository(fixtures_dir / "shop")
    paths = [f.path for f in model.files]
    idx = {p.rsplit("/", 1)[1][:-5]: k for k, p in enumerate(paths)}
    expected_imports = {
        ("Cart", "CartLine"), ("Cart", "Catalog"), ("Cart", "Product"), ("CartLine", "Product"),
        ("Catalog", "Product"), ("Checkout", "Cart"), ("Checkout", "Order"), ("Checkout", "PaymentGateway"),
        ("Order", "Cart"),
    }
    assert model.imports == {(idx[a], idx[b]) for a, b in expected_imports}
    by = model.by_fqn()
    call = lambda a, b: (by[a].method_id, by[b].method_id)  # noqa: E731
    assert call("shop.order.Checkout.placeOrder", "shop.order.PaymentGateway.charge") in model.calls
    assert call("shop.cart.Cart.addItem/1", "shop.cart.Cart.addItem/2") in model.calls
    assert call("shop.order.Order.Order", "shop.cart.Cart.totalCents") in model.calls
    assert by["shop.order.PaymentGateway.charge"].bodiless
    assert by["shop.catalog.PriceRule.apply"].source_text == ""


def test_overload_fqns(tmp_path):
    (tmp_path / "O.java").write_text(
        "package o;\nclass O {\n"
        "  void f() { }\n  void f(int a) { f(); }\n  void g(int a) { }\n  void g(String s) { }\n"
        "  void h() { }\n}\n"
    )
    model = parse_repository(tmp_path)
    assert [m.fqn for m in model.methods] == ["o.O.f/0", "o.O.f/1", "o.O.g/1#1", "o.O.g/1#2", "o.O.h"]
    assert model.calls == {(1, 0)}


def test_nested_class_fqn(tmp_path):
    (tmp_path / "N.java").write_text("package n;\nclass N {\n  static class In {\n    void x() { }\n  }\n}\n")
    assert [m.fqn for m in parse_repository(tmp_path).methods] == ["n.N.In.x"]


def test_errors(tmp_path):
    with pytest.raises(RootNotFound):
        parse_repository(tmp_path / "missing")
    with pytest.raises(NoSourceFiles):
        parse_repository(tmp_path)
    (tmp_path / "Bad.java").write_bytes(b"class Bad { void \xff\xfe() {} }")
    with pytest.raises(EmptyModel):
        parse_repository(tmp_path)


def test_bad_file_is_a_warning_when_others_parse(tmp_path, fixtures_dir):
    (tmp_path / "A.java").write_text("package p;\nclass A { void a() { } }\n")
    (tmp_path / "Bad.java").write_bytes(b"\xff\xfe garbage")
    model = parse_repository(tmp_path)
    assert [f.path for f in model.files] == ["A.java"]
    assert any("Bad.java" in w for w in model.warnings)


def test_deterministic_serialization(fixtures_dir):
    a = json.dumps(parse_repository(fixtures_dir / "shop").to_dict(), sort_keys=True)
    b = json.dumps(parse_repository(fixtures_dir / "shop").to_dict(), sort_keys=True)
    assert a == b


def test_round_trip(tiny):
    again = RepoModel.from_dict(json.loads(json.dumps(tiny.to_dict())))
    assert again == tiny


def test_check_reports_violations():
    files = [FileNode(0, "a", "p")]
    methods = [MethodNode(0, "p.A.m", 0, (5, 3), "x"), MethodNode(1, "p.A.m", 7, (1, 1), "y")]
    model = RepoModel("/r", files, methods, {(0, 0)}, {(0, 9)})
    problems = model.check()
    assert any("inverted span" in p for p in problems)
    assert any("duplicate fqn" in p for p in problems)
    assert any("unknown file" in p for p in problems)
    assert any("self-loop" in p for p in problems)
    assert any("dangling" in p for p in problems)


def test_adjacency_from_dict_rejects_corruption():
    good = AdjacencyMatrix.from_relations("file", 3, [(0, 1)]).to_dict()
    assert AdjacencyMatrix.from_dict(good).pairs == frozenset({(0, 1)})
    bad = dict(good, entries=[[0, 1, 1]])
    with pytest.raises(SchemaViolation, match="asymmetric"):
        AdjacencyMatrix.from_dict(bad)
    with pytest.raises(SchemaViolation, match="diagonal"):
        AdjacencyMatrix.from_dict(dict(good, entries=[[2, 2, 1]]))
    with pytest.raises(SchemaViolation, match="non-binary"):
        AdjacencyMatrix.from_dict(dict(good, entries=[[0, 1, 2], [1, 0, 2]]))


@given(st.integers(1, 12).flatmap(lambda n: st.tuples(st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1))))))
def test_adjacency_symmetric_zero_diagonal(data):
    n, rel = data
    adj = AdjacencyMatrix.from_relations("method", n, rel)
    d = adj.to_dense()
    assert (d == d.T).all()
    assert (d.diagonal() == 0).all()
    for a, b in rel:
        assert adj.get(a, b) == (1 if a != b else 0)
    entries = set((i, j) for i, j, _ in adj.entries)
    assert entries == {(j, i) for i, j in entries}
