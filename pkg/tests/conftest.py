import random
import socket
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from reposum.repo_graph.model import FileNode, MethodNode, RepoModel

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def no_network(monkeypatch):
    """Fail any attempt to open a network connection."""

    def refuse(*args, **kwargs):
        raise AssertionError("network access attempted")

    monkeypatch.setattr(socket.socket, "connect", refuse)
    monkeypatch.setattr(socket, "create_connection", refuse)


def random_weights(rng: random.Random, n: int, density: float = 0.6, integer: bool = False) -> np.ndarray:
    w = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < density:
                w[i, j] = w[j, i] = rng.randint(1, 3) if integer else round(rng.uniform(0.05, 1.0), 3)
    return w


def synthetic_model(rng: random.Random, n_files=None, max_methods=4) -> RepoModel:
    """Random RepoModel with consistent IDs; source text is filler."""
    n_files = n_files or rng.randint(2, 7)
    files, methods = [], []
    for f in range(n_files):
        pkg = f"p{f % 3}"
        files.append(FileNode(f, f"{pkg}/F{f}.java", pkg))
        line = 1
        for k in range(rng.randint(1, max_methods)):
            mid = len(methods)
            name = f"m{k}"
            methods.append(
                MethodNode(mid, f"{pkg}.F{f}.{name}", f, (line, line + 2), f"void {name}() {{ }}", name, 0, f"void {name}()")
            )
            line += 4
    imports = {(a, b) for a in range(n_files) for b in range(n_files) if a != b and rng.random() < 0.3}
    nm = len(methods)
    calls = {(a, b) for a in range(nm) for b in range(nm) if a != b and rng.random() < 0.15}
    return RepoModel("/synthetic", files, methods, imports, calls, [])


def random_unit_vectors(rng: random.Random, n: int, dim: int = 8, groups: int = 3) -> np.ndarray:
    """Vectors drawn around a few centers so similarity has structure."""
    nrng = np.random.default_rng(rng.randint(0, 2**31))
    centers = nrng.normal(size=(groups, dim))
    out = np.abs(centers[nrng.integers(0, groups, size=n)] + 0.3 * nrng.normal(size=(n, dim)))
    return out / np.linalg.norm(out, axis=1, keepdims=True)


# (criterion number, title, passed, reason) appended by tests/test_acceptance.py
ACCEPTANCE: list = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, reason in sorted(ACCEPTANCE):
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}"
        terminalreporter.write_line(line + (f"  ({reason})" if reason else ""))
