"""Coverage, traceability, Link@k and agreement statistics."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from ..errors import LengthMismatch, UnresolvableCommit, ZeroDenominator

logger = logging.getLogger(__name__)


TIE_DIGITS = 12


class UndefinedStatistic(UserWarning):
    """A statistic hit a degenerate case and was given its documented fallback value."""


def f1_score(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def _ratio(num: int, den: int, what: str) -> float:
    if den <= 0:
        raise ZeroDenominator(f"no {what} to divide by")
    return num / den


# --------------------------------------------------------------------------- retrieval


def cosine_scores(query: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    q = np.asarray(query, dtype=float)
    v = np.asarray(vectors, dtype=float).reshape(-1, q.shape[0])
    qn = np.linalg.norm(q)
    vn = np.linalg.norm(v, axis=1)
    denom = np.where(vn * qn == 0, 1.0, vn * qn)
    return np.clip((v @ q) / denom, -1.0, 1.0)


def retrieve_candidates(
    query: np.ndarray, embeddings: Mapping[int, np.ndarray], k: int = 5
) -> list[tuple[int, float]]:
    """Top-k ``(feature_id, cosine)`` pairs, descending, ties broken by feature ID."""
    if k < 1:
        raise ValueError("k must be at least 1")
    ids = sorted(embeddings)
    if not ids:
        return []
    scores = cosine_scores(query, np.stack([embeddings[i] for i in ids]))
    # scores equal up to float noise count as ties, so the ID decides
    ranked = sorted(zip(ids, scores.tolist()), key=lambda t: (-round(t[1], TIE_DIGITS), t[0]))
    return ranked[:k]


# --------------------------------------------------------------------------- coverage


@dataclass(frozen=True)
class CoverageScores:
    C: float
    CB: float
    CC: float
    n_manual: int
    n_generated: int
    excluded_manual: tuple = ()
    excluded_generated: tuple = ()


def coverage_metrics(relevance, coverage, n_manual: int, n_generated: int) -> CoverageScores:
    """C, CB and CC from completed judgments.

    ``relevance`` items need ``gt_id``, ``candidate_feature_id``, ``available``, ``final``;
    ``coverage`` items need ``gt_id``, ``available``, ``final_cc``. A ground-truth feature with
    any unavailable judgment leaves the manual denominator; a generated feature all of whose
    judgments failed leaves the generated denominator.
    """
    relevance = list(relevance)
    coverage = list(coverage)
    bad_gt = {j.gt_id for j in relevance if not j.available} | {j.gt_id for j in coverage if not j.available}
    judged_gen: dict = {}
    for j in relevance:
        judged_gen.setdefault(j.candidate_feature_id, []).append(j.available)
    bad_gen = {f for f, oks in judged_gen.items() if not any(oks)}
    if bad_gt:
        logger.warning("excluding %d ground-truth features with failed judgments", len(bad_gt))
    if bad_gen:
        logger.warning("excluding %d generated features with only failed judgments", len(bad_gen))

    covered = {j.gt_id for j in relevance if j.available and j.final and j.gt_id not in bad_gt}
    complete = {j.gt_id for j in coverage if j.available and j.final_cc and j.gt_id not in bad_gt}
    covered_by = {j.candidate_feature_id for j in relevance if j.available and j.final}

    manual = n_manual - len(bad_gt)
    generated = n_generated - len(bad_gen)
    return CoverageScores(
        C=_ratio(len(covered), manual, "manual features"),
        CB=_ratio(len(covered_by), generated, "generated features"),
        CC=_ratio(len(complete & covered), manual, "manual features"),
        n_manual=manual,
        n_generated=generated,
        excluded_manual=tuple(sorted(bad_gt, key=str)),
        excluded_generated=tuple(sorted(bad_gen, key=str)),
    )


# --------------------------------------------------------------------------- traceability


@dataclass(frozen=True)
class PRF:
    P: float
    R: float
    F1: float

    def to_dict(self) -> dict:
        return {"P": self.P, "R": self.R, "F1": self.F1}


def trace_metrics(
    generated_links: Iterable[tuple],
    manual_links: Iterable[tuple],
    relevance_map: Iterable[tuple],
    strict: bool = True,
) -> PRF:
    """Precision and recall of (feature, file) links.

    A generated link (f, p) is correct when f is relevant to some manual feature g and
    (g, p) is a manual link. With ``strict=False`` it suffices that p occurs in any manual
    link. Recall is symmetric over manual links.
    """
    gen = set(generated_links)
    man = set(manual_links)
    rel = set(relevance_map)
    if not gen:
        raise ZeroDenominator("no generated links")
    if not man:
        raise ZeroDenominator("no manual links")
    gts_of: dict = {}
    feats_of: dict = {}
    for f, g in rel:
        gts_of.setdefault(f, set()).add(g)
        feats_of.setdefault(g, set()).add(f)
    if strict:
        correct_gen = sum(1 for f, p in gen if any((g, p) in man for g in gts_of.get(f, ())))
        correct_man = sum(1 for g, p in man if any((f, p) in gen for f in feats_of.get(g, ())))
    else:
        man_files = {p for _, p in man}
        gen_files = {p for _, p in gen}
        correct_gen = sum(1 for f, p in gen if f in gts_of and p in man_files)
        correct_man = sum(1 for g, p in man if g in feats_of and p in gen_files)
    p = correct_gen / len(gen)
    r = correct_man / len(man)
    return PRF(p, r, f1_score(p, r))


# --------------------------------------------------------------------------- Link@k


@dataclass(frozen=True)
class Commit:
    commit_id: str
    message: str
    changed_fqns: tuple[str, ...]


@dataclass(frozen=True)
class LinkAtK:
    k: int
    P: float
    R: float
    F1: float
    n_commits: int
    skipped: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"k": self.k, "P": self.P, "R": self.R, "F1": self.F1, "n_commits": self.n_commits,
                "skipped": list(self.skipped)}


def resolve_commit(commit: Commit, known_fqns: Optional[set] = None) -> set:
    changed = set(commit.changed_fqns)
    if known_fqns is not None:
        unresolved = changed - known_fqns
        if unresolved:
            logger.warning("commit %s: dropping %d unresolved FQNs", commit.commit_id, len(unresolved))
        changed &= known_fqns
    if not changed:
        raise UnresolvableCommit(f"commit {commit.commit_id} changes no known method")
    return changed


def link_at_k(
    commits: Sequence[Commit],
    embeddings: Mapping[int, np.ndarray],
    feature_methods: Mapping[int, Iterable[str]],
    k: int,
    embed: Callable[[str], np.ndarray],
    known_fqns: Optional[set] = None,
) -> LinkAtK:
    """Macro-averaged precision and recall of the methods linked to the top-k features per commit."""
    ps, rs, skipped = [], [], []
    for c in commits:
        try:
            changed = resolve_commit(c, known_fqns)
        except UnresolvableCommit as exc:
            logger.warning("%s; skipped", exc)
            skipped.append(c.commit_id)
            continue
        top = retrieve_candidates(embed(c.message), embeddings, k)
        predicted = set()
        for fid, _ in top:
            predicted |= set(feature_methods.get(fid, ()))
        hits = len(predicted & changed)
        ps.append(hits / len(predicted) if predicted else 0.0)
        rs.append(hits / len(changed))
    if not ps:
        raise ZeroDenominator("no resolvable commits")
    p = float(np.mean(ps))
    r = float(np.mean(rs))
    return LinkAtK(k, p, r, f1_score(p, r), len(ps), tuple(skipped))


# --------------------------------------------------------------------------- agreement


def cohen_kappa(a: Sequence[bool], b: Sequence[bool]) -> float:
    if len(a) != len(b):
        raise LengthMismatch(f"{len(a)} vs {len(b)} verdicts")
    if not a:
        raise LengthMismatch("no verdicts")
    n = len(a)
    a = [bool(x) for x in a]
    b = [bool(x) for x in b]
    p_o = sum(x == y for x, y in zip(a, b)) / n
    pa, pb = sum(a) / n, sum(b) / n
    p_e = pa * pb + (1 - pa) * (1 - pb)
    if p_e == 1.0:
        warnings.warn("kappa undefined (chance agreement is 1); reported as 0", UndefinedStatistic)
        return 0.0
    return (p_o - p_e) / (1 - p_e)


def spearman_rho(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation of average ranks; nan with a warning when either side is constant."""
    if len(x) != len(y):
        raise LengthMismatch(f"{len(x)} vs {len(y)} values")
    if len(x) < 2:
        raise LengthMismatch("need at least two values")
    rx = rankdata(x)
    ry = rankdata(y)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0:
        warnings.warn("rank variance is zero; spearman undefined", UndefinedStatistic)
        return math.nan
    return float(dx @ dy) / denom
