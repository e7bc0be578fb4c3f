"""Two-stage judging: relevance of retrieved candidates, then complete coverage."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..errors import AuthError, GatewayError
from .judges import Item, Judge, Verdict
from .metrics import CoverageScores, cohen_kappa, coverage_metrics, retrieve_candidates

logger = logging.getLogger(__name__)


@dataclass
class RelevanceJudgment:
    gt_id: object
    candidate_feature_id: int
    verdicts: list[Verdict] = field(default_factory=list)
    final: bool = False
    tiebreak_used: bool = False
    available: bool = True
    error: str = ""

    @property
    def entity_sets(self):
        v = self.verdicts[0] if self.verdicts else None
        return (v.gt_entities, v.candidate_entities) if v else ([], [])

    @property
    def operation_sets(self):
        v = self.verdicts[0] if self.verdicts else None
        return (v.gt_operations, v.candidate_operations) if v else ([], [])

    def to_dict(self) -> dict:
        return {
            "gt_id": self.gt_id,
            "candidate_feature_id": self.candidate_feature_id,
            "verdicts": [v.to_dict() for v in self.verdicts],
            "final": self.final,
            "tiebreak_used": self.tiebreak_used,
            "available": self.available,
            "error": self.error,
        }


@dataclass
class CoverageJudgment:
    gt_id: object
    related_feature_ids: list[int]
    verdicts: list[Verdict] = field(default_factory=list)
    final_cc: bool = False
    tiebreak_used: bool = False
    available: bool = True
    error: str = ""

    def to_dict(self) -> dict:
        return {
            "gt_id": self.gt_id,
            "related_feature_ids": list(self.related_feature_ids),
            "verdicts": [v.to_dict() for v in self.verdicts],
            "final_cc": self.final_cc,
            "tiebreak_used": self.tiebreak_used,
            "available": self.available,
            "error": self.error,
        }


def _resolve(task: str, gt: Item, candidates: Sequence[Item], judges: Sequence[Judge], tiebreaker: Judge):
    """(verdicts, final, tiebreak_used); gateway errors propagate."""
    if len(judges) != 2:
        raise ValueError("exactly two primary judges are required")
    verdicts = [j.judge(task, gt, candidates) for j in judges]
    if verdicts[0].decision == verdicts[1].decision:
        return verdicts, verdicts[0].decision, False
    tb = tiebreaker.tiebreak(task, gt, candidates, verdicts)
    verdicts.append(tb)
    return verdicts, tb.decision, True


def judge_relevance(gt: Item, candidate: Item, judges: Sequence[Judge], tiebreaker: Judge) -> RelevanceJudgment:
    out = RelevanceJudgment(gt.item_id, candidate.item_id)
    try:
        out.verdicts, out.final, out.tiebreak_used = _resolve("relevance", gt, [candidate], judges, tiebreaker)
    except AuthError:
        raise
    except GatewayError as exc:
        logger.warning("relevance judgment (%s, %s) unavailable: %s", gt.item_id, candidate.item_id, exc)
        out.available, out.final, out.error = False, False, str(exc)
    return out


def judge_complete_coverage(
    gt: Item, related: Sequence[Item], judges: Sequence[Judge], tiebreaker: Judge
) -> CoverageJudgment:
    out = CoverageJudgment(gt.item_id, [r.item_id for r in related])
    if not related:
        return out
    try:
        out.verdicts, out.final_cc, out.tiebreak_used = _resolve("coverage", gt, related, judges, tiebreaker)
    except AuthError:
        raise
    except GatewayError as exc:
        logger.warning("coverage judgment for %s unavailable: %s", gt.item_id, exc)
        out.available, out.final_cc, out.error = False, False, str(exc)
    return out


@dataclass
class CoverageEvaluation:
    scores: CoverageScores
    relevance: list[RelevanceJudgment]
    coverage: list[CoverageJudgment]
    candidates: dict

    def relevance_map(self) -> set:
        """(generated feature id, gt id) pairs judged relevant."""
        return {(j.candidate_feature_id, j.gt_id) for j in self.relevance if j.available and j.final}


def evaluate_coverage(
    gt_items: Sequence[Item],
    generated: Sequence[Item],
    embeddings: Mapping[int, np.ndarray],
    embed,
    judges: Sequence[Judge],
    tiebreaker: Judge,
    k: int = 5,
    parallel: int = 4,
) -> CoverageEvaluation:
    by_id = {g.item_id: g for g in generated}
    candidates = {
        gt.item_id: [fid for fid, _ in retrieve_candidates(embed(gt.text), embeddings, k)] for gt in gt_items
    }
    pairs = [(gt, by_id[fid]) for gt in gt_items for fid in candidates[gt.item_id]]
    with ThreadPoolExecutor(max_workers=max(1, parallel)) as pool:
        relevance = list(pool.map(lambda p: judge_relevance(p[0], p[1], judges, tiebreaker), pairs))

    failed = {j.gt_id for j in relevance if not j.available}
    stage2 = []
    for gt in gt_items:
        if gt.item_id in failed:
            continue
        related = [by_id[j.candidate_feature_id] for j in relevance if j.gt_id == gt.item_id and j.final]
        stage2.append((gt, related))
    with ThreadPoolExecutor(max_workers=max(1, parallel)) as pool:
        coverage = list(pool.map(lambda t: judge_complete_coverage(t[0], t[1], judges, tiebreaker), stage2))

    scores = coverage_metrics(relevance, coverage, len(gt_items), len(generated))
    return CoverageEvaluation(scores, relevance, coverage, candidates)


def judge_agreement(evaluation: CoverageEvaluation) -> dict[str, float]:
    """Cohen's kappa between the two primary judges per stage."""
    out = {}
    for name, items in (("relevance", evaluation.relevance), ("coverage", evaluation.coverage)):
        pairs = [(j.verdicts[0].decision, j.verdicts[1].decision) for j in items if j.available and len(j.verdicts) >= 2]
        if pairs:
            out[name] = cohen_kappa([a for a, _ in pairs], [b for _, b in pairs])
    return out
