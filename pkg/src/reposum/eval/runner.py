"""Evaluation commands over an artifact directory."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional, Sequence

from ..gateway import Gateway, make_gateway
from ..pipeline import load_features, load_model, load_trace_links
from .data import GroundTruth, known_fqns, load_commits, load_ground_truth
from .judges import Item, Judge, KeywordJudge, LLMJudge
from .metrics import link_at_k, trace_metrics
from .protocol import evaluate_coverage, judge_agreement
from .report import EvalReport

logger = logging.getLogger(__name__)

KINDS = ("coverage", "trace", "linkk")


def build_judges(spec: str, tiebreak_spec: str, provider: Optional[dict] = None, cache_dir=None):
    """``stub`` selects keyword judges; otherwise ``spec`` names two models and ``tiebreak_spec`` one."""

    def llm(model: str) -> Judge:
        settings = dict(provider or {})
        settings["model_name"] = model
        if settings.get("name", "stub") == "stub":
            settings["name"] = "stub"
        return LLMJudge(make_gateway(settings, cache_dir), name=model)

    if spec == "stub":
        judges = [KeywordJudge("stub-a"), KeywordJudge("stub-b")]
    else:
        names = [s.strip() for s in spec.split(",") if s.strip()]
        if len(names) != 2:
            raise ValueError("--judges needs 'stub' or exactly two comma-separated model names")
        judges = [llm(n) for n in names]
    tiebreaker = KeywordJudge("stub-tiebreak") if tiebreak_spec == "stub" else llm(tiebreak_spec)
    return judges, tiebreaker


def generated_items(features) -> list[Item]:
    return [Item(f.feature_id, f"{f.title}. {f.description}") for f in features]


def run_eval(
    kind: str,
    artifact_dir,
    ground_truth: Optional[GroundTruth] = None,
    commits=None,
    judges: Sequence[Judge] = (),
    tiebreaker: Optional[Judge] = None,
    ks: Sequence[int] = (1, 2, 3),
    gateway: Optional[Gateway] = None,
    candidates: int = 5,
    strict: bool = True,
    parallel: int = 4,
) -> EvalReport:
    if kind not in KINDS:
        raise ValueError(f"unknown evaluation {kind!r}")
    out = Path(artifact_dir)
    gateway = gateway or make_gateway()
    model = load_model(out)
    features, _ = load_features(out)
    links = load_trace_links(out)
    embeddings = {f.feature_id: f.embedding for f in features}
    report = EvalReport(counts={"generated_features": len(features)})

    if kind in ("coverage", "trace"):
        if ground_truth is None:
            raise ValueError(f"{kind} evaluation needs a ground-truth file")
        unresolved = ground_truth.unresolved(model)
        for what, items in unresolved.items():
            if items:
                msg = f"{len(items)} ground-truth {what} links do not resolve against the repository"
                logger.warning(msg)
                report.warnings.append(msg)
        gt_items = [Item(f.gt_id, f.text) for f in ground_truth.features]
        ev = evaluate_coverage(
            gt_items, generated_items(features), embeddings, gateway.embed, judges, tiebreaker,
            k=candidates, parallel=parallel,
        )
        report.C, report.CB, report.CC = ev.scores.C, ev.scores.CB, ev.scores.CC
        report.kappa = judge_agreement(ev)
        report.counts.update(
            manual_features=len(gt_items),
            manual_features_scored=ev.scores.n_manual,
            generated_features_scored=ev.scores.n_generated,
            tiebreaks=sum(j.tiebreak_used for j in ev.relevance + ev.coverage),
            failed_judgments=sum(not j.available for j in ev.relevance + ev.coverage),
        )
        report.excluded = {
            "manual": list(ev.scores.excluded_manual),
            "generated": list(ev.scores.excluded_generated),
        }
        report.transcripts = [{"stage": "relevance", **j.to_dict()} for j in ev.relevance]
        report.transcripts += [{"stage": "coverage", **j.to_dict()} for j in ev.coverage]
        if kind == "trace":
            gen = {(l.feature_id, model.files[f].path) for l in links for f in l.file_ids}
            prf = trace_metrics(gen, ground_truth.trace_links, ev.relevance_map(), strict=strict)
            report.P, report.R, report.F1 = prf.P, prf.R, prf.F1
            report.counts.update(generated_links=len(gen), manual_links=len(ground_truth.trace_links))

    if kind == "linkk":
        if commits is None:
            raise ValueError("linkk evaluation needs a commits file")
        feature_methods = {l.feature_id: [model.methods[m].fqn for m in l.method_ids] for l in links}
        known = known_fqns(model)
        for k in ks:
            res = link_at_k(commits, embeddings, feature_methods, k, gateway.embed, known)
            report.link_at_k[k] = res.to_dict()
        report.counts["commits"] = len(commits)
    return report


def run_eval_files(kind: str, artifact_dir, ground_truth_path=None, commits_path=None, **kwargs) -> EvalReport:
    gt = load_ground_truth(ground_truth_path) if ground_truth_path else None
    commits = load_commits(commits_path) if commits_path else None
    return run_eval(kind, artifact_dir, gt, commits, **kwargs)
