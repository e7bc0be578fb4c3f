"""Coverage, traceability and Link@k evaluation with LLM or keyword judges."""

from .data import GroundTruth, GroundTruthFeature, known_fqns, load_commits, load_ground_truth
from .judges import Item, Judge, KeywordJudge, LLMJudge, ScriptedJudge, Verdict, stub_judges
from .metrics import (
    PRF,
    Commit,
    CoverageScores,
    LinkAtK,
    UndefinedStatistic,
    cohen_kappa,
    coverage_metrics,
    f1_score,
    link_at_k,
    retrieve_candidates,
    spearman_rho,
    trace_metrics,
)
from .protocol import (
    CoverageEvaluation,
    CoverageJudgment,
    RelevanceJudgment,
    evaluate_coverage,
    judge_agreement,
    judge_complete_coverage,
    judge_relevance,
)
from .report import EvalReport
