"""Relevance and complete-coverage judges: keyword stubs, scripted test doubles and LLM judges."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

from ..errors import GatewayError, MalformedResponse
from ..gateway import Gateway, parse_json_reply
from ..text import keyword_sets

TASKS = ("relevance", "coverage")


@dataclass(frozen=True)
class Item:
    """A feature text under judgment (ground-truth or generated)."""

    item_id: Union[int, str]
    text: str


@dataclass
class Verdict:
    judge: str
    decision: bool
    rationale: str = ""
    gt_entities: list[str] = field(default_factory=list)
    gt_operations: list[str] = field(default_factory=list)
    candidate_entities: list[str] = field(default_factory=list)
    candidate_operations: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "judge": self.judge,
            "decision": self.decision,
            "rationale": self.rationale,
            "gt_entities": list(self.gt_entities),
            "gt_operations": list(self.gt_operations),
            "candidate_entities": list(self.candidate_entities),
            "candidate_operations": list(self.candidate_operations),
        }


# --------------------------------------------------------------------------- keyword rule


def keyword_verdict(task: str, gt_text: str, candidate_texts: Sequence[str]) -> dict:
    """Set-algebra decision over lexicon-extracted entity and operation sets.

    relevance: both intersections non-empty (one candidate).
    coverage: the union over candidates contains the ground-truth sets.
    """
    if task not in TASKS:
        raise ValueError(f"unknown judging task {task!r}")
    gt_e, gt_o = keyword_sets(gt_text)
    cand_e, cand_o = set(), set()
    for t in candidate_texts:
        e, o = keyword_sets(t)
        cand_e |= e
        cand_o |= o
    if task == "relevance":
        shared_e, shared_o = gt_e & cand_e, gt_o & cand_o
        decision = bool(shared_e) and bool(shared_o)
        rationale = f"shared entities {sorted(shared_e)}; shared operations {sorted(shared_o)}"
    else:
        miss_e, miss_o = gt_e - cand_e, gt_o - cand_o
        decision = bool(candidate_texts) and not miss_e and not miss_o
        rationale = f"missing entities {sorted(miss_e)}; missing operations {sorted(miss_o)}"
    return {
        "gt_entities": sorted(gt_e),
        "gt_operations": sorted(gt_o),
        "candidate_entities": sorted(cand_e),
        "candidate_operations": sorted(cand_o),
        "decision": "yes" if decision else "no",
        "rationale": rationale,
    }


def _prompt_fields(prompt: str, name: str) -> list[str]:
    return [m.strip() for m in re.findall(rf"^{name}: (.*)$", prompt, re.MULTILINE)]


def stub_verdict_from_prompt(prompt: str) -> dict:
    """What the offline provider answers to a judge or tiebreak prompt."""
    task = (_prompt_fields(prompt, "TASK") or ["relevance"])[0]
    gt = (_prompt_fields(prompt, "GROUND_TRUTH") or [""])[0]
    cands = _prompt_fields(prompt, "CANDIDATE")
    return keyword_verdict(task, gt, cands)


def _verdict_from_reply(judge: str, data: dict) -> Verdict:
    raw = data.get("decision")
    if isinstance(raw, bool):
        decision = raw
    elif isinstance(raw, str) and raw.strip().lower() in ("yes", "no", "true", "false"):
        decision = raw.strip().lower() in ("yes", "true")
    else:
        raise MalformedResponse(f"judge reply has no usable decision: {raw!r}")

    def strs(key):
        return [str(x) for x in data.get(key) or []]

    return Verdict(
        judge,
        decision,
        str(data.get("rationale", "")),
        strs("gt_entities"),
        strs("gt_operations"),
        strs("candidate_entities"),
        strs("candidate_operations"),
    )


# --------------------------------------------------------------------------- judges


class Judge:
    name = "judge"

    def judge(self, task: str, gt: Item, candidates: Sequence[Item]) -> Verdict:
        raise NotImplementedError

    def tiebreak(self, task: str, gt: Item, candidates: Sequence[Item], verdicts: Sequence[Verdict]) -> Verdict:
        return self.judge(task, gt, candidates)


class KeywordJudge(Judge):
    """Offline judge applying the set rules to lexicon-extracted keywords."""

    def __init__(self, name: str = "keyword"):
        self.name = name

    def judge(self, task, gt, candidates):
        return _verdict_from_reply(self.name, keyword_verdict(task, gt.text, [c.text for c in candidates]))


Script = Callable[[str, Item, Sequence[Item]], Union[bool, str]]


class ScriptedJudge(Judge):
    """Test double. ``script(task, gt, candidates)`` returns a bool or ``"fail"``.

    A dict keyed by ``(task, gt_id, tuple(candidate_ids))`` works too, with ``default``
    for missing keys.
    """

    def __init__(self, name: str, script, default: Union[bool, str] = False):
        self.name = name
        self.script = script
        self.default = default
        self.calls: list[tuple] = []

    def _decide(self, task, gt, candidates):
        if callable(self.script):
            return self.script(task, gt, candidates)
        return self.script.get((task, gt.item_id, tuple(c.item_id for c in candidates)), self.default)

    def judge(self, task, gt, candidates):
        self.calls.append(("judge", task, gt.item_id, tuple(c.item_id for c in candidates)))
        out = self._decide(task, gt, candidates)
        if out == "fail":
            raise GatewayError(f"{self.name}: scripted failure")
        return Verdict(self.name, bool(out), "scripted")

    def tiebreak(self, task, gt, candidates, verdicts):
        self.calls.append(("tiebreak", task, gt.item_id, tuple(c.item_id for c in candidates)))
        out = self._decide(task, gt, candidates)
        if out == "fail":
            raise GatewayError(f"{self.name}: scripted failure")
        return Verdict(self.name, bool(out), "scripted tiebreak")


_RELEVANCE_PROMPT = """You judge whether a generated software feature is relevant to a feature from the
project's manual documentation. Missing entities and missing events are the typical errors to look for.
Step 1. Extract the entity set (the objects acted upon) and the operation set (the actions) of the
ground-truth feature and of the candidate feature.
Step 2. The candidate is relevant if and only if the two entity sets intersect and the two operation
sets intersect.
Reply with one JSON object with keys "gt_entities", "gt_operations", "candidate_entities",
"candidate_operations", "decision" ("yes" or "no") and "rationale".
"""

_COVERAGE_PROMPT = """You judge whether several generated software features together completely cover a
feature from the project's manual documentation. Missing entities and missing events are the typical
errors to look for.
Step 1. Extract the entity set and the operation set of the ground-truth feature, and the union of the
entity sets and of the operation sets over all candidate features.
Step 2. The ground truth is completely covered if and only if the candidate entity union contains every
ground-truth entity and the candidate operation union contains every ground-truth operation.
Reply with one JSON object with keys "gt_entities", "gt_operations", "candidate_entities",
"candidate_operations", "decision" ("yes" or "no") and "rationale".
"""

_TIEBREAK_HEAD = """Two judges disagreed on the question below. Review their answers and rationales, then
apply the stated rule yourself and give the final decision in the same JSON format.
"""


def judge_prompt(task: str, gt: Item, candidates: Sequence[Item], verdicts: Sequence[Verdict] = ()) -> str:
    body = _RELEVANCE_PROMPT if task == "relevance" else _COVERAGE_PROMPT
    lines = [f"TASK: {task}", f"GROUND_TRUTH: {_one_line(gt.text)}"]
    lines += [f"CANDIDATE: {_one_line(c.text)}" for c in candidates]
    prompt = body + "\n" + "\n".join(lines)
    if verdicts:
        shown = "\n".join(f"JUDGE {v.judge}: {json.dumps(v.to_dict(), sort_keys=True)}" for v in verdicts)
        prompt = _TIEBREAK_HEAD + "\n" + prompt + "\n\n" + shown
    return prompt


def _one_line(text: str) -> str:
    return " ".join(text.split())


class LLMJudge(Judge):
    """Judge backed by a gateway; judge roles always run at temperature 0."""

    def __init__(self, gateway: Gateway, name: Optional[str] = None, retries: int = 1):
        self.gateway = gateway
        self.name = name or gateway.model_name
        self.retries = retries

    def _ask(self, role: str, prompt: str) -> Verdict:
        req = self.gateway.request(role, prompt)
        for attempt in range(self.retries + 1):
            if attempt:
                self.gateway.invalidate(req)
            try:
                return _verdict_from_reply(self.name, parse_json_reply(self.gateway.complete(req)))
            except MalformedResponse:
                if attempt == self.retries:
                    raise
        raise AssertionError("unreachable")

    def judge(self, task, gt, candidates):
        return self._ask("judge", judge_prompt(task, gt, candidates))

    def tiebreak(self, task, gt, candidates, verdicts):
        return self._ask("tiebreak", judge_prompt(task, gt, candidates, verdicts))


def stub_judges() -> tuple[list[Judge], Judge]:
    return [KeywordJudge("stub-a"), KeywordJudge("stub-b")], KeywordJudge("stub-tiebreak")

