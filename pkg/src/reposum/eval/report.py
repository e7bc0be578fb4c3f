"""Evaluation report: JSON and markdown renderings plus range checks."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .metrics import f1_score

RATE_FIELDS = ("C", "CB", "CC", "P", "R", "F1")


@dataclass
class EvalReport:
    C: Optional[float] = None
    CB: Optional[float] = None
    CC: Optional[float] = None
    P: Optional[float] = None
    R: Optional[float] = None
    F1: Optional[float] = None
    link_at_k: dict[int, dict] = field(default_factory=dict)
    kappa: dict[str, float] = field(default_factory=dict)
    spearman: Optional[float] = None
    counts: dict[str, int] = field(default_factory=dict)
    excluded: dict[str, list] = field(default_factory=dict)
    transcripts: list[dict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def check(self) -> list[str]:
        problems = []
        for name in RATE_FIELDS:
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                problems.append(f"{name}={v} outside [0, 1]")
        if self.C is not None and self.CC is not None and self.CC > self.C + 1e-12:
            problems.append(f"CC={self.CC} exceeds C={self.C}")
        rows = [("trace", self.P, self.R, self.F1)]
        rows += [(f"link@{k}", v["P"], v["R"], v["F1"]) for k, v in self.link_at_k.items()]
        for label, p, r, f1 in rows:
            if f1 is None:
                continue
            for name, v in (("P", p), ("R", r), ("F1", f1)):
                if not 0.0 <= v <= 1.0:
                    problems.append(f"{label} {name}={v} outside [0, 1]")
            if abs(f1 - f1_score(p, r)) > 1e-9:
                problems.append(f"{label} F1={f1} is not the harmonic mean of P={p}, R={r}")
        for name, v in self.kappa.items():
            if not math.isnan(v) and not -1.0 - 1e-12 <= v <= 1.0 + 1e-12:
                problems.append(f"kappa[{name}]={v} outside [-1, 1]")
        if self.spearman is not None and not math.isnan(self.spearman) and abs(self.spearman) > 1 + 1e-12:
            problems.append(f"spearman={self.spearman} outside [-1, 1]")
        return problems

    def to_dict(self) -> dict:
        return {
            **{k: getattr(self, k) for k in RATE_FIELDS},
            "link_at_k": {str(k): v for k, v in sorted(self.link_at_k.items())},
            "kappa": dict(sorted(self.kappa.items())),
            "spearman": self.spearman,
            "counts": dict(sorted(self.counts.items())),
            "excluded": self.excluded,
            "warnings": list(self.warnings),
            "transcripts": self.transcripts,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(
            **{k: d.get(k) for k in RATE_FIELDS},
            link_at_k={int(k): v for k, v in d.get("link_at_k", {}).items()},
            kappa=dict(d.get("kappa", {})),
            spearman=d.get("spearman"),
            counts=dict(d.get("counts", {})),
            excluded=dict(d.get("excluded", {})),
            transcripts=list(d.get("transcripts", [])),
            warnings=list(d.get("warnings", [])),
        )

    def to_markdown(self) -> str:
        def fmt(v):
            return "n/a" if v is None else f"{v:.3f}"

        lines = ["# Evaluation report", ""]
        if self.C is not None:
            lines += ["## Feature coverage", "", "| C | CB | CC |", "|---|---|---|",
                      f"| {fmt(self.C)} | {fmt(self.CB)} | {fmt(self.CC)} |", ""]
        if self.P is not None:
            lines += ["## Traceability links", "", "| P | R | F1 |", "|---|---|---|",
                      f"| {fmt(self.P)} | {fmt(self.R)} | {fmt(self.F1)} |", ""]
        if self.link_at_k:
            lines += ["## Link@k", "", "| k | P | R | F1 |", "|---|---|---|---|"]
            for k, v in sorted(self.link_at_k.items()):
                lines.append(f"| {k} | {fmt(v['P'])} | {fmt(v['R'])} | {fmt(v['F1'])} |")
            lines.append("")
        if self.kappa:
            lines += ["## Judge agreement (Cohen's kappa)", ""]
            lines += [f"- {name}: {fmt(v)}" for name, v in sorted(self.kappa.items())]
            lines.append("")
        if self.spearman is not None:
            lines += [f"Spearman rank correlation: {fmt(self.spearman)}", ""]
        if self.counts:
            lines += ["## Counts", ""] + [f"- {k}: {v}" for k, v in sorted(self.counts.items())] + [""]
        if any(self.excluded.values()):
            lines += ["## Excluded after failed judgments", ""]
            lines += [f"- {k}: {', '.join(map(str, v))}" for k, v in sorted(self.excluded.items()) if v]
            lines.append("")
        if self.warnings:
            lines += ["## Warnings", ""] + [f"- {w}" for w in self.warnings] + [""]
        return "\n".join(lines)

    def write(self, out_dir) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        j = out / "eval_report.json"
        m = out / "eval_report.md"
        j.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        m.write_text(self.to_markdown(), encoding="utf-8")
        return j, m
