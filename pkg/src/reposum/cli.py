"""Command-line entry point: ``reposum <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
from pathlib import Path

from . import __version__
from .config import load_config
from .errors import ReposumError, SchemaViolation
from .pipeline import CACHE_DIR, Pipeline, validate_artifacts

logger = logging.getLogger("reposum")

VARIANT_NAMES = {"blended": "blended", "adj-only": "adjacency_only", "sim-only": "similarity_only"}
LEVEL_NAMES = {"hierarchical": "hierarchical", "file-only": "file_only", "method-only": "method_only"}


class JsonLogFormatter(logging.Formatter):
    """One JSON object per log record."""

    def format(self, record):
        return json.dumps(
            {"level": record.levelname.lower(), "logger": record.name, "message": record.getMessage()},
            sort_keys=True,
        )


def _setup_logging(verbosity: int, json_logs: bool):
    handler = logging.StreamHandler(sys.stderr)
    fmt = JsonLogFormatter() if json_logs else logging.Formatter("%(levelname)s %(name)s: %(message)s")
    handler.setFormatter(fmt)
    root = logging.getLogger("reposum")
    root.handlers[:] = [handler]
    root.setLevel(logging.DEBUG if verbosity > 1 else logging.INFO if verbosity else logging.WARNING)
    root.propagate = False


def _ks(text: str) -> list[int]:
    try:
        ks = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad k list {text!r}") from None
    if not ks or min(ks) < 1:
        raise argparse.ArgumentTypeError("k values must be positive")
    return ks


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file")
    common.add_argument("--seed", type=int, help="global seed (overrides the config)")
    common.add_argument("-v", "--verbose", action="count", default=0)
    common.add_argument("--json-logs", action="store_true", help="one JSON record per log event")

    parser = argparse.ArgumentParser(
        prog="reposum", description="Feature documentation and traceability links for Java repositories."
    )
    parser.add_argument("--version", action="version", version=f"reposum {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="parse a repository into graph.json")
    p.add_argument("repo", nargs="?", help="repository root (default: from config)")
    p.add_argument("-o", "--out", help="artifact directory")
    p.add_argument("--lang", help="language profile (java)")
    p.add_argument("--force", action="store_true", help="rerun even when cached")

    p = sub.add_parser("summarize", parents=[common], help="method and file summaries, SS matrices")
    p.add_argument("artifact_dir", nargs="?")
    p.add_argument("--provider", help="provider name, or 'stub'")
    p.add_argument("--parallel", type=int)
    p.add_argument("--window-budget", type=int)
    p.add_argument("--force", action="store_true")

    p = sub.add_parser("cluster", parents=[common], help="hierarchical Leiden clustering")
    p.add_argument("artifact_dir", nargs="?")
    p.add_argument("--alpha", type=float)
    p.add_argument("--variant", choices=sorted(VARIANT_NAMES))
    p.add_argument("--levels", choices=sorted(LEVEL_NAMES))
    p.add_argument("--gamma-min", type=float)
    p.add_argument("--gamma-max", type=float)
    p.add_argument("--grid-points", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--force", action="store_true")

    p = sub.add_parser("docgen", parents=[common], help="features, epics, trace links and markdown docs")
    p.add_argument("artifact_dir", nargs="?")
    p.add_argument("--provider", help="provider name, or 'stub'")
    p.add_argument("-o", "--docs-out", help="also copy the rendered docs here")
    p.add_argument("--force", action="store_true")

    p = sub.add_parser("pipeline", parents=[common], help="analyze, summarize, cluster and docgen")
    p.add_argument("repo", nargs="?")
    p.add_argument("-o", "--out")
    p.add_argument("--provider")
    p.add_argument("--force", action="store_true")

    p = sub.add_parser("eval", parents=[common], help="evaluate generated documentation")
    p.add_argument("kind", choices=("coverage", "trace", "linkk"))
    p.add_argument("artifact_dir")
    p.add_argument("--ground-truth")
    p.add_argument("--commits")
    p.add_argument("--judges", help="'stub' or two comma-separated judge models")
    p.add_argument("--tiebreaker", help="'stub' or a tie-breaking judge model")
    p.add_argument("-k", type=_ks, help="comma-separated k values for Link@k")
    p.add_argument("--report-dir", help="where eval_report.{json,md} go (default: the artifact dir)")

    p = sub.add_parser("validate", parents=[common], help="check every artifact in a directory")
    p.add_argument("artifact_dir")
    p.add_argument("--require", action="append", default=[], help="artifact that must be present")
    return parser


def _overrides(args) -> dict:
    g = lambda name: getattr(args, name, None)  # noqa: E731
    out = g("out") or (g("artifact_dir") if args.command not in ("eval", "validate") else None)
    variant, levels = g("variant"), g("levels")
    return {
        "seed": args.seed,
        "repo": g("repo"),
        "out": out,
        "provider": {"name": g("provider")},
        "analyze": {"language": g("lang")},
        "summarize": {"parallel": g("parallel"), "window_budget": g("window_budget")},
        "cluster": {
            "alpha": g("alpha"),
            "variant": VARIANT_NAMES[variant] if variant else None,
            "levels": LEVEL_NAMES[levels] if levels else None,
            "gamma_min": g("gamma_min"),
            "gamma_max": g("gamma_max"),
            "grid_points": g("grid_points"),
            "restarts": g("restarts"),
        },
    }


def _eval(args, config) -> int:
    from .eval.runner import build_judges, run_eval_files
    from .gateway import make_gateway

    ev = config.eval
    cache = Path(args.artifact_dir) / CACHE_DIR
    provider = vars(config.provider)
    judges, tiebreaker = build_judges(args.judges or ev.judges, args.tiebreaker or ev.tiebreaker, provider, cache)
    report = run_eval_files(
        args.kind, args.artifact_dir, args.ground_truth, args.commits,
        judges=judges, tiebreaker=tiebreaker, ks=args.k or ev.ks, gateway=make_gateway(provider, cache),
        candidates=ev.candidates, strict=ev.strict_trace, parallel=ev.parallel,
    )
    j, m = report.write(args.report_dir or args.artifact_dir)
    print(report.to_markdown())
    print(f"wrote {j} and {m}")
    problems = report.check()
    for p in problems:
        logger.error("report check failed: %s", p)
    return 1 if problems else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose, args.json_logs)
    try:
        config = load_config(args.config, _overrides(args))
        if args.command in ("analyze", "summarize", "cluster", "docgen"):
            status = Pipeline(config, force=args.force).run_phase(args.command)
            print(f"{args.command}: {status}")
            if args.command == "docgen" and args.docs_out:
                shutil.copytree(Path(config.out) / "docs", args.docs_out, dirs_exist_ok=True)
        elif args.command == "pipeline":
            for phase, status in Pipeline(config, force=args.force).run().items():
                print(f"{phase}: {status}")
        elif args.command == "validate":
            report = validate_artifacts(args.artifact_dir, tuple(args.require))
            print(f"valid: {', '.join(report.checked) or 'no artifacts'}")
        else:
            return _eval(args, config)
    except SchemaViolation as exc:
        for p in exc.problems:
            logger.error("schema violation: %s", p)
        return 1
    except (ReposumError, ValueError, OSError) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
