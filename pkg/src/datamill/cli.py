"""Command-line driver: validate pipelines, export their dependency graph,
and run them over a dataset."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Sequence

from . import files, report
from .errors import DatamillError
from .executor import CollectingSink, ExecutionReport, WorkerPool, run
from .graph import GraphValidationFailure, PipelineGraph, build_graph, export_dot

WIDTH_ENV = "DATAMILL_WIDTH"


def _build(pipeline_path: str) -> PipelineGraph:
    loaded = files.load_pipeline_file(pipeline_path)
    return build_graph(loaded.spec, loaded.sources)


def _emit_error(exc: BaseException) -> None:
    payload = {"error": type(exc).__name__, "detail": str(exc)}
    print(json.dumps(payload), file=sys.stderr)


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        _build(args.pipeline)
    except GraphValidationFailure as exc:
        for finding in exc.errors:
            print(finding)
        return 1
    except (DatamillError, OSError) as exc:
        _emit_error(exc)
        return 1
    print("ok")
    return 0


def cmd_graph(args: argparse.Namespace) -> int:
    try:
        graph = _build(args.pipeline)
    except GraphValidationFailure as exc:
        for finding in exc.errors:
            print(finding, file=sys.stderr)
        return 1
    except (DatamillError, OSError) as exc:
        _emit_error(exc)
        return 1
    Path(args.output).write_text(export_dot(graph))
    return 0


def _format_stats(result: ExecutionReport, deterministic: bool) -> str:
    lines = []
    for name in sorted(result.invocations):
        line = f"node {name}: invocations={result.invocations[name]}"
        if not deterministic:
            line += f" max_inflight={result.max_in_flight[name]}"
        lines.append(line)
    lines.append(f"persisted: {result.persisted}")
    if not deterministic:
        for level in sorted(result.peak_open_cells):
            lines.append(f"peak_open {level}: {result.peak_open_cells[level]}")
        lines.append(f"wall_time_s: {result.wall_time:.3f}")
    return "\n".join(lines) + "\n"


def cmd_run(args: argparse.Namespace) -> int:
    try:
        loaded = files.load_pipeline_file(args.pipeline)
        graph = build_graph(loaded.spec, loaded.sources)
    except GraphValidationFailure as exc:
        for finding in exc.errors:
            print(finding, file=sys.stderr)
        return 1
    except (DatamillError, OSError) as exc:
        _emit_error(exc)
        return 1

    sink = CollectingSink()
    events = files.load_dataset(args.dataset, graph.hierarchy)
    try:
        result = run(
            graph,
            events,
            WorkerPool(args.width),
            sink,
            max_inflight_cells=args.max_inflight_cells,
            max_unfold_children=args.max_unfold,
        )
    except (DatamillError, OSError) as exc:
        _emit_error(exc)
        return 1

    files.write_products_file(sink.products, args.output)
    if args.figures:
        report.render_report_figures(result, args.figures)
    sys.stdout.write(result.summary.render())
    sys.stdout.write("\n")
    sys.stdout.write(_format_stats(result, args.deterministic_summary))
    return 0


def _default_width() -> int:
    raw = os.environ.get(WIDTH_ENV)
    if raw is None:
        return 1
    try:
        width = int(raw)
    except ValueError:
        raise SystemExit(f"{WIDTH_ENV} must be an integer, got {raw!r}")
    return width


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="datamill",
        description="Run declarative operator pipelines over hierarchical datasets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="parse and validate a pipeline file")
    p_validate.add_argument("pipeline")
    p_validate.set_defaults(fn=cmd_validate)

    p_graph = sub.add_parser("graph", help="export the dependency graph as DOT")
    p_graph.add_argument("pipeline")
    p_graph.add_argument("-o", "--output", required=True)
    p_graph.set_defaults(fn=cmd_graph)

    p_run = sub.add_parser("run", help="execute a pipeline over a dataset")
    p_run.add_argument("pipeline")
    p_run.add_argument("dataset")
    p_run.add_argument("-o", "--output", required=True, help="persisted-products file")
    p_run.add_argument(
        "--width",
        type=int,
        default=None,
        help=f"worker pool width (default: ${WIDTH_ENV} or 1)",
    )
    p_run.add_argument("--max-inflight-cells", type=int, default=64)
    p_run.add_argument("--max-unfold", type=int, default=1_000_000)
    p_run.add_argument(
        "--figures",
        metavar="DIR",
        default=None,
        help="also render report figures into this directory",
    )
    p_run.add_argument(
        "--deterministic-summary",
        action="store_true",
        help="omit timing and scheduling statistics from the report",
    )
    p_run.set_defaults(fn=cmd_run)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    if getattr(args, "width", None) is None and args.command == "run":
        args.width = _default_width()
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
