"""Shared fixture builders for the test suite."""

from __future__ import annotations

from typing import Any, Iterable

import datamill as dm
from datamill.files import render_products


def nested_hierarchy() -> dm.HierarchySpec:
    return dm.define_hierarchy([("run", "job"), ("subrun", "run"), ("event", "subrun")])


def orthogonal_hierarchy() -> dm.HierarchySpec:
    return dm.define_hierarchy(
        [("run", "job"), ("event", "run"), ("trigger_primitive", "job")]
    )


def flat_hierarchy() -> dm.HierarchySpec:
    return dm.define_hierarchy([("event", "job")])


def nested_stream(
    subrun_events: dict[int, list[dict[str, Any]]],
    subrun_products: dict[int, dict[str, Any]] | None = None,
    tags: dict[str, str] | None = None,
    run_index: int = 1,
) -> list[dm.SourceEvent]:
    """One run containing the given subruns; each event dict maps label to
    value. Product tags default to "int"."""
    tags = tags or {}
    run = dm.JOB_CELL.extend("run", run_index)
    events = [dm.SourceEvent.begin(dm.JOB_CELL), dm.SourceEvent.begin(run)]
    for s_idx, cells in subrun_events.items():
        subrun = run.extend("subrun", s_idx)
        events.append(dm.SourceEvent.begin(subrun))
        for label, value in ((subrun_products or {}).get(s_idx) or {}).items():
            events.append(
                dm.SourceEvent.product(subrun, label, tags.get(label, "int"), value)
            )
        for e_idx, products in enumerate(cells, start=1):
            cell = subrun.extend("event", e_idx)
            events.append(dm.SourceEvent.begin(cell))
            for label, value in products.items():
                events.append(
                    dm.SourceEvent.product(cell, label, tags.get(label, "int"), value)
                )
            events.append(dm.SourceEvent.end(cell))
        events.append(dm.SourceEvent.end(subrun))
    events.append(dm.SourceEvent.end(run))
    events.append(dm.SourceEvent.end(dm.JOB_CELL))
    return events


def flat_stream(values: Iterable[int], label: str = "a") -> list[dm.SourceEvent]:
    """Flat hierarchy: one event cell per value, streamed begin/product/end."""
    events = [dm.SourceEvent.begin(dm.JOB_CELL)]
    for i, value in enumerate(values):
        cell = dm.JOB_CELL.extend("event", i)
        events.append(dm.SourceEvent.begin(cell))
        events.append(dm.SourceEvent.product(cell, label, "int", value))
        events.append(dm.SourceEvent.end(cell))
    events.append(dm.SourceEvent.end(dm.JOB_CELL))
    return events


def quickstart_graph() -> dm.PipelineGraph:
    """The double/sum/weighted-sum pipeline over run/subrun/event."""
    h = nested_hierarchy()
    p = dm.Pipeline(h)
    p.register_transform(
        "f",
        lambda a: a * 2,
        inputs=[dm.InputSpec("a", "event", "int")],
        outputs=[dm.OutputSpec("b", "int")],
    )
    p.register_fold(
        "g",
        lambda acc, c: acc + c,
        0,
        inputs=[dm.InputSpec("c", "event", "int")],
        output=dm.OutputSpec("J", "int"),
        fold_level="subrun",
    )
    p.register_fold(
        "h",
        lambda acc, j, k: acc + j * k,
        0,
        inputs=[dm.InputSpec("J", "subrun", "int"), dm.InputSpec("K", "subrun", "int")],
        output=dm.OutputSpec("W", "int"),
        fold_level="run",
    )
    return dm.build_graph(
        p.spec(),
        [
            dm.SourceDecl("a", "event", "int"),
            dm.SourceDecl("c", "event", "int"),
            dm.SourceDecl("K", "subrun", "int"),
        ],
    )


def quickstart_events() -> list[dm.SourceEvent]:
    """Two subruns of two events; a = c = 1..4 across events, K = 10 and 20."""
    return nested_stream(
        subrun_events={
            1: [{"a": 1, "c": 1}, {"a": 2, "c": 2}],
            2: [{"a": 3, "c": 3}, {"a": 4, "c": 4}],
        },
        subrun_products={1: {"K": 10}, 2: {"K": 20}},
    )


def run_to_table(
    graph: dm.PipelineGraph,
    events: list[dm.SourceEvent],
    width: int = 1,
    jitter: float = 0.0,
    **kwargs: Any,
) -> tuple[dm.ExecutionReport, str]:
    """Run and return (report, canonical product table text)."""
    sink = dm.CollectingSink()
    report = dm.run(graph, events, dm.WorkerPool(width, jitter), sink, **kwargs)
    return report, render_products(sink.products)


def products_by_label(sink: dm.CollectingSink, label: str) -> list[dm.DataProduct]:
    return sorted(
        (p for p in sink.products if p.label == label), key=lambda p: p.cell.path
    )
