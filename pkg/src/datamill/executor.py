"""Concurrent execution of a validated graph over a streamed dataset.

A single coordinator thread owns every piece of scheduling state: it consumes
source events, resolves operator inputs (climbing cell paths for cross-domain
reads), tracks fold completion, and retires cells once every consumer has
settled. Worker threads only ever run pure operator applications, so no user
code needs locks and results are independent of the pool width.
"""

from __future__ import annotations

import queue
import random
import threading
import time
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Sequence

from .errors import DatamillError
from .graph import SOURCE_NODE, PipelineGraph
from .hierarchy import (
    JOB_LEVEL,
    CellId,
    HierarchySummary,
    LevelName,
    LifecycleEvent,
    SummaryCollector,
)
from .pipeline import NodeKind, NodeSpec
from .store import DataProduct, DuplicateProduct, ProductLabel, ProductStore


class ExecutionError(DatamillError):
    pass


class OperatorFailure(ExecutionError):
    def __init__(self, node: str, cell: CellId, cause: BaseException) -> None:
        self.node = node
        self.cell = cell
        self.cause = cause
        super().__init__(f"operator of node '{node}' failed at cell '{cell}': {cause}")


class MalformedSource(ExecutionError):
    pass


class MissingInput(ExecutionError):
    pass


class RunawayUnfold(ExecutionError):
    pass


class DoubleFinalize(ExecutionError):
    pass


@dataclass(frozen=True)
class SourceEvent:
    """One record of the streamed dataset: a cell begin/end marker or a
    source product arriving between its cell's markers."""

    kind: str  # "begin" | "product" | "end"
    cell: CellId
    label: ProductLabel | None = None
    type_tag: str | None = None
    value: Any = None

    @classmethod
    def begin(cls, cell: CellId) -> SourceEvent:
        return cls("begin", cell)

    @classmethod
    def end(cls, cell: CellId) -> SourceEvent:
        return cls("end", cell)

    @classmethod
    def product(cls, cell: CellId, label: ProductLabel, type_tag: str, value: Any) -> SourceEvent:
        return cls("product", cell, label, type_tag, value)


@dataclass(frozen=True)
class WorkerPool:
    """Execution resources: ``width`` concurrent operator applications at
    most. ``jitter`` adds a random pre-apply delay (seconds), useful only for
    shaking out scheduling assumptions in tests."""

    width: int = 1
    jitter: float = 0.0

    def __post_init__(self) -> None:
        if self.width < 1:
            raise ValueError("worker pool width must be at least 1")


@dataclass
class ExecutionReport:
    summary: HierarchySummary
    invocations: dict[str, int]
    max_in_flight: dict[str, int]
    persisted: int
    wall_time: float
    peak_open_cells: dict[LevelName, int]


class CollectingSink:
    """Accumulates persisted products in memory."""

    def __init__(self) -> None:
        self.products: list[DataProduct] = []

    def receive(self, products: Sequence[DataProduct]) -> None:
        self.products.extend(products)


PENDING = "pending"
READY = "ready"
RUNNING = "running"
DONE = "done"
DROPPED = "dropped"


@dataclass
class Invocation:
    """One operator application being assembled for a driving cell.

    ``inputs`` fills in as products arrive; the operator runs only once every
    slot is populated (never on a partial view). ``seq`` records dispatch
    order for diagnostics.
    """

    node: str
    cell: CellId
    inputs: list[DataProduct | None]
    awaiting: int = 0
    state: str = PENDING
    seq: int = -1
    tracker: "FoldState | None" = None

    def values(self) -> list[Any]:
        return [p.value for p in self.inputs]  # type: ignore[union-attr]


@dataclass
class FoldState:
    """Framework-managed accumulator for one (fold node, fold-level cell).

    Updates are serialized by the coordinator: at most one accumulate runs at
    a time per state, applied in arrival order. ``live_inputs`` counts
    not-yet-settled contributing invocations below the cell; ``live_feeders``
    counts unsettled unfold invocations that could still create new
    contributing cells. The state finalizes exactly once, after the cell's
    end marker and both counters reaching zero.
    """

    node: str
    cell: CellId
    acc: Any
    contributions: int = 0
    live_inputs: int = 0
    live_feeders: int = 0
    ended: bool = False
    busy: bool = False
    enqueued: bool = False
    finalized: bool = False
    queue: deque = field(default_factory=deque)

    def update(self, new_acc: Any) -> None:
        if self.finalized:
            raise DoubleFinalize(
                f"fold '{self.node}' at '{self.cell}' updated after finalization"
            )
        self.acc = new_acc
        self.contributions += 1

    def quiesced(self) -> bool:
        return (
            self.ended
            and not self.busy
            and not self.queue
            and self.live_inputs == 0
            and self.live_feeders == 0
        )

    def finalize(self) -> Any:
        if self.finalized:
            raise DoubleFinalize(f"fold '{self.node}' at '{self.cell}' finalized twice")
        self.finalized = True
        return self.acc


class _RunawaySignal(Exception):
    pass


def _iterate_unfold(fn: Any, state: Any, limit: int) -> list[Any]:
    out: list[Any] = []
    while True:
        step = fn(state)
        if step is None:
            return out
        value, state = step
        out.append(value)
        if len(out) > limit:
            raise _RunawaySignal()


def resolve_inputs(
    graph: PipelineGraph, store: ProductStore, node: NodeSpec, cell: CellId
) -> list[DataProduct] | None:
    """Zip-join of a node's inputs at one driving cell.

    Own-level inputs read directly; shallower inputs climb to the declared
    ancestor. Returns the complete product list, or None while any input is
    still missing.
    """
    resolved: list[DataProduct] = []
    for spec in node.inputs:
        product = store.resolve(spec.label, spec.level, cell)
        if product is None:
            return None
        resolved.append(product)
    return resolved


@dataclass
class _NodeRuntime:
    spec: NodeSpec
    driving: LevelName
    cap: int
    in_flight: int = 0
    max_in_flight: int = 0
    invocations: int = 0
    ready: deque = field(default_factory=deque)


@dataclass
class _CellState:
    cell: CellId
    parent: "_CellState | None"
    pending: int = 1  # the outstanding end marker
    ended: bool = False
    completed: bool = False
    trackers: list[FoldState] = field(default_factory=list)


class _Run:
    def __init__(
        self,
        graph: PipelineGraph,
        pool: WorkerPool,
        sink: Any,
        max_inflight_cells: int,
        max_unfold_children: int,
    ) -> None:
        self.graph = graph
        self.hierarchy = graph.hierarchy
        self.pool = pool
        self.sink = sink
        self.max_inflight_cells = max_inflight_cells
        self.max_unfold_children = max_unfold_children

        self.store = ProductStore()
        self.summary = SummaryCollector(self.hierarchy)
        self.completions: queue.Queue = queue.Queue()
        self.nodes: dict[str, _NodeRuntime] = {}
        self.by_driving: dict[LevelName, list[_NodeRuntime]] = defaultdict(list)
        for name, spec in graph.nodes.items():
            rt = _NodeRuntime(spec, graph.driving[name], spec.concurrency.cap(pool.width))
            self.nodes[name] = rt
            self.by_driving[rt.driving].append(rt)
        for rts in self.by_driving.values():
            rts.sort(key=lambda rt: rt.spec.name)

        # Which folds each unfold can still feed: an unfold whose child level
        # lies between a fold's output level (exclusive) and its driving
        # level (inclusive) can create new contributing cells.
        self.folds_at_level: dict[LevelName, list[str]] = defaultdict(list)
        self.feeders_of: dict[str, list[str]] = defaultdict(list)
        for name, spec in sorted(graph.nodes.items()):
            if spec.kind is NodeKind.FOLD:
                assert spec.fold_level is not None
                self.folds_at_level[spec.fold_level].append(name)
                chain = self.hierarchy.ancestry(graph.driving[name])
                below = chain[chain.index(spec.fold_level) + 1 :]
                for uname, uspec in graph.nodes.items():
                    if uspec.kind is NodeKind.UNFOLD and uspec.unfold_child_level in below:
                        self.feeders_of[uname].append(name)

        self.temp_flags: dict[ProductLabel, bool] = {}
        for decl in graph.sources.values():
            self.temp_flags[decl.label] = not decl.persist
        for spec in graph.nodes.values():
            for out in spec.outputs:
                self.temp_flags[out.label] = out.temporary

        self.cells: dict[CellId, _CellState] = {}
        self.seen_cells: set[CellId] = set()
        self.trackers: dict[tuple[str, CellId], FoldState] = {}
        self.waiters: dict[tuple[ProductLabel, CellId], list[tuple[Invocation, int]]] = (
            defaultdict(list)
        )
        self.dead: set[tuple[ProductLabel, CellId]] = set()
        self.records: list[Invocation] = []
        self.open_levels: dict[LevelName, int] = defaultdict(int)
        self.peak_open: dict[LevelName, int] = defaultdict(int)
        self.in_flight_total = 0
        self.persisted = 0
        self.seq = 0
        self.error: DatamillError | None = None
        self.workers: "ThreadPool" = ThreadPool(pool.width)

    # -- event intake -------------------------------------------------------

    def admissible(self, event: SourceEvent) -> bool:
        if event.kind != "begin":
            return True
        return self.open_levels[event.cell.level] < self.max_inflight_cells

    def process_event(self, event: SourceEvent) -> None:
        if event.kind == "begin":
            self._check_source_begin(event.cell)
            self.begin_cell(event.cell)
        elif event.kind == "end":
            state = self.cells.get(event.cell)
            if state is None or state.ended:
                raise MalformedSource(f"end marker for inactive cell '{event.cell}'")
            self.end_cell(state)
        elif event.kind == "product":
            self._source_product(event)
        else:
            raise MalformedSource(f"unknown dataset record kind {event.kind!r}")

    def _check_source_begin(self, cell: CellId) -> None:
        if not self.hierarchy.has_level(cell.level):
            raise MalformedSource(f"cell '{cell}' uses undeclared level '{cell.level}'")
        parent = cell.parent
        if parent is None:
            return
        pstate = self.cells.get(parent)
        if pstate is None:
            if parent in self.seen_cells:
                raise MalformedSource(f"begin of '{cell}' after its parent ended")
            raise MalformedSource(f"begin of '{cell}' before its parent '{parent}'")
        if pstate.ended:
            raise MalformedSource(f"begin of '{cell}' after its parent ended")
        declared = self.hierarchy.parent_of.get(cell.level)
        if declared != parent.level:
            raise MalformedSource(
                f"cell '{cell}': level '{cell.level}' is not a child of '{parent.level}'"
            )

    def _source_product(self, event: SourceEvent) -> None:
        state = self.cells.get(event.cell)
        if state is None or state.ended:
            raise MalformedSource(
                f"product '{event.label}' for inactive cell '{event.cell}'"
            )
        decl = self.graph.sources.get(event.label or "")
        if decl is None:
            raise MalformedSource(f"undeclared source label '{event.label}'")
        if decl.level != event.cell.level:
            raise MalformedSource(
                f"source label '{event.label}' declared at level '{decl.level}', "
                f"delivered at '{event.cell.level}'"
            )
        if event.type_tag != decl.type_tag:
            raise MalformedSource(
                f"source product '{event.label}' tagged '{event.type_tag}', "
                f"declared '{decl.type_tag}'"
            )
        try:
            self.put_product(event.label, event.cell, event.value, SOURCE_NODE)
        except DuplicateProduct as exc:
            raise MalformedSource(str(exc)) from exc

    # -- cell lifecycle -----------------------------------------------------

    def begin_cell(self, cell: CellId) -> None:
        if cell in self.seen_cells:
            raise MalformedSource(f"cell '{cell}' begun twice")
        self.seen_cells.add(cell)
        parent_state = self.cells.get(cell.parent) if cell.parent else None
        state = _CellState(cell, parent_state)
        self.cells[cell] = state
        if parent_state is not None:
            parent_state.pending += 1
        self.store.open_cell(cell)
        self.summary.observe(LifecycleEvent.begin(cell))
        level = cell.level
        self.open_levels[level] += 1
        self.peak_open[level] = max(self.peak_open[level], self.open_levels[level])

        for fold_name in self.folds_at_level.get(level, ()):
            rt = self.nodes[fold_name]
            tracker = FoldState(fold_name, cell, acc=rt.spec.fold_init)
            self.trackers[(fold_name, cell)] = tracker
            state.trackers.append(tracker)
            state.pending += 1  # the fold's result product

        for rt in self.by_driving.get(level, ()):
            self._create_record(rt, cell, state)

    def end_cell(self, state: _CellState) -> None:
        state.ended = True
        state.pending -= 1
        for tracker in state.trackers:
            tracker.ended = True
            self._check_finalize(tracker)
        self._maybe_complete(state)

    def _maybe_complete(self, state: _CellState) -> None:
        if state.completed or state.pending > 0 or not state.ended:
            return
        state.completed = True
        self.summary.observe(LifecycleEvent.end(state.cell))
        self.open_levels[state.cell.level] -= 1
        for tracker in state.trackers:
            del self.trackers[(tracker.node, state.cell)]
        kept = self.store.retire_cell(state.cell)
        if kept:
            self.persisted += len(kept)
            if self.sink is not None:
                self.sink.receive(kept)
        del self.cells[state.cell]
        if state.parent is not None:
            state.parent.pending -= 1
            self._maybe_complete(state.parent)

    # -- invocation assembly --------------------------------------------------

    def _create_record(self, rt: _NodeRuntime, cell: CellId, state: _CellState) -> None:
        spec = rt.spec
        rec = Invocation(spec.name, cell, inputs=[None] * len(spec.inputs))
        self.records.append(rec)
        state.pending += 1
        if spec.kind is NodeKind.FOLD:
            anchor = cell.ancestor(spec.fold_level)  # type: ignore[arg-type]
            tracker = self.trackers[(spec.name, anchor)]  # type: ignore[index]
            rec.tracker = tracker
            tracker.live_inputs += 1
        elif spec.kind is NodeKind.UNFOLD:
            for fold_name in self.feeders_of.get(spec.name, ()):
                self._feeder_tracker(fold_name, cell).live_feeders += 1

        for idx, ispec in enumerate(spec.inputs):
            anchor = cell.ancestor(ispec.level)
            assert anchor is not None, "driving level is always below input levels"
            key = (ispec.label, anchor)
            if key in self.dead:
                self._drop(rec)
                return
            product = self.store.get(ispec.label, anchor)
            if product is None:
                rec.awaiting += 1
                self.waiters[key].append((rec, idx))
            else:
                rec.inputs[idx] = product
        if rec.awaiting == 0:
            self._ready(rec)

    def _feeder_tracker(self, fold_name: str, cell: CellId) -> FoldState:
        fold_level = self.nodes[fold_name].spec.fold_level
        anchor = cell.ancestor(fold_level)  # type: ignore[arg-type]
        return self.trackers[(fold_name, anchor)]  # type: ignore[index]

    def _ready(self, rec: Invocation) -> None:
        rec.state = READY
        rt = self.nodes[rec.node]
        if rt.spec.kind is NodeKind.FOLD:
            tracker = rec.tracker
            assert tracker is not None
            tracker.queue.append(rec)
            if not tracker.busy and not tracker.enqueued:
                tracker.enqueued = True
                rt.ready.append(tracker)
        else:
            rt.ready.append(rec)
        self._pump(rt)

    def _pump(self, rt: _NodeRuntime) -> None:
        while self.error is None and rt.in_flight < rt.cap and rt.ready:
            item = rt.ready.popleft()
            if isinstance(item, FoldState):
                item.enqueued = False
                if item.busy or not item.queue:
                    continue
                rec = item.queue.popleft()
                item.busy = True
                self._dispatch(rec, fold_acc=item.acc)
            else:
                self._dispatch(item)

    def _dispatch(self, rec: Invocation, fold_acc: Any = None) -> None:
        rt = self.nodes[rec.node]
        rt.in_flight += 1
        rt.max_in_flight = max(rt.max_in_flight, rt.in_flight)
        rt.invocations += 1
        self.in_flight_total += 1
        rec.state = RUNNING
        rec.seq = self.seq
        self.seq += 1

        spec = rt.spec
        kind = spec.kind
        fn = spec.operator
        values = rec.values()
        if kind is NodeKind.FOLD:
            args = (fold_acc, *values)
        else:
            args = tuple(values)
        jitter = self.pool.jitter
        limit = self.max_unfold_children

        def work() -> None:
            try:
                if jitter > 0:
                    time.sleep(random.random() * jitter)
                if kind is NodeKind.UNFOLD:
                    result = _iterate_unfold(fn, args[0], limit)
                else:
                    result = fn(*args)
                self.completions.put((rec, result, None))
            except BaseException as exc:  # noqa: BLE001 - reported as OperatorFailure
                self.completions.put((rec, None, exc))

        self.workers.submit(work)

    # -- completion handling --------------------------------------------------

    def handle_completion(self, rec: Invocation, result: Any, exc: BaseException | None) -> None:
        rt = self.nodes[rec.node]
        rt.in_flight -= 1
        self.in_flight_total -= 1
        if exc is not None:
            self._record_failure(rec, exc)
            return
        if self.error is not None:
            return
        spec = rt.spec
        try:
            if spec.kind is NodeKind.TRANSFORM:
                for out, value in zip(spec.outputs, self._match_outputs(spec, result)):
                    self.put_product(out.label, rec.cell, value, spec.name)
                self._settle(rec, DONE)
            elif spec.kind is NodeKind.FILTER:
                if not isinstance(result, bool):
                    raise TypeError(f"predicate returned {type(result).__name__}, not bool")
                if result:
                    for out, product in zip(spec.outputs, rec.inputs):
                        self.put_product(out.label, rec.cell, product.value, spec.name)  # type: ignore[union-attr]
                else:
                    for out in spec.outputs:
                        self.mark_dead(out.label, rec.cell)
                self._settle(rec, DONE)
            elif spec.kind is NodeKind.MONITOR:
                self._settle(rec, DONE)
            elif spec.kind is NodeKind.FOLD:
                tracker = rec.tracker
                assert tracker is not None
                tracker.update(result)
                tracker.busy = False
                self._settle(rec, DONE)
                if tracker.queue and not tracker.enqueued:
                    tracker.enqueued = True
                    rt.ready.append(tracker)
                self._check_finalize(tracker)
            elif spec.kind is NodeKind.UNFOLD:
                self._emit_children(rec, spec, result)
                self._settle(rec, DONE)
        except DatamillError:
            raise
        except Exception as inner:  # operator contract violations
            self._record_failure(rec, inner)
            return
        self._pump(rt)

    def _record_failure(self, rec: Invocation, exc: BaseException) -> None:
        if self.error is not None:
            return
        if isinstance(exc, _RunawaySignal):
            self.error = RunawayUnfold(
                f"unfold '{rec.node}' at cell '{rec.cell}' exceeded "
                f"{self.max_unfold_children} children"
            )
        else:
            self.error = OperatorFailure(rec.node, rec.cell, exc)

    @staticmethod
    def _match_outputs(spec: NodeSpec, result: Any) -> list[Any]:
        if len(spec.outputs) == 1:
            return [result]
        if not isinstance(result, tuple) or len(result) != len(spec.outputs):
            raise TypeError(
                f"operator must return a {len(spec.outputs)}-tuple for its declared outputs"
            )
        return list(result)

    def _emit_children(self, rec: Invocation, spec: NodeSpec, values: list[Any]) -> None:
        child_level = spec.unfold_child_level
        assert child_level is not None
        for index, value in enumerate(values):
            child = rec.cell.extend(child_level, index)
            self.begin_cell(child)
            for out, v in zip(spec.outputs, self._match_outputs(spec, value)):
                self.put_product(out.label, child, v, spec.name)
            self.end_cell(self.cells[child])

    def _settle(self, rec: Invocation, state: str) -> None:
        rec.state = state
        spec = self.nodes[rec.node].spec
        if spec.kind is NodeKind.FOLD and rec.tracker is not None:
            rec.tracker.live_inputs -= 1
            self._check_finalize(rec.tracker)
        elif spec.kind is NodeKind.UNFOLD:
            for fold_name in self.feeders_of.get(spec.name, ()):
                tracker = self._feeder_tracker(fold_name, rec.cell)
                tracker.live_feeders -= 1
                self._check_finalize(tracker)
        cell_state = self.cells[rec.cell]
        cell_state.pending -= 1
        self._maybe_complete(cell_state)

    def _drop(self, rec: Invocation) -> None:
        if rec.state != PENDING:
            return
        spec = self.nodes[rec.node].spec
        # Fold and unfold outputs never attach to the driving cell, so a
        # dropped invocation only kills same-cell outputs.
        if spec.kind in (NodeKind.TRANSFORM, NodeKind.FILTER):
            for out in spec.outputs:
                self.mark_dead(out.label, rec.cell)
        self._settle(rec, DROPPED)

    # -- products -------------------------------------------------------------

    def put_product(self, label: ProductLabel, cell: CellId, value: Any, provenance: str) -> None:
        product = DataProduct(
            label=label,
            cell=cell,
            type_tag=self.graph.label_type[label],
            value=value,
            provenance=provenance,
            temporary=self.temp_flags[label],
        )
        self.store.put(product)
        for rec, idx in self.waiters.pop((label, cell), ()):
            if rec.state != PENDING or rec.inputs[idx] is not None:
                continue
            rec.inputs[idx] = product
            rec.awaiting -= 1
            if rec.awaiting == 0:
                self._ready(rec)

    def mark_dead(self, label: ProductLabel, cell: CellId) -> None:
        """Record that (label, cell) will never arrive; drop whoever waits."""
        self.dead.add((label, cell))
        for rec, _ in self.waiters.pop((label, cell), ()):
            self._drop(rec)

    # -- folds ------------------------------------------------------------------

    def _check_finalize(self, tracker: FoldState) -> None:
        if tracker.finalized or not tracker.quiesced():
            return
        value = tracker.finalize()
        spec = self.nodes[tracker.node].spec
        self.put_product(spec.outputs[0].label, tracker.cell, value, spec.name)
        state = self.cells[tracker.cell]
        state.pending -= 1
        self._maybe_complete(state)

    # -- main loop ---------------------------------------------------------------

    def drain(self, block: bool) -> bool:
        """Process queued worker completions; returns True if any were seen.

        With ``block`` the first read waits for a completion; the rest of the
        queue is then drained without waiting.
        """
        handled = False
        while True:
            try:
                rec, result, exc = self.completions.get(block=block)
            except queue.Empty:
                return handled
            block = False
            handled = True
            self.handle_completion(rec, result, exc)

    def execute(self, source: Iterable[SourceEvent]) -> None:
        events: Iterator[SourceEvent] = iter(source)
        held: SourceEvent | None = None
        exhausted = False
        while True:
            self.drain(block=False)
            if self.error is not None:
                break
            if held is None and not exhausted:
                held = next(events, None)
                if held is None:
                    exhausted = True
            if held is not None:
                if self.admissible(held):
                    event, held = held, None
                    self.process_event(event)
                    continue
                if self.in_flight_total > 0:
                    self.drain(block=True)
                    continue
                raise MalformedSource(
                    f"open-cell cap ({self.max_inflight_cells}) reached at level "
                    f"'{held.cell.level}' with no work in flight; "
                    "the dataset never closes earlier cells"
                )
            if self.in_flight_total > 0:
                self.drain(block=True)
                continue
            for rt in self.nodes.values():
                self._pump(rt)
            if self.in_flight_total == 0:
                break

        while self.in_flight_total > 0:
            self.drain(block=True)
        if self.error is not None:
            raise self.error
        self._check_leftovers()

    def _check_leftovers(self) -> None:
        open_cells = sorted(str(c) for c, s in self.cells.items() if not s.ended)
        if open_cells:
            raise MalformedSource(f"stream ended with open cells: {', '.join(open_cells)}")
        stuck = []
        for rec in self.records:
            if rec.state == PENDING:
                spec = self.nodes[rec.node].spec
                missing = sorted(
                    spec.inputs[i].label for i, p in enumerate(rec.inputs) if p is None
                )
                stuck.append(f"node '{rec.node}' at cell '{rec.cell}' never received {missing}")
        if stuck:
            raise MissingInput("; ".join(sorted(stuck)))
        assert not self.cells, "all cells must have completed"

    def report(self, wall_time: float) -> ExecutionReport:
        return ExecutionReport(
            summary=self.summary.result(),
            invocations={name: rt.invocations for name, rt in sorted(self.nodes.items())},
            max_in_flight={name: rt.max_in_flight for name, rt in sorted(self.nodes.items())},
            persisted=self.persisted,
            wall_time=wall_time,
            peak_open_cells=dict(self.peak_open),
        )


class ThreadPool:
    """Fixed set of worker threads fed from one queue.

    Kept deliberately small: workers run closures that already carry their
    own result routing, so there is nothing to join on per task.
    """

    def __init__(self, width: int) -> None:
        self._tasks: queue.Queue = queue.Queue()
        self._threads = [
            threading.Thread(target=self._loop, name=f"datamill-worker-{i}", daemon=True)
            for i in range(width)
        ]
        for t in self._threads:
            t.start()

    def _loop(self) -> None:
        while True:
            task = self._tasks.get()
            if task is None:
                return
            task()

    def submit(self, task: Any) -> None:
        self._tasks.put(task)

    def shutdown(self) -> None:
        for _ in self._threads:
            self._tasks.put(None)
        for t in self._threads:
            t.join()


def run(
    graph: PipelineGraph,
    source: Iterable[SourceEvent],
    pool: WorkerPool | None = None,
    sink: Any = None,
    *,
    max_inflight_cells: int = 64,
    max_unfold_children: int = 1_000_000,
) -> ExecutionReport:
    """Execute the graph over the event stream and return the run report.

    Every required invocation happens exactly once per driving cell; all
    non-temporary products go to ``sink`` (anything with a ``receive``
    method) as their cells retire. Persisted content is identical for any
    pool width, provided operators are pure and fold operators are
    associative and commutative.
    """
    pool = pool or WorkerPool(1)
    started = time.perf_counter()
    state = _Run(graph, pool, sink, max_inflight_cells, max_unfold_children)
    try:
        state.execute(source)
    finally:
        state.workers.shutdown()
    return state.report(time.perf_counter() - started)
