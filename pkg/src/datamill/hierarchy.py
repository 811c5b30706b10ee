"""Hierarchical data domains: level forests, concrete cells, lifecycle events,
and the end-of-run summary.

Levels form a forest rooted at the implicit ``job`` level. A concrete domain
instance (a *cell*) is identified by its full path of (level, index) steps
from the job root, so sibling branches never have to coordinate index
allocation.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import DatamillError

LevelName = str

JOB_LEVEL: LevelName = "job"


class HierarchyError(DatamillError):
    """Base for hierarchy-definition and lifecycle errors."""


class DuplicateLevel(HierarchyError):
    pass


class UnknownParent(HierarchyError):
    pass


class CycleDetected(HierarchyError):
    pass


class UnknownLevel(HierarchyError):
    pass


class LevelMismatch(HierarchyError):
    pass


class UnbalancedLifecycle(HierarchyError):
    pass


@dataclass(frozen=True)
class CellId:
    """Path identifier of one domain instance, always starting at ("job", 0).

    Equality and hashing are structural, so a CellId can be used directly as
    a dictionary key. The path itself is the unambiguous identifier; no
    global registry is involved.
    """

    path: tuple[tuple[LevelName, int], ...]

    def __post_init__(self) -> None:
        if not self.path or self.path[0] != (JOB_LEVEL, 0):
            raise ValueError("cell path must start at ('job', 0)")

    @property
    def level(self) -> LevelName:
        return self.path[-1][0]

    @property
    def index(self) -> int:
        return self.path[-1][1]

    @property
    def parent(self) -> CellId | None:
        if len(self.path) == 1:
            return None
        return CellId(self.path[:-1])

    def extend(self, level: LevelName, index: int) -> CellId:
        return CellId(self.path + ((level, index),))

    def ancestor(self, level: LevelName) -> CellId | None:
        """Unique prefix of this path ending at ``level``, or None.

        Asking for the cell's own level returns the cell itself.
        """
        for i, (lvl, _) in enumerate(self.path):
            if lvl == level:
                return CellId(self.path[: i + 1])
        return None

    def render(self) -> str:
        """Canonical text form: "/"-joined level:index segments, job implicit.

        The job cell itself renders as the empty string.
        """
        return "/".join(f"{lvl}:{idx}" for lvl, idx in self.path[1:])

    def __str__(self) -> str:
        return self.render() or JOB_LEVEL


JOB_CELL = CellId(((JOB_LEVEL, 0),))


@dataclass(frozen=True)
class DataCell:
    """A concrete domain instance; level and parent derive from the id path."""

    id: CellId

    @property
    def level(self) -> LevelName:
        return self.id.level

    @property
    def parent(self) -> CellId | None:
        return self.id.parent


@dataclass(frozen=True, eq=True)
class HierarchySpec:
    """Validated forest of level names rooted at "job".

    ``levels`` preserves declaration order (with "job" first); ``parent_of``
    maps every level except "job" to its parent. Instances are immutable and
    freely shareable across threads.
    """

    levels: tuple[LevelName, ...]
    parent_of: Mapping[LevelName, LevelName]

    def __post_init__(self) -> None:
        if not self.levels or self.levels[0] != JOB_LEVEL:
            raise ValueError("levels must start with 'job'")
        # Defensive re-validation for directly constructed specs: every level
        # must reach "job" by following parents, with no cycles.
        for level in self.levels[1:]:
            seen = {level}
            cur = level
            while cur != JOB_LEVEL:
                nxt = self.parent_of.get(cur)
                if nxt is None:
                    raise UnknownParent(f"level '{cur}' has no declared parent")
                if nxt in seen:
                    raise CycleDetected(f"parent chain of '{level}' revisits '{nxt}'")
                seen.add(nxt)
                cur = nxt

    def __hash__(self) -> int:
        return hash(self.levels)

    def has_level(self, level: LevelName) -> bool:
        return level == JOB_LEVEL or level in self.parent_of

    def require_level(self, level: LevelName) -> None:
        if not self.has_level(level):
            raise UnknownLevel(f"undeclared level '{level}'")

    def parent(self, level: LevelName) -> LevelName | None:
        self.require_level(level)
        return self.parent_of.get(level)

    def children(self, level: LevelName) -> tuple[LevelName, ...]:
        """Direct child levels, in declaration order."""
        self.require_level(level)
        return tuple(l for l in self.levels if self.parent_of.get(l) == level)

    def ancestry(self, level: LevelName) -> tuple[LevelName, ...]:
        """Level chain from "job" down to ``level``, inclusive."""
        self.require_level(level)
        chain = [level]
        while chain[-1] != JOB_LEVEL:
            chain.append(self.parent_of[chain[-1]])
        return tuple(reversed(chain))

    def depth(self, level: LevelName) -> int:
        return len(self.ancestry(level)) - 1

    def is_ancestor(self, anc: LevelName, desc: LevelName, *, proper: bool = False) -> bool:
        """True when ``anc`` lies on the parent chain of ``desc``."""
        if proper and anc == desc:
            return False
        return anc in self.ancestry(desc)

    def comparable(self, a: LevelName, b: LevelName) -> bool:
        """True unless the two levels sit on orthogonal branches."""
        return self.is_ancestor(a, b) or self.is_ancestor(b, a)

    def make_cell(self, parent: CellId, level: LevelName, index: int) -> DataCell:
        """Extend ``parent`` by one (level, index) step.

        The declared parent of ``level`` must equal the parent cell's level.
        """
        self.require_level(level)
        declared = self.parent_of.get(level)
        if declared != parent.level:
            raise LevelMismatch(
                f"level '{level}' is declared under '{declared}', not '{parent.level}'"
            )
        if index < 0:
            raise ValueError("cell index must be non-negative")
        return DataCell(parent.extend(level, index))

    def cell_from_segments(self, segments: Sequence[tuple[LevelName, int]]) -> CellId:
        """Build a CellId from (level, index) segments below the job root,
        checking each step against the declared parent relation."""
        cell = JOB_CELL
        for level, index in segments:
            cell = self.make_cell(cell, level, index).id
        return cell

    def to_records(self) -> list[dict[str, str]]:
        """Serializable {level, parent} records, declaration order."""
        return [{"level": l, "parent": self.parent_of[l]} for l in self.levels[1:]]

    @classmethod
    def from_records(cls, records: Iterable[Mapping[str, str]]) -> HierarchySpec:
        return define_hierarchy([(r["level"], r["parent"]) for r in records])


def define_hierarchy(levels: Iterable[tuple[LevelName, LevelName]]) -> HierarchySpec:
    """Validate level declarations into a HierarchySpec.

    "job" is implicit and must not be declared. Every named parent must be
    "job" or a previously declared level, which keeps the relation a forest
    by construction.
    """
    parent_of: dict[LevelName, LevelName] = {}
    order: list[LevelName] = [JOB_LEVEL]
    for name, parent in levels:
        if not name or not isinstance(name, str):
            raise HierarchyError(f"level name must be a non-empty string, got {name!r}")
        if name == JOB_LEVEL or name in parent_of:
            raise DuplicateLevel(f"level '{name}' declared twice")
        if name == parent:
            raise CycleDetected(f"level '{name}' cannot be its own parent")
        if parent != JOB_LEVEL and parent not in parent_of:
            raise UnknownParent(f"level '{name}' names undeclared parent '{parent}'")
        parent_of[name] = parent
        order.append(name)
    return HierarchySpec(tuple(order), parent_of)


BEGIN = "begin"
END = "end"


@dataclass(frozen=True)
class LifecycleEvent:
    """Begin or end marker for one cell; the mechanism that lets sequences be
    processed without knowing their full extent up front."""

    kind: str
    cell: CellId

    @classmethod
    def begin(cls, cell: CellId) -> LifecycleEvent:
        return cls(BEGIN, cell)

    @classmethod
    def end(cls, cell: CellId) -> LifecycleEvent:
        return cls(END, cell)


@dataclass(frozen=True)
class HierarchySummary:
    """Per-level distinct-cell counts, renderable as the end-of-run report."""

    hierarchy: HierarchySpec
    counts: Mapping[LevelName, int]

    def count(self, level: LevelName) -> int:
        return self.counts.get(level, 0)

    def render(self) -> str:
        """Exact text format: one line per level, two-space indent per depth,
        children in declaration order."""
        lines: list[str] = []

        def walk(level: LevelName, depth: int) -> None:
            lines.append(f"{'  ' * depth}{level}: {self.count(level)}")
            for child in self.hierarchy.children(level):
                walk(child, depth + 1)

        walk(JOB_LEVEL, 0)
        return "\n".join(lines) + "\n"


class SummaryCollector:
    """Accumulates lifecycle events into per-level cell counts.

    A single collector instance receives events from the run; delivery order
    between unrelated cells is unconstrained, so only begin/end pairing is
    checked here.
    """

    def __init__(self, hierarchy: HierarchySpec) -> None:
        self._hierarchy = hierarchy
        self._open: set[CellId] = set()
        self._seen: set[CellId] = set()
        self._counts: Counter[LevelName] = Counter()

    def observe(self, event: LifecycleEvent) -> None:
        cell = event.cell
        self._hierarchy.require_level(cell.level)
        if event.kind == BEGIN:
            if cell in self._seen:
                raise UnbalancedLifecycle(f"cell '{cell}' begun twice")
            self._seen.add(cell)
            self._open.add(cell)
            self._counts[cell.level] += 1
        elif event.kind == END:
            if cell not in self._open:
                raise UnbalancedLifecycle(f"end without begin for cell '{cell}'")
            self._open.remove(cell)
        else:
            raise ValueError(f"unknown lifecycle kind {event.kind!r}")

    def result(self) -> HierarchySummary:
        if self._open:
            stuck = ", ".join(sorted(str(c) for c in self._open))
            raise UnbalancedLifecycle(f"begin without end for: {stuck}")
        return HierarchySummary(self._hierarchy, dict(self._counts))


def summarize(hierarchy: HierarchySpec, events: Iterable[LifecycleEvent]) -> HierarchySummary:
    """Fold a complete lifecycle-event sequence into a HierarchySummary."""
    collector = SummaryCollector(hierarchy)
    for event in events:
        collector.observe(event)
    return collector.result()
