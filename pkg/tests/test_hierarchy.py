"""Hierarchy definitions, cell identity, and summary accounting."""

from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

import datamill as dm
from datamill.hierarchy import (
    CycleDetected,
    DuplicateLevel,
    LevelMismatch,
    UnbalancedLifecycle,
    UnknownParent,
)
from helpers import flat_hierarchy, nested_hierarchy, orthogonal_hierarchy


class TestDefineHierarchy:
    def test_nested_levels(self):
        h = nested_hierarchy()
        assert h.levels == ("job", "run", "subrun", "event")
        assert h.parent("event") == "subrun"
        assert h.parent("run") == "job"
        assert h.parent("job") is None

    def test_empty_declaration_keeps_only_job(self):
        h = dm.define_hierarchy([])
        assert h.levels == ("job",)

    def test_orthogonal_branches_under_job(self):
        h = orthogonal_hierarchy()
        assert h.children("job") == ("run", "trigger_primitive")
        assert not h.comparable("run", "trigger_primitive")
        assert h.comparable("run", "event")

    def test_duplicate_level_rejected(self):
        with pytest.raises(DuplicateLevel):
            dm.define_hierarchy([("run", "job"), ("run", "job")])

    def test_declaring_job_rejected(self):
        with pytest.raises(DuplicateLevel):
            dm.define_hierarchy([("job", "job")])

    def test_unknown_parent_rejected(self):
        with pytest.raises(UnknownParent):
            dm.define_hierarchy([("event", "subrun")])

    def test_self_parent_rejected(self):
        with pytest.raises(CycleDetected):
            dm.define_hierarchy([("run", "run")])

    def test_direct_construction_rejects_cycle(self):
        with pytest.raises(CycleDetected):
            dm.HierarchySpec(("job", "a", "b"), {"a": "b", "b": "a"})

    def test_records_round_trip(self):
        h = orthogonal_hierarchy()
        assert dm.HierarchySpec.from_records(h.to_records()) == h


class TestCells:
    def test_make_cell_extends_path(self):
        h = nested_hierarchy()
        run = h.make_cell(dm.JOB_CELL, "run", 1)
        assert run.id.path == (("job", 0), ("run", 1))
        subrun = h.make_cell(run.id, "subrun", 2)
        assert subrun.id.path == (("job", 0), ("run", 1), ("subrun", 2))
        assert subrun.parent == run.id
        assert subrun.level == "subrun"

    def test_make_cell_level_mismatch(self):
        h = nested_hierarchy()
        with pytest.raises(LevelMismatch):
            h.make_cell(dm.JOB_CELL, "event", 7)

    def test_ancestor_prefix(self):
        h = nested_hierarchy()
        event = h.cell_from_segments([("run", 1), ("subrun", 2), ("event", 3)])
        assert event.ancestor("run") == dm.JOB_CELL.extend("run", 1)
        assert event.ancestor("event") == event
        run = dm.JOB_CELL.extend("run", 1)
        assert run.ancestor("subrun") is None

    def test_cell_ids_are_structural(self):
        a = dm.JOB_CELL.extend("run", 1).extend("subrun", 2)
        b = dm.JOB_CELL.extend("run", 1).extend("subrun", 2)
        assert a == b and hash(a) == hash(b)

    def test_render_uses_implicit_job_root(self):
        assert dm.JOB_CELL.render() == ""
        assert dm.JOB_CELL.extend("run", 3).render() == "run:3"


@st.composite
def _chain_cells(draw):
    depth = draw(st.integers(min_value=1, max_value=5))
    names = [f"l{i}" for i in range(depth)]
    h = dm.define_hierarchy(
        [(names[i], names[i - 1] if i else "job") for i in range(depth)]
    )
    cell = dm.JOB_CELL
    for name in names:
        cell = cell.extend(name, draw(st.integers(min_value=0, max_value=9)))
    return h, cell, names


@given(_chain_cells())
def test_ancestor_is_idempotent_and_monotone(data):
    h, cell, names = data
    assert cell.ancestor(cell.level) == cell
    for i, upper in enumerate(names):
        for lower in names[i:]:
            via = cell.ancestor(lower).ancestor(upper)
            assert via == cell.ancestor(upper)


@st.composite
def _forest_declarations(draw):
    # Parents are drawn from previously declared levels, so the result is a
    # valid forest by construction; shapes vary from chains to wide bushes.
    n = draw(st.integers(min_value=0, max_value=6))
    declared = ["job"]
    decls = []
    for i in range(n):
        name = f"lvl{i}"
        parent = draw(st.sampled_from(declared))
        decls.append((name, parent))
        declared.append(name)
    return decls


@given(_forest_declarations())
def test_valid_forests_accepted_and_round_trip(decls):
    h = dm.define_hierarchy(decls)
    assert len(h.levels) == len(decls) + 1
    assert dm.HierarchySpec.from_records(h.to_records()) == h
    for name, parent in decls:
        assert h.parent(name) == parent
        assert h.is_ancestor("job", name)


@given(_forest_declarations(), st.data())
def test_forest_violations_rejected(decls, data):
    from datamill.hierarchy import HierarchyError

    mutation = data.draw(st.sampled_from(["duplicate", "orphan", "self"]))
    if mutation == "duplicate":
        victim = data.draw(st.sampled_from(decls)) if decls else ("job", "job")
        bad = decls + [victim]
    elif mutation == "orphan":
        bad = decls + [("straggler", "nonexistent")]
    else:
        bad = decls + [("loop", "loop")]
    with pytest.raises(HierarchyError):
        dm.define_hierarchy(bad)


class TestSummary:
    def _events_for(self, hierarchy, cells):
        # Depth-first begin/end pairs honoring parent-before-child ordering.
        events = []

        def walk(cell, children):
            events.append(dm.LifecycleEvent.begin(cell))
            for child, grandchildren in children:
                walk(child, grandchildren)
            events.append(dm.LifecycleEvent.end(cell))

        walk(dm.JOB_CELL, cells)
        return events

    def _nested_cells(self, subrun_sizes):
        run = dm.JOB_CELL.extend("run", 1)
        subruns = []
        for s, n in enumerate(subrun_sizes, start=1):
            subrun = run.extend("subrun", s)
            events = [(subrun.extend("event", e), []) for e in range(n)]
            subruns.append((subrun, events))
        return [(run, subruns)]

    def test_ten_events_across_two_subruns(self):
        h = nested_hierarchy()
        summary = dm.summarize(h, self._events_for(h, self._nested_cells([6, 4])))
        assert summary.count("run") == 1
        assert summary.count("subrun") == 2
        assert summary.count("event") == 10

    def test_job_only_reports_zero_below(self):
        h = nested_hierarchy()
        summary = dm.summarize(
            h, [dm.LifecycleEvent.begin(dm.JOB_CELL), dm.LifecycleEvent.end(dm.JOB_CELL)]
        )
        assert summary.count("job") == 1
        assert summary.count("run") == 0
        assert summary.count("event") == 0

    def test_two_subruns_of_two_events(self):
        # Counted by hand: one run, two subruns, four events in total.
        h = nested_hierarchy()
        summary = dm.summarize(h, self._events_for(h, self._nested_cells([2, 2])))
        assert (summary.count("run"), summary.count("subrun"), summary.count("event")) == (1, 2, 4)

    def test_missing_end_is_unbalanced(self):
        h = nested_hierarchy()
        with pytest.raises(UnbalancedLifecycle):
            dm.summarize(h, [dm.LifecycleEvent.begin(dm.JOB_CELL)])

    def test_end_without_begin_is_unbalanced(self):
        h = nested_hierarchy()
        with pytest.raises(UnbalancedLifecycle):
            dm.summarize(h, [dm.LifecycleEvent.end(dm.JOB_CELL)])

    def test_double_begin_is_unbalanced(self):
        h = nested_hierarchy()
        with pytest.raises(UnbalancedLifecycle):
            dm.summarize(
                h,
                [dm.LifecycleEvent.begin(dm.JOB_CELL), dm.LifecycleEvent.begin(dm.JOB_CELL)],
            )

    def test_order_between_unrelated_cells_does_not_matter(self):
        h = nested_hierarchy()
        run = dm.JOB_CELL.extend("run", 1)
        s1, s2 = run.extend("subrun", 1), run.extend("subrun", 2)
        e1, e2 = s1.extend("event", 1), s2.extend("event", 1)
        begin, end = dm.LifecycleEvent.begin, dm.LifecycleEvent.end
        depth_first = [
            begin(dm.JOB_CELL), begin(run),
            begin(s1), begin(e1), end(e1), end(s1),
            begin(s2), begin(e2), end(e2), end(s2),
            end(run), end(dm.JOB_CELL),
        ]
        interleaved = [
            begin(dm.JOB_CELL), begin(run),
            begin(s1), begin(s2), begin(e2), begin(e1),
            end(e2), end(e1), end(s1), end(s2),
            end(run), end(dm.JOB_CELL),
        ]
        assert dm.summarize(h, depth_first) == dm.summarize(h, interleaved)

    def test_render_format_nested(self):
        h = nested_hierarchy()
        summary = dm.summarize(h, self._events_for(h, self._nested_cells([6, 4])))
        assert summary.render() == "job: 1\n  run: 1\n    subrun: 2\n      event: 10\n"

    def test_render_format_orthogonal_branches(self):
        h = orthogonal_hierarchy()
        run = dm.JOB_CELL.extend("run", 1)
        cells = [
            (run, [(run.extend("event", e), []) for e in range(3)]),
            (dm.JOB_CELL.extend("trigger_primitive", 0), []),
            (dm.JOB_CELL.extend("trigger_primitive", 1), []),
        ]
        summary = dm.summarize(h, self._events_for(h, cells))
        assert summary.render() == (
            "job: 1\n"
            "  run: 1\n"
            "    event: 3\n"
            "  trigger_primitive: 2\n"
        )

    def test_render_format_flat(self):
        h = flat_hierarchy()
        cells = [(dm.JOB_CELL.extend("event", e), []) for e in range(5)]
        summary = dm.summarize(h, self._events_for(h, cells))
        assert summary.render() == "job: 1\n  event: 5\n"
