"""Registration surface: node invariants, errors, and config lookup."""

from __future__ import annotations

import pytest

import datamill as dm
from datamill.hierarchy import UnknownLevel
from datamill.pipeline import (
    ArityMismatch,
    DuplicateNodeName,
    DuplicateOutputLabel,
    LevelNotAncestor,
    LevelNotChild,
    RegistrationError,
    TypeMismatch,
)
from helpers import nested_hierarchy


def make_tracks(hits):
    return [h * 2 for h in hits]


def test_register_transform_basic():
    p = dm.Pipeline(nested_hierarchy())
    node = p.register_transform(
        "make_tracks",
        make_tracks,
        inputs=[dm.InputSpec("GoodHits", "event", "hits")],
        outputs=[dm.OutputSpec("GoodTracks", "tracks")],
        concurrency=dm.UNLIMITED,
    )
    assert node.kind is dm.NodeKind.TRANSFORM
    assert node.inputs[0].label == "GoodHits"
    assert p.spec().nodes == (node,)


def test_identity_transform_is_valid():
    p = dm.Pipeline(nested_hierarchy())
    node = p.register_transform(
        "rename",
        lambda a: a,
        inputs=[dm.InputSpec("A", "event", "int")],
        outputs=[dm.OutputSpec("B", "int")],
    )
    assert node.outputs[0].label == "B"


def test_duplicate_output_label_rejected():
    p = dm.Pipeline(nested_hierarchy())
    p.register_transform(
        "one", lambda a: a, [dm.InputSpec("A", "event", "int")], [dm.OutputSpec("GoodTracks", "int")]
    )
    with pytest.raises(DuplicateOutputLabel):
        p.register_transform(
            "two", lambda a: a, [dm.InputSpec("A", "event", "int")], [dm.OutputSpec("GoodTracks", "int")]
        )


def test_duplicate_node_name_rejected():
    p = dm.Pipeline(nested_hierarchy())
    p.register_monitor("watch", lambda a: None, [dm.InputSpec("A", "event", "int")])
    with pytest.raises(DuplicateNodeName):
        p.register_monitor("watch", lambda a: None, [dm.InputSpec("A", "event", "int")])


def test_transform_needs_inputs_and_outputs():
    p = dm.Pipeline(nested_hierarchy())
    with pytest.raises(RegistrationError):
        p.register_transform("no_inputs", lambda: 1, [], [dm.OutputSpec("B", "int")])
    with pytest.raises(RegistrationError):
        p.register_transform("no_outputs", lambda a: a, [dm.InputSpec("A", "event", "int")], [])


def test_arity_mismatch_rejected():
    p = dm.Pipeline(nested_hierarchy())
    with pytest.raises(ArityMismatch):
        p.register_transform(
            "two_arg",
            lambda a, b: a + b,
            inputs=[dm.InputSpec("A", "event", "int")],
            outputs=[dm.OutputSpec("B", "int")],
        )


def test_unknown_input_level_rejected():
    p = dm.Pipeline(nested_hierarchy())
    with pytest.raises(UnknownLevel):
        p.register_monitor("watch", lambda a: None, [dm.InputSpec("A", "slice", "int")])


def test_output_needs_type_for_plain_callables():
    p = dm.Pipeline(nested_hierarchy())
    with pytest.raises(RegistrationError):
        p.register_transform(
            "f", lambda a: a, [dm.InputSpec("A", "event", "int")], [dm.OutputSpec("B")]
        )


def test_filter_pass_labels_pair_with_inputs():
    p = dm.Pipeline(nested_hierarchy())
    node = p.register_filter(
        "even_only",
        lambda a: a % 2 == 0,
        inputs=[dm.InputSpec("a", "event", "int")],
        pass_labels=["a_even"],
    )
    assert node.outputs == (dm.OutputSpec("a_even", "int"),)
    with pytest.raises(RegistrationError):
        p.register_filter(
            "bad",
            lambda a: True,
            inputs=[dm.InputSpec("a", "event", "int")],
            pass_labels=["x", "y"],
        )


def test_monitor_has_no_outputs():
    p = dm.Pipeline(nested_hierarchy())
    node = p.register_monitor("logger", lambda t: None, [dm.InputSpec("GoodTracks", "event", "tracks")])
    assert node.outputs == ()


def test_fold_requires_proper_ancestor_level():
    p = dm.Pipeline(nested_hierarchy())
    with pytest.raises(LevelNotAncestor):
        p.register_fold(
            "bad",
            lambda acc, c: acc + c,
            0,
            inputs=[dm.InputSpec("c", "event", "int")],
            output=dm.OutputSpec("J", "int"),
            fold_level="event",
        )
    node = p.register_fold(
        "g",
        lambda acc, c: acc + c,
        0,
        inputs=[dm.InputSpec("c", "event", "int")],
        output=dm.OutputSpec("J", "int"),
        fold_level="subrun",
    )
    assert node.fold_level == "subrun"
    assert node.fold_init == 0


def test_unfold_requires_child_level():
    h = dm.define_hierarchy([("event", "job"), ("slice", "event")])
    p = dm.Pipeline(h)
    with pytest.raises(LevelNotChild):
        p.register_unfold(
            "bad",
            lambda s: None,
            input=dm.InputSpec("blob", "event", "int_list"),
            child_level="event",
            outputs=[dm.OutputSpec("piece", "int")],
        )
    node = p.register_unfold(
        "split",
        lambda s: None,
        input=dm.InputSpec("blob", "event", "int_list"),
        child_level="slice",
        outputs=[dm.OutputSpec("piece", "int")],
    )
    assert node.unfold_child_level == "slice"


def test_registration_order_does_not_change_the_graph():
    def build(order):
        p = dm.Pipeline(nested_hierarchy())
        calls = {
            "f": lambda p: p.register_transform(
                "f", lambda a: a * 2, [dm.InputSpec("a", "event", "int")], [dm.OutputSpec("b", "int")]
            ),
            "g": lambda p: p.register_fold(
                "g", lambda acc, c: acc + c, 0, [dm.InputSpec("c", "event", "int")],
                dm.OutputSpec("J", "int"), "subrun",
            ),
            "m": lambda p: p.register_monitor("m", lambda b: None, [dm.InputSpec("b", "event", "int")]),
        }
        for name in order:
            calls[name](p)
        sources = [dm.SourceDecl("a", "event", "int"), dm.SourceDecl("c", "event", "int")]
        return dm.build_graph(p.spec(), sources)

    g1 = build(["f", "g", "m"])
    g2 = build(["m", "g", "f"])
    assert set(g1.nodes) == set(g2.nodes)
    assert set(g1.edges) == set(g2.edges)
    assert dm.export_dot(g1) == dm.export_dot(g2)


class TestConfig:
    def test_present_key(self):
        cfg = dm.ConfigMap({"threads": 4})
        assert dm.config_get(cfg, "threads", 1) == 4

    def test_absent_key_yields_default(self):
        cfg = dm.ConfigMap({})
        assert dm.config_get(cfg, "threads", 1) == 1

    def test_wrong_type_rejected(self):
        cfg = dm.ConfigMap({"threads": "many"})
        with pytest.raises(TypeMismatch):
            dm.config_get(cfg, "threads", 1)

    def test_int_accepted_for_float_default(self):
        cfg = dm.ConfigMap({"scale": 2})
        assert dm.config_get(cfg, "scale", 1.0) == 2

    def test_bool_is_not_an_int(self):
        cfg = dm.ConfigMap({"threads": True})
        with pytest.raises(TypeMismatch):
            dm.config_get(cfg, "threads", 1)

    def test_read_only_mapping(self):
        cfg = dm.ConfigMap({"a": 1})
        assert dict(cfg) == {"a": 1}
        with pytest.raises(TypeError):
            cfg["a"] = 2  # type: ignore[index]
