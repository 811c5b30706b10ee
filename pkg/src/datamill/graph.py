"""Dependency-graph construction and validation.

Edges are derived entirely from input/output label declarations; users never
wire nodes by hand. Validation collects every finding before failing so a
broken pipeline is reported in one pass.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import DatamillError
from .hierarchy import HierarchySpec, LevelName
from .pipeline import NodeKind, NodeSpec, PipelineSpec
from .store import ProductLabel, TypeTag

SOURCE_NODE = "source"


class ValidationKind(enum.Enum):
    UNKNOWN_LABEL = "UnknownLabel"
    TYPE_CONFLICT = "TypeConflict"
    MULTIPLE_PRODUCERS = "MultipleProducers"
    CYCLE = "Cycle"
    LEVEL_INCOMPATIBLE = "LevelIncompatible"
    AMBIGUOUS_DRIVING_LEVEL = "AmbiguousDrivingLevel"


@dataclass(frozen=True)
class ValidationError:
    """One validation finding; ``detail`` names the offending node and label."""

    kind: ValidationKind
    detail: str

    def __str__(self) -> str:
        return f"{self.kind.value}: {self.detail}"


class GraphValidationFailure(DatamillError):
    """Raised with the complete list of findings, not just the first."""

    def __init__(self, errors: Sequence[ValidationError]) -> None:
        self.errors = list(errors)
        super().__init__("; ".join(str(e) for e in self.errors))


class AmbiguousDrivingLevel(DatamillError):
    pass


@dataclass(frozen=True)
class SourceDecl:
    """A label delivered by the dataset itself, with its level and tag.

    ``persist`` False marks the label's products temporary (not written to
    the output file).
    """

    label: ProductLabel
    level: LevelName
    type_tag: TypeTag
    persist: bool = True


Edge = tuple[str, ProductLabel, str]  # (producer node, label, consumer node)


@dataclass(frozen=True)
class PipelineGraph:
    """Validated dependency graph, shared read-only by the executor."""

    hierarchy: HierarchySpec
    nodes: Mapping[str, NodeSpec]
    sources: Mapping[ProductLabel, SourceDecl]
    edges: tuple[Edge, ...]
    driving: Mapping[str, LevelName]
    label_level: Mapping[ProductLabel, LevelName]
    label_type: Mapping[ProductLabel, TypeTag]
    producer_of: Mapping[ProductLabel, str]

    def consumers_of(self, label: ProductLabel) -> tuple[str, ...]:
        return tuple(c for (_, lbl, c) in self.edges if lbl == label)


def driving_level(hierarchy: HierarchySpec, node: NodeSpec) -> LevelName:
    """Deepest input level; the node runs once per cell of this level, with
    shallower inputs resolved by climbing the cell path.

    Raises AmbiguousDrivingLevel when two input levels sit on orthogonal
    branches, since no single cell can see both.
    """
    deepest = node.inputs[0].level
    for spec in node.inputs[1:]:
        if not hierarchy.comparable(deepest, spec.level):
            raise AmbiguousDrivingLevel(
                f"node '{node.name}': input levels '{deepest}' and '{spec.level}' "
                "are orthogonal"
            )
        if hierarchy.is_ancestor(deepest, spec.level, proper=True):
            deepest = spec.level
    return deepest


def _attach_level(node: NodeSpec, driving: LevelName) -> LevelName:
    if node.kind is NodeKind.FOLD:
        assert node.fold_level is not None
        return node.fold_level
    if node.kind is NodeKind.UNFOLD:
        assert node.unfold_child_level is not None
        return node.unfold_child_level
    return driving


def build_graph(pipeline: PipelineSpec, sources: Iterable[SourceDecl]) -> PipelineGraph:
    """Validate a registered pipeline against its source declarations.

    On failure raises :class:`GraphValidationFailure` carrying every finding:
    unknown labels, duplicate producers, type conflicts, cycles, level
    mismatches, and orthogonal (ambiguous) input levels.
    """
    hierarchy = pipeline.hierarchy
    errors: list[ValidationError] = []
    nodes = {n.name: n for n in pipeline.nodes}

    source_map: dict[ProductLabel, SourceDecl] = {}
    producer_of: dict[ProductLabel, str] = {}
    label_level: dict[ProductLabel, LevelName] = {}
    label_type: dict[ProductLabel, TypeTag | None] = {}

    for decl in sources:
        hierarchy.require_level(decl.level)
        if decl.label in producer_of:
            errors.append(
                ValidationError(
                    ValidationKind.MULTIPLE_PRODUCERS,
                    f"source label '{decl.label}' declared twice",
                )
            )
            continue
        source_map[decl.label] = decl
        producer_of[decl.label] = SOURCE_NODE
        label_level[decl.label] = decl.level
        label_type[decl.label] = decl.type_tag

    driving: dict[str, LevelName] = {}
    for node in pipeline.nodes:
        try:
            driving[node.name] = driving_level(hierarchy, node)
        except AmbiguousDrivingLevel as exc:
            errors.append(ValidationError(ValidationKind.AMBIGUOUS_DRIVING_LEVEL, str(exc)))

    for node in pipeline.nodes:
        if node.name not in driving:
            continue
        attach = _attach_level(node, driving[node.name])
        for out in node.outputs:
            if out.label in producer_of:
                errors.append(
                    ValidationError(
                        ValidationKind.MULTIPLE_PRODUCERS,
                        f"label '{out.label}' produced by both "
                        f"'{producer_of[out.label]}' and '{node.name}'",
                    )
                )
                continue
            producer_of[out.label] = node.name
            label_level[out.label] = attach
            label_type[out.label] = out.type_tag  # None until deduced below

    # A level populated by two unfolds would collide on generated cell ids.
    child_levels: dict[LevelName, str] = {}
    for node in pipeline.nodes:
        if node.kind is NodeKind.UNFOLD and node.unfold_child_level is not None:
            prior = child_levels.get(node.unfold_child_level)
            if prior is not None:
                errors.append(
                    ValidationError(
                        ValidationKind.MULTIPLE_PRODUCERS,
                        f"level '{node.unfold_child_level}' is generated by both "
                        f"unfold '{prior}' and unfold '{node.name}'",
                    )
                )
            else:
                child_levels[node.unfold_child_level] = node.name

    edges: list[Edge] = []
    for node in pipeline.nodes:
        for spec in node.inputs:
            producer = producer_of.get(spec.label)
            if producer is None:
                errors.append(
                    ValidationError(
                        ValidationKind.UNKNOWN_LABEL,
                        f"node '{node.name}' consumes '{spec.label}', which nothing produces",
                    )
                )
                continue
            edges.append((producer, spec.label, node.name))

    errors.extend(_cycle_findings(nodes, edges))
    errors.extend(_type_findings(pipeline.nodes, edges, label_type))
    errors.extend(
        _level_findings(nodes, edges, label_level, driving)
    )

    if not errors:
        for label, tag in label_type.items():
            if tag is None:
                errors.append(
                    ValidationError(
                        ValidationKind.TYPE_CONFLICT,
                        f"type of label '{label}' (produced by "
                        f"'{producer_of[label]}') cannot be deduced; declare it",
                    )
                )

    if errors:
        raise GraphValidationFailure(errors)

    return PipelineGraph(
        hierarchy=hierarchy,
        nodes=nodes,
        sources=source_map,
        edges=tuple(edges),
        driving=driving,
        label_level=label_level,
        label_type={k: v for k, v in label_type.items() if v is not None},
        producer_of=producer_of,
    )


def _cycle_findings(nodes: Mapping[str, NodeSpec], edges: Sequence[Edge]) -> list[ValidationError]:
    # Kahn's algorithm over operator nodes; whatever cannot be ordered is
    # part of (or downstream of) a cycle.
    indegree = {name: 0 for name in nodes}
    successors: dict[str, list[str]] = {name: [] for name in nodes}
    for producer, _, consumer in edges:
        if producer == SOURCE_NODE:
            continue
        successors[producer].append(consumer)
        indegree[consumer] += 1
    queue = [n for n, d in sorted(indegree.items()) if d == 0]
    ordered = 0
    while queue:
        name = queue.pop()
        ordered += 1
        for nxt in successors[name]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                queue.append(nxt)
    if ordered == len(nodes):
        return []
    stuck = sorted(n for n, d in indegree.items() if d > 0)
    return [
        ValidationError(
            ValidationKind.CYCLE,
            f"dependency cycle involving: {', '.join(stuck)}",
        )
    ]


def _topological_nodes(nodes: Sequence[NodeSpec], edges: Sequence[Edge]) -> list[NodeSpec]:
    by_name = {n.name: n for n in nodes}
    indegree = {n.name: 0 for n in nodes}
    successors: dict[str, list[str]] = {n.name: [] for n in nodes}
    for producer, _, consumer in edges:
        if producer == SOURCE_NODE or producer not in by_name:
            continue
        successors[producer].append(consumer)
        indegree[consumer] += 1
    queue = [n for n, d in sorted(indegree.items()) if d == 0]
    order: list[NodeSpec] = []
    while queue:
        name = queue.pop(0)
        order.append(by_name[name])
        for nxt in successors[name]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                queue.append(nxt)
    return order  # cyclic nodes are simply absent; reported separately


def _type_findings(
    nodes: Sequence[NodeSpec],
    edges: Sequence[Edge],
    label_type: dict[ProductLabel, TypeTag | None],
) -> list[ValidationError]:
    """Propagate tags producer-to-consumer in dependency order.

    Explicit consumer tags must match the producer; None tags adopt it.
    Catalog operators deduce their output tags from the resolved input tags
    and may veto incompatible inputs.
    """
    errors: list[ValidationError] = []
    for node in _topological_nodes(nodes, edges):
        input_tags: list[TypeTag] = []
        for spec in node.inputs:
            produced = label_type.get(spec.label)
            if spec.type_tag is not None and produced is not None and spec.type_tag != produced:
                errors.append(
                    ValidationError(
                        ValidationKind.TYPE_CONFLICT,
                        f"node '{node.name}' declares '{spec.label}' as "
                        f"'{spec.type_tag}' but it is produced as '{produced}'",
                    )
                )
            input_tags.append(spec.type_tag or produced or "?")
        checker = getattr(node.operator, "check_input_tags", None)
        if checker is not None and "?" not in input_tags:
            complaint = checker(input_tags)
            if complaint:
                errors.append(
                    ValidationError(
                        ValidationKind.TYPE_CONFLICT, f"node '{node.name}': {complaint}"
                    )
                )
                continue
        if node.kind is NodeKind.FILTER:
            # Pass-through labels re-emit inputs verbatim, so their tags are
            # exactly the input tags.
            for out, tag in zip(node.outputs, input_tags):
                if tag == "?":
                    continue
                if out.type_tag is None:
                    label_type[out.label] = tag
                elif out.type_tag != tag:
                    errors.append(
                        ValidationError(
                            ValidationKind.TYPE_CONFLICT,
                            f"filter '{node.name}' re-emits '{out.label}' as "
                            f"'{out.type_tag}' but the input is '{tag}'",
                        )
                    )
            continue
        deducer = getattr(node.operator, "deduce_output_tags", None)
        if deducer is not None and "?" not in input_tags:
            deduced = deducer(input_tags)
            for out, tag in zip(node.outputs, deduced):
                if out.type_tag is None:
                    label_type[out.label] = tag
                elif out.type_tag != tag:
                    errors.append(
                        ValidationError(
                            ValidationKind.TYPE_CONFLICT,
                            f"node '{node.name}' declares output '{out.label}' as "
                            f"'{out.type_tag}' but the operator yields '{tag}'",
                        )
                    )
    return errors


def _level_findings(
    nodes: Mapping[str, NodeSpec],
    edges: Sequence[Edge],
    label_level: Mapping[ProductLabel, LevelName],
    driving: Mapping[str, LevelName],
) -> list[ValidationError]:
    # The ancestor climb happens at consumption time, so each declaration must
    # name the level the producer attaches the label at.
    errors: list[ValidationError] = []
    for _, label, consumer in edges:
        produced_at = label_level.get(label)
        if produced_at is None or consumer not in nodes:
            continue
        node = nodes[consumer]
        for spec in node.inputs:
            if spec.label == label and spec.level != produced_at:
                errors.append(
                    ValidationError(
                        ValidationKind.LEVEL_INCOMPATIBLE,
                        f"node '{consumer}' reads '{label}' at level '{spec.level}' "
                        f"but it is attached at level '{produced_at}'",
                    )
                )
    return errors


def check_level_compatibility(graph: PipelineGraph) -> list[ValidationError]:
    """Re-run the per-edge level check on a built graph (empty when valid)."""
    return _level_findings(graph.nodes, graph.edges, graph.label_level, graph.driving)


def export_dot(graph: PipelineGraph) -> str:
    """Deterministic DOT text: node statements sorted by name, one edge per
    (producer, label, consumer) with the label as annotation.

    The synthetic source node appears only when source labels exist.
    """
    lines = ["digraph pipeline {"]
    names = sorted(graph.nodes)
    if graph.sources:
        names.append(SOURCE_NODE)
    for name in sorted(names):
        lines.append(f'  "{name}";')
    for producer, label, consumer in sorted(graph.edges):
        lines.append(f'  "{producer}" -> "{consumer}" [label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
