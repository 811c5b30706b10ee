"""File formats: the pipeline description (JSON), the dataset stream
(JSON Lines), and the persisted-products table (tab-separated).

The pipeline document mirrors in-process registration one-to-one, so a file
and the equivalent register_* calls produce identical PipelineSpecs. Unknown
keys anywhere are errors; strictness guards typos.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, Sequence

from .errors import DatamillError
from . import operators
from .executor import SourceEvent
from .graph import SourceDecl
from .hierarchy import JOB_CELL, CellId, HierarchySpec
from .pipeline import (
    Concurrency,
    ConfigMap,
    InputSpec,
    NodeKind,
    OperatorRef,
    OutputSpec,
    Pipeline,
    PipelineSpec,
    UNLIMITED,
)
from .store import DataProduct


class ParseError(DatamillError):
    def __init__(self, message: str, *, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(f"{message}{where}")


@dataclass(frozen=True)
class LoadedPipeline:
    spec: PipelineSpec
    sources: tuple[SourceDecl, ...]


def _check_keys(obj: Mapping[str, Any], allowed: set[str], required: set[str], ctx: str) -> None:
    if not isinstance(obj, Mapping):
        raise ParseError(f"{ctx}: expected an object, got {type(obj).__name__}")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ParseError(f"{ctx}: unknown key(s) {unknown}")
    missing = sorted(required - set(obj))
    if missing:
        raise ParseError(f"{ctx}: missing required key(s) {missing}")


def _interpolate(value: Any, config: ConfigMap, ctx: str) -> Any:
    """Replace {"$config": key[, "default": v]} markers with config values."""
    if isinstance(value, Mapping):
        if "$config" in value:
            _check_keys(value, {"$config", "default"}, {"$config"}, ctx)
            key = value["$config"]
            if "default" in value:
                return config.get(key, value["default"])
            if key not in config:
                raise ParseError(f"{ctx}: config key '{key}' is not set and has no default")
            return config[key]
        return {k: _interpolate(v, config, f"{ctx}.{k}") for k, v in value.items()}
    if isinstance(value, list):
        return [_interpolate(v, config, f"{ctx}[{i}]") for i, v in enumerate(value)]
    return value


def _parse_concurrency(raw: Any, ctx: str) -> Concurrency:
    if raw == "unlimited":
        return UNLIMITED
    if isinstance(raw, int) and not isinstance(raw, bool) and raw >= 1:
        return Concurrency.bounded(raw)
    raise ParseError(f"{ctx}: concurrency must be a positive integer or \"unlimited\"")


def _parse_operator(raw: Any, kind: NodeKind, ctx: str) -> OperatorRef:
    _check_keys(raw, {"name", "params"}, {"name"}, ctx)
    return operators.bind(raw["name"], raw.get("params"), kind)


def _parse_inputs(raw: Any, ctx: str) -> list[InputSpec]:
    if not isinstance(raw, list):
        raise ParseError(f"{ctx}: inputs must be a list")
    specs = []
    for i, item in enumerate(raw):
        _check_keys(item, {"label", "level"}, {"label", "level"}, f"{ctx}[{i}]")
        specs.append(InputSpec(item["label"], item["level"]))
    return specs


def _parse_outputs(raw: Any, ctx: str) -> list[OutputSpec]:
    if not isinstance(raw, list):
        raise ParseError(f"{ctx}: outputs must be a list")
    specs = []
    for i, item in enumerate(raw):
        _check_keys(item, {"label", "temporary"}, {"label"}, f"{ctx}[{i}]")
        specs.append(OutputSpec(item["label"], None, bool(item.get("temporary", False))))
    return specs


_NODE_KEYS = {"name", "kind", "operator", "inputs", "outputs", "concurrency"}
_KIND_KEYS = {
    NodeKind.TRANSFORM: (_NODE_KEYS, {"name", "kind", "operator", "inputs", "outputs"}),
    NodeKind.FILTER: (_NODE_KEYS, {"name", "kind", "operator", "inputs", "outputs"}),
    NodeKind.MONITOR: (
        _NODE_KEYS - {"outputs"},
        {"name", "kind", "operator", "inputs"},
    ),
    NodeKind.FOLD: (
        _NODE_KEYS | {"init", "fold_level"},
        {"name", "kind", "operator", "inputs", "outputs", "init", "fold_level"},
    ),
    NodeKind.UNFOLD: (
        _NODE_KEYS | {"child_level"},
        {"name", "kind", "operator", "inputs", "outputs", "child_level"},
    ),
}


def _register_node(pipeline: Pipeline, raw: Mapping[str, Any], config: ConfigMap, ctx: str) -> None:
    if not isinstance(raw, Mapping) or "kind" not in raw:
        raise ParseError(f"{ctx}: node records need a 'kind'")
    try:
        kind = NodeKind(raw["kind"])
    except ValueError:
        raise ParseError(f"{ctx}: unknown node kind {raw['kind']!r}") from None
    allowed, required = _KIND_KEYS[kind]
    _check_keys(raw, allowed, required, ctx)
    raw = _interpolate(raw, config, ctx)
    name = raw["name"]
    operator = _parse_operator(raw["operator"], kind, f"{ctx}.operator")
    inputs = _parse_inputs(raw["inputs"], f"{ctx}.inputs")
    concurrency = _parse_concurrency(raw.get("concurrency", "unlimited"), ctx)
    if kind is NodeKind.TRANSFORM:
        pipeline.register_transform(
            name, operator, inputs, _parse_outputs(raw["outputs"], f"{ctx}.outputs"), concurrency
        )
    elif kind is NodeKind.FILTER:
        pipeline.register_filter(
            name, operator, inputs, _parse_outputs(raw["outputs"], f"{ctx}.outputs"), concurrency
        )
    elif kind is NodeKind.MONITOR:
        pipeline.register_monitor(name, operator, inputs, concurrency)
    elif kind is NodeKind.FOLD:
        outputs = _parse_outputs(raw["outputs"], f"{ctx}.outputs")
        if len(outputs) != 1:
            raise ParseError(f"{ctx}: a fold declares exactly one output")
        pipeline.register_fold(
            name, operator, raw["init"], inputs, outputs[0], raw["fold_level"], concurrency
        )
    elif kind is NodeKind.UNFOLD:
        if len(inputs) != 1:
            raise ParseError(f"{ctx}: an unfold declares exactly one input")
        pipeline.register_unfold(
            name,
            operator,
            inputs[0],
            raw["child_level"],
            _parse_outputs(raw["outputs"], f"{ctx}.outputs"),
            concurrency,
        )


def parse_pipeline(text: str) -> LoadedPipeline:
    """Parse one pipeline description document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, column=exc.colno) from exc
    _check_keys(doc, {"hierarchy", "sources", "nodes", "config"}, {"hierarchy"}, "pipeline")

    config = ConfigMap(doc.get("config", {}))
    records = doc["hierarchy"]
    if not isinstance(records, list):
        raise ParseError("pipeline.hierarchy: expected a list of {level, parent} records")
    for i, rec in enumerate(records):
        _check_keys(rec, {"level", "parent"}, {"level", "parent"}, f"pipeline.hierarchy[{i}]")
    hierarchy = HierarchySpec.from_records(records)

    sources: list[SourceDecl] = []
    for i, rec in enumerate(doc.get("sources", [])):
        ctx = f"pipeline.sources[{i}]"
        _check_keys(rec, {"label", "level", "type", "persist"}, {"label", "level", "type"}, ctx)
        hierarchy.require_level(rec["level"])
        sources.append(
            SourceDecl(rec["label"], rec["level"], rec["type"], bool(rec.get("persist", True)))
        )

    pipeline = Pipeline(hierarchy, config)
    for i, rec in enumerate(doc.get("nodes", [])):
        _register_node(pipeline, rec, config, f"pipeline.nodes[{i}]")
    return LoadedPipeline(pipeline.spec(), tuple(sources))


def load_pipeline_file(path: str | Path) -> LoadedPipeline:
    return parse_pipeline(Path(path).read_text())


def serialize_pipeline(loaded: LoadedPipeline) -> str:
    """Canonical JSON for a pipeline whose operators come from the catalog.

    parse(serialize(x)) reproduces x exactly; in-process callables cannot be
    serialized and raise.
    """
    spec = loaded.spec
    doc: dict[str, Any] = {"hierarchy": spec.hierarchy.to_records()}
    doc["sources"] = [
        {"label": s.label, "level": s.level, "type": s.type_tag, "persist": s.persist}
        for s in loaded.sources
    ]
    nodes = []
    for node in spec.nodes:
        if not isinstance(node.operator, OperatorRef):
            raise DatamillError(
                f"node '{node.name}' uses an in-process callable and cannot be serialized"
            )
        rec: dict[str, Any] = {
            "name": node.name,
            "kind": node.kind.value,
            "operator": {"name": node.operator.name, "params": dict(node.operator.params)},
            "inputs": [{"label": i.label, "level": i.level} for i in node.inputs],
        }
        if node.kind is not NodeKind.MONITOR:
            rec["outputs"] = [
                {"label": o.label, "temporary": o.temporary} for o in node.outputs
            ]
        if node.kind is NodeKind.FOLD:
            rec["init"] = node.fold_init
            rec["fold_level"] = node.fold_level
        if node.kind is NodeKind.UNFOLD:
            rec["child_level"] = node.unfold_child_level
        limit = node.concurrency.limit
        rec["concurrency"] = "unlimited" if limit is None else limit
        nodes.append(rec)
    doc["nodes"] = nodes
    doc["config"] = dict(spec.config)
    return json.dumps(doc, indent=2) + "\n"


# -- dataset stream -----------------------------------------------------------


def parse_cellpath(hierarchy: HierarchySpec, text: str) -> CellId:
    """Parse a "/"-joined list of level:index segments below the implicit
    job root; the empty string names the job cell itself."""
    if text == "":
        return JOB_CELL
    segments: list[tuple[str, int]] = []
    for seg in text.split("/"):
        level, sep, idx = seg.rpartition(":")
        if not sep or not idx.isdigit():
            raise ParseError(f"bad cell segment '{seg}' (want level:index)")
        segments.append((level, int(idx)))
    return hierarchy.cell_from_segments(segments)


_DATASET_KEYS = {
    "begin": ({"begin"}, {"begin"}),
    "end": ({"end"}, {"end"}),
    "product": (
        {"product", "label", "type", "value"},
        {"product", "label", "type", "value"},
    ),
}


def parse_dataset_line(hierarchy: HierarchySpec, line: str, lineno: int) -> SourceEvent:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=lineno, column=exc.colno) from exc
    if not isinstance(rec, Mapping):
        raise ParseError("dataset records must be objects", line=lineno)
    kinds = [k for k in ("begin", "end", "product") if k in rec]
    if len(kinds) != 1:
        raise ParseError(
            "each dataset record is exactly one of begin/end/product", line=lineno
        )
    kind = kinds[0]
    allowed, required = _DATASET_KEYS[kind]
    try:
        _check_keys(rec, allowed, required, "record")
        cell = parse_cellpath(hierarchy, rec[kind])
    except ParseError as exc:
        if exc.line is None:
            raise ParseError(str(exc), line=lineno) from exc
        raise
    except DatamillError as exc:
        raise ParseError(str(exc), line=lineno) from exc
    if kind == "begin":
        return SourceEvent.begin(cell)
    if kind == "end":
        return SourceEvent.end(cell)
    return SourceEvent.product(cell, rec["label"], rec["type"], rec["value"])


def load_dataset(path: str | Path, hierarchy: HierarchySpec) -> Iterator[SourceEvent]:
    """Stream dataset records lazily so large files never load whole."""
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            yield parse_dataset_line(hierarchy, line, lineno)


# -- persisted products -------------------------------------------------------


def render_products(products: Iterable[DataProduct]) -> str:
    """Canonical product table: sorted by cell path then label, one record
    per line, so outputs are byte-comparable across pool widths."""
    lines = ["cell\tlabel\ttype\tvalue"]
    ordered = sorted(products, key=lambda p: (p.cell.path, p.label))
    for p in ordered:
        value = json.dumps(p.value, separators=(",", ":"), sort_keys=True)
        lines.append(f"{p.cell.render()}\t{p.label}\t{p.type_tag}\t{value}")
    return "\n".join(lines) + "\n"


def write_products_file(products: Sequence[DataProduct], path: str | Path) -> None:
    Path(path).write_text(render_products(products))
