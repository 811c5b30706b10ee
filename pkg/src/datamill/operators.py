"""Built-in operator catalog for file-driven pipelines.

Each entry interprets scalar or list payloads itself; the engine stays
payload-opaque. Entries know which node kinds they fit, validate their
parameters, check input type tags, and deduce output tags from input tags
(mirroring compile-time type deduction in statically typed hosts).

Library embedders bypass the catalog entirely and register arbitrary
callables with explicit tags.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

from .errors import DatamillError
from .pipeline import NodeKind, OperatorRef

NUMERIC_TAGS = ("int", "float")


class CatalogError(DatamillError):
    pass


@dataclass(frozen=True)
class CatalogEntry:
    """One named operator: kind compatibility, parameter schema, payload
    semantics. ``inputs`` is the number of node inputs it consumes (None for
    any); fold entries receive the accumulator as an extra first argument."""

    name: str
    kinds: tuple[NodeKind, ...]
    inputs: int | None
    make: Callable[[Mapping[str, Any]], Callable[..., Any]]
    params: Mapping[str, Any] = field(default_factory=dict)
    required: tuple[str, ...] = ()
    input_tags: Callable[[Sequence[str]], str | None] | None = None
    output_tags: Callable[[Sequence[str]], list[str]] | None = None


def _numeric_inputs(tags: Sequence[str]) -> str | None:
    bad = [t for t in tags if t not in NUMERIC_TAGS]
    if bad:
        return f"expects numeric inputs, got {bad}"
    return None


def _int_inputs(tags: Sequence[str]) -> str | None:
    bad = [t for t in tags if t != "int"]
    if bad:
        return f"expects int inputs, got {bad}"
    return None


def _first_tag(tags: Sequence[str]) -> list[str]:
    return [tags[0]]


def _list_element(tags: Sequence[str]) -> str | None:
    if not tags[0].endswith("_list"):
        return f"expects a *_list input, got '{tags[0]}'"
    return None


def _make_parity(p: Mapping[str, Any]) -> Callable[[int], bool]:
    keep = p.get("keep", "even")
    if keep not in ("even", "odd"):
        raise CatalogError(f"parity 'keep' must be 'even' or 'odd', got {keep!r}")
    want = 0 if keep == "even" else 1
    return lambda x: x % 2 == want


def _countdown_step(state: int) -> tuple[int, int] | None:
    if state <= 0:
        return None
    return state, state - 1


def _split_step(state: list) -> tuple[Any, list] | None:
    if not state:
        return None
    return state[0], state[1:]


_CATALOG: dict[str, CatalogEntry] = {
    e.name: e
    for e in (
        CatalogEntry(
            name="add_const",
            kinds=(NodeKind.TRANSFORM,),
            inputs=1,
            params={"value": (int, float)},
            required=("value",),
            make=lambda p: lambda x: x + p["value"],
            input_tags=_numeric_inputs,
            output_tags=_first_tag,
        ),
        CatalogEntry(
            name="scale",
            kinds=(NodeKind.TRANSFORM,),
            inputs=1,
            params={"factor": (int, float)},
            required=("factor",),
            make=lambda p: lambda x: x * p["factor"],
            input_tags=_numeric_inputs,
            output_tags=_first_tag,
        ),
        CatalogEntry(
            name="add_inputs",
            kinds=(NodeKind.TRANSFORM,),
            inputs=None,
            make=lambda p: lambda *xs: sum(xs),
            input_tags=_numeric_inputs,
            output_tags=_first_tag,
        ),
        CatalogEntry(
            name="threshold",
            kinds=(NodeKind.FILTER,),
            inputs=1,
            params={"min": (int, float)},
            required=("min",),
            make=lambda p: lambda x: bool(x >= p["min"]),
            input_tags=_numeric_inputs,
        ),
        CatalogEntry(
            name="parity",
            kinds=(NodeKind.FILTER,),
            inputs=1,
            params={"keep": str},
            make=_make_parity,
            input_tags=_int_inputs,
        ),
        CatalogEntry(
            name="record_count",
            kinds=(NodeKind.MONITOR,),
            inputs=None,
            make=lambda p: lambda *xs: None,
        ),
        # Fold operators must be associative and commutative so results do
        # not depend on arrival order under concurrency.
        CatalogEntry(
            name="sum",
            kinds=(NodeKind.FOLD,),
            inputs=1,
            make=lambda p: lambda acc, x: acc + x,
            input_tags=_numeric_inputs,
            output_tags=_first_tag,
        ),
        CatalogEntry(
            name="count",
            kinds=(NodeKind.FOLD,),
            inputs=None,
            make=lambda p: lambda acc, *xs: acc + 1,
            output_tags=lambda tags: ["int"],
        ),
        CatalogEntry(
            name="weighted_sum_pair",
            kinds=(NodeKind.FOLD,),
            inputs=2,
            make=lambda p: lambda acc, a, b: acc + a * b,
            input_tags=_numeric_inputs,
            output_tags=_first_tag,
        ),
        CatalogEntry(
            name="range_countdown",
            kinds=(NodeKind.UNFOLD,),
            inputs=1,
            make=lambda p: _countdown_step,
            input_tags=_int_inputs,
            output_tags=lambda tags: ["int"],
        ),
        CatalogEntry(
            name="list_splitter",
            kinds=(NodeKind.UNFOLD,),
            inputs=1,
            make=lambda p: _split_step,
            input_tags=_list_element,
            output_tags=lambda tags: [tags[0].removesuffix("_list")],
        ),
    )
}


def catalog_names() -> tuple[str, ...]:
    return tuple(sorted(_CATALOG))


def bind(name: str, params: Mapping[str, Any] | None, kind: NodeKind) -> OperatorRef:
    """Build a comparable, callable operator from a catalog entry.

    Raises CatalogError for unknown names, kind mismatches, or bad
    parameters (unknown keys, wrong types, missing required ones).
    """
    entry = _CATALOG.get(name)
    if entry is None:
        raise CatalogError(f"unknown operator '{name}' (have: {', '.join(catalog_names())})")
    if kind not in entry.kinds:
        allowed = ", ".join(k.value for k in entry.kinds)
        raise CatalogError(f"operator '{name}' fits kind {allowed}, not '{kind.value}'")
    params = dict(params or {})
    for key, value in params.items():
        if key not in entry.params:
            raise CatalogError(f"operator '{name}' has no parameter '{key}'")
        want = entry.params[key]
        if not isinstance(value, want) or isinstance(value, bool):
            raise CatalogError(f"parameter '{key}' of '{name}' must be {want}, got {value!r}")
    for key in entry.required:
        if key not in params:
            raise CatalogError(f"operator '{name}' requires parameter '{key}'")
    fn = entry.make(params)

    base_check = entry.input_tags
    expected = entry.inputs
    if expected is None:
        checker = base_check
    else:

        def checker(tags: Sequence[str]) -> str | None:
            if len(tags) != expected:
                return f"operator '{name}' consumes {expected} input(s), got {len(tags)}"
            return base_check(tags) if base_check else None

    return OperatorRef(
        name=name,
        params=tuple(sorted(params.items())),
        fn=fn,
        deduce_output_tags=entry.output_tags,
        check_input_tags=checker,
    )
