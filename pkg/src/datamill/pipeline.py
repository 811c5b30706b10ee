"""Declarative registration of processing nodes.

Each node applies one of five patterns (transform, filter, monitor, fold,
unfold) to labeled product sequences. Registration happens single-threaded at
setup time; the resulting :class:`PipelineSpec` is immutable and ready for
graph validation.
"""

from __future__ import annotations

import enum
import inspect
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator, Mapping, Sequence

from .errors import DatamillError
from .hierarchy import HierarchySpec, LevelName
from .store import ProductLabel, TypeTag


class RegistrationError(DatamillError):
    pass


class DuplicateNodeName(RegistrationError):
    pass


class DuplicateOutputLabel(RegistrationError):
    pass


class ArityMismatch(RegistrationError):
    pass


class LevelNotAncestor(RegistrationError):
    pass


class LevelNotChild(RegistrationError):
    pass


class TypeMismatch(DatamillError):
    pass


class NodeKind(enum.Enum):
    TRANSFORM = "transform"
    FILTER = "filter"
    MONITOR = "monitor"
    FOLD = "fold"
    UNFOLD = "unfold"


@dataclass(frozen=True)
class Concurrency:
    """Per-node cap on simultaneous invocations; None means unlimited
    (the cap then equals the worker-pool width)."""

    limit: int | None = None

    def __post_init__(self) -> None:
        if self.limit is not None and self.limit < 1:
            raise ValueError("concurrency limit must be a positive integer")

    @classmethod
    def bounded(cls, n: int) -> Concurrency:
        return cls(n)

    def cap(self, pool_width: int) -> int:
        return pool_width if self.limit is None else self.limit


UNLIMITED = Concurrency(None)


@dataclass(frozen=True)
class InputSpec:
    """One consumed label with the domain level it is read at.

    ``type_tag`` may be None, meaning "adopt the producer's tag"; explicit
    tags are checked against the producer at graph-validation time.
    """

    label: ProductLabel
    level: LevelName
    type_tag: TypeTag | None = None


@dataclass(frozen=True)
class OutputSpec:
    """One produced label. ``type_tag`` None is allowed only for operators
    that can deduce their output tags (catalog entries)."""

    label: ProductLabel
    type_tag: TypeTag | None = None
    temporary: bool = False


@dataclass(frozen=True)
class OperatorRef:
    """A catalog-bound operator: comparable by (name, params), callable via
    ``fn``. Optional hooks let the graph deduce and check type tags."""

    name: str
    params: tuple[tuple[str, Any], ...]
    fn: Callable[..., Any] = field(compare=False)
    deduce_output_tags: Callable[[Sequence[TypeTag]], list[TypeTag]] | None = field(
        default=None, compare=False
    )
    check_input_tags: Callable[[Sequence[TypeTag]], str | None] | None = field(
        default=None, compare=False
    )

    def __call__(self, *args: Any) -> Any:
        return self.fn(*args)


@dataclass(frozen=True)
class NodeSpec:
    name: str
    kind: NodeKind
    operator: Any
    inputs: tuple[InputSpec, ...]
    outputs: tuple[OutputSpec, ...]
    concurrency: Concurrency = UNLIMITED
    fold_init: Any = None
    fold_level: LevelName | None = None
    unfold_child_level: LevelName | None = None

    def apply(self, *args: Any) -> Any:
        return self.operator(*args)


class ConfigMap(Mapping):
    """Read-only string-keyed configuration available at registration time."""

    def __init__(self, values: Mapping[str, Any] | None = None) -> None:
        self._values = dict(values or {})

    def __getitem__(self, key: str) -> Any:
        return self._values[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self._values)

    def __len__(self) -> int:
        return len(self._values)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, ConfigMap):
            return self._values == other._values
        return NotImplemented

    def get(self, key: str, default: Any = None) -> Any:
        """Configured value or ``default``, type-checked against the default.

        Ints are accepted where the default is a float; bool never matches a
        numeric default.
        """
        if key not in self._values:
            return default
        value = self._values[key]
        if default is None:
            return value
        want = type(default)
        ok = isinstance(value, want) and not (isinstance(value, bool) and want is not bool)
        if want is float and isinstance(value, int) and not isinstance(value, bool):
            ok = True
        if not ok:
            raise TypeMismatch(
                f"config key '{key}' has {type(value).__name__} value, expected {want.__name__}"
            )
        return value


def config_get(config: ConfigMap, key: str, default: Any = None) -> Any:
    return config.get(key, default)


@dataclass(frozen=True)
class PipelineSpec:
    """Immutable snapshot of a completed registration phase."""

    hierarchy: HierarchySpec
    nodes: tuple[NodeSpec, ...]
    config: ConfigMap


def _operator_arity(operator: Any) -> int | None:
    fn = operator.fn if isinstance(operator, OperatorRef) else operator
    try:
        sig = inspect.signature(fn)
    except (TypeError, ValueError):
        return None
    count = 0
    for p in sig.parameters.values():
        if p.kind in (p.POSITIONAL_ONLY, p.POSITIONAL_OR_KEYWORD):
            count += 1
        elif p.kind == p.VAR_POSITIONAL:
            return None  # *args accepts anything
    return count


class Pipeline:
    """Registration surface for one processing job.

    Typical use::

        p = Pipeline(hierarchy)
        p.register_transform("make_tracks", make_tracks,
                             inputs=[InputSpec("GoodHits", "event", "hits")],
                             outputs=[OutputSpec("GoodTracks", "tracks")])
        spec = p.spec()
    """

    def __init__(self, hierarchy: HierarchySpec, config: Mapping[str, Any] | None = None) -> None:
        self.hierarchy = hierarchy
        self.config = config if isinstance(config, ConfigMap) else ConfigMap(config)
        self._nodes: list[NodeSpec] = []
        self._names: set[str] = set()
        self._output_labels: set[ProductLabel] = set()

    # -- shared checks ----------------------------------------------------

    def _check_common(
        self,
        name: str,
        operator: Any,
        inputs: Sequence[InputSpec],
        outputs: Sequence[OutputSpec],
        arity: int | None,
    ) -> None:
        if not name:
            raise RegistrationError("node name must be a non-empty string")
        if name in self._names:
            raise DuplicateNodeName(f"node '{name}' registered twice")
        if not inputs:
            raise RegistrationError(f"node '{name}' must declare at least one input")
        for spec in inputs:
            self.hierarchy.require_level(spec.level)
        for out in outputs:
            if out.label in self._output_labels:
                raise DuplicateOutputLabel(
                    f"label '{out.label}' already produced by another node"
                )
            if out.type_tag is None and not isinstance(operator, OperatorRef):
                raise RegistrationError(
                    f"output '{out.label}' of node '{name}' needs an explicit type tag"
                )
        seen = set()
        for out in outputs:
            if out.label in seen:
                raise DuplicateOutputLabel(f"node '{name}' declares '{out.label}' twice")
            seen.add(out.label)
        declared = _operator_arity(operator)
        if arity is not None and declared is not None and declared != arity:
            raise ArityMismatch(
                f"operator of node '{name}' takes {declared} argument(s), expected {arity}"
            )

    def _add(self, node: NodeSpec) -> NodeSpec:
        self._nodes.append(node)
        self._names.add(node.name)
        self._output_labels.update(o.label for o in node.outputs)
        return node

    # -- registration entry points ----------------------------------------

    def register_transform(
        self,
        name: str,
        operator: Any,
        inputs: Sequence[InputSpec],
        outputs: Sequence[OutputSpec],
        concurrency: Concurrency = UNLIMITED,
    ) -> NodeSpec:
        """One output set per driving cell; sequence length is preserved."""
        inputs = tuple(inputs)
        outputs = tuple(outputs)
        if not outputs:
            raise RegistrationError(f"transform '{name}' needs at least one output")
        self._check_common(name, operator, inputs, outputs, arity=len(inputs))
        return self._add(NodeSpec(name, NodeKind.TRANSFORM, operator, inputs, outputs, concurrency))

    def register_filter(
        self,
        name: str,
        predicate: Any,
        inputs: Sequence[InputSpec],
        pass_labels: Sequence[ProductLabel | OutputSpec],
        concurrency: Concurrency = UNLIMITED,
    ) -> NodeSpec:
        """Boolean gate: accepted elements re-emit every input verbatim under
        the corresponding pass label; rejected elements emit nothing."""
        inputs = tuple(inputs)
        if len(pass_labels) != len(inputs):
            raise RegistrationError(
                f"filter '{name}' needs one pass label per input "
                f"({len(pass_labels)} for {len(inputs)})"
            )
        outputs = tuple(
            p if isinstance(p, OutputSpec) else OutputSpec(p, inputs[i].type_tag)
            for i, p in enumerate(pass_labels)
        )
        self._check_common(name, predicate, inputs, outputs, arity=len(inputs))
        return self._add(NodeSpec(name, NodeKind.FILTER, predicate, inputs, outputs, concurrency))

    def register_monitor(
        self,
        name: str,
        operator: Any,
        inputs: Sequence[InputSpec],
        concurrency: Concurrency = UNLIMITED,
    ) -> NodeSpec:
        """Absorbs its inputs; produces nothing."""
        inputs = tuple(inputs)
        self._check_common(name, operator, inputs, (), arity=len(inputs))
        return self._add(NodeSpec(name, NodeKind.MONITOR, operator, inputs, (), concurrency))

    def register_fold(
        self,
        name: str,
        operator: Any,
        init: Any,
        inputs: Sequence[InputSpec],
        output: OutputSpec,
        fold_level: LevelName,
        concurrency: Concurrency = UNLIMITED,
    ) -> NodeSpec:
        """Aggregates child-level products into one product per ``fold_level``
        cell; ``init`` seeds the accumulator (and is the result when a cell
        has no contributing children).

        The operator receives (accumulator, *input values) and returns the new
        accumulator. For results independent of arrival order it must be
        associative and commutative.
        """
        inputs = tuple(inputs)
        self.hierarchy.require_level(fold_level)
        self._check_common(name, operator, inputs, (output,), arity=len(inputs) + 1)
        for spec in inputs:
            if not self.hierarchy.is_ancestor(fold_level, spec.level, proper=True):
                raise LevelNotAncestor(
                    f"fold '{name}': level '{fold_level}' is not a proper ancestor "
                    f"of input level '{spec.level}'"
                )
        return self._add(
            NodeSpec(
                name,
                NodeKind.FOLD,
                operator,
                inputs,
                (output,),
                concurrency,
                fold_init=init,
                fold_level=fold_level,
            )
        )

    def register_unfold(
        self,
        name: str,
        operator: Any,
        input: InputSpec,
        child_level: LevelName,
        outputs: Sequence[OutputSpec],
        concurrency: Concurrency = UNLIMITED,
    ) -> NodeSpec:
        """Generates child cells from one parent product.

        The operator maps a state to None (stop) or to (value, next state);
        each step creates the next child cell (indices 0, 1, 2, ...) carrying
        the emitted value under the declared output labels.
        """
        outputs = tuple(outputs)
        if not outputs:
            raise RegistrationError(f"unfold '{name}' needs at least one output")
        self.hierarchy.require_level(child_level)
        self._check_common(name, operator, (input,), outputs, arity=1)
        if self.hierarchy.parent_of.get(child_level) != input.level:
            raise LevelNotChild(
                f"unfold '{name}': '{child_level}' is not a child level of '{input.level}'"
            )
        return self._add(
            NodeSpec(
                name,
                NodeKind.UNFOLD,
                operator,
                (input,),
                outputs,
                concurrency,
                unfold_child_level=child_level,
            )
        )

    def spec(self) -> PipelineSpec:
        return PipelineSpec(self.hierarchy, tuple(self._nodes), self.config)
