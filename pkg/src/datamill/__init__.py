"""datamill: a concurrent dataflow engine over hierarchical data domains.

User-defined pure operators are registered declaratively as one of five
patterns (transform, filter, monitor, fold, unfold) over labeled data
products; the engine derives the dependency graph, streams a dataset through
it with a worker pool, and reports a hierarchy summary at the end.
"""

from .errors import DatamillError
from .executor import (
    CollectingSink,
    ExecutionReport,
    FoldState,
    Invocation,
    MalformedSource,
    MissingInput,
    OperatorFailure,
    RunawayUnfold,
    SourceEvent,
    WorkerPool,
    resolve_inputs,
    run,
)
from .graph import (
    AmbiguousDrivingLevel,
    GraphValidationFailure,
    PipelineGraph,
    SourceDecl,
    ValidationError,
    ValidationKind,
    build_graph,
    check_level_compatibility,
    driving_level,
    export_dot,
)
from .hierarchy import (
    JOB_CELL,
    JOB_LEVEL,
    CellId,
    DataCell,
    HierarchySpec,
    HierarchySummary,
    LifecycleEvent,
    SummaryCollector,
    define_hierarchy,
    summarize,
)
from .pipeline import (
    Concurrency,
    ConfigMap,
    InputSpec,
    NodeKind,
    NodeSpec,
    OperatorRef,
    OutputSpec,
    Pipeline,
    PipelineSpec,
    UNLIMITED,
    config_get,
)
from .store import DataProduct, ProductStore

__version__ = "0.1.0"

__all__ = [
    "AmbiguousDrivingLevel",
    "CellId",
    "CollectingSink",
    "Concurrency",
    "ConfigMap",
    "DataCell",
    "DataProduct",
    "DatamillError",
    "ExecutionReport",
    "FoldState",
    "GraphValidationFailure",
    "HierarchySpec",
    "HierarchySummary",
    "InputSpec",
    "Invocation",
    "JOB_CELL",
    "JOB_LEVEL",
    "LifecycleEvent",
    "MalformedSource",
    "MissingInput",
    "NodeKind",
    "NodeSpec",
    "OperatorFailure",
    "OperatorRef",
    "OutputSpec",
    "Pipeline",
    "PipelineGraph",
    "PipelineSpec",
    "ProductStore",
    "RunawayUnfold",
    "SourceDecl",
    "SourceEvent",
    "SummaryCollector",
    "UNLIMITED",
    "ValidationError",
    "ValidationKind",
    "WorkerPool",
    "build_graph",
    "check_level_compatibility",
    "config_get",
    "define_hierarchy",
    "driving_level",
    "export_dot",
    "resolve_inputs",
    "run",
    "summarize",
]
