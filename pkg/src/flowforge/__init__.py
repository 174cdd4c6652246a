"""flowforge: design-flow orchestration and constrained design-space exploration.

The package is organized around a shared blackboard (the meta-model)
that pipe tasks read and write while a scheduler moves it through a
cyclic task graph. Inner optimization tasks (pruning, scaling,
quantization) search their own tolerance-bounded subproblems; an outer
constrained Bayesian-optimization loop searches tolerance vectors and
task orderings, aggregating results by Pareto dominance.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    ExecutionError,
    FlowforgeError,
    GraphError,
    RegistryError,
)
from .metamodel import ConfigStore, ExecutionLog, MetaModel, ModelEntry, ModelSpace
from .netmodel import (
    Benchmark,
    DeviceProfile,
    EvaluationBackend,
    Fixed,
    KernelDescriptor,
    Layer,
    Metrics,
    NetworkDescriptor,
    SyntheticBackend,
    VirtualLayer,
    build_virtual_layers,
    lossless_integer_bits,
)
from .otasks import PruneResult, QhsResult, ScaleResult, auto_prune, auto_scale, qhs
from .ktasks import (
    ActionSpec,
    FlowOutput,
    PredicateSpec,
    ReduceSpec,
    branch_decide,
    reduce_apply,
    stop_extract,
)
from .flowgraph import (
    Edge,
    FlowBuilder,
    FlowGraph,
    FlowResult,
    TaskDecl,
    TaskKind,
    run,
    validate,
)
from .pareto import ObjectivePoint, dominates, frontier, hypervolume_2d
from .dse import (
    Candidate,
    DseConfig,
    DseResult,
    FlowTemplate,
    GpModel,
    GridSpec,
    Ordering,
    Theta,
    ThetaBounds,
    expected_improvement,
    gp_fit,
    gp_predict,
    grid_search,
    propose,
    run_dse,
    stochastic_grid_search,
)
