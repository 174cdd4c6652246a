"""Control-flow pipe tasks: BRANCH, REDUCE and STOP behaviors.

Predicates, actions and reducers are referenced from flow files by name
and resolved against in-process registries, so a flow definition stays
declarative and serializable: a spec is a registered identifier plus a
map of numeric parameters. New behaviors are added by registering a
function at import time; flow files cannot embed code.

BRANCH evaluates a predicate against the meta-model and picks output
port 0 (true) or 1 (false); when the predicate holds and an action is
declared, the action mutates configuration keys before the token moves
on — this is how late-stage feedback (an overmapped device) relaxes
early-stage tolerances. REDUCE consolidates the meta-models of parallel
strategy paths, by Pareto dominance or by best scalar score. STOP
extracts the final output.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

from . import pareto
from .errors import ExecutionError, RegistryError
from .metamodel import MetaModel, ModelEntry, STAGE_RANK
from .netmodel import Metrics, metric_value


@dataclass(frozen=True)
class PredicateSpec:
    name: str
    params: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class ActionSpec:
    name: str
    params: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class ReduceSpec:
    name: str
    objectives: tuple[tuple[str, str], ...] = ()
    params: dict[str, float] = field(default_factory=dict)


PredicateFn = Callable[[MetaModel, Mapping[str, float], str], bool]
ActionFn = Callable[[MetaModel, Mapping[str, float]], list[str]]
ReduceFn = Callable[[Sequence[MetaModel], ReduceSpec], MetaModel]

_PREDICATES: dict[str, PredicateFn] = {}
_ACTIONS: dict[str, ActionFn] = {}
_REDUCERS: dict[str, ReduceFn] = {}


def register_predicate(name: str):
    def wrap(fn: PredicateFn) -> PredicateFn:
        _PREDICATES[name] = fn
        return fn

    return wrap


def register_action(name: str):
    def wrap(fn: ActionFn) -> ActionFn:
        _ACTIONS[name] = fn
        return fn

    return wrap


def register_reducer(name: str):
    def wrap(fn: ReduceFn) -> ReduceFn:
        _REDUCERS[name] = fn
        return fn

    return wrap


def predicate_names() -> list[str]:
    return sorted(_PREDICATES)


def action_names() -> list[str]:
    return sorted(_ACTIONS)


def reducer_names() -> list[str]:
    return sorted(_REDUCERS)


def _latest_metrics(mm: MetaModel, stage: str | None = None) -> Metrics:
    for entry in reversed(mm.space.entries):
        if entry.metrics is not None and (stage is None or entry.stage == stage):
            return entry.metrics
    where = f" at stage {stage}" if stage else ""
    raise ExecutionError(f"predicate needs metrics{where}, but none are recorded")


# -- built-in predicates ------------------------------------------------------


@register_predicate("overmapped")
def _overmapped(mm: MetaModel, params: Mapping[str, float], instance: str) -> bool:
    """True when any resource utilization of the latest kernel exceeds u_max."""
    u_max = float(params.get("u_max", 1.0))
    return _latest_metrics(mm, "kernel").max_utilization() > u_max


@register_predicate("acc_loss_exceeds")
def _acc_loss_exceeds(mm: MetaModel, params: Mapping[str, float], instance: str) -> bool:
    limit = float(params.get("limit", 0.0))
    return _latest_metrics(mm).accuracy_loss > limit


@register_predicate("always_true")
def _always_true(mm: MetaModel, params: Mapping[str, float], instance: str) -> bool:
    return True


@register_predicate("always_false")
def _always_false(mm: MetaModel, params: Mapping[str, float], instance: str) -> bool:
    return False


@register_predicate("loop_count_below")
def _loop_count_below(mm: MetaModel, params: Mapping[str, float], instance: str) -> bool:
    """True while this branch instance has taken fewer than `limit` decisions."""
    limit = int(params.get("limit", 1))
    return mm.log.count(task=instance, event="branched") < limit


# -- built-in actions ---------------------------------------------------------

_TOLERANCE_KEYS = {
    "p": "Pruning::tolerate_acc_loss",
    "s": "Scaling::tolerate_acc_loss",
    "q": "Quantization::tolerate_acc_loss",
}


@register_action("relax_tolerances")
def _relax_tolerances(mm: MetaModel, params: Mapping[str, float]) -> list[str]:
    """Raise every defined accuracy-loss tolerance by a step, up to a cap.

    `delta` and `cap` apply uniformly; `delta_p`/`delta_s`/`delta_q` and
    `cap_p`/`cap_s`/`cap_q` override per tolerance. Only keys already
    present in the configuration are touched, so a flow without a scaling
    task never grows a scaling tolerance.
    """
    delta = float(params.get("delta", 0.01))
    cap = float(params.get("cap", 1.0))
    changed = []
    for suffix, key in _TOLERANCE_KEYS.items():
        if key not in mm.cfg:
            continue
        step = float(params.get(f"delta_{suffix}", delta))
        limit = float(params.get(f"cap_{suffix}", cap))
        current = float(mm.cfg.get(key))
        if limit < current:
            raise ExecutionError(
                f"relax_tolerances cap {limit} is below current {key}={current}"
            )
        updated = min(current + step, limit)
        if updated != current:
            mm.cfg.set(key, updated)
            changed.append(key)
    return changed


# -- k-task operations --------------------------------------------------------


def branch_decide(
    mm: MetaModel,
    predicate: PredicateSpec,
    action: ActionSpec | None = None,
    instance: str = "branch",
) -> tuple[int, MetaModel]:
    """Evaluate the predicate; port 0 on true (applying the action), 1 on false.

    Mutates only the configuration keys named by the action and appends
    exactly one `branched` log record; the model space is untouched.
    """
    fn = _PREDICATES.get(predicate.name)
    if fn is None:
        raise RegistryError(f"unknown predicate {predicate.name!r}")
    action_fn = None
    if action is not None:
        action_fn = _ACTIONS.get(action.name)
        if action_fn is None:
            raise RegistryError(f"unknown action {action.name!r}")

    result = bool(fn(mm, predicate.params, instance))
    port = 0 if result else 1
    detail = f"predicate {predicate.name} -> {result}, port {port}"
    if result and action_fn is not None:
        changed = action_fn(mm, action.params)
        if changed:
            detail += f"; action {action.name} changed {', '.join(changed)}"
    mm.log.append(instance, "branched", detail)
    return port, mm


def _final_design(mm: MetaModel) -> ModelEntry | None:
    """The path's final design: the latest model entry carrying metrics."""
    for entry in reversed(mm.space.entries):
        if entry.metrics is not None:
            return entry
    return None


def _objective_point(
    entry: ModelEntry, objectives: Sequence[tuple[str, str]], payload: Any
) -> pareto.ObjectivePoint:
    values = tuple(metric_value(entry.metrics, name) for name, _ in objectives)
    directions = tuple(direction for _, direction in objectives)
    return pareto.ObjectivePoint(values=values, directions=directions, payload=payload)


def reduce_apply(inputs: Sequence[MetaModel], spec: ReduceSpec) -> MetaModel:
    """Consolidate parallel strategy paths into one meta-model.

    Each input contributes one candidate: its final design (the latest
    model entry carrying metrics). `pareto` keeps the non-dominated
    candidates across all inputs; `best_score` keeps the single best
    candidate under an equal-weight scalarization of the normalized
    objectives. The output takes its configuration from the first input
    and concatenates the inputs' logs in order.
    """
    fn = _REDUCERS.get(spec.name)
    if fn is None:
        raise RegistryError(f"unknown reducer {spec.name!r}")
    inputs = list(inputs)
    if not inputs:
        raise ExecutionError("reduce received no inputs")
    if not spec.objectives:
        raise ExecutionError(f"reducer {spec.name!r} needs at least one objective")
    for name, direction in spec.objectives:
        if direction not in ("min", "max"):
            raise ExecutionError(f"objective {name!r} has bad direction {direction!r}")
    return fn(inputs, spec)


def _merged_shell(inputs: Sequence[MetaModel]) -> MetaModel:
    out = MetaModel(inputs[0].cfg.__class__.from_dict(inputs[0].cfg.as_dict()))
    for mm in inputs:
        out.log.extend_from(mm.log)
    return out


def _gather_candidates(
    inputs: Sequence[MetaModel], spec: ReduceSpec
) -> list[pareto.ObjectivePoint]:
    points = []
    for mm_index, mm in enumerate(inputs):
        entry = _final_design(mm)
        if entry is None:
            raise ExecutionError(f"reduce input {mm_index} carries no entry with metrics")
        points.append(_objective_point(entry, spec.objectives, (mm_index, entry)))
    return points


@register_reducer("pareto")
def _reduce_pareto(inputs: Sequence[MetaModel], spec: ReduceSpec) -> MetaModel:
    points = _gather_candidates(inputs, spec)
    survivors = pareto.frontier(points)
    out = _merged_shell(inputs)
    for point in survivors:
        _, entry = point.payload
        out.space.put(entry.stage, entry.payload, entry.metrics, entry.producer)
    return out


@register_reducer("best_score")
def _reduce_best_score(inputs: Sequence[MetaModel], spec: ReduceSpec) -> MetaModel:
    points = _gather_candidates(inputs, spec)
    columns = list(zip(*(p.values for p in points)))
    spans = []
    for values in columns:
        lo, hi = min(values), max(values)
        spans.append((lo, hi - lo))
    best_index = 0
    best_score = float("-inf")
    for i, point in enumerate(points):
        score = 0.0
        for value, (lo, span), (_, direction) in zip(point.values, spans, spec.objectives):
            normalized = 0.5 if span == 0 else (value - lo) / span
            score += normalized if direction == "max" else (1.0 - normalized)
        if score > best_score:
            best_index, best_score = i, score
    _, entry = points[best_index].payload
    out = _merged_shell(inputs)
    out.space.put(entry.stage, entry.payload, entry.metrics, entry.producer)
    return out


@dataclass
class FlowOutput:
    """What STOP hands back: the most refined model plus the full meta-model."""

    selected: ModelEntry
    metrics: Metrics | None
    metamodel: MetaModel


def stop_extract(mm: MetaModel) -> FlowOutput:
    """Latest entry of the most refined stage present; errors when empty."""
    entries = mm.space.entries
    if not entries:
        raise ExecutionError("nothing to extract: model space is empty")
    best_stage = max(STAGE_RANK[e.stage] for e in entries)
    selected = next(
        e for e in reversed(entries) if STAGE_RANK[e.stage] == best_stage
    )
    return FlowOutput(selected=selected, metrics=selected.metrics, metamodel=mm)
