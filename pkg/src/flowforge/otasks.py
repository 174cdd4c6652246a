"""Inner optimization tasks: auto-pruning, auto-scaling and bit-width search.

Each task is a self-contained search under an accuracy-loss tolerance,
measured relative to the accuracy it observes at its own starting point
(rate 0, factor 1, or the post-lossless-reduction kernel). The flow-level
wrappers read every parameter from the meta-model configuration, run the
search, and record exactly one new model entry per invocation.

* auto_prune: binary search for the largest pruning rate whose loss stays
  within tolerance; rate 0 anchors the feasible bracket, so the search
  needs at most 1 + ceil(log2(1/rate_threshold)) evaluations.
* auto_scale: walks a geometric schedule (1, step, step^2, ...) until the
  loss exceeds tolerance or the trial budget runs out, returning the last
  feasible factor.
* qhs: quantization heuristic search. First minimizes integer bits from
  observed weight magnitudes (lossless), then repeatedly removes one bit
  from every still-reducible precision; on a violation it rolls back and
  probes each precision alone, blocking the sensitive ones, until nothing
  reducible remains.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError, ExecutionError
from .metamodel import MetaModel
from .netmodel import (
    PRECISION_KINDS,
    EvaluationBackend,
    Fixed,
    KernelDescriptor,
    Metrics,
    NetworkDescriptor,
    lossless_integer_bits,
    make_kernel,
    resolve_clock_period,
    resolve_default_precision,
    resolve_device_name,
)


@dataclass(frozen=True)
class Probe:
    """One evaluated point of an inner search."""

    value: float  # pruning rate or scale factor
    accuracy: float
    feasible: bool


@dataclass
class PruneResult:
    rate: float
    accuracy: float
    trace: list[Probe]
    metrics: Metrics
    evaluations: int


@dataclass
class ScaleResult:
    factor: float
    accuracy: float
    trace: list[Probe]
    metrics: Metrics
    evaluations: int


@dataclass
class QhsResult:
    kernel: KernelDescriptor
    accuracy: float
    start_accuracy: float  # anchor the loss budget is measured against
    evaluations: int
    blocked: set[tuple[str, str]]  # (virtual layer id, precision kind)
    metrics: Metrics

    @property
    def precision_map(self) -> dict[str, dict[str, Fixed]]:
        return {
            vl.id: {k: vl.precisions[k] for k in PRECISION_KINDS}
            for vl in self.kernel.virtual_layers
        }


def auto_prune(
    net: NetworkDescriptor,
    tolerance: float,
    rate_threshold: float,
    backend: EvaluationBackend,
) -> PruneResult:
    """Largest pruning rate whose accuracy loss stays within ``tolerance``.

    Bisects [0, 1) against the backend, which is monotone in the rate.
    ``rate_threshold`` is the bracket width at which the search stops; the
    returned rate is the largest probed feasible rate and lies within
    ``rate_threshold`` of the true optimum.
    """
    if tolerance < 0:
        raise ValueError("tolerance must be >= 0")
    if not (0.0 < rate_threshold < 1.0):
        raise ValueError("rate_threshold must be in (0, 1)")

    evaluations = 0

    def probe(rate: float) -> tuple[float, Metrics]:
        nonlocal evaluations
        evaluations += 1
        metrics = backend.evaluate(net.with_pruning(rate))
        return metrics.accuracy, metrics

    start_accuracy, start_metrics = probe(0.0)
    trace = [Probe(0.0, start_accuracy, True)]
    best_accuracy, best_metrics = start_accuracy, start_metrics

    lo, hi = 0.0, 1.0
    while hi - lo > rate_threshold:
        mid = (lo + hi) / 2.0
        accuracy, metrics = probe(mid)
        feasible = (start_accuracy - accuracy) <= tolerance
        trace.append(Probe(mid, accuracy, feasible))
        if feasible:
            lo = mid
            best_accuracy, best_metrics = accuracy, metrics
        else:
            hi = mid

    return PruneResult(
        rate=lo,
        accuracy=best_accuracy,
        trace=trace,
        metrics=best_metrics,
        evaluations=evaluations,
    )


def auto_scale(
    net: NetworkDescriptor,
    tolerance: float,
    max_trials: int,
    backend: EvaluationBackend,
    step: float = 0.5,
) -> ScaleResult:
    """Smallest schedule factor whose accuracy loss stays within ``tolerance``.

    Starts at factor 1 and multiplies by ``step`` each trial, stopping at
    the first violating factor or when ``max_trials`` probes are spent.
    """
    if max_trials < 1:
        raise ValueError("max_trials must be >= 1")
    if not (0.0 < step < 1.0):
        raise ValueError("step must be in (0, 1)")
    if tolerance < 0:
        raise ValueError("tolerance must be >= 0")

    evaluations = 0

    def probe(factor: float) -> tuple[float, Metrics]:
        nonlocal evaluations
        evaluations += 1
        metrics = backend.evaluate(net.with_scale(factor))
        return metrics.accuracy, metrics

    start_accuracy, start_metrics = probe(1.0)
    trace = [Probe(1.0, start_accuracy, True)]
    best_factor, best_accuracy, best_metrics = 1.0, start_accuracy, start_metrics

    factor = 1.0
    while evaluations < max_trials:
        factor *= step
        accuracy, metrics = probe(factor)
        feasible = (start_accuracy - accuracy) <= tolerance
        trace.append(Probe(factor, accuracy, feasible))
        if not feasible:
            break
        best_factor, best_accuracy, best_metrics = factor, accuracy, metrics

    return ScaleResult(
        factor=best_factor,
        accuracy=best_accuracy,
        trace=trace,
        metrics=best_metrics,
        evaluations=evaluations,
    )


def _min_total_bits(fmt: Fixed) -> int:
    # Keep at least one fraction bit.
    return fmt.integer_bits + 1


def qhs(
    net: NetworkDescriptor,
    kernel: KernelDescriptor,
    tolerance: float,
    backend: EvaluationBackend,
) -> QhsResult:
    """Mixed-precision bit-width search under an accuracy-loss tolerance.

    Phase 1 (lossless): integer bits of weights and biases shrink to the
    smallest width covering the layer's observed magnitudes; results keep
    their configured integer bits. Phase 2 (iterative): every reducible
    precision loses one total bit per round while the loss stays within
    ``tolerance``; a violating round is rolled back and each precision is
    probed alone, blocking those that individually break the constraint.
    Precisions that reach the one-fraction-bit floor simply leave the
    reducible set. Total bits never increase.
    """
    if tolerance < 0:
        raise ValueError("tolerance must be >= 0")

    work = kernel.copy()
    work.validate_against(net)
    layer_by_id = {l.id: l for l in net.layers}

    # Lossless reduction of integer bits from observed magnitudes.
    for vl in work.virtual_layers:
        stats = layer_by_id[vl.compute_layer_id].weight_stats
        for kind, magnitude in (
            ("weights", stats.max_abs_weight),
            ("biases", stats.max_abs_bias),
        ):
            fmt = vl.precisions[kind]
            int_bits = min(lossless_integer_bits(magnitude), fmt.total_bits - 1)
            vl.precisions[kind] = Fixed(fmt.total_bits, int_bits)
        vl.reducible = {k: True for k in PRECISION_KINDS}

    evaluations = 0

    def evaluate(candidate: KernelDescriptor) -> Metrics:
        nonlocal evaluations
        evaluations += 1
        return backend.evaluate(net, candidate)

    start_metrics = evaluate(work)
    start_accuracy = start_metrics.accuracy
    accepted, accepted_metrics = work, start_metrics

    def within(metrics: Metrics) -> bool:
        return (start_accuracy - metrics.accuracy) <= tolerance

    # Deterministic probe order: virtual-layer position, then kind order.
    def reducible_slots(kernel_state: KernelDescriptor) -> list[tuple[int, str]]:
        slots = []
        for i, vl in enumerate(kernel_state.virtual_layers):
            for kind in PRECISION_KINDS:
                fmt = vl.precisions[kind]
                if vl.reducible[kind] and fmt.total_bits > _min_total_bits(fmt):
                    slots.append((i, kind))
        return slots

    def decremented(kernel_state: KernelDescriptor, slots: list[tuple[int, str]]) -> KernelDescriptor:
        out = kernel_state.copy()
        for i, kind in slots:
            fmt = out.virtual_layers[i].precisions[kind]
            out.virtual_layers[i].precisions[kind] = fmt.with_total(fmt.total_bits - 1)
        return out

    blocked: set[tuple[str, str]] = set()
    while True:
        slots = reducible_slots(accepted)
        if not slots:
            break
        candidate = decremented(accepted, slots)
        metrics = evaluate(candidate)
        if within(metrics):
            accepted, accepted_metrics = candidate, metrics
            continue
        # Roll back and probe each slot alone from the last accepted map.
        survivors = []
        first_lone: tuple[KernelDescriptor, Metrics] | None = None
        for slot in slots:
            if len(slots) == 1:
                probe_kernel, probe_metrics = candidate, metrics
            else:
                probe_kernel = decremented(accepted, [slot])
                probe_metrics = evaluate(probe_kernel)
            if within(probe_metrics):
                survivors.append(slot)
                if first_lone is None:
                    first_lone = (probe_kernel, probe_metrics)
            else:
                vl = accepted.virtual_layers[slot[0]]
                vl.reducible[slot[1]] = False
                blocked.add((vl.id, slot[1]))
        if not survivors:
            break
        if len(survivors) == len(slots):
            # The joint step violates while every lone step passes (losses
            # compound). Take the first survivor's lone decrement so each
            # round either blocks a precision or removes a bit.
            accepted, accepted_metrics = first_lone

    return QhsResult(
        kernel=accepted,
        accuracy=accepted_metrics.accuracy,
        start_accuracy=start_accuracy,
        evaluations=evaluations,
        blocked=blocked,
        metrics=accepted_metrics,
    )


# ---------------------------------------------------------------------------
# Flow-level wrappers; parameters come exclusively from the meta-model CFG.
# ---------------------------------------------------------------------------


def _require_fraction(mm: MetaModel, instance: str, task_type: str, param: str) -> float:
    value = mm.cfg.require(instance, task_type, param)
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{task_type}::{param} must be numeric, got {value!r}") from None


def run_pruning(mm: MetaModel, instance: str, backend: EvaluationBackend) -> str:
    entry = mm.space.latest("network")
    if entry is None:
        raise ExecutionError(f"{instance}: no network model to prune")
    tolerance = _require_fraction(mm, instance, "Pruning", "tolerate_acc_loss")
    threshold = _require_fraction(mm, instance, "Pruning", "pruning_rate_thresh")
    result = auto_prune(entry.payload, tolerance, threshold, backend)
    pruned = entry.payload.with_pruning(result.rate)
    version = mm.space.put("network", pruned, result.metrics, instance)
    return (
        f"network v{version}: pruning rate {result.rate:.6f} "
        f"(accuracy {result.accuracy:.4f}, {result.evaluations} evaluations, "
        f"tolerance {tolerance})"
    )


def run_scaling(mm: MetaModel, instance: str, backend: EvaluationBackend) -> str:
    entry = mm.space.latest("network")
    if entry is None:
        raise ExecutionError(f"{instance}: no network model to scale")
    net: NetworkDescriptor = entry.payload
    tolerance = _require_fraction(mm, instance, "Scaling", "tolerate_acc_loss")
    max_trials = int(mm.cfg.resolve(instance, "Scaling", "max_trials_num") or 8)
    step = float(mm.cfg.resolve(instance, "Scaling", "default_scale_factor") or 0.5)
    auto = mm.cfg.resolve(instance, "Scaling", "scale_auto")
    auto = True if auto is None else bool(auto)

    if auto:
        result = auto_scale(net, tolerance, max_trials, backend, step=step)
        scaled = net.with_scale(result.factor)
        version = mm.space.put("network", scaled, result.metrics, instance)
        return (
            f"network v{version}: scale factor {result.factor:.6f} "
            f"(accuracy {result.accuracy:.4f}, {result.evaluations} evaluations)"
        )
    # Fixed one-shot application of the configured factor.
    scaled = net.with_scale(step)
    metrics = backend.evaluate(scaled)
    version = mm.space.put("network", scaled, metrics, instance)
    return f"network v{version}: fixed scale factor {step:.6f} (accuracy {metrics.accuracy:.4f})"


def run_quantization(mm: MetaModel, instance: str, backend: EvaluationBackend) -> str:
    entry = mm.space.latest("network")
    if entry is None:
        raise ExecutionError(f"{instance}: no network model to quantize")
    net: NetworkDescriptor = entry.payload
    tolerance = _require_fraction(mm, instance, "Quantization", "tolerate_acc_loss")
    precision = resolve_default_precision(mm.cfg, instance)
    device = resolve_device_name(mm.cfg, instance, backend, vendor="A")
    clock = resolve_clock_period(mm.cfg, instance, backend)

    start = make_kernel(net, precision, device, clock, entry.version)
    result = qhs(net, start, tolerance, backend)
    version = mm.space.put("kernel", result.kernel, result.metrics, instance)
    widths = ",".join(
        "/".join(str(vl.precisions[k].total_bits) for k in PRECISION_KINDS)
        for vl in result.kernel.virtual_layers
    )
    return (
        f"kernel v{version}: total bits per virtual layer (w/b/r) {widths} "
        f"(accuracy {result.accuracy:.4f}, {result.evaluations} evaluations, "
        f"{len(result.blocked)} blocked, tolerance {tolerance!r})"
    )
