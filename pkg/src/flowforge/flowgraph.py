"""Flow graphs of pipe tasks and the scheduler that executes them.

A flow is a cyclic directed graph whose nodes are task instances and
whose edges are the paths tokens travel. A token owns one meta-model;
tasks receive a token, transform its meta-model, and emit it onward.
Control tasks shape the traffic: FORK clones the meta-model down every
outgoing edge, REDUCE waits for all tokens that share the same fork
ancestry and merges them, BRANCH picks one of two edges at runtime (and
may mutate configuration on the way), JOIN forwards every arriving token
independently, and STOP captures the final meta-model.

Execution uses a work queue drained by a fixed pool of worker threads.
Tokens are transferred between workers, never shared: a task has
exclusive ownership of its input token, so no meta-model is ever touched
by two workers at once. With one worker and deterministic tasks, two
runs produce identical traces (up to timestamps).

Cycles are permitted only when every cycle passes through a BRANCH, and
a hop budget (``max_hops``) guards against loops whose predicate never
releases the token.
"""

from __future__ import annotations

import itertools
import os
import queue
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from . import ktasks, netmodel, otasks
from .errors import ConfigError, ExecutionError, GraphError
from .ktasks import ActionSpec, PredicateSpec, ReduceSpec
from .metamodel import ConfigStore, ExecutionLog, MetaModel
from .netmodel import METRIC_FIELDS, EvaluationBackend


class TaskKind(str, Enum):
    JOIN = "join"
    BRANCH = "branch"
    FORK = "fork"
    REDUCE = "reduce"
    STOP = "stop"
    PRUNING = "pruning"
    SCALING = "scaling"
    QUANTIZATION = "quantization"
    MODEL_GEN = "model_gen"
    HLS_MOCK_A = "hls_mock_a"
    HLS_MOCK_B = "hls_mock_b"


# Configuration scope name per task kind (both mock synthesis adapters
# share the HLS4ML scope so one default_precision key reaches them all).
TYPE_NAMES = {
    TaskKind.JOIN: "Join",
    TaskKind.BRANCH: "Branch",
    TaskKind.FORK: "Fork",
    TaskKind.REDUCE: "Reduce",
    TaskKind.STOP: "Stop",
    TaskKind.PRUNING: "Pruning",
    TaskKind.SCALING: "Scaling",
    TaskKind.QUANTIZATION: "Quantization",
    TaskKind.MODEL_GEN: "KerasModelGen",
    TaskKind.HLS_MOCK_A: netmodel.HLS_TYPE_NAME,
    TaskKind.HLS_MOCK_B: netmodel.HLS_TYPE_NAME,
}

# (in_min, in_max, out_min, out_max); None = unbounded.
_MULTIPLICITY = {
    TaskKind.JOIN: (1, None, 1, 1),
    TaskKind.BRANCH: (1, 1, 2, 2),
    TaskKind.FORK: (1, 1, 1, None),
    TaskKind.REDUCE: (1, None, 1, 1),
    TaskKind.STOP: (1, 1, 0, 0),
    TaskKind.PRUNING: (1, 1, 1, 1),
    TaskKind.SCALING: (1, 1, 1, 1),
    TaskKind.QUANTIZATION: (1, 1, 1, 1),
    TaskKind.MODEL_GEN: (0, 0, 1, 1),
    TaskKind.HLS_MOCK_A: (1, 1, 1, 1),
    TaskKind.HLS_MOCK_B: (1, 1, 1, 1),
}

_MULTIPLICITY_LABEL = {
    TaskKind.JOIN: "many-to-1",
    TaskKind.BRANCH: "1-to-2",
    TaskKind.FORK: "1-to-many",
    TaskKind.REDUCE: "many-to-1",
    TaskKind.STOP: "1-to-0",
    TaskKind.PRUNING: "1-to-1",
    TaskKind.SCALING: "1-to-1",
    TaskKind.QUANTIZATION: "1-to-1",
    TaskKind.MODEL_GEN: "0-to-1",
    TaskKind.HLS_MOCK_A: "1-to-1",
    TaskKind.HLS_MOCK_B: "1-to-1",
}

# Parameters that must resolve from the configuration before a flow runs.
_REQUIRED_PARAMS = {
    TaskKind.PRUNING: ("tolerate_acc_loss", "pruning_rate_thresh"),
    TaskKind.SCALING: ("tolerate_acc_loss",),
    TaskKind.QUANTIZATION: ("tolerate_acc_loss",),
}

DEFAULT_MAX_HOPS = 1000


@dataclass
class TaskDecl:
    name: str
    kind: TaskKind
    params: dict = field(default_factory=dict)
    predicate: PredicateSpec | None = None
    action: ActionSpec | None = None
    reduce: ReduceSpec | None = None


@dataclass(frozen=True)
class Edge:
    source: str
    port: int
    target: str


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    task: str | None = None

    def __str__(self) -> str:
        locus = f" [{self.task}]" if self.task else ""
        return f"{self.code}{locus}: {self.message}"


class FlowGraph:
    def __init__(self, tasks: list[TaskDecl], edges: list[Edge], entry: str | None = None):
        self.tasks = list(tasks)
        self.edges = list(edges)
        self.entry = entry
        self._by_name = {}
        for decl in self.tasks:
            # Last declaration wins here; validate() reports the duplicate.
            self._by_name[decl.name] = decl

    def task(self, name: str) -> TaskDecl:
        return self._by_name[name]

    def has_task(self, name: str) -> bool:
        return name in self._by_name

    def out_edges(self, name: str) -> list[Edge]:
        return sorted(
            (e for e in self.edges if e.source == name), key=lambda e: (e.port, e.target)
        )

    def in_edges(self, name: str) -> list[Edge]:
        return [e for e in self.edges if e.target == name]

    def sources(self) -> list[str]:
        targeted = {e.target for e in self.edges}
        return [t.name for t in self.tasks if t.name not in targeted]


def validate(graph: FlowGraph) -> list[Diagnostic]:
    """Every structural violation in the graph; an empty list means valid."""
    diags: list[Diagnostic] = []

    seen: set[str] = set()
    for decl in graph.tasks:
        if not decl.name:
            diags.append(Diagnostic("empty-name", "task instance name must be non-empty"))
        elif decl.name in seen:
            diags.append(
                Diagnostic("duplicate-name", f"instance name {decl.name!r} declared twice", decl.name)
            )
        seen.add(decl.name)

    for edge in graph.edges:
        for endpoint in (edge.source, edge.target):
            if not graph.has_task(endpoint):
                diags.append(
                    Diagnostic("dangling-edge", f"edge {edge.source}->{edge.target} references unknown task {endpoint!r}")
                )
        if edge.port < 0:
            diags.append(
                Diagnostic("bad-port", f"edge {edge.source}->{edge.target} has negative port", edge.source)
            )
    edge_keys = [(e.source, e.port, e.target) for e in graph.edges]
    for key in sorted(set(k for k in edge_keys if edge_keys.count(k) > 1)):
        diags.append(Diagnostic("duplicate-edge", f"edge {key} declared twice", key[0]))

    if diags:
        # Structural identity is broken; later checks would mislead.
        return diags

    if not graph.sources():
        diags.append(Diagnostic("no-source", "graph has no task with zero inbound edges"))
    if graph.entry is not None:
        if not graph.has_task(graph.entry):
            diags.append(Diagnostic("bad-entry", f"entry {graph.entry!r} is not a declared task"))
        elif graph.in_edges(graph.entry):
            diags.append(
                Diagnostic("bad-entry", f"entry {graph.entry!r} has inbound edges", graph.entry)
            )

    for decl in graph.tasks:
        in_n = len(graph.in_edges(decl.name))
        out = graph.out_edges(decl.name)
        in_min, in_max, out_min, out_max = _MULTIPLICITY[decl.kind]
        label = _MULTIPLICITY_LABEL[decl.kind]
        if in_n < in_min or (in_max is not None and in_n > in_max):
            diags.append(
                Diagnostic(
                    "multiplicity",
                    f"{decl.kind.value} is {label} but has {in_n} inbound edge(s)",
                    decl.name,
                )
            )
        if len(out) < out_min or (out_max is not None and len(out) > out_max):
            diags.append(
                Diagnostic(
                    "multiplicity",
                    f"{decl.kind.value} is {label} but has {len(out)} outbound edge(s)",
                    decl.name,
                )
            )
        ports = [e.port for e in out]
        if decl.kind == TaskKind.BRANCH:
            if sorted(ports) != [0, 1]:
                diags.append(
                    Diagnostic("bad-port", f"branch ports must be exactly {{0, 1}}, got {sorted(ports)}", decl.name)
                )
        elif decl.kind == TaskKind.FORK:
            if sorted(ports) != list(range(len(ports))):
                diags.append(
                    Diagnostic("bad-port", f"fork ports must be 0..{len(ports) - 1}, got {sorted(ports)}", decl.name)
                )
        elif any(p != 0 for p in ports):
            diags.append(
                Diagnostic("bad-port", f"{decl.kind.value} emits on port 0 only, got {sorted(ports)}", decl.name)
            )

        if decl.kind == TaskKind.BRANCH:
            if decl.predicate is None:
                diags.append(Diagnostic("missing-predicate", "branch declares no predicate", decl.name))
            elif decl.predicate.name not in ktasks.predicate_names():
                diags.append(
                    Diagnostic("unknown-predicate", f"predicate {decl.predicate.name!r} is not registered", decl.name)
                )
            if decl.action is not None and decl.action.name not in ktasks.action_names():
                diags.append(
                    Diagnostic("unknown-action", f"action {decl.action.name!r} is not registered", decl.name)
                )
        if decl.kind == TaskKind.REDUCE:
            if decl.reduce is None:
                diags.append(Diagnostic("missing-reduce", "reduce declares no reducer", decl.name))
            else:
                if decl.reduce.name not in ktasks.reducer_names():
                    diags.append(
                        Diagnostic("unknown-reducer", f"reducer {decl.reduce.name!r} is not registered", decl.name)
                    )
                if not decl.reduce.objectives:
                    diags.append(Diagnostic("missing-objectives", "reducer needs at least one objective", decl.name))
                for metric, direction in decl.reduce.objectives:
                    if metric not in METRIC_FIELDS:
                        diags.append(
                            Diagnostic("unknown-metric", f"objective metric {metric!r} is not a known metric", decl.name)
                        )
                    if direction not in ("min", "max"):
                        diags.append(
                            Diagnostic("bad-direction", f"objective {metric!r} direction must be min or max", decl.name)
                        )

    # A cycle avoiding every BRANCH can never terminate: look for a cycle in
    # the subgraph induced by non-branch tasks.
    non_branch = {t.name for t in graph.tasks if t.kind != TaskKind.BRANCH}
    adjacency = {name: [] for name in non_branch}
    for edge in graph.edges:
        if edge.source in non_branch and edge.target in non_branch:
            adjacency[edge.source].append(edge.target)
    state: dict[str, int] = {}  # 0 visiting, 1 done

    def has_cycle(node: str) -> bool:
        state[node] = 0
        for succ in adjacency[node]:
            mark = state.get(succ)
            if mark == 0:
                return True
            if mark is None and has_cycle(succ):
                return True
        state[node] = 1
        return False

    for name in sorted(non_branch):
        if name not in state and has_cycle(name):
            diags.append(
                Diagnostic("non-terminating-cycle", "graph contains a cycle with no branch task", name)
            )
            break

    return diags


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ForkFrame:
    fork_event: int  # unique per fork activation
    size: int  # fan-out of that activation
    index: int  # which child this token is


@dataclass
class Token:
    mm: MetaModel
    path_id: int
    hop_count: int = 0
    fork_stack: tuple[ForkFrame, ...] = ()


@dataclass
class TokenStats:
    """Token conservation accounting.

    created = 1 (entry) + sum(fan_out - 1) over fork activations, and at
    quiescence created == stop_consumed + reduce_consumed + stranded.
    """

    created: int = 0
    stop_consumed: int = 0
    reduce_consumed: int = 0
    stranded: int = 0

    def to_json_dict(self) -> dict:
        return {
            "created": self.created,
            "stop_consumed": self.stop_consumed,
            "reduce_consumed": self.reduce_consumed,
            "stranded": self.stranded,
        }


@dataclass
class StopCapture:
    task: str
    output: ktasks.FlowOutput

    @property
    def mm(self) -> MetaModel:
        return self.output.metamodel


@dataclass
class FlowResult:
    stops: list[StopCapture]
    run_log: ExecutionLog
    stats: TokenStats
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_json_dict(self) -> dict:
        return {
            "error": self.error,
            "stats": self.stats.to_json_dict(),
            "run_log": self.run_log.to_list(),
            "stops": [
                {
                    "task": s.task,
                    "selected_version": s.output.selected.version,
                    "selected_stage": s.output.selected.stage,
                    "metamodel": s.mm.to_json_dict(),
                }
                for s in self.stops
            ],
        }


def _check_required_params(graph: FlowGraph, cfg: ConfigStore) -> None:
    missing = []
    for decl in graph.tasks:
        for param in _REQUIRED_PARAMS.get(decl.kind, ()):
            if cfg.resolve(decl.name, TYPE_NAMES[decl.kind], param) is None:
                missing.append(f"{decl.name} ({TYPE_NAMES[decl.kind]}::{param})")
    if missing:
        raise ConfigError("missing required parameters: " + ", ".join(missing))


class _Execution:
    def __init__(
        self,
        graph: FlowGraph,
        cfg: ConfigStore,
        backend: EvaluationBackend,
        workers: int,
        max_hops: int,
    ):
        self.graph = graph
        self.cfg = cfg
        self.backend = backend
        self.workers = workers
        self.max_hops = max_hops
        self.queue: queue.Queue = queue.Queue()
        self.lock = threading.Lock()
        self.done = threading.Condition(self.lock)
        self.outstanding = 0
        self.error: str | None = None
        self.stops: list[tuple[int, StopCapture]] = []
        self.staging: dict[tuple[str, int], dict[int, Token]] = {}
        self.run_log = ExecutionLog()
        self.stats = TokenStats()
        self.fork_events = itertools.count(1)
        self.token_ids = itertools.count(1)

    # -- plumbing ----------------------------------------------------------

    def _submit(self, token: Token, task_name: str) -> None:
        with self.lock:
            self.outstanding += 1
        self.queue.put((token, task_name))

    def _log(self, task: str, event: str, detail: str) -> None:
        with self.lock:
            self.run_log.append(task, event, detail)

    def _successor(self, task_name: str, port: int) -> str:
        for edge in self.graph.out_edges(task_name):
            if edge.port == port:
                return edge.target
        raise ExecutionError(f"{task_name}: no outgoing edge on port {port}")

    # -- task dispatch -------------------------------------------------------

    def _execute(self, token: Token, task_name: str) -> None:
        decl = self.graph.task(task_name)
        token.hop_count += 1
        if token.hop_count > self.max_hops:
            raise ExecutionError(
                f"runaway loop: token exceeded max_hops={self.max_hops} at {task_name}"
            )
        mm = token.mm
        mm.log.append(task_name, "started", decl.kind.value)

        outputs: list[tuple[Token, str]] = []
        finish_on: MetaModel | None = mm
        kind = decl.kind

        if kind == TaskKind.JOIN:
            detail = "pass-through"
            outputs.append((token, self._successor(task_name, 0)))
        elif kind == TaskKind.MODEL_GEN:
            detail = netmodel.run_model_gen(mm, task_name, self.backend)
            outputs.append((token, self._successor(task_name, 0)))
        elif kind == TaskKind.PRUNING:
            detail = otasks.run_pruning(mm, task_name, self.backend)
            outputs.append((token, self._successor(task_name, 0)))
        elif kind == TaskKind.SCALING:
            detail = otasks.run_scaling(mm, task_name, self.backend)
            outputs.append((token, self._successor(task_name, 0)))
        elif kind == TaskKind.QUANTIZATION:
            detail = otasks.run_quantization(mm, task_name, self.backend)
            outputs.append((token, self._successor(task_name, 0)))
        elif kind == TaskKind.HLS_MOCK_A:
            detail = netmodel.run_hls_mock(mm, task_name, self.backend, vendor="A")
            outputs.append((token, self._successor(task_name, 0)))
        elif kind == TaskKind.HLS_MOCK_B:
            detail = netmodel.run_hls_mock(mm, task_name, self.backend, vendor="B")
            outputs.append((token, self._successor(task_name, 0)))
        elif kind == TaskKind.BRANCH:
            port, _ = ktasks.branch_decide(mm, decl.predicate, decl.action, task_name)
            detail = f"took port {port}"
            outputs.append((token, self._successor(task_name, port)))
        elif kind == TaskKind.FORK:
            edges = self.graph.out_edges(task_name)
            event = next(self.fork_events)
            detail = f"fan-out {len(edges)}"
            with self.lock:
                self.stats.created += len(edges) - 1
            for index, edge in enumerate(edges):
                child = Token(
                    mm=mm.clone(),
                    path_id=next(self.token_ids),
                    hop_count=token.hop_count,
                    fork_stack=token.fork_stack + (ForkFrame(event, len(edges), index),),
                )
                outputs.append((child, edge.target))
        elif kind == TaskKind.REDUCE:
            fired = self._stage_reduce(token, decl)
            if fired is None:
                self._log(task_name, "finished", "staged token, group incomplete")
                return
            merged, consumed, detail = fired
            finish_on = merged.mm
            outputs.append((merged, self._successor(task_name, 0)))
            with self.lock:
                self.stats.reduce_consumed += consumed
        elif kind == TaskKind.STOP:
            output = ktasks.stop_extract(mm)
            detail = (
                f"captured {output.selected.stage} v{output.selected.version}"
            )
            mm.log.append(task_name, "finished", detail)
            finish_on = None
            with self.lock:
                self.stats.stop_consumed += 1
                self.stops.append((token.path_id, StopCapture(task_name, output)))
        else:  # pragma: no cover - enum is exhaustive
            raise ExecutionError(f"unhandled task kind {kind}")

        if finish_on is not None:
            finish_on.log.append(task_name, "finished", detail)
        self._log(task_name, "finished", detail)
        for out_token, target in outputs:
            self._submit(out_token, target)

    def _stage_reduce(
        self, token: Token, decl: TaskDecl
    ) -> tuple[Token, int, str] | None:
        """Stage an arriving token; fire when its fork group is complete.

        Tokens that never passed a FORK form complete groups of one. The
        merge consumes group-size minus one tokens and pops the matched
        fork frame from the lineage stack.
        """
        if not token.fork_stack:
            group = [token]
            stack: tuple[ForkFrame, ...] = ()
        else:
            frame = token.fork_stack[-1]
            key = (decl.name, frame.fork_event)
            with self.lock:
                bucket = self.staging.setdefault(key, {})
                bucket[frame.index] = token
                if len(bucket) < frame.size:
                    return None
                del self.staging[key]
            group = [bucket[i] for i in sorted(bucket)]
            stack = token.fork_stack[:-1]

        merged_mm = ktasks.reduce_apply([t.mm for t in group], decl.reduce)
        merged = Token(
            mm=merged_mm,
            path_id=next(self.token_ids),
            hop_count=max(t.hop_count for t in group),
            fork_stack=stack,
        )
        detail = f"merged {len(group)} path(s) via {decl.reduce.name}"
        return merged, len(group) - 1, detail

    # -- worker loop ---------------------------------------------------------

    def _worker(self) -> None:
        while True:
            item = self.queue.get()
            if item is None:
                return
            token, task_name = item
            try:
                with self.lock:
                    failed = self.error is not None
                if not failed:
                    self._execute(token, task_name)
            except Exception as exc:
                message = f"{task_name}: {exc}"
                token.mm.log.append(task_name, "error", str(exc)[:2048])
                with self.lock:
                    if self.error is None:
                        self.error = message
                    self.run_log.append(task_name, "error", str(exc)[:2048])
            finally:
                with self.done:
                    self.outstanding -= 1
                    if self.outstanding == 0:
                        self.done.notify_all()

    def _run_sync(self) -> None:
        """Single-worker execution: drain the queue inline, FIFO order."""
        while True:
            try:
                token, task_name = self.queue.get_nowait()
            except queue.Empty:
                return
            try:
                if self.error is None:
                    self._execute(token, task_name)
            except Exception as exc:
                token.mm.log.append(task_name, "error", str(exc)[:2048])
                if self.error is None:
                    self.error = f"{task_name}: {exc}"
                self.run_log.append(task_name, "error", str(exc)[:2048])
            finally:
                self.outstanding -= 1

    def run(self) -> FlowResult:
        entry = self.graph.entry or self.graph.sources()[0]
        mm = MetaModel(ConfigStore.from_dict(self.cfg.as_dict()))
        token = Token(mm=mm, path_id=next(self.token_ids))
        self.stats.created += 1
        self._submit(token, entry)

        if self.workers == 1:
            self._run_sync()
        else:
            threads = [
                threading.Thread(target=self._worker, name=f"flow-worker-{i}", daemon=True)
                for i in range(self.workers)
            ]
            for t in threads:
                t.start()
            with self.done:
                self.done.wait_for(lambda: self.outstanding == 0)
            for _ in threads:
                self.queue.put(None)
            for t in threads:
                t.join()

        stranded = sum(len(bucket) for bucket in self.staging.values())
        self.stats.stranded = stranded
        if stranded and self.error is None:
            self.run_log.append(
                "scheduler",
                "error",
                f"{stranded} token(s) stranded at reduce tasks; their fork groups never completed",
            )
        ordered = [capture for _, capture in sorted(self.stops, key=lambda s: s[0])]
        return FlowResult(
            stops=ordered, run_log=self.run_log, stats=self.stats, error=self.error
        )


def run(
    graph: FlowGraph,
    cfg: ConfigStore | Mapping | None,
    backend: EvaluationBackend,
    *,
    workers: int | None = None,
    max_hops: int = DEFAULT_MAX_HOPS,
) -> FlowResult:
    """Validate and execute a flow over a fresh meta-model.

    Raises GraphError when validation fails and ConfigError when a task's
    required parameters cannot be resolved; both happen before any task
    runs. Task failures during execution abort the flow and are reported
    on the returned result instead of raising.
    """
    diagnostics = validate(graph)
    if diagnostics:
        raise GraphError(diagnostics)
    store = cfg if isinstance(cfg, ConfigStore) else ConfigStore.from_dict(dict(cfg or {}))
    _check_required_params(graph, store)
    worker_count = workers if workers is not None else (os.cpu_count() or 1)
    if worker_count < 1:
        raise ExecutionError("workers must be >= 1")
    execution = _Execution(graph, store, backend, worker_count, max_hops)
    return execution.run()


# ---------------------------------------------------------------------------
# Builder
# ---------------------------------------------------------------------------


class FlowBuilder:
    """Programmatic construction of flow graphs.

    Produces the same structure the flow-file loader does, so a built
    graph can be serialized back to the on-disk schema via `to_flow_dict`.
    """

    def __init__(self):
        self._tasks: list[TaskDecl] = []
        self._edges: list[Edge] = []
        self._entry: str | None = None
        self._counter = itertools.count(1)

    def task(
        self,
        kind: TaskKind | str,
        name: str | None = None,
        *,
        params: dict | None = None,
        predicate: PredicateSpec | None = None,
        action: ActionSpec | None = None,
        reduce: ReduceSpec | None = None,
    ) -> str:
        kind = TaskKind(kind)
        if name is None:
            name = f"{kind.value}_{next(self._counter)}"
        self._tasks.append(
            TaskDecl(
                name=name,
                kind=kind,
                params=dict(params or {}),
                predicate=predicate,
                action=action,
                reduce=reduce,
            )
        )
        return name

    def edge(self, source: str, target: str, port: int = 0) -> "FlowBuilder":
        self._edges.append(Edge(source, port, target))
        return self

    def chain(self, *names: str) -> "FlowBuilder":
        for src, dst in zip(names, names[1:]):
            self.edge(src, dst)
        return self

    def set_entry(self, name: str) -> "FlowBuilder":
        self._entry = name
        return self

    def build(self) -> FlowGraph:
        return FlowGraph(self._tasks, self._edges, self._entry)

    def to_flow_dict(self, cfg: Mapping | None = None, benchmark: str | None = None) -> dict:
        doc: dict = {"schema_version": 1, "tasks": [], "edges": []}
        if benchmark is not None:
            doc["benchmark"] = benchmark
        if self._entry is not None:
            doc["entry"] = self._entry
        for decl in self._tasks:
            row: dict = {"name": decl.name, "kind": decl.kind.value}
            if decl.params:
                row["params"] = dict(decl.params)
            if decl.predicate is not None:
                row["predicate"] = {"name": decl.predicate.name, "params": dict(decl.predicate.params)}
            if decl.action is not None:
                row["action"] = {"name": decl.action.name, "params": dict(decl.action.params)}
            if decl.reduce is not None:
                row["reduce"] = {
                    "name": decl.reduce.name,
                    "objectives": [list(obj) for obj in decl.reduce.objectives],
                    "params": dict(decl.reduce.params),
                }
            doc["tasks"].append(row)
        doc["edges"] = [[e.source, e.port, e.target] for e in self._edges]
        doc["cfg"] = dict(cfg or {})
        return doc
