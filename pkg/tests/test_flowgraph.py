"""Graph validation and scheduler semantics: loops, fork/reduce, determinism."""

from __future__ import annotations

import json

import pytest

from flowforge.errors import ConfigError, GraphError
from flowforge.flowgraph import (
    Edge,
    FlowBuilder,
    FlowGraph,
    TaskDecl,
    TaskKind,
    run,
    validate,
)
from flowforge.ktasks import PredicateSpec, ReduceSpec

ACC_DSP = (("accuracy", "max"), ("dsp", "min"))


def pruning_loop_graph(loop_limit=2):
    b = FlowBuilder()
    gen = b.task(TaskKind.MODEL_GEN, "gen")
    join = b.task(TaskKind.JOIN, "join")
    prune = b.task(TaskKind.PRUNING, "prune")
    hls = b.task(TaskKind.HLS_MOCK_A, "hls")
    branch = b.task(
        TaskKind.BRANCH,
        "loop",
        predicate=PredicateSpec("loop_count_below", {"limit": loop_limit}),
    )
    stop = b.task(TaskKind.STOP, "stop")
    b.chain(gen, join, prune, hls, branch)
    b.edge(branch, join, port=0)
    b.edge(branch, stop, port=1)
    b.set_entry(gen)
    return b.build()


def fork_orders_graph():
    b = FlowBuilder()
    gen = b.task(TaskKind.MODEL_GEN, "gen")
    fork = b.task(TaskKind.FORK, "fork")
    s1 = b.task(TaskKind.SCALING, "s1")
    p1 = b.task(TaskKind.PRUNING, "p1")
    h1 = b.task(TaskKind.HLS_MOCK_A, "h1")
    p2 = b.task(TaskKind.PRUNING, "p2")
    s2 = b.task(TaskKind.SCALING, "s2")
    h2 = b.task(TaskKind.HLS_MOCK_A, "h2")
    reduce_ = b.task(TaskKind.REDUCE, "reduce", reduce=ReduceSpec("pareto", ACC_DSP))
    stop = b.task(TaskKind.STOP, "stop")
    b.edge(gen, fork)
    b.edge(fork, s1, port=0)
    b.edge(fork, p2, port=1)
    b.chain(s1, p1, h1)
    b.chain(p2, s2, h2)
    b.edge(h1, reduce_)
    b.edge(h2, reduce_)
    b.edge(reduce_, stop)
    b.set_entry(gen)
    return b.build()


FULL_CFG = {
    "Pruning::tolerate_acc_loss": 0.02,
    "Pruning::pruning_rate_thresh": 0.02,
    "Scaling::tolerate_acc_loss": 0.02,
}


def stripped(mm_json_dict):
    """Serialized meta-model with log timestamps removed."""
    doc = json.loads(json.dumps(mm_json_dict))
    doc["log"] = [row[1:] for row in doc["log"]]
    return doc


class TestValidate:
    def test_pruning_loop_is_valid(self):
        assert validate(pruning_loop_graph()) == []

    def test_fork_orders_is_valid(self):
        assert validate(fork_orders_graph()) == []

    def test_branch_with_three_edges(self):
        b = FlowBuilder()
        gen = b.task(TaskKind.MODEL_GEN, "gen")
        branch = b.task(TaskKind.BRANCH, "br", predicate=PredicateSpec("always_true"))
        s1 = b.task(TaskKind.STOP, "s1")
        s2 = b.task(TaskKind.STOP, "s2")
        s3 = b.task(TaskKind.STOP, "s3")
        b.edge(gen, branch)
        b.edge(branch, s1, 0)
        b.edge(branch, s2, 1)
        b.edge(branch, s3, 2)
        diags = validate(b.build())
        assert any(d.code == "multiplicity" and "1-to-2" in d.message for d in diags)

    def test_cycle_without_branch(self):
        tasks = [
            TaskDecl("gen", TaskKind.MODEL_GEN),
            TaskDecl("join", TaskKind.JOIN),
            TaskDecl("prune", TaskKind.PRUNING),
        ]
        edges = [Edge("gen", 0, "join"), Edge("join", 0, "prune"), Edge("prune", 0, "join")]
        diags = validate(FlowGraph(tasks, edges))
        assert any(d.code == "non-terminating-cycle" for d in diags)

    def test_missing_source(self):
        tasks = [TaskDecl("a", TaskKind.JOIN), TaskDecl("b", TaskKind.JOIN)]
        edges = [Edge("a", 0, "b"), Edge("b", 0, "a")]
        diags = validate(FlowGraph(tasks, edges))
        assert any(d.code == "no-source" for d in diags)

    def test_dangling_edge(self):
        tasks = [TaskDecl("gen", TaskKind.MODEL_GEN)]
        diags = validate(FlowGraph(tasks, [Edge("gen", 0, "ghost")]))
        assert any(d.code == "dangling-edge" for d in diags)

    def test_duplicate_names(self):
        tasks = [TaskDecl("x", TaskKind.MODEL_GEN), TaskDecl("x", TaskKind.STOP)]
        diags = validate(FlowGraph(tasks, [Edge("x", 0, "x")]))
        assert any(d.code == "duplicate-name" for d in diags)

    def test_unknown_predicate_names_instance(self):
        g = pruning_loop_graph()
        g.task("loop").predicate = PredicateSpec("not_registered")
        diags = validate(g)
        assert any(d.code == "unknown-predicate" and d.task == "loop" for d in diags)

    def test_branch_without_predicate(self):
        g = pruning_loop_graph()
        g.task("loop").predicate = None
        assert any(d.code == "missing-predicate" for d in validate(g))

    def test_reduce_objective_metric_checked(self):
        g = fork_orders_graph()
        g.task("reduce").reduce = ReduceSpec("pareto", (("watts", "min"),))
        assert any(d.code == "unknown-metric" for d in validate(g))

    def test_run_rejects_invalid_graph(self, jetdnn_backend):
        tasks = [TaskDecl("gen", TaskKind.MODEL_GEN)]
        graph = FlowGraph(tasks, [Edge("gen", 0, "ghost")])
        with pytest.raises(GraphError):
            run(graph, {}, jetdnn_backend)


class TestRunBasics:
    def test_minimal_flow(self, jetdnn_backend):
        b = FlowBuilder()
        gen = b.task(TaskKind.MODEL_GEN, "gen")
        stop = b.task(TaskKind.STOP, "stop")
        b.edge(gen, stop)
        result = run(b.build(), {}, jetdnn_backend, workers=1)
        assert result.ok
        assert len(result.stops) == 1
        mm = result.stops[0].mm
        assert len(mm.space.entries) == 1
        assert mm.space.entries[0].stage == "network"

    def test_pruning_loop_executes_three_times(self, jetdnn_backend):
        # Hand trace with loop_count_below(2): initial pass plus two loops.
        result = run(pruning_loop_graph(2), FULL_CFG, jetdnn_backend, workers=1)
        assert result.ok
        mm = result.stops[0].mm
        assert mm.log.count(task="prune", event="finished") == 3
        assert mm.log.count(task="loop", event="branched") == 3
        assert mm.space.latest("network").payload.pruning_rate > 0.8

    def test_missing_required_parameter_fails_before_running(self, jetdnn_backend):
        cfg = dict(FULL_CFG)
        del cfg["Pruning::pruning_rate_thresh"]
        with pytest.raises(ConfigError, match="pruning_rate_thresh"):
            run(pruning_loop_graph(), cfg, jetdnn_backend, workers=1)

    def test_runaway_loop_guard(self, jetdnn_backend):
        g = pruning_loop_graph(10**9)  # predicate never releases the token
        result = run(g, FULL_CFG, jetdnn_backend, workers=1, max_hops=40)
        assert not result.ok
        assert "runaway" in result.error

    def test_task_failure_aborts_with_partial_log(self, jetdnn_backend):
        # overmapped needs kernel metrics, but the branch sits before any
        # synthesis task, so the predicate read fails at runtime.
        b = FlowBuilder()
        gen = b.task(TaskKind.MODEL_GEN, "gen")
        branch = b.task(
            TaskKind.BRANCH, "bad", predicate=PredicateSpec("overmapped", {"u_max": 1.0})
        )
        s1 = b.task(TaskKind.STOP, "s1")
        s2 = b.task(TaskKind.STOP, "s2")
        b.edge(gen, branch)
        b.edge(branch, s1, 0)
        b.edge(branch, s2, 1)
        result = run(b.build(), {}, jetdnn_backend, workers=1)
        assert not result.ok
        assert "bad" in result.error
        events = [(r.task, r.event) for r in result.run_log.records]
        assert ("gen", "finished") in events
        assert ("bad", "error") in events
        assert result.stops == []

class TestForkReduce:
    def test_two_paths_reduced(self, jetdnn_backend):
        result = run(fork_orders_graph(), FULL_CFG, jetdnn_backend, workers=1)
        assert result.ok
        mm = result.stops[0].mm
        merged = mm.log.count(task="reduce", event="finished")
        assert merged >= 1
        assert 1 <= len([e for e in mm.space.entries if e.stage == "kernel"]) <= 2
        # Both strategy paths left their trace in the merged log.
        assert mm.log.count(task="s1", event="finished") == 1
        assert mm.log.count(task="p2", event="finished") == 1

    def test_fork_clone_isolation(self, jetdnn_backend):
        # The two paths prune/scale different copies; the merged history
        # contains both lineages rather than one shared mutated model.
        result = run(fork_orders_graph(), FULL_CFG, jetdnn_backend, workers=1)
        mm = result.stops[0].mm
        producers = {e.producer for e in mm.space.entries}
        assert producers <= {"h1", "h2"}

    def test_token_conservation(self, jetdnn_backend):
        result = run(fork_orders_graph(), FULL_CFG, jetdnn_backend, workers=1)
        stats = result.stats
        assert stats.created == 2  # entry + one extra fork child
        assert stats.created == stats.stop_consumed + stats.reduce_consumed + stats.stranded
        assert stats.stranded == 0

        loop = run(pruning_loop_graph(), FULL_CFG, jetdnn_backend, workers=1)
        assert loop.stats.created == 1
        assert loop.stats.stop_consumed == 1

    def test_parallel_equivalence(self, jetdnn_backend):
        results = {}
        for workers in (1, 4):
            result = run(fork_orders_graph(), FULL_CFG, jetdnn_backend, workers=workers)
            assert result.ok
            mm = result.stops[0].mm
            results[workers] = {
                (e.stage, e.producer, json.dumps(e.payload.to_json_dict(), sort_keys=True))
                for e in mm.space.entries
            }
        assert results[1] == results[4]

    def test_no_task_runs_before_its_dependencies(self, jetdnn_backend):
        # Global run-log order: the reduce merge fires only after both
        # synthesis tasks delivered their tokens, at any worker count.
        for workers in (1, 3):
            result = run(fork_orders_graph(), FULL_CFG, jetdnn_backend, workers=workers)
            events = [
                (r.task, r.detail) for r in result.run_log.records if r.event == "finished"
            ]
            merge_at = next(
                i for i, (task, detail) in enumerate(events)
                if task == "reduce" and detail.startswith("merged")
            )
            done_before = {task for task, _ in events[:merge_at]}
            assert {"h1", "h2"} <= done_before

    def test_reduce_without_fork_passes_through(self, jetdnn_backend):
        b = FlowBuilder()
        gen = b.task(TaskKind.MODEL_GEN, "gen")
        hls = b.task(TaskKind.HLS_MOCK_A, "hls")
        red = b.task(TaskKind.REDUCE, "red", reduce=ReduceSpec("pareto", ACC_DSP))
        stop = b.task(TaskKind.STOP, "stop")
        b.chain(gen, hls, red, stop)
        result = run(b.build(), {}, jetdnn_backend, workers=1)
        assert result.ok
        assert len(result.stops) == 1


class TestDeterminism:
    def test_single_worker_repeatable(self, jetdnn_backend):
        docs = []
        for _ in range(2):
            result = run(pruning_loop_graph(), FULL_CFG, jetdnn_backend, workers=1)
            docs.append(stripped(result.stops[0].mm.to_json_dict()))
        assert docs[0] == docs[1]

    def test_branch_vendor_selection(self, jetdnn_backend):
        # Port 1 of the branch routes to the vendor-B adapter.
        b = FlowBuilder()
        gen = b.task(TaskKind.MODEL_GEN, "gen")
        branch = b.task(TaskKind.BRANCH, "pick", predicate=PredicateSpec("always_false"))
        ha = b.task(TaskKind.HLS_MOCK_A, "ha")
        hb = b.task(TaskKind.HLS_MOCK_B, "hb")
        sa = b.task(TaskKind.STOP, "stop_a")
        sb = b.task(TaskKind.STOP, "stop_b")
        b.edge(gen, branch)
        b.edge(branch, ha, 0)
        b.edge(branch, hb, 1)
        b.edge(ha, sa)
        b.edge(hb, sb)
        result = run(b.build(), {}, jetdnn_backend, workers=1)
        assert result.ok
        assert [s.task for s in result.stops] == ["stop_b"]
        kernel = result.stops[0].mm.space.latest("kernel")
        assert kernel.payload.device == "a10-b"
        assert kernel.metrics.dsp_used == 0  # vendor B maps multipliers to fabric


class TestBuilder:
    def test_flow_dict_round_trip(self):
        from flowforge.cli import parse_flow_doc
        from pathlib import Path

        b = FlowBuilder()
        gen = b.task(TaskKind.MODEL_GEN, "gen")
        stop = b.task(TaskKind.STOP, "stop")
        b.edge(gen, stop)
        b.set_entry(gen)
        doc = b.to_flow_dict(cfg={"x": 1}, benchmark="jetdnn-synth")
        graph, cfg = parse_flow_doc(doc, Path("memory.flow"))
        assert cfg == {"x": 1}
        assert validate(graph) == []
        assert graph.entry == "gen"
        assert [t.name for t in graph.tasks] == ["gen", "stop"]
