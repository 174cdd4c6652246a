"""Command-line interface.

Subcommands: validate and run flow files, launch DSE campaigns, run grid
or stochastic-grid sweeps, render reports from candidate histories, and
list the registered predicate/action/reducer names.

Exit codes: 0 success, 1 flow validation failure, 2 usage or parse
error, 3 runtime failure. Every stochastic choice is pinned by --seed
(falling back to the FLOWFORGE_SEED environment variable), so rerunning
a command with the same inputs reproduces its outputs byte for byte
(timestamps and wall-clock fields aside).
"""

from __future__ import annotations

import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import click

from . import __version__, dse, flowgraph, ktasks, netmodel
from .errors import ConfigError, FlowforgeError
from .flowgraph import Edge, FlowGraph, TaskDecl, TaskKind
from .ktasks import ActionSpec, PredicateSpec, ReduceSpec
from .netmodel import Benchmark, SyntheticBackend

FLOW_SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2
EXIT_RUNTIME = 3


class FlowFileError(FlowforgeError):
    """The flow or template file cannot be parsed into a definition."""


# ---------------------------------------------------------------------------
# File loading
# ---------------------------------------------------------------------------


def _load_json(path: Path) -> dict:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FlowFileError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FlowFileError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FlowFileError(f"{path}: top level must be a JSON object")
    return doc


def _check_schema_version(doc: dict, path: Path) -> None:
    version = doc.get("schema_version")
    if version != FLOW_SCHEMA_VERSION:
        raise FlowFileError(f"{path}: unsupported schema_version {version!r}")


def _spec_from(doc: dict, cls, label: str, path: Path):
    if not isinstance(doc, dict) or "name" not in doc:
        raise FlowFileError(f"{path}: {label} must be an object with a 'name'")
    params = doc.get("params", {})
    if not isinstance(params, dict):
        raise FlowFileError(f"{path}: {label} params must be an object")
    if cls is ReduceSpec:
        objectives = doc.get("objectives", [])
        try:
            objectives = tuple((str(m), str(d)) for m, d in objectives)
        except (TypeError, ValueError):
            raise FlowFileError(f"{path}: {label} objectives must be [metric, direction] pairs") from None
        return ReduceSpec(name=str(doc["name"]), objectives=objectives, params=dict(params))
    return cls(name=str(doc["name"]), params=dict(params))


def parse_flow_doc(doc: dict, path: Path) -> tuple[FlowGraph, dict]:
    """Build the graph and configuration map from a flow document."""
    _check_schema_version(doc, path)
    tasks = []
    for row in doc.get("tasks", []):
        if not isinstance(row, dict) or "name" not in row or "kind" not in row:
            raise FlowFileError(f"{path}: each task needs 'name' and 'kind'")
        try:
            kind = TaskKind(str(row["kind"]))
        except ValueError:
            raise FlowFileError(f"{path}: unknown task kind {row['kind']!r}") from None
        tasks.append(
            TaskDecl(
                name=str(row["name"]),
                kind=kind,
                params=dict(row.get("params", {})),
                predicate=(
                    _spec_from(row["predicate"], PredicateSpec, "predicate", path)
                    if "predicate" in row
                    else None
                ),
                action=(
                    _spec_from(row["action"], ActionSpec, "action", path)
                    if "action" in row
                    else None
                ),
                reduce=(
                    _spec_from(row["reduce"], ReduceSpec, "reduce", path)
                    if "reduce" in row
                    else None
                ),
            )
        )
    edges = []
    for row in doc.get("edges", []):
        if not isinstance(row, (list, tuple)) or len(row) != 3:
            raise FlowFileError(f"{path}: each edge must be [source, port, target]")
        edges.append(Edge(str(row[0]), int(row[1]), str(row[2])))
    cfg = doc.get("cfg", {})
    if not isinstance(cfg, dict):
        raise FlowFileError(f"{path}: cfg must be an object")
    entry = doc.get("entry")
    graph = FlowGraph(tasks, edges, entry=str(entry) if entry is not None else None)
    return graph, dict(cfg)


def load_benchmark(reference: str, relative_to: Path) -> Benchmark:
    """Resolve a benchmark reference: a shipped name or a JSON file path."""
    if reference.endswith(".json") or "/" in reference or "\\" in reference:
        candidate = Path(reference)
        if not candidate.is_absolute():
            candidate = relative_to / candidate
        return Benchmark.from_file(candidate)
    return Benchmark.builtin(reference)


def load_flow_file(path: Path) -> tuple[FlowGraph, dict, Benchmark]:
    doc = _load_json(path)
    if "benchmark" not in doc:
        raise FlowFileError(f"{path}: missing 'benchmark' reference")
    graph, cfg = parse_flow_doc(doc, path)
    benchmark = load_benchmark(str(doc["benchmark"]), path.parent)
    return graph, cfg, benchmark


def load_template_file(path: Path) -> tuple[dse.FlowTemplate, dse.ThetaBounds, Benchmark]:
    doc = _load_json(path)
    _check_schema_version(doc, path)
    if "benchmark" not in doc:
        raise FlowFileError(f"{path}: missing 'benchmark' reference")
    benchmark = load_benchmark(str(doc["benchmark"]), path.parent)
    bounds_doc = doc.get("bounds", {})

    def bound(name: str, default: tuple[float, float]) -> tuple[float, float]:
        raw = bounds_doc.get(name, default)
        if not isinstance(raw, (list, tuple)) or len(raw) != 2:
            raise FlowFileError(f"{path}: bounds.{name} must be [low, high]")
        return (float(raw[0]), float(raw[1]))

    default_bounds = (0.001, 0.05)
    bounds = dse.ThetaBounds(
        alpha_p=bound("alpha_p", default_bounds),
        alpha_s=bound("alpha_s", default_bounds),
        alpha_q=bound("alpha_q", default_bounds),
    )
    vendor = str(doc.get("vendor", "A"))
    if vendor not in ("A", "B"):
        raise FlowFileError(f"{path}: vendor must be 'A' or 'B'")
    device = doc.get("device")
    template = dse.FlowTemplate(
        base_cfg=dict(doc.get("cfg", {})),
        vendor=vendor,
        device=str(device) if device is not None else None,
    )
    return template, bounds, benchmark


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def write_manifest(
    out_dir: Path,
    command: str,
    input_path: Path,
    benchmark: Benchmark,
    seed: int,
    outputs: list[str],
    config: dict,
) -> None:
    manifest = {
        "tool": "flowforge",
        "version": __version__,
        "command": command,
        "input_file": str(input_path),
        "input_hash": _sha256_file(input_path),
        "benchmark": benchmark.name,
        "benchmark_hash": _sha256_text(json.dumps(benchmark.to_json_dict(), sort_keys=True)),
        "seed": seed,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "outputs": outputs,
        "config": config,
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def _summary_text(result: flowgraph.FlowResult, benchmark: Benchmark) -> str:
    lines = [f"benchmark: {benchmark.name}", f"stops: {len(result.stops)}"]
    for capture in result.stops:
        output = capture.output
        mm = capture.mm
        lines.append(f"\n[{capture.task}] selected {output.selected.stage} v{output.selected.version}")
        net_entry = mm.space.latest("network")
        if net_entry is not None:
            net = net_entry.payload
            lines.append(f"  pruning_rate: {net.pruning_rate!r}")
            lines.append(f"  scale_factor: {net.scale_factor!r}")
        kernel_entry = mm.space.latest("kernel")
        if kernel_entry is not None:
            lines.append(f"  device: {kernel_entry.payload.device}")
            lines.append("  precision map (total/integer bits):")
            for vl in kernel_entry.payload.virtual_layers:
                formats = ", ".join(
                    f"{kind}={vl.precisions[kind].total_bits}/{vl.precisions[kind].integer_bits}"
                    for kind in ("weights", "biases", "results")
                )
                lines.append(f"    {vl.id}: {formats}")
        metrics = output.metrics
        if metrics is not None:
            lines.append("  metrics:")
            for key, value in sorted(metrics.to_json_dict().items()):
                lines.append(f"    {key}: {value!r}")
    return "\n".join(lines) + "\n"


def _parse_orderings(raw: str) -> list[dse.Ordering]:
    out = []
    for token in raw.split(","):
        token = token.strip()
        if not token:
            continue
        out.append(dse.Ordering.parse(token))
    if not out:
        raise ValueError("no orderings given")
    return out


def _parse_weights(raw: str) -> tuple[float, float, float, float]:
    parts = [float(p) for p in raw.split(",")]
    return dse.check_weights(parts)


def _parse_limits(raw: str) -> tuple[float, float, float]:
    parts = [float(p) for p in raw.split(",")]
    if len(parts) != 3:
        raise ValueError("limits must be u_max,t_max,acc_loss_max")
    return parts[0], parts[1], parts[2]


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


@click.group()
@click.version_option(version=__version__, prog_name="flowforge")
def main():
    """Design-flow orchestration and constrained design-space exploration."""


@main.command("validate")
@click.argument("flow_path", type=click.Path(path_type=Path))
def cmd_validate(flow_path: Path):
    """Validate a flow file; print one diagnostic per line."""
    try:
        graph, _, _ = load_flow_file(flow_path)
    except (FlowFileError, FlowforgeError, ValueError) as exc:
        _fail(EXIT_USAGE, str(exc))
    diagnostics = flowgraph.validate(graph)
    for diag in diagnostics:
        click.echo(str(diag))
    if diagnostics:
        sys.exit(EXIT_VALIDATION)
    click.echo(f"{flow_path}: valid ({len(graph.tasks)} tasks, {len(graph.edges)} edges)")
    sys.exit(EXIT_OK)


@main.command("run")
@click.argument("flow_path", type=click.Path(path_type=Path))
@click.option("--seed", type=int, default=0, envvar="FLOWFORGE_SEED", show_default=True)
@click.option("--workers", type=int, default=None, help="Worker pool size (default: CPU count).")
@click.option("--max-hops", type=int, default=flowgraph.DEFAULT_MAX_HOPS, show_default=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=Path("out"), show_default=True)
def cmd_run(flow_path: Path, seed: int, workers: int | None, max_hops: int, out_dir: Path):
    """Execute a flow and write its results."""
    try:
        graph, cfg, benchmark = load_flow_file(flow_path)
    except (FlowFileError, FlowforgeError, ValueError) as exc:
        _fail(EXIT_USAGE, str(exc))
    diagnostics = flowgraph.validate(graph)
    if diagnostics:
        for diag in diagnostics:
            click.echo(str(diag), err=True)
        sys.exit(EXIT_VALIDATION)

    backend = SyntheticBackend(benchmark)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        result = flowgraph.run(graph, cfg, backend, workers=workers, max_hops=max_hops)
    except ConfigError as exc:
        _fail(EXIT_VALIDATION, str(exc))

    result_json = json.dumps(result.to_json_dict(), sort_keys=True, indent=2) + "\n"
    (out_dir / "flow_result.json").write_text(result_json, encoding="utf-8")
    outputs = ["flow_result.json"]
    if result.stops:
        (out_dir / "metamodel.json").write_text(
            result.stops[0].mm.to_json(indent=2) + "\n", encoding="utf-8"
        )
        outputs.append("metamodel.json")
    if result.error is None:
        (out_dir / "summary.txt").write_text(_summary_text(result, benchmark), encoding="utf-8")
        outputs.append("summary.txt")
    write_manifest(
        out_dir,
        "run",
        flow_path,
        benchmark,
        seed,
        outputs,
        {"workers": workers, "max_hops": max_hops},
    )
    if result.error is not None:
        _fail(EXIT_RUNTIME, f"flow aborted: {result.error} (partial log in flow_result.json)")
    click.echo(f"flow complete: {len(result.stops)} stop(s), outputs in {out_dir}")
    sys.exit(EXIT_OK)


@main.command("dse")
@click.argument("template_path", type=click.Path(path_type=Path))
@click.option("--orderings", default="SPQ", show_default=True, help="Comma-separated orderings over S, P, Q.")
@click.option("--budget", type=int, default=22, show_default=True)
@click.option("--init-design", type=int, default=8, show_default=True)
@click.option("--weights", default="0.25,0.25,0.25,0.25", show_default=True, help="w_acc,w_dsp,w_lut,w_lat")
@click.option("--limits", default="1.0,inf,inf", show_default=True, help="u_max,t_max,acc_loss_max")
@click.option("--stall-limit", type=int, default=5, show_default=True)
@click.option("--pool-size", type=int, default=2048, show_default=True)
@click.option("--seed", type=int, default=0, envvar="FLOWFORGE_SEED", show_default=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=Path("out"), show_default=True)
def cmd_dse(
    template_path: Path,
    orderings: str,
    budget: int,
    init_design: int,
    weights: str,
    limits: str,
    stall_limit: int,
    pool_size: int,
    seed: int,
    out_dir: Path,
):
    """Run the Bayesian-optimization outer search over tolerance vectors."""
    try:
        template, bounds, benchmark = load_template_file(template_path)
        ordering_list = _parse_orderings(orderings)
        weight_tuple = _parse_weights(weights)
        u_max, t_max, acc_loss_max = _parse_limits(limits)
        config = dse.DseConfig(
            bounds=bounds,
            budget=budget,
            initial_design=init_design,
            weights=weight_tuple,
            u_max=u_max,
            t_max=t_max,
            acc_loss_max=acc_loss_max,
            stall_limit=stall_limit,
            seed=seed,
            pool_size=pool_size,
        )
    except (FlowFileError, FlowforgeError, ValueError) as exc:
        _fail(EXIT_USAGE, str(exc))

    backend = SyntheticBackend(benchmark)
    try:
        result = dse.run_dse(template, ordering_list, config, backend)
    except FlowforgeError as exc:
        _fail(EXIT_RUNTIME, str(exc))

    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "history.jsonl").write_text(
        dse.history_jsonl(result.all_candidates), encoding="utf-8"
    )
    (out_dir / "pareto.csv").write_text(dse.pareto_csv(result.pareto), encoding="utf-8")
    write_manifest(
        out_dir,
        "dse",
        template_path,
        benchmark,
        seed,
        ["history.jsonl", "pareto.csv"],
        {
            "orderings": [str(o) for o in ordering_list],
            "budget": budget,
            "initial_design": init_design,
            "weights": list(weight_tuple),
            "limits": [u_max, t_max, acc_loss_max],
            "stall_limit": stall_limit,
            "pool_size": pool_size,
        },
    )
    for ordering, message in sorted(result.errors.items()):
        click.echo(f"ordering {ordering} failed: {message}", err=True)
    if result.best is not None:
        best = result.best
        click.echo(
            f"best: ordering={best.ordering} theta=({best.theta.alpha_p:.6g},"
            f"{best.theta.alpha_s:.6g},{best.theta.alpha_q:.6g}) "
            f"accuracy={best.metrics.accuracy:.4f} dsp={best.metrics.dsp_used} "
            f"lut={best.metrics.lut_used} score={best.score:.6f}"
        )
    if result.errors and not result.histories:
        sys.exit(EXIT_RUNTIME)
    sys.exit(EXIT_OK)


@main.command("sweep")
@click.argument("template_path", type=click.Path(path_type=Path))
@click.option("--method", type=click.Choice(["grid", "sgs"]), required=True)
@click.option("--grid", "grid_raw", default="7,7,7", show_default=True, help="Points per tolerance axis.")
@click.option("--samples", type=int, default=22, show_default=True, help="Sample count for sgs.")
@click.option("--ordering", default="SPQ", show_default=True)
@click.option("--weights", default="0.25,0.25,0.25,0.25", show_default=True)
@click.option("--limits", default="1.0,inf,inf", show_default=True)
@click.option("--seed", type=int, default=0, envvar="FLOWFORGE_SEED", show_default=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=Path("out"), show_default=True)
def cmd_sweep(
    template_path: Path,
    method: str,
    grid_raw: str,
    samples: int,
    ordering: str,
    weights: str,
    limits: str,
    seed: int,
    out_dir: Path,
):
    """Run a grid or stochastic-grid baseline sweep over tolerance vectors."""
    try:
        template, bounds, benchmark = load_template_file(template_path)
        counts = tuple(int(c) for c in grid_raw.split(","))
        if len(counts) != 3:
            raise ValueError("--grid must have three comma-separated counts")
        grid = dse.GridSpec(counts)
        ordering_obj = dse.Ordering.parse(ordering)
        weight_tuple = _parse_weights(weights)
        u_max, t_max, acc_loss_max = _parse_limits(limits)
        if method == "sgs" and samples > grid.size:
            raise ValueError(f"--samples {samples} exceeds grid size {grid.size}")
        config = dse.DseConfig(
            bounds=bounds,
            budget=max(grid.size, 1),
            initial_design=1,
            weights=weight_tuple,
            u_max=u_max,
            t_max=t_max,
            acc_loss_max=acc_loss_max,
            seed=seed,
        )
    except (FlowFileError, FlowforgeError, ValueError) as exc:
        _fail(EXIT_USAGE, str(exc))

    backend = SyntheticBackend(benchmark)
    try:
        if method == "grid":
            history = dse.grid_search(template, ordering_obj, grid, config, backend)
        else:
            history = dse.stochastic_grid_search(
                template, ordering_obj, grid, samples, seed, config, backend
            )
    except FlowforgeError as exc:
        _fail(EXIT_RUNTIME, str(exc))

    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "history.jsonl").write_text(dse.history_jsonl(history), encoding="utf-8")
    front = dse.candidate_front(history)
    (out_dir / "pareto.csv").write_text(dse.pareto_csv(front), encoding="utf-8")
    write_manifest(
        out_dir,
        "sweep",
        template_path,
        benchmark,
        seed,
        ["history.jsonl", "pareto.csv"],
        {
            "method": method,
            "grid": list(counts),
            "samples": samples if method == "sgs" else None,
            "ordering": str(ordering_obj),
            "weights": list(weight_tuple),
            "limits": [u_max, t_max, acc_loss_max],
        },
    )
    click.echo(f"{method} sweep complete: {len(history)} evaluations, outputs in {out_dir}")
    sys.exit(EXIT_OK)


@main.command("report")
@click.argument("history_path", type=click.Path(path_type=Path))
@click.option("--objectives", default="accuracy:max,dsp:min", show_default=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=Path("out"), show_default=True)
def cmd_report(history_path: Path, objectives: str, out_dir: Path):
    """Compute the Pareto front and a plot-ready TSV from a history file."""
    try:
        pairs = []
        for token in objectives.split(","):
            token = token.strip()
            if not token:
                continue
            name, _, direction = token.partition(":")
            direction = direction or "min"
            if name not in netmodel.METRIC_FIELDS:
                raise ValueError(f"unknown objective name {name!r}")
            if direction not in ("min", "max"):
                raise ValueError(f"objective {name}: direction must be min or max")
            pairs.append((name, direction))
        if not pairs:
            raise ValueError("no objectives given")
    except ValueError as exc:
        _fail(EXIT_USAGE, str(exc))

    try:
        history = dse.parse_history_jsonl(history_path.read_text(encoding="utf-8"))
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        _fail(EXIT_USAGE, f"cannot parse history {history_path}: {exc}")

    out_dir.mkdir(parents=True, exist_ok=True)
    if not history:
        click.echo("warning: empty history, emitting empty frontier", err=True)
        (out_dir / "pareto.csv").write_text(dse.PARETO_CSV_HEADER + "\n", encoding="utf-8")
        (out_dir / "report.tsv").write_text(
            "eval_index\tscore\tincumbent_score\ton_frontier\n", encoding="utf-8"
        )
        sys.exit(EXIT_OK)

    front = dse.candidate_front(history, tuple(pairs))
    primary_name, primary_dir = pairs[0]
    front_sorted = sorted(
        front,
        key=lambda c: netmodel.metric_value(c.metrics, primary_name),
        reverse=(primary_dir == "max"),
    )
    (out_dir / "pareto.csv").write_text(dse.pareto_csv(front_sorted), encoding="utf-8")

    front_ids = {id(c) for c in front}
    rows = ["eval_index\tscore\tincumbent_score\t" + "\t".join(n for n, _ in pairs) + "\ton_frontier"]
    incumbent = float("-inf")
    for candidate in history:
        incumbent = max(incumbent, candidate.score)
        values = "\t".join(
            repr(netmodel.metric_value(candidate.metrics, name)) for name, _ in pairs
        )
        rows.append(
            f"{candidate.eval_index}\t{candidate.score!r}\t{incumbent!r}\t{values}"
            f"\t{1 if id(candidate) in front_ids else 0}"
        )
    (out_dir / "report.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    click.echo(f"report complete: {len(front)} frontier point(s), outputs in {out_dir}")
    sys.exit(EXIT_OK)


@main.group("registry")
def cmd_registry():
    """Inspect the registered flow-control behaviors."""


@cmd_registry.command("list")
def cmd_registry_list():
    """List registered predicate, action and reducer names."""
    click.echo("predicates:")
    for name in ktasks.predicate_names():
        click.echo(f"  {name}")
    click.echo("actions:")
    for name in ktasks.action_names():
        click.echo(f"  {name}")
    click.echo("reducers:")
    for name in ktasks.reducer_names():
        click.echo(f"  {name}")
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
