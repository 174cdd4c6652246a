"""Network and kernel model abstractions plus the synthetic evaluation backend.

The optimization tasks transform two model stages:

* ``NetworkDescriptor`` -- a layered network abstraction carrying the
  global pruning rate and scaling factor,
* ``KernelDescriptor``  -- the hardware-kernel view: per-virtual-layer
  fixed-point formats for weights, biases and results, bound to a device
  profile and clock.

A virtual layer groups one compute layer (dense/conv2d/recurrent) with
the passive operations that follow it (pool, batchnorm, activation,
flatten); all members share the compute layer's output precision.

The shipped backend is fully synthetic: every metric is a closed-form,
deterministic function of the model state and a benchmark file's
constants. Accuracy degrades piecewise-linearly once pruning, scaling or
bit-width reduction pass per-layer knees ("free lunch, then cliff"),
which is exactly the landscape the inner searches are designed to
exploit. Resource usage follows a multiplier-counting model where narrow
multiplies map to LUTs instead of DSP blocks; vendor-B devices map every
multiplier to LUTs.
"""

from __future__ import annotations

import copy
import json
import math
import threading
from dataclasses import dataclass, field
from importlib import resources as importlib_resources
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigError, ExecutionError, FlowforgeError
from .metamodel import ConfigStore, MetaModel

COMPUTE_KINDS = frozenset({"dense", "conv2d", "recurrent"})
PASSIVE_KINDS = frozenset({"pool", "batchnorm", "activation", "flatten"})
LAYER_KINDS = COMPUTE_KINDS | PASSIVE_KINDS

PRECISION_KINDS = ("weights", "biases", "results")

BENCHMARK_SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# Fixed-point formats
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Fixed:
    """A signed fixed-point format: total bits and integer bits (incl. sign)."""

    total_bits: int
    integer_bits: int

    def __post_init__(self):
        if not (2 <= self.total_bits <= 32):
            raise ValueError(f"total_bits must be in [2, 32], got {self.total_bits}")
        if not (1 <= self.integer_bits <= self.total_bits):
            raise ValueError(
                f"integer_bits must be in [1, total_bits], got {self.integer_bits}"
            )

    @property
    def fraction_bits(self) -> int:
        return self.total_bits - self.integer_bits

    def with_total(self, total_bits: int) -> "Fixed":
        return Fixed(total_bits, self.integer_bits)

    def spec_string(self) -> str:
        return f"ap_fixed<{self.total_bits},{self.integer_bits}>"

    @classmethod
    def parse(cls, raw: Any) -> "Fixed":
        """Accepts 'ap_fixed<18,8>', '18,8', or a two-number list."""
        if isinstance(raw, Fixed):
            return raw
        if isinstance(raw, (list, tuple)) and len(raw) == 2:
            return cls(int(raw[0]), int(raw[1]))
        if isinstance(raw, str):
            text = raw.strip()
            if text.startswith("ap_fixed<") and text.endswith(">"):
                text = text[len("ap_fixed<") : -1]
            parts = [p.strip() for p in text.split(",")]
            if len(parts) == 2:
                return cls(int(parts[0]), int(parts[1]))
        raise ConfigError(f"cannot parse fixed-point format from {raw!r}")


DEFAULT_PRECISION = Fixed(18, 8)


def lossless_integer_bits(max_abs_value: float) -> int:
    """Smallest integer-bit count (incl. sign) representing a magnitude without saturation.

    Returns the minimal I >= 1 with max_abs_value < 2**(I-1). Uses exact
    exponent extraction rather than floating log2 so values at power-of-two
    boundaries resolve correctly.
    """
    v = float(max_abs_value)
    if not math.isfinite(v) or v <= 0.0:
        raise ValueError(f"max_abs_value must be positive and finite, got {max_abs_value!r}")
    _, exponent = math.frexp(v)  # v = m * 2**exponent with m in [0.5, 1)
    return max(1, exponent + 1)


# ---------------------------------------------------------------------------
# Network stage
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightStats:
    max_abs_weight: float
    max_abs_bias: float


@dataclass(frozen=True)
class Layer:
    id: str
    kind: str
    input_dims: tuple[int, ...]
    output_dims: tuple[int, ...]
    weight_stats: WeightStats | None = None
    mult_count: int = 0

    def validate(self) -> None:
        if not self.id:
            raise ValueError("layer id must be non-empty")
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        for dims in (self.input_dims, self.output_dims):
            if not dims or any(int(d) <= 0 for d in dims):
                raise ValueError(f"layer {self.id}: dims must be positive, got {dims}")
        if self.mult_count < 0:
            raise ValueError(f"layer {self.id}: mult_count must be >= 0")
        if self.kind in COMPUTE_KINDS:
            if self.weight_stats is None:
                raise ValueError(f"compute layer {self.id} needs weight_stats")
            if self.weight_stats.max_abs_weight <= 0 or self.weight_stats.max_abs_bias <= 0:
                raise ValueError(f"layer {self.id}: weight stats must be positive")


@dataclass
class NetworkDescriptor:
    """Layered network model plus the global compression state."""

    layers: list[Layer]
    base_accuracy: float
    pruning_rate: float = 0.0
    scale_factor: float = 1.0

    def validate(self) -> None:
        if not self.layers:
            raise ValueError("network must contain at least one layer")
        seen: set[str] = set()
        for layer in self.layers:
            layer.validate()
            if layer.id in seen:
                raise ValueError(f"duplicate layer id {layer.id!r}")
            seen.add(layer.id)
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if tuple(prev.output_dims) != tuple(nxt.input_dims):
                raise ValueError(
                    f"dims mismatch: {prev.id} outputs {prev.output_dims} but "
                    f"{nxt.id} expects {nxt.input_dims}"
                )
        if not (0.0 <= self.base_accuracy <= 1.0):
            raise ValueError("base_accuracy must be in [0, 1]")
        if not (0.0 <= self.pruning_rate < 1.0):
            raise ValueError("pruning_rate must be in [0, 1)")
        if not (0.0 < self.scale_factor <= 1.0):
            raise ValueError("scale_factor must be in (0, 1]")

    def compute_layers(self) -> list[Layer]:
        return [l for l in self.layers if l.kind in COMPUTE_KINDS]

    def with_pruning(self, rate: float) -> "NetworkDescriptor":
        # Layers are immutable; sharing them keeps probe copies cheap.
        return NetworkDescriptor(
            layers=list(self.layers),
            base_accuracy=self.base_accuracy,
            pruning_rate=float(rate),
            scale_factor=self.scale_factor,
        )

    def with_scale(self, factor: float) -> "NetworkDescriptor":
        return NetworkDescriptor(
            layers=list(self.layers),
            base_accuracy=self.base_accuracy,
            pruning_rate=self.pruning_rate,
            scale_factor=float(factor),
        )

    def to_json_dict(self) -> dict:
        return {
            "layers": [
                {
                    "id": l.id,
                    "kind": l.kind,
                    "input_dims": list(l.input_dims),
                    "output_dims": list(l.output_dims),
                    "weight_stats": (
                        {
                            "max_abs_weight": l.weight_stats.max_abs_weight,
                            "max_abs_bias": l.weight_stats.max_abs_bias,
                        }
                        if l.weight_stats is not None
                        else None
                    ),
                    "mult_count": l.mult_count,
                }
                for l in self.layers
            ],
            "base_accuracy": self.base_accuracy,
            "pruning_rate": self.pruning_rate,
            "scale_factor": self.scale_factor,
        }

    @classmethod
    def from_json_dict(cls, doc: Mapping[str, Any]) -> "NetworkDescriptor":
        layers = [_layer_from_dict(row) for row in doc["layers"]]
        return cls(
            layers=layers,
            base_accuracy=float(doc["base_accuracy"]),
            pruning_rate=float(doc.get("pruning_rate", 0.0)),
            scale_factor=float(doc.get("scale_factor", 1.0)),
        )


def _layer_from_dict(row: Mapping[str, Any]) -> Layer:
    stats = row.get("weight_stats")
    return Layer(
        id=str(row["id"]),
        kind=str(row["kind"]),
        input_dims=tuple(int(d) for d in row["input_dims"]),
        output_dims=tuple(int(d) for d in row["output_dims"]),
        weight_stats=(
            WeightStats(float(stats["max_abs_weight"]), float(stats["max_abs_bias"]))
            if stats
            else None
        ),
        mult_count=int(row.get("mult_count", 0)),
    )


# ---------------------------------------------------------------------------
# Kernel stage
# ---------------------------------------------------------------------------


@dataclass
class VirtualLayer:
    """One compute layer plus its trailing passive operations, sharing precisions."""

    id: str
    compute_layer_id: str
    member_layer_ids: tuple[str, ...]
    precisions: dict[str, Fixed]
    reducible: dict[str, bool] = field(
        default_factory=lambda: {k: True for k in PRECISION_KINDS}
    )

    def validate(self) -> None:
        if not self.member_layer_ids:
            raise ValueError(f"virtual layer {self.id}: no member layers")
        if self.compute_layer_id not in self.member_layer_ids:
            raise ValueError(f"virtual layer {self.id}: compute layer not a member")
        for kind in PRECISION_KINDS:
            if kind not in self.precisions:
                raise ValueError(f"virtual layer {self.id}: missing {kind} precision")
            if kind not in self.reducible:
                raise ValueError(f"virtual layer {self.id}: missing {kind} reducible flag")

    def copy(self) -> "VirtualLayer":
        # Fixed formats are immutable; only the dicts need duplicating.
        return VirtualLayer(
            id=self.id,
            compute_layer_id=self.compute_layer_id,
            member_layer_ids=self.member_layer_ids,
            precisions=dict(self.precisions),
            reducible=dict(self.reducible),
        )


@dataclass
class KernelDescriptor:
    """Quantization-relevant structure of a hardware kernel."""

    source_network_version: int
    virtual_layers: list[VirtualLayer]
    device: str
    clock_period_ns: float

    def validate(self) -> None:
        if not self.virtual_layers:
            raise ValueError("kernel must contain at least one virtual layer")
        if self.clock_period_ns <= 0:
            raise ValueError("clock_period_ns must be positive")
        for vl in self.virtual_layers:
            vl.validate()

    def validate_against(self, net: NetworkDescriptor) -> None:
        """Virtual layers must cover the network's compute layers exactly once."""
        self.validate()
        covered = [vl.compute_layer_id for vl in self.virtual_layers]
        expected = [l.id for l in net.compute_layers()]
        if covered != expected:
            raise ExecutionError(
                f"kernel virtual layers {covered} do not cover compute layers {expected}"
            )
        known = {l.id for l in net.layers}
        for vl in self.virtual_layers:
            unknown = [m for m in vl.member_layer_ids if m not in known]
            if unknown:
                raise ExecutionError(
                    f"kernel virtual layer {vl.id} references unknown layers {unknown}"
                )

    def precision(self, vl_id: str, kind: str) -> Fixed:
        for vl in self.virtual_layers:
            if vl.id == vl_id:
                return vl.precisions[kind]
        raise KeyError(vl_id)

    def copy(self) -> "KernelDescriptor":
        return KernelDescriptor(
            source_network_version=self.source_network_version,
            virtual_layers=[vl.copy() for vl in self.virtual_layers],
            device=self.device,
            clock_period_ns=self.clock_period_ns,
        )

    def to_json_dict(self) -> dict:
        return {
            "source_network_version": self.source_network_version,
            "device": self.device,
            "clock_period_ns": self.clock_period_ns,
            "virtual_layers": [
                {
                    "id": vl.id,
                    "compute_layer_id": vl.compute_layer_id,
                    "member_layer_ids": list(vl.member_layer_ids),
                    "precisions": {
                        k: [p.total_bits, p.integer_bits] for k, p in vl.precisions.items()
                    },
                    "reducible": dict(vl.reducible),
                }
                for vl in self.virtual_layers
            ],
        }

    @classmethod
    def from_json_dict(cls, doc: Mapping[str, Any]) -> "KernelDescriptor":
        vls = []
        for row in doc["virtual_layers"]:
            vls.append(
                VirtualLayer(
                    id=str(row["id"]),
                    compute_layer_id=str(row["compute_layer_id"]),
                    member_layer_ids=tuple(str(m) for m in row["member_layer_ids"]),
                    precisions={
                        k: Fixed(int(v[0]), int(v[1])) for k, v in row["precisions"].items()
                    },
                    reducible={k: bool(v) for k, v in row["reducible"].items()},
                )
            )
        return cls(
            source_network_version=int(doc["source_network_version"]),
            virtual_layers=vls,
            device=str(doc["device"]),
            clock_period_ns=float(doc["clock_period_ns"]),
        )


def payload_from_json_dict(stage: str, doc: Mapping[str, Any]):
    if stage == "network":
        return NetworkDescriptor.from_json_dict(doc)
    if stage == "kernel":
        return KernelDescriptor.from_json_dict(doc)
    raise FlowforgeError(f"unknown model stage {stage!r}")


def build_virtual_layers(
    net: NetworkDescriptor, default_precision: Fixed = DEFAULT_PRECISION
) -> list[VirtualLayer]:
    """Group each compute layer with its trailing passive layers.

    A passive prefix before the first compute layer attaches to that first
    virtual layer. All precisions start at the supplied default format and
    are marked reducible.
    """
    net.validate()
    if not net.compute_layers():
        raise ValueError("network has no compute layer; cannot build virtual layers")

    groups: list[list[Layer]] = []
    prefix: list[Layer] = []
    for layer in net.layers:
        if layer.kind in COMPUTE_KINDS:
            groups.append(prefix + [layer])
            prefix = []
        elif groups:
            groups[-1].append(layer)
        else:
            prefix.append(layer)

    out = []
    for members in groups:
        compute = next(l for l in members if l.kind in COMPUTE_KINDS)
        out.append(
            VirtualLayer(
                id=compute.id,
                compute_layer_id=compute.id,
                member_layer_ids=tuple(l.id for l in members),
                precisions={k: default_precision for k in PRECISION_KINDS},
                reducible={k: True for k in PRECISION_KINDS},
            )
        )
    return out


def make_kernel(
    net: NetworkDescriptor,
    default_precision: Fixed,
    device: str,
    clock_period_ns: float,
    source_network_version: int,
) -> KernelDescriptor:
    return KernelDescriptor(
        source_network_version=source_network_version,
        virtual_layers=build_virtual_layers(net, default_precision),
        device=device,
        clock_period_ns=clock_period_ns,
    )


# ---------------------------------------------------------------------------
# Metrics and devices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    accuracy_loss: float
    latency_ns: float
    initiation_interval_ns: float
    dsp_used: int
    lut_used: int
    ff_used: int
    bram_used: int
    dsp_util: float
    lut_util: float
    ff_util: float
    bram_util: float

    def max_utilization(self) -> float:
        return max(self.dsp_util, self.lut_util, self.ff_util, self.bram_util)

    def to_json_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "accuracy_loss": self.accuracy_loss,
            "latency_ns": self.latency_ns,
            "initiation_interval_ns": self.initiation_interval_ns,
            "dsp_used": self.dsp_used,
            "lut_used": self.lut_used,
            "ff_used": self.ff_used,
            "bram_used": self.bram_used,
            "dsp_util": self.dsp_util,
            "lut_util": self.lut_util,
            "ff_util": self.ff_util,
            "bram_util": self.bram_util,
        }

    @classmethod
    def from_json_dict(cls, doc: Mapping[str, Any]) -> "Metrics":
        return cls(
            accuracy=float(doc["accuracy"]),
            accuracy_loss=float(doc["accuracy_loss"]),
            latency_ns=float(doc["latency_ns"]),
            initiation_interval_ns=float(doc["initiation_interval_ns"]),
            dsp_used=int(doc["dsp_used"]),
            lut_used=int(doc["lut_used"]),
            ff_used=int(doc["ff_used"]),
            bram_used=int(doc["bram_used"]),
            dsp_util=float(doc["dsp_util"]),
            lut_util=float(doc["lut_util"]),
            ff_util=float(doc["ff_util"]),
            bram_util=float(doc["bram_util"]),
        )


# Canonical metric names usable in reduce specs, report objectives and CSVs.
METRIC_FIELDS = {
    "accuracy": "accuracy",
    "accuracy_loss": "accuracy_loss",
    "latency_ns": "latency_ns",
    "initiation_interval_ns": "initiation_interval_ns",
    "dsp": "dsp_used",
    "lut": "lut_used",
    "ff": "ff_used",
    "bram": "bram_used",
    "dsp_util": "dsp_util",
    "lut_util": "lut_util",
    "ff_util": "ff_util",
    "bram_util": "bram_util",
}


def metric_value(metrics: Metrics, name: str) -> float:
    if name not in METRIC_FIELDS:
        raise FlowforgeError(f"unknown metric name {name!r}")
    return float(getattr(metrics, METRIC_FIELDS[name]))


@dataclass(frozen=True)
class DeviceProfile:
    name: str
    dsp_capacity: int
    lut_capacity: int
    ff_capacity: int
    bram_capacity: int
    vendor: str

    def __post_init__(self):
        if self.vendor not in ("A", "B"):
            raise ValueError(f"vendor must be 'A' or 'B', got {self.vendor!r}")
        for label, cap in (
            ("dsp", self.dsp_capacity),
            ("lut", self.lut_capacity),
            ("ff", self.ff_capacity),
            ("bram", self.bram_capacity),
        ):
            if cap <= 0:
                raise ValueError(f"device {self.name}: {label} capacity must be > 0")


# ---------------------------------------------------------------------------
# Benchmark definition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LayerAccuracyModel:
    kappa: float  # accuracy lost per unit of pruning beyond the knee
    redundancy: float  # pruning rate this layer absorbs for free


@dataclass(frozen=True)
class LayerQuantModel:
    penalty_per_bit: float  # accuracy lost per bit below a floor
    floors: dict[str, int]  # free-bits floor per precision kind


@dataclass(frozen=True)
class ScalingModel:
    sigma: float  # accuracy lost per unit of scaling below the knee
    s_min: float  # smallest scale factor that is still free


@dataclass(frozen=True)
class ResourceModel:
    lut_per_mult: float
    dsp_bits_threshold: int  # weight bits above this use a DSP block
    ff_per_mult: float
    bram_bits_per_block: float
    input_bits: int  # width feeding the first virtual layer


@dataclass(frozen=True)
class TimingModel:
    clock_period_ns: float
    ii_factor: float


class Benchmark:
    """A complete synthetic workload: layers, cost-model constants, devices."""

    def __init__(
        self,
        name: str,
        seed: int,
        base_accuracy: float,
        layers: list[Layer],
        pipeline_depth: dict[str, int],
        accuracy_model: dict[str, LayerAccuracyModel],
        quant_model: dict[str, LayerQuantModel],
        scaling: ScalingModel,
        resources: ResourceModel,
        timing: TimingModel,
        devices: list[DeviceProfile],
        default_device: str,
    ):
        self.name = name
        self.seed = int(seed)
        self.base_accuracy = float(base_accuracy)
        self.layers = layers
        self.pipeline_depth = pipeline_depth
        self.accuracy_model = accuracy_model
        self.quant_model = quant_model
        self.scaling = scaling
        self.resources = resources
        self.timing = timing
        self.devices = {d.name: d for d in devices}
        self.default_device = default_device
        self._validate()

    def _validate(self) -> None:
        net = self.network()
        net.validate()
        if self.default_device not in self.devices:
            raise ValueError(f"default device {self.default_device!r} not declared")
        for layer in net.compute_layers():
            if layer.id not in self.accuracy_model:
                raise ValueError(f"missing accuracy constants for layer {layer.id}")
            if layer.id not in self.quant_model:
                raise ValueError(f"missing quantization constants for layer {layer.id}")
            for kind in PRECISION_KINDS:
                if kind not in self.quant_model[layer.id].floors:
                    raise ValueError(f"layer {layer.id}: missing {kind} floor")
        for layer in net.layers:
            if layer.id not in self.pipeline_depth:
                raise ValueError(f"missing pipeline depth for layer {layer.id}")
        if not (0.0 < self.scaling.s_min <= 1.0):
            raise ValueError("s_min must be in (0, 1]")

    def network(self) -> NetworkDescriptor:
        return NetworkDescriptor(
            layers=copy.deepcopy(self.layers), base_accuracy=self.base_accuracy
        )

    def device(self, name: str) -> DeviceProfile:
        if name not in self.devices:
            raise ExecutionError(f"unknown device profile {name!r}")
        return self.devices[name]

    def default_device_for(self, vendor: str) -> DeviceProfile:
        default = self.devices[self.default_device]
        if default.vendor == vendor:
            return default
        for dev in self.devices.values():
            if dev.vendor == vendor:
                return dev
        raise ExecutionError(f"benchmark {self.name} ships no vendor-{vendor} device")

    # -- serialization ----------------------------------------------------

    def to_json_dict(self) -> dict:
        rows = []
        for layer in self.layers:
            row: dict[str, Any] = {
                "id": layer.id,
                "kind": layer.kind,
                "input_dims": list(layer.input_dims),
                "output_dims": list(layer.output_dims),
                "mult_count": layer.mult_count,
                "pipeline_depth": self.pipeline_depth[layer.id],
            }
            if layer.weight_stats is not None:
                row["weight_stats"] = {
                    "max_abs_weight": layer.weight_stats.max_abs_weight,
                    "max_abs_bias": layer.weight_stats.max_abs_bias,
                }
            if layer.id in self.accuracy_model:
                am = self.accuracy_model[layer.id]
                row["accuracy"] = {"kappa": am.kappa, "redundancy": am.redundancy}
            if layer.id in self.quant_model:
                qm = self.quant_model[layer.id]
                row["quant"] = {"penalty_per_bit": qm.penalty_per_bit, "floors": dict(qm.floors)}
            rows.append(row)
        return {
            "schema_version": BENCHMARK_SCHEMA_VERSION,
            "name": self.name,
            "seed": self.seed,
            "base_accuracy": self.base_accuracy,
            "layers": rows,
            "scaling": {"sigma": self.scaling.sigma, "s_min": self.scaling.s_min},
            "resources": {
                "lut_per_mult": self.resources.lut_per_mult,
                "dsp_bits_threshold": self.resources.dsp_bits_threshold,
                "ff_per_mult": self.resources.ff_per_mult,
                "bram_bits_per_block": self.resources.bram_bits_per_block,
                "input_bits": self.resources.input_bits,
            },
            "timing": {
                "clock_period_ns": self.timing.clock_period_ns,
                "ii_factor": self.timing.ii_factor,
            },
            "devices": [
                {
                    "name": d.name,
                    "vendor": d.vendor,
                    "dsp": d.dsp_capacity,
                    "lut": d.lut_capacity,
                    "ff": d.ff_capacity,
                    "bram": d.bram_capacity,
                }
                for d in self.devices.values()
            ],
            "default_device": self.default_device,
        }

    @classmethod
    def from_json_dict(cls, doc: Mapping[str, Any]) -> "Benchmark":
        version = doc.get("schema_version", BENCHMARK_SCHEMA_VERSION)
        if version != BENCHMARK_SCHEMA_VERSION:
            raise FlowforgeError(f"unsupported benchmark schema_version {version!r}")
        layers: list[Layer] = []
        depth: dict[str, int] = {}
        acc: dict[str, LayerAccuracyModel] = {}
        quant: dict[str, LayerQuantModel] = {}
        for row in doc["layers"]:
            layer = _layer_from_dict(row)
            layers.append(layer)
            depth[layer.id] = int(row.get("pipeline_depth", 1))
            if "accuracy" in row:
                acc[layer.id] = LayerAccuracyModel(
                    kappa=float(row["accuracy"]["kappa"]),
                    redundancy=float(row["accuracy"]["redundancy"]),
                )
            if "quant" in row:
                quant[layer.id] = LayerQuantModel(
                    penalty_per_bit=float(row["quant"]["penalty_per_bit"]),
                    floors={k: int(v) for k, v in row["quant"]["floors"].items()},
                )
        res = doc["resources"]
        timing = doc["timing"]
        return cls(
            name=str(doc["name"]),
            seed=int(doc.get("seed", 0)),
            base_accuracy=float(doc["base_accuracy"]),
            layers=layers,
            pipeline_depth=depth,
            accuracy_model=acc,
            quant_model=quant,
            scaling=ScalingModel(
                sigma=float(doc["scaling"]["sigma"]), s_min=float(doc["scaling"]["s_min"])
            ),
            resources=ResourceModel(
                lut_per_mult=float(res["lut_per_mult"]),
                dsp_bits_threshold=int(res.get("dsp_bits_threshold", 9)),
                ff_per_mult=float(res["ff_per_mult"]),
                bram_bits_per_block=float(res["bram_bits_per_block"]),
                input_bits=int(res.get("input_bits", DEFAULT_PRECISION.total_bits)),
            ),
            timing=TimingModel(
                clock_period_ns=float(timing["clock_period_ns"]),
                ii_factor=float(timing["ii_factor"]),
            ),
            devices=[
                DeviceProfile(
                    name=str(d["name"]),
                    vendor=str(d["vendor"]),
                    dsp_capacity=int(d["dsp"]),
                    lut_capacity=int(d["lut"]),
                    ff_capacity=int(d["ff"]),
                    bram_capacity=int(d["bram"]),
                )
                for d in doc["devices"]
            ],
            default_device=str(doc["default_device"]),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "Benchmark":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))

    @classmethod
    def builtin(cls, name: str) -> "Benchmark":
        """Load one of the benchmarks shipped with the package."""
        resource = importlib_resources.files("flowforge") / "benchmarks" / f"{name}.json"
        if not resource.is_file():
            raise FlowforgeError(f"no builtin benchmark named {name!r}")
        return cls.from_json_dict(json.loads(resource.read_text(encoding="utf-8")))


def builtin_benchmark_names() -> list[str]:
    folder = importlib_resources.files("flowforge") / "benchmarks"
    return sorted(p.name[: -len(".json")] for p in folder.iterdir() if p.name.endswith(".json"))


# ---------------------------------------------------------------------------
# Evaluation backend
# ---------------------------------------------------------------------------


class EvaluationBackend:
    """Interface evaluated models are scored through.

    Implementations must be pure: identical (network, kernel, device)
    inputs yield identical metrics, and concurrent calls are safe. This is
    the integration point where real synthesis/training adapters would
    plug in.
    """

    @property
    def reference_accuracy(self) -> float:
        raise NotImplementedError

    def network(self) -> NetworkDescriptor:
        raise NotImplementedError

    def evaluate(
        self,
        net: NetworkDescriptor,
        kernel: KernelDescriptor | None = None,
        device: str | None = None,
    ) -> Metrics:
        raise NotImplementedError


class SyntheticBackend(EvaluationBackend):
    """Closed-form deterministic cost model driven by a benchmark file."""

    def __init__(self, benchmark: Benchmark):
        self.benchmark = benchmark
        self._lock = threading.Lock()
        self._eval_count = 0
        # Default-precision virtual-layer views, keyed by layer structure;
        # pruning and scaling probes share one view.
        self._default_views: dict[tuple, list[VirtualLayer]] = {}
        # Reference point: the unmodified network in the default format.
        self._reference = self._accuracy(self.benchmark.network(), None)

    @property
    def reference_accuracy(self) -> float:
        return self._reference

    @property
    def eval_count(self) -> int:
        return self._eval_count

    def reset_eval_count(self) -> None:
        with self._lock:
            self._eval_count = 0

    def network(self) -> NetworkDescriptor:
        return self.benchmark.network()

    def default_device(self, vendor: str | None = None) -> DeviceProfile:
        if vendor is None:
            return self.benchmark.device(self.benchmark.default_device)
        return self.benchmark.default_device_for(vendor)

    # -- model internals ---------------------------------------------------

    def _virtual_view(
        self, net: NetworkDescriptor, kernel: KernelDescriptor | None
    ) -> list[VirtualLayer]:
        if kernel is not None:
            kernel.validate_against(net)
            return kernel.virtual_layers
        key = tuple((l.id, l.kind) for l in net.layers)
        view = self._default_views.get(key)
        if view is None:
            view = build_virtual_layers(net, DEFAULT_PRECISION)
            with self._lock:
                self._default_views[key] = view
        return view

    def _accuracy(self, net: NetworkDescriptor, kernel: KernelDescriptor | None) -> float:
        bench = self.benchmark
        acc = net.base_accuracy
        p = net.pruning_rate
        s = net.scale_factor
        for layer in net.compute_layers():
            model = bench.accuracy_model.get(layer.id)
            if model is None:
                raise ExecutionError(f"no accuracy constants for layer {layer.id!r}")
            acc -= model.kappa * max(0.0, p - model.redundancy)
        acc -= bench.scaling.sigma * max(0.0, bench.scaling.s_min - s)
        for vl in self._virtual_view(net, kernel):
            quant = bench.quant_model.get(vl.compute_layer_id)
            if quant is None:
                raise ExecutionError(f"no quantization constants for layer {vl.compute_layer_id!r}")
            for kind in PRECISION_KINDS:
                bits = vl.precisions[kind].total_bits
                acc -= quant.penalty_per_bit * max(0.0, quant.floors[kind] - bits)
        return min(1.0, max(0.0, acc))

    def evaluate(
        self,
        net: NetworkDescriptor,
        kernel: KernelDescriptor | None = None,
        device: str | None = None,
    ) -> Metrics:
        net.validate()
        bench = self.benchmark
        with self._lock:
            self._eval_count += 1

        if kernel is not None:
            profile = bench.device(kernel.device)
            clock = kernel.clock_period_ns
        else:
            profile = bench.device(device) if device else self.default_device()
            clock = bench.timing.clock_period_ns

        accuracy = self._accuracy(net, kernel)
        loss = max(0.0, self._reference - accuracy)

        res = bench.resources
        vls = self._virtual_view(net, kernel)
        layer_by_id = {l.id: l for l in net.layers}
        p = net.pruning_rate
        s = net.scale_factor

        dsp = 0.0
        lut = 0.0
        ff = 0.0
        bram_bits = 0.0
        in_bits = float(res.input_bits)
        for vl in vls:
            compute = layer_by_id[vl.compute_layer_id]
            scale_exp = 1 if compute.kind == "recurrent" else 2
            mults = compute.mult_count * (1.0 - p) * (s**scale_exp)
            w_bits = vl.precisions["weights"].total_bits
            if profile.vendor == "B" or w_bits <= res.dsp_bits_threshold:
                lut += res.lut_per_mult * w_bits * in_bits * mults
            else:
                dsp += mults
            ff += res.ff_per_mult * mults * w_bits
            bram_bits += mults * w_bits
            in_bits = float(vl.precisions["results"].total_bits)

        latency = sum(bench.pipeline_depth[l.id] for l in net.layers) * clock
        ii = clock * bench.timing.ii_factor

        def count(x: float) -> int:
            return max(0, math.ceil(x - 1e-9))

        dsp_used = count(dsp)
        lut_used = count(lut)
        ff_used = count(ff)
        bram_used = count(bram_bits / res.bram_bits_per_block)
        return Metrics(
            accuracy=accuracy,
            accuracy_loss=loss,
            latency_ns=latency,
            initiation_interval_ns=ii,
            dsp_used=dsp_used,
            lut_used=lut_used,
            ff_used=ff_used,
            bram_used=bram_used,
            dsp_util=dsp_used / profile.dsp_capacity,
            lut_util=lut_used / profile.lut_capacity,
            ff_util=ff_used / profile.ff_capacity,
            bram_util=bram_used / profile.bram_capacity,
        )


# ---------------------------------------------------------------------------
# Functional-task wrappers (model generation and the mock synthesis adapters)
# ---------------------------------------------------------------------------

HLS_TYPE_NAME = "HLS4ML"  # config scope shared by both mock synthesis adapters


def resolve_device_name(
    cfg: ConfigStore, instance: str, backend: SyntheticBackend, vendor: str
) -> str:
    raw = cfg.resolve(instance, HLS_TYPE_NAME, "FPGA_part_number")
    if raw is None:
        return backend.default_device(vendor).name
    return str(raw)


def resolve_default_precision(cfg: ConfigStore, instance: str) -> Fixed:
    raw = cfg.resolve(instance, HLS_TYPE_NAME, "default_precision")
    return Fixed.parse(raw) if raw is not None else DEFAULT_PRECISION


def resolve_clock_period(cfg: ConfigStore, instance: str, backend: SyntheticBackend) -> float:
    raw = cfg.resolve(instance, HLS_TYPE_NAME, "clock_period")
    return float(raw) if raw is not None else backend.benchmark.timing.clock_period_ns


def run_model_gen(mm: MetaModel, instance: str, backend: SyntheticBackend) -> str:
    """Seed the model space with the benchmark's network descriptor.

    Training-related parameters are accepted for interface compatibility
    but have no effect on the synthetic backend; they are recorded in the
    returned detail so the log shows they were seen.
    """
    net = backend.network()
    version = mm.space.put("network", net, None, instance)
    train_en = mm.cfg.resolve(instance, "KerasModelGen", "train_en")
    epochs = mm.cfg.resolve(instance, "KerasModelGen", "train_epochs")
    return (
        f"network v{version}: {len(net.layers)} layers, base accuracy "
        f"{net.base_accuracy:.4f} (train_en={train_en}, train_epochs={epochs}: ignored)"
    )


def run_hls_mock(mm: MetaModel, instance: str, backend: SyntheticBackend, vendor: str) -> str:
    """Mock synthesis adapter: evaluate the current model on a device profile.

    Reuses the latest kernel when it matches the latest network version
    (so a preceding quantization pass keeps its precision map); otherwise
    builds a fresh kernel in the configured default format.
    """
    net_entry = mm.space.latest("network")
    if net_entry is None:
        raise ExecutionError(f"{instance}: no network model to synthesize")
    net: NetworkDescriptor = net_entry.payload
    device = resolve_device_name(mm.cfg, instance, backend, vendor)
    clock = resolve_clock_period(mm.cfg, instance, backend)

    kernel_entry = mm.space.latest("kernel")
    if (
        kernel_entry is not None
        and kernel_entry.payload.source_network_version == net_entry.version
    ):
        kernel = kernel_entry.payload.copy()
        kernel.device = device
        kernel.clock_period_ns = clock
        origin = f"reusing kernel v{kernel_entry.version}"
    else:
        precision = resolve_default_precision(mm.cfg, instance)
        kernel = make_kernel(net, precision, device, clock, net_entry.version)
        origin = f"fresh kernel at {precision.spec_string()}"

    metrics = backend.evaluate(net, kernel)
    version = mm.space.put("kernel", kernel, metrics, instance)
    io_type = mm.cfg.resolve(instance, HLS_TYPE_NAME, "IOType")
    return (
        f"kernel v{version} on {device} ({origin}); accuracy {metrics.accuracy:.4f}, "
        f"dsp {metrics.dsp_used}, lut {metrics.lut_used}"
        + (f"; IOType={io_type} (inert)" if io_type is not None else "")
    )
