"""Shared fixtures: controlled synthetic benchmarks and metric fabricators."""

from __future__ import annotations

import pytest

from flowforge.netmodel import (
    Benchmark,
    DeviceProfile,
    Layer,
    LayerAccuracyModel,
    LayerQuantModel,
    Metrics,
    ResourceModel,
    ScalingModel,
    SyntheticBackend,
    TimingModel,
    WeightStats,
)

DEFAULT_DEVICES = [
    {"name": "dev-a", "vendor": "A", "dsp": 2000, "lut": 200000, "ff": 400000, "bram": 500},
    {"name": "dev-b", "vendor": "B", "dsp": 100, "lut": 200000, "ff": 400000, "bram": 500},
]


def make_benchmark(
    name: str = "synth-test",
    base_accuracy: float = 0.9,
    layers: list[dict] | None = None,
    sigma: float = 0.4,
    s_min: float = 0.5,
    devices: list[dict] | None = None,
    default_device: str | None = None,
    lut_per_mult: float = 0.55,
    input_bits: int = 18,
    ff_per_mult: float = 4.0,
    clock_period_ns: float = 5.0,
) -> Benchmark:
    """Build a dense-chain benchmark from compact per-layer dicts.

    Each layer dict may set: id, mult, kappa, redundancy, penalty,
    floors (w, b, r), w_max, b_max. Dims are a uniform chain so the
    descriptor always validates.
    """
    layers = layers or [{}]
    devices = devices or DEFAULT_DEVICES
    layer_objs: list[Layer] = []
    depth: dict[str, int] = {}
    acc: dict[str, LayerAccuracyModel] = {}
    quant: dict[str, LayerQuantModel] = {}
    for i, spec in enumerate(layers):
        lid = spec.get("id", f"d{i + 1}")
        layer_objs.append(
            Layer(
                id=lid,
                kind=spec.get("kind", "dense"),
                input_dims=(8,),
                output_dims=(8,),
                weight_stats=WeightStats(
                    spec.get("w_max", 1.5), spec.get("b_max", 0.75)
                ),
                mult_count=spec.get("mult", 1000),
            )
        )
        depth[lid] = spec.get("depth", 4)
        acc[lid] = LayerAccuracyModel(
            kappa=spec.get("kappa", 0.5), redundancy=spec.get("redundancy", 0.7)
        )
        floors = spec.get("floors", (8, 6, 10))
        quant[lid] = LayerQuantModel(
            penalty_per_bit=spec.get("penalty", 0.004),
            floors={"weights": floors[0], "biases": floors[1], "results": floors[2]},
        )
    return Benchmark(
        name=name,
        seed=0,
        base_accuracy=base_accuracy,
        layers=layer_objs,
        pipeline_depth=depth,
        accuracy_model=acc,
        quant_model=quant,
        scaling=ScalingModel(sigma=sigma, s_min=s_min),
        resources=ResourceModel(
            lut_per_mult=lut_per_mult,
            dsp_bits_threshold=9,
            ff_per_mult=ff_per_mult,
            bram_bits_per_block=36864.0,
            input_bits=input_bits,
        ),
        timing=TimingModel(clock_period_ns=clock_period_ns, ii_factor=1.0),
        devices=[
            DeviceProfile(
                name=d["name"],
                vendor=d["vendor"],
                dsp_capacity=d["dsp"],
                lut_capacity=d["lut"],
                ff_capacity=d["ff"],
                bram_capacity=d["bram"],
            )
            for d in devices
        ],
        default_device=default_device or devices[0]["name"],
    )


def mk_metrics(
    accuracy: float = 0.9,
    accuracy_loss: float = 0.0,
    latency_ns: float = 100.0,
    ii_ns: float = 5.0,
    dsp: int = 10,
    lut: int = 1000,
    ff: int = 2000,
    bram: int = 4,
    dsp_util: float | None = None,
    lut_util: float | None = None,
    ff_util: float | None = None,
    bram_util: float | None = None,
) -> Metrics:
    return Metrics(
        accuracy=accuracy,
        accuracy_loss=accuracy_loss,
        latency_ns=latency_ns,
        initiation_interval_ns=ii_ns,
        dsp_used=dsp,
        lut_used=lut,
        ff_used=ff,
        bram_used=bram,
        dsp_util=dsp_util if dsp_util is not None else dsp / 1000.0,
        lut_util=lut_util if lut_util is not None else lut / 100000.0,
        ff_util=ff_util if ff_util is not None else ff / 200000.0,
        bram_util=bram_util if bram_util is not None else bram / 500.0,
    )


@pytest.fixture
def jetdnn_backend() -> SyntheticBackend:
    return SyntheticBackend(Benchmark.builtin("jetdnn-synth"))


@pytest.fixture
def small_backend() -> SyntheticBackend:
    return SyntheticBackend(make_benchmark())
