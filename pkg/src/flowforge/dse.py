"""Cross-stage design-space exploration.

The outer search treats the tolerance vector (pruning, scaling and
quantization accuracy-loss budgets) as the decision variable. For each
requested task ordering it runs a constrained Bayesian-optimization
loop: a zero-mean Gaussian process with a Matern-5/2 kernel and
homoscedastic noise models the scalarized objective over the unit cube,
expected improvement picks the next tolerance vector from a
low-discrepancy candidate pool, and every evaluation executes the full
inner flow (model generation, the ordering's optimization tasks with
their own inner searches, mock synthesis). Hard constraints are applied
after the fact: a candidate violating utilization, latency or accuracy
limits keeps its metrics but scores the large negative penalty, so it
can never become the incumbent.

Ordering histories are merged by Pareto dominance over (accuracy max,
DSP min, LUT min, latency min). Grid search and stochastic grid search
over the same bounds serve as baselines.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import linalg as sla
from scipy.special import ndtr
from scipy.stats import qmc

from . import flowgraph, pareto
from .errors import ExecutionError, FlowforgeError
from .flowgraph import FlowBuilder, FlowGraph, TaskKind
from .netmodel import EvaluationBackend, Metrics, metric_value

INFEASIBLE_SCORE = -1.0e6

# Metrics entering the scalarized objective.
SCORE_METRICS = ("accuracy_loss", "dsp", "lut", "latency_ns")

# Objectives used when merging ordering histories by dominance.
DEFAULT_OBJECTIVES = (
    ("accuracy", "max"),
    ("dsp", "min"),
    ("lut", "min"),
    ("latency_ns", "min"),
)

PARETO_CSV_HEADER = "ordering,alpha_p,alpha_s,alpha_q,accuracy,latency_ns,dsp,lut,ff,bram,score"

ORDERING_LETTERS = {"S", "P", "Q"}


# ---------------------------------------------------------------------------
# Decision variables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Theta:
    """The tolerance vector: accuracy-loss budgets for P, S and Q tasks."""

    alpha_p: float
    alpha_s: float
    alpha_q: float

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha_p, self.alpha_s, self.alpha_q], dtype=float)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "Theta":
        p, s, q = (float(v) for v in values)
        return cls(p, s, q)


@dataclass(frozen=True)
class ThetaBounds:
    alpha_p: tuple[float, float]
    alpha_s: tuple[float, float]
    alpha_q: tuple[float, float]

    def __post_init__(self):
        for name, (lo, hi) in self.items():
            if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
                raise ValueError(f"bounds for {name} must satisfy lo < hi, got ({lo}, {hi})")
            if lo < 0:
                raise ValueError(f"tolerances are non-negative; {name} lower bound {lo} < 0")

    def items(self) -> list[tuple[str, tuple[float, float]]]:
        return [
            ("alpha_p", self.alpha_p),
            ("alpha_s", self.alpha_s),
            ("alpha_q", self.alpha_q),
        ]

    def lows(self) -> np.ndarray:
        return np.array([self.alpha_p[0], self.alpha_s[0], self.alpha_q[0]])

    def highs(self) -> np.ndarray:
        return np.array([self.alpha_p[1], self.alpha_s[1], self.alpha_q[1]])

    def from_unit(self, unit: np.ndarray) -> Theta:
        lo, hi = self.lows(), self.highs()
        return Theta.from_array(lo + np.asarray(unit, dtype=float) * (hi - lo))

    def to_unit(self, theta: Theta) -> np.ndarray:
        lo, hi = self.lows(), self.highs()
        return (theta.as_array() - lo) / (hi - lo)


@dataclass(frozen=True)
class Ordering:
    """A permutation of a non-empty subset of the optimization tasks S, P, Q."""

    sequence: tuple[str, ...]

    def __post_init__(self):
        if not self.sequence:
            raise ValueError("ordering must not be empty")
        for letter in self.sequence:
            if letter not in ORDERING_LETTERS:
                raise ValueError(f"unknown ordering token {letter!r} (expected S, P or Q)")
        if len(set(self.sequence)) != len(self.sequence):
            raise ValueError(f"ordering {''.join(self.sequence)} repeats a task")

    @classmethod
    def parse(cls, text: str) -> "Ordering":
        return cls(tuple(text.strip().upper()))

    def __str__(self) -> str:
        return "".join(self.sequence)


@dataclass
class Candidate:
    """One evaluated design point of the outer search."""

    theta: Theta
    ordering: Ordering
    metrics: Metrics
    feasible: bool
    score: float
    eval_index: int
    wall_time_s: float

    def to_json_dict(self) -> dict:
        return {
            "theta": {
                "alpha_p": self.theta.alpha_p,
                "alpha_s": self.theta.alpha_s,
                "alpha_q": self.theta.alpha_q,
            },
            "ordering": str(self.ordering),
            "metrics": self.metrics.to_json_dict(),
            "feasible": self.feasible,
            "score": self.score,
            "eval_index": self.eval_index,
            "wall_time_s": self.wall_time_s,
        }

    @classmethod
    def from_json_dict(cls, doc: Mapping) -> "Candidate":
        theta = doc["theta"]
        return cls(
            theta=Theta(float(theta["alpha_p"]), float(theta["alpha_s"]), float(theta["alpha_q"])),
            ordering=Ordering.parse(doc["ordering"]),
            metrics=Metrics.from_json_dict(doc["metrics"]),
            feasible=bool(doc["feasible"]),
            score=float(doc["score"]),
            eval_index=int(doc["eval_index"]),
            wall_time_s=float(doc.get("wall_time_s", 0.0)),
        )


# ---------------------------------------------------------------------------
# Normalization, scoring, feasibility
# ---------------------------------------------------------------------------


def minmax_normalize(values: Sequence[float]) -> tuple[list[float], tuple[float, float]]:
    """Min-max normalize observed values to [0, 1]; a degenerate range maps to 0.5."""
    values = [float(v) for v in values]
    if not values:
        raise ValueError("cannot normalize an empty observation set")
    lo, hi = min(values), max(values)
    if hi == lo:
        return [0.5] * len(values), (lo, hi)
    return [(v - lo) / (hi - lo) for v in values], (lo, hi)


class RangeTracker:
    """Running min/max per score metric, over the observations seen so far."""

    def __init__(self):
        self._ranges: dict[str, tuple[float, float]] = {}

    def update(self, metrics: Metrics) -> None:
        for name in SCORE_METRICS:
            value = metric_value(metrics, name)
            lo, hi = self._ranges.get(name, (value, value))
            self._ranges[name] = (min(lo, value), max(hi, value))

    def normalize(self, metrics: Metrics) -> dict[str, float]:
        out = {}
        for name in SCORE_METRICS:
            value = metric_value(metrics, name)
            if name not in self._ranges:
                raise ValueError(f"no observations recorded for metric {name!r}")
            lo, hi = self._ranges[name]
            out[name] = 0.5 if hi == lo else (value - lo) / (hi - lo)
        return out

    def range_of(self, name: str) -> tuple[float, float]:
        return self._ranges[name]


def check_weights(weights: Sequence[float]) -> tuple[float, float, float, float]:
    ws = tuple(float(w) for w in weights)
    if len(ws) != 4:
        raise ValueError(f"expected 4 objective weights, got {len(ws)}")
    if any(w < 0 for w in ws):
        raise ValueError(f"weights must be non-negative, got {ws}")
    if sum(ws) <= 0:
        raise ValueError("at least one weight must be positive")
    return ws


def scalarize(
    normalized: Mapping[str, float], weights: Sequence[float], feasible: bool
) -> float:
    """Scalar objective, maximized by the search.

    The accuracy term rewards low normalized accuracy loss; resource and
    latency terms penalize. Infeasible candidates receive a fixed large
    negative score regardless of their metrics.
    """
    w1, w2, w3, w4 = check_weights(weights)
    if not feasible:
        return INFEASIBLE_SCORE
    return (
        w1 * (1.0 - normalized["accuracy_loss"])
        - w2 * normalized["dsp"]
        - w3 * normalized["lut"]
        - w4 * normalized["latency_ns"]
    )


def is_feasible(
    metrics: Metrics, u_max: float, t_max: float, acc_loss_max: float
) -> bool:
    """Hard constraints: utilization, latency and accuracy loss, all inclusive."""
    return (
        metrics.max_utilization() <= u_max
        and metrics.latency_ns <= t_max
        and metrics.accuracy_loss <= acc_loss_max
    )


# ---------------------------------------------------------------------------
# Gaussian process surrogate
# ---------------------------------------------------------------------------

_JITTERS = (0.0, 1e-10, 1e-8, 1e-6, 1e-4)


def matern52(r: np.ndarray | float, length_scale: float, signal_variance: float) -> np.ndarray | float:
    """Matern covariance with smoothness 5/2 as a function of distance."""
    a = np.sqrt(5.0) * np.asarray(r, dtype=float) / length_scale
    return signal_variance * (1.0 + a + a * a / 3.0) * np.exp(-a)


def _pairwise_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.maximum((diff * diff).sum(axis=2), 0.0))


class GpModel:
    """Zero-mean GP with a Matern-5/2 kernel and homoscedastic noise.

    Targets are standardized internally; predictions are reported on the
    original scale. The Cholesky factorization is cached at construction.
    """

    def __init__(
        self,
        X: np.ndarray,
        y: np.ndarray,
        length_scale: float,
        signal_variance: float,
        noise_variance: float,
    ):
        self.X = np.atleast_2d(np.asarray(X, dtype=float))
        self.y = np.asarray(y, dtype=float).ravel()
        if len(self.X) != len(self.y):
            raise ValueError("X and y must have matching lengths")
        if len(self.X) < 1:
            raise ValueError("GP needs at least one observation")
        if length_scale <= 0 or signal_variance <= 0 or noise_variance < 0:
            raise ValueError("invalid GP hyperparameters")
        self.length_scale = float(length_scale)
        self.signal_variance = float(signal_variance)
        self.noise_variance = float(noise_variance)

        self._y_mean = float(self.y.mean())
        scale = float(self.y.std())
        self._y_scale = scale if scale > 1e-12 else 1.0
        y_std = (self.y - self._y_mean) / self._y_scale

        K = matern52(_pairwise_dist(self.X, self.X), self.length_scale, self.signal_variance)
        n = len(self.X)
        last_error: Exception | None = None
        for jitter in _JITTERS:
            try:
                self._chol = sla.cholesky(
                    K + (self.noise_variance + jitter) * np.eye(n), lower=True
                )
                break
            except sla.LinAlgError as exc:  # pragma: no cover - rare escalation path
                last_error = exc
        else:  # pragma: no cover
            raise FlowforgeError(f"GP covariance singular even after jitter escalation: {last_error}")
        self._alpha = sla.cho_solve((self._chol, True), y_std)
        self._y_std = y_std

    def log_marginal_likelihood(self) -> float:
        n = len(self.X)
        return float(
            -0.5 * self._y_std @ self._alpha
            - np.log(np.diag(self._chol)).sum()
            - 0.5 * n * math.log(2.0 * math.pi)
        )

    def predict(self, Xq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and variance at query points (original target scale)."""
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        k_star = matern52(_pairwise_dist(Xq, self.X), self.length_scale, self.signal_variance)
        mean_std = k_star @ self._alpha
        v = sla.solve_triangular(self._chol, k_star.T, lower=True)
        var_std = self.signal_variance - (v * v).sum(axis=0)
        mean = self._y_mean + self._y_scale * mean_std
        var = np.maximum(var_std, 0.0) * self._y_scale**2
        return mean, var


def gp_predict(gp: GpModel, x: Sequence[float]) -> tuple[float, float]:
    mean, var = gp.predict(np.asarray(x, dtype=float)[None, :])
    return float(mean[0]), float(var[0])


_FIT_BOUNDS = {
    "length_scale": (0.01, 10.0),
    "signal_variance": (1e-3, 1e3),
    "noise_variance": (1e-8, 0.5),
}


def _lml(X: np.ndarray, y: np.ndarray, ls: float, sf2: float, sn2: float) -> float:
    try:
        return GpModel(X, y, ls, sf2, sn2).log_marginal_likelihood()
    except FlowforgeError:
        return float("-inf")


def gp_fit(X: np.ndarray, y: np.ndarray, seed: int = 0) -> GpModel:
    """Fit hyperparameters by maximizing the log marginal likelihood.

    Multi-start derivative-free search: log-spaced starts over the
    standard boxes plus a couple of seeded random starts, then coordinate
    refinement with multiplicative steps until no improvement.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if len(X) < 2:
        raise ValueError("gp_fit needs at least two observations")

    starts = [
        (ls, sf2, sn2)
        for ls in np.geomspace(0.05, 2.0, 4)
        for sf2 in np.geomspace(0.1, 10.0, 3)
        for sn2 in np.geomspace(1e-6, 1e-1, 3)
    ]
    rng = np.random.default_rng(seed)
    for _ in range(2):
        starts.append(
            (
                float(np.exp(rng.uniform(np.log(0.05), np.log(2.0)))),
                float(np.exp(rng.uniform(np.log(0.1), np.log(10.0)))),
                float(np.exp(rng.uniform(np.log(1e-6), np.log(1e-1)))),
            )
        )

    scored = [(_lml(X, y, *params), params) for params in starts]
    best_value, best = max(scored, key=lambda item: item[0])

    factors = (0.5, 0.8, 1.25, 2.0)
    names = ("length_scale", "signal_variance", "noise_variance")
    for _ in range(10):
        improved = False
        for i, name in enumerate(names):
            lo, hi = _FIT_BOUNDS[name]
            for factor in factors:
                trial = list(best)
                trial[i] = float(min(max(trial[i] * factor, lo), hi))
                if trial[i] == best[i]:
                    continue
                value = _lml(X, y, *trial)
                if value > best_value + 1e-10:
                    best_value, best = value, tuple(trial)
                    improved = True
        if not improved:
            break

    if not math.isfinite(best_value):
        raise FlowforgeError("GP hyperparameter search found no usable model")
    return GpModel(X, y, *best)


def expected_improvement(
    mu: np.ndarray | float, sigma: np.ndarray | float, best_score: float, xi: float = 0.01
) -> np.ndarray | float:
    """Expected improvement over the incumbent, for maximization. Never negative.

    With zero predictive deviation this degenerates to max(0, mu - best - xi).
    """
    mu_arr, sigma_arr = np.broadcast_arrays(
        np.asarray(mu, dtype=float), np.asarray(sigma, dtype=float)
    )
    scalar = mu_arr.ndim == 0
    mu_arr = np.atleast_1d(mu_arr).astype(float)
    sigma_arr = np.atleast_1d(sigma_arr).astype(float)

    gap = mu_arr - best_score - xi
    out = np.maximum(gap, 0.0)
    positive = sigma_arr > 0
    if np.any(positive):
        safe_sigma = np.where(positive, sigma_arr, 1.0)
        z = np.where(positive, gap / safe_sigma, 0.0)
        phi = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
        ei = gap * ndtr(z) + sigma_arr * phi
        out = np.where(positive, np.maximum(ei, 0.0), out)
    return float(out[0]) if scalar else out


def propose(
    gp: GpModel,
    bounds: ThetaBounds,
    pool_size: int,
    seed: int,
    *,
    best_score: float | None = None,
    xi: float = 0.01,
    pool: np.ndarray | None = None,
) -> Theta:
    """Acquisition-guided proposal: EI argmax over a low-discrepancy pool.

    Ties resolve to the lowest pool index. A caller may inject an explicit
    pool (rows of tolerance vectors) instead of the seeded Halton draw.
    """
    if pool is None:
        sampler = qmc.Halton(d=3, scramble=True, seed=int(seed))
        unit = sampler.random(int(pool_size))
    else:
        pool = np.atleast_2d(np.asarray(pool, dtype=float))
        lo, hi = bounds.lows(), bounds.highs()
        unit = (pool - lo) / (hi - lo)
    if best_score is None:
        best_score = float(np.max(gp.y))
    mu, var = gp.predict(unit)
    ei = np.asarray(expected_improvement(mu, np.sqrt(var), best_score, xi))
    index = int(np.argmax(ei))
    return bounds.from_unit(unit[index])


# ---------------------------------------------------------------------------
# Flow templates and the outer loop
# ---------------------------------------------------------------------------

_LETTER_KIND = {
    "S": TaskKind.SCALING,
    "P": TaskKind.PRUNING,
    "Q": TaskKind.QUANTIZATION,
}
_LETTER_NAME = {"S": "scale", "P": "prune", "Q": "quant"}


@dataclass
class FlowTemplate:
    """Instantiates the inner evaluation flow for one task ordering.

    The flow is model generation, the ordering's optimization tasks in
    sequence, one mock synthesis adapter, and a stop task. Tolerances
    from the outer search overwrite the type-scoped tolerance keys.
    """

    base_cfg: dict = field(default_factory=dict)
    vendor: str = "A"
    device: str | None = None
    max_hops: int = flowgraph.DEFAULT_MAX_HOPS

    def build_flow(self, ordering: Ordering) -> FlowGraph:
        builder = FlowBuilder()
        gen = builder.task(TaskKind.MODEL_GEN, "gen")
        prev = gen
        for letter in ordering.sequence:
            name = builder.task(_LETTER_KIND[letter], _LETTER_NAME[letter])
            builder.edge(prev, name)
            prev = name
        hls_kind = TaskKind.HLS_MOCK_A if self.vendor == "A" else TaskKind.HLS_MOCK_B
        hls = builder.task(hls_kind, "hls")
        stop = builder.task(TaskKind.STOP, "stop")
        builder.chain(prev, hls, stop)
        builder.set_entry(gen)
        return builder.build()

    def cfg_for(self, theta: Theta) -> dict:
        cfg = dict(self.base_cfg)
        cfg["Pruning::tolerate_acc_loss"] = theta.alpha_p
        cfg["Scaling::tolerate_acc_loss"] = theta.alpha_s
        cfg["Quantization::tolerate_acc_loss"] = theta.alpha_q
        cfg.setdefault("Pruning::pruning_rate_thresh", 0.02)
        if self.device is not None:
            cfg["HLS4ML::FPGA_part_number"] = self.device
        return cfg


@dataclass
class DseConfig:
    bounds: ThetaBounds
    budget: int = 22
    initial_design: int = 8
    weights: tuple[float, float, float, float] = (0.25, 0.25, 0.25, 0.25)
    u_max: float = 1.0
    t_max: float = float("inf")
    acc_loss_max: float = float("inf")
    stall_limit: int = 5
    seed: int = 0
    pool_size: int = 2048
    xi: float = 0.01
    select_policy: str = "best_score"

    def __post_init__(self):
        if self.initial_design < 1:
            raise ValueError("initial_design must be >= 1")
        if self.budget < self.initial_design:
            raise ValueError("budget must be >= initial_design")
        check_weights(self.weights)
        if self.stall_limit < 1:
            raise ValueError("stall_limit must be >= 1")
        if self.pool_size < 1:
            raise ValueError("pool_size must be >= 1")
        if self.select_policy not in ("best_score", "best_accuracy", "best_dsp", "best_lut"):
            raise ValueError(f"unknown select policy {self.select_policy!r}")


@dataclass
class DseResult:
    best: Candidate | None
    pareto: list[Candidate]
    histories: dict[str, list[Candidate]]
    errors: dict[str, str]

    @property
    def all_candidates(self) -> list[Candidate]:
        out = []
        for key in sorted(self.histories):
            out.extend(self.histories[key])
        return out


def evaluate_theta(
    template: FlowTemplate,
    ordering: Ordering,
    theta: Theta,
    backend: EvaluationBackend,
) -> Metrics:
    """Run the full inner flow for one tolerance vector and collect metrics."""
    graph = template.build_flow(ordering)
    result = flowgraph.run(
        graph, template.cfg_for(theta), backend, workers=1, max_hops=template.max_hops
    )
    if result.error is not None:
        raise ExecutionError(f"inner flow failed: {result.error}")
    mm = result.stops[0].mm
    entry = mm.space.latest("kernel")
    if entry is None or entry.metrics is None:
        raise ExecutionError("inner flow produced no kernel metrics")
    return entry.metrics


def _score_history(
    history: Sequence[Candidate], ranges: RangeTracker, weights: Sequence[float]
) -> list[float]:
    return [
        scalarize(ranges.normalize(c.metrics), weights, c.feasible) for c in history
    ]


def _gp_training_data(
    history: Sequence[Candidate],
    bounds: ThetaBounds,
    ranges: RangeTracker,
    weights: Sequence[float],
) -> tuple[np.ndarray, np.ndarray]:
    """Surrogate views every candidate; infeasible targets are clipped.

    The raw penalty would flatten the surrogate, so infeasible points
    train at one unit below the worst feasible score, preserving their
    "large negative" ordering without wrecking the conditioning.
    """
    X = np.array([bounds.to_unit(c.theta) for c in history])
    scores = _score_history(history, ranges, weights)
    feasible_scores = [s for s, c in zip(scores, history) if c.feasible]
    floor = (min(feasible_scores) - 1.0) if feasible_scores else -1.0
    y = np.array([s if c.feasible else floor for s, c in zip(scores, history)])
    return X, y


def _ordering_seeds(seed: int, ordering_index: int) -> tuple[int, int, int]:
    ss = np.random.SeedSequence([int(seed), int(ordering_index)])
    init_seed, pool_seed, fit_seed = (int(v) for v in ss.generate_state(3))
    return init_seed, pool_seed, fit_seed


def _search_one_ordering(
    template: FlowTemplate,
    ordering: Ordering,
    cfg: DseConfig,
    backend: EvaluationBackend,
    ordering_index: int,
) -> list[Candidate]:
    init_seed, pool_seed, fit_seed = _ordering_seeds(cfg.seed, ordering_index)
    n_init = min(cfg.initial_design, cfg.budget)
    init_unit = qmc.Halton(d=3, scramble=True, seed=init_seed).random(n_init)

    history: list[Candidate] = []
    ranges = RangeTracker()
    started = time.monotonic()
    incumbent: int | None = None
    stall = 0

    for t in range(cfg.budget):
        if t < n_init:
            theta = cfg.bounds.from_unit(init_unit[t])
        else:
            if stall >= cfg.stall_limit:
                break
            X, y = _gp_training_data(history, cfg.bounds, ranges, cfg.weights)
            if len(np.unique(X, axis=0)) < 2:
                # Degenerate design; fall back to the next quasi-random point.
                extra = qmc.Halton(d=3, scramble=True, seed=pool_seed + t).random(1)
                theta = cfg.bounds.from_unit(extra[0])
            else:
                gp = gp_fit(X, y, seed=fit_seed)
                theta = propose(
                    gp,
                    cfg.bounds,
                    cfg.pool_size,
                    seed=pool_seed + t,
                    best_score=float(np.max(y)),
                    xi=cfg.xi,
                )

        metrics = evaluate_theta(template, ordering, theta, backend)
        feasible = is_feasible(metrics, cfg.u_max, cfg.t_max, cfg.acc_loss_max)
        ranges.update(metrics)
        score = scalarize(ranges.normalize(metrics), cfg.weights, feasible)
        history.append(
            Candidate(
                theta=theta,
                ordering=ordering,
                metrics=metrics,
                feasible=feasible,
                score=score,
                eval_index=t,
                wall_time_s=time.monotonic() - started,
            )
        )

        scores_now = _score_history(history, ranges, cfg.weights)
        best_now = int(np.argmax(scores_now))
        if t >= n_init:
            stall = stall + 1 if best_now == incumbent else 0
        incumbent = best_now

    return history


def candidate_front(
    candidates: Sequence[Candidate],
    objectives: Sequence[tuple[str, str]] = DEFAULT_OBJECTIVES,
) -> list[Candidate]:
    """Non-dominated candidates under the given metric objectives."""
    if not candidates:
        return []
    points = [
        pareto.ObjectivePoint(
            values=tuple(metric_value(c.metrics, name) for name, _ in objectives),
            directions=tuple(direction for _, direction in objectives),
            payload=c,
        )
        for c in candidates
    ]
    return [p.payload for p in pareto.frontier(points)]


def _select_best(
    front: Sequence[Candidate], all_candidates: Sequence[Candidate], cfg: DseConfig
) -> Candidate | None:
    if not front:
        return None
    if cfg.select_policy != "best_score":
        key_metric, better = {
            "best_accuracy": ("accuracy", max),
            "best_dsp": ("dsp", min),
            "best_lut": ("lut", min),
        }[cfg.select_policy]
        feasible = [c for c in front if c.feasible] or list(front)
        return better(feasible, key=lambda c: metric_value(c.metrics, key_metric))

    # Re-score under the normalization ranges of the full merged history.
    ranges = RangeTracker()
    for c in all_candidates:
        ranges.update(c.metrics)
    best: Candidate | None = None
    best_key: tuple | None = None
    for c in front:
        score = scalarize(ranges.normalize(c.metrics), cfg.weights, c.feasible)
        key = (score, -c.eval_index)
        if best_key is None or key > best_key:
            best, best_key = c, key
    return best


def run_dse(
    template: FlowTemplate,
    orderings: Sequence[Ordering],
    cfg: DseConfig,
    backend: EvaluationBackend,
    *,
    ordering_workers: int | None = None,
) -> DseResult:
    """The outer search: one BO loop per ordering, merged by dominance.

    Orderings explore independent strategy paths and may run concurrently;
    a backend failure aborts only its own ordering and is recorded. The
    per-ordering histories are merged into a Pareto set and the best
    candidate is selected under the configured policy.
    """
    orderings = list(orderings)
    if not orderings:
        raise ValueError("run_dse needs at least one ordering")
    if len({str(o) for o in orderings}) != len(orderings):
        raise ValueError("orderings must be unique")

    histories: dict[str, list[Candidate]] = {}
    errors: dict[str, str] = {}
    workers = ordering_workers or min(len(orderings), 4)

    def job(index: int, ordering: Ordering):
        return _search_one_ordering(template, ordering, cfg, backend, index)

    if workers <= 1 or len(orderings) == 1:
        outcomes = []
        for i, ordering in enumerate(orderings):
            try:
                outcomes.append((ordering, job(i, ordering), None))
            except Exception as exc:
                outcomes.append((ordering, [], str(exc)))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool_exec:
            futures = [pool_exec.submit(job, i, o) for i, o in enumerate(orderings)]
            outcomes = []
            for ordering, future in zip(orderings, futures):
                try:
                    outcomes.append((ordering, future.result(), None))
                except Exception as exc:
                    outcomes.append((ordering, [], str(exc)))

    for ordering, history, error in outcomes:
        if error is not None:
            errors[str(ordering)] = error
        else:
            histories[str(ordering)] = history

    merged: list[Candidate] = []
    for key in sorted(histories):
        merged.extend(histories[key])
    front = candidate_front(merged)
    best = _select_best(front, merged, cfg)
    return DseResult(best=best, pareto=front, histories=histories, errors=errors)


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    counts: tuple[int, int, int]

    def __post_init__(self):
        if any(c < 1 for c in self.counts):
            raise ValueError("grid counts must be >= 1")

    def points(self, bounds: ThetaBounds) -> list[Theta]:
        axes = []
        for (lo, hi), n in zip(
            (bounds.alpha_p, bounds.alpha_s, bounds.alpha_q), self.counts
        ):
            axes.append(np.linspace(lo, hi, n))
        out = []
        for p in axes[0]:
            for s in axes[1]:
                for q in axes[2]:
                    out.append(Theta(float(p), float(s), float(q)))
        return out

    @property
    def size(self) -> int:
        return self.counts[0] * self.counts[1] * self.counts[2]


def _evaluate_sequence(
    template: FlowTemplate,
    ordering: Ordering,
    thetas: Sequence[Theta],
    cfg: DseConfig,
    backend: EvaluationBackend,
) -> list[Candidate]:
    history: list[Candidate] = []
    ranges = RangeTracker()
    started = time.monotonic()
    for t, theta in enumerate(thetas):
        metrics = evaluate_theta(template, ordering, theta, backend)
        feasible = is_feasible(metrics, cfg.u_max, cfg.t_max, cfg.acc_loss_max)
        ranges.update(metrics)
        score = scalarize(ranges.normalize(metrics), cfg.weights, feasible)
        history.append(
            Candidate(theta, ordering, metrics, feasible, score, t, time.monotonic() - started)
        )
    return history


def grid_search(
    template: FlowTemplate,
    ordering: Ordering,
    grid: GridSpec,
    cfg: DseConfig,
    backend: EvaluationBackend,
) -> list[Candidate]:
    """Evaluate every grid point once, in deterministic axis order."""
    points = grid.points(cfg.bounds)
    if not points:
        raise ValueError("empty grid")
    return _evaluate_sequence(template, ordering, points, cfg, backend)


def stochastic_grid_search(
    template: FlowTemplate,
    ordering: Ordering,
    grid: GridSpec,
    sample_count: int,
    seed: int,
    cfg: DseConfig,
    backend: EvaluationBackend,
) -> list[Candidate]:
    """Evaluate a uniform seeded sample of the grid, without replacement."""
    points = grid.points(cfg.bounds)
    if sample_count > len(points):
        raise ValueError(f"sample_count {sample_count} exceeds grid size {len(points)}")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(points), size=sample_count, replace=False)
    return _evaluate_sequence(
        template, ordering, [points[int(i)] for i in chosen], cfg, backend
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def history_jsonl(candidates: Iterable[Candidate]) -> str:
    lines = [
        json.dumps(c.to_json_dict(), sort_keys=True, separators=(",", ":"))
        for c in candidates
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def parse_history_jsonl(text: str) -> list[Candidate]:
    out = []
    for line in text.splitlines():
        line = line.strip()
        if line:
            out.append(Candidate.from_json_dict(json.loads(line)))
    return out


def _num(x: float) -> str:
    return repr(float(x)) if isinstance(x, float) and not float(x).is_integer() else str(int(x))


def pareto_csv(candidates: Iterable[Candidate]) -> str:
    rows = [PARETO_CSV_HEADER]
    for c in candidates:
        m = c.metrics
        rows.append(
            ",".join(
                [
                    str(c.ordering),
                    repr(c.theta.alpha_p),
                    repr(c.theta.alpha_s),
                    repr(c.theta.alpha_q),
                    repr(m.accuracy),
                    _num(m.latency_ns),
                    str(m.dsp_used),
                    str(m.lut_used),
                    str(m.ff_used),
                    str(m.bram_used),
                    repr(c.score),
                ]
            )
        )
    return "\n".join(rows) + "\n"
