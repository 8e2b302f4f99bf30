"""Monte Carlo harness for sample-size, radius and consistency studies.

Each trial draws its samples from a seed derived from (master seed, sample
count, trial index), so results do not depend on the number of workers or
on which other axis points are run. Radius sweeps therefore reuse the same
samples at every radius.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .ambiguity import AmbiguityConfig, TailParams, radius_from_beta
from .core import build_expected_core
from .distributions import (
    Role,
    SamplingMode,
    SamplingPlan,
    TruncatedGaussianSpec,
    build_multisamples,
    derive_seed,
)
from .errors import ConfigurationError
from .game_model import GameSpec, coalition_label, members, reference_game
from .worst_case import Engine, worst_case

TRIAL_HEADER = ("axis", "trial", "coalition", "W", "E", "dominates", "all_dominate")
SUMMARY_HEADER = (
    "axis",
    "coalition",
    "confidence",
    "W_min",
    "W_max",
    "W_mean",
    "centered_min",
    "centered_max",
    "centered_mean",
    "band_width",
)


def fmt(v: float) -> str:
    return f"{v:.12g}"


REFERENCE_DISTRIBUTION = TruncatedGaussianSpec(mean=1.0, variance=1.0, lo=0.0, hi=1.0)


@dataclass(frozen=True)
class ExperimentConfig:
    axis: str  # "sample_size" | "radius"
    axis_values: tuple
    game: GameSpec = field(default_factory=reference_game)
    distribution: TruncatedGaussianSpec = REFERENCE_DISTRIBUTION
    trials: int = 500
    sample_size: int = 100  # held fixed on the radius axis
    radius: float = 0.3  # held fixed on the sample-size axis
    plan: SamplingMode = SamplingMode.SHARED
    tail: TailParams = field(default_factory=TailParams)
    master_seed: int = 0
    engine: Engine = Engine.AUTO
    workers: int = 1

    def __post_init__(self):
        if self.axis not in ("sample_size", "radius"):
            raise ConfigurationError(f"unknown sweep axis {self.axis!r}")
        vals = tuple(self.axis_values)
        if not vals:
            raise ConfigurationError("sweep needs at least one axis value")
        if any(not v > 0 for v in vals) or any(b <= a for a, b in zip(vals, vals[1:])):
            raise ConfigurationError("axis values must be positive and strictly increasing")
        if self.axis == "sample_size" and any(int(v) != v for v in vals):
            raise ConfigurationError("sample sizes must be integers")
        if self.trials < 1:
            raise ConfigurationError("need at least one trial")
        object.__setattr__(self, "axis_values", vals)
        object.__setattr__(self, "plan", SamplingMode(self.plan))
        object.__setattr__(self, "engine", Engine(self.engine))

    def point(self, value) -> tuple[int, float]:
        """(sample count, radius) at an axis value."""
        if self.axis == "sample_size":
            return int(value), float(self.radius)
        return int(self.sample_size), float(value)

    def describe(self) -> dict:
        return {
            "axis": self.axis,
            "axis_values": list(self.axis_values),
            "trials": self.trials,
            "sample_size": self.sample_size,
            "radius": self.radius,
            "plan": self.plan.value,
            "tail_constants": asdict(self.tail),
            "master_seed": self.master_seed,
            "engine": self.engine.value,
            "distribution": asdict(self.distribution),
            "game": self.game.to_dict(),
        }


@dataclass(frozen=True)
class TrialRecord:
    axis: float
    trial: int
    W: dict  # coalition -> worst-case value
    E: dict  # coalition -> true expectation

    @property
    def dominates(self) -> dict:
        return {S: self.W[S] >= self.E[S] for S in self.W}

    @property
    def all_dominate(self) -> bool:
        return all(self.dominates.values())


def trial_samples(cfg: ExperimentConfig, K: int, trial: int):
    seed = derive_seed(cfg.master_seed, Role.TRIAL, K, trial)
    plan = SamplingPlan(cfg.plan, K, seed)
    return build_multisamples(plan, cfg.distribution, cfg.game)


def _run_trial(cfg: ExperimentConfig, expected: dict, value, trial: int) -> TrialRecord:
    K, eps = cfg.point(value)
    samples = trial_samples(cfg, K, trial)
    amb = AmbiguityConfig.uniform_radius(eps, tail=cfg.tail)
    W = {
        S: worst_case(cfg.game.value_map[S], samples[S], eps, cfg.game.support, amb.norm, cfg.engine).value
        for S in cfg.game.coalitions
    }
    return TrialRecord(float(value), trial, W, dict(expected))


def _run_chunk(args):
    cfg, expected, jobs = args
    return [_run_trial(cfg, expected, v, t) for v, t in jobs]


def run_trials(cfg: ExperimentConfig) -> list[TrialRecord]:
    """All (axis value, trial) records in axis-then-trial order."""
    expected = build_expected_core(cfg.game, cfg.distribution).thresholds
    jobs = [(v, t) for v in cfg.axis_values for t in range(cfg.trials)]
    if cfg.workers <= 1:
        return _run_chunk((cfg, expected, jobs))
    n_chunks = cfg.workers * 4
    size = max(1, math.ceil(len(jobs) / n_chunks))
    chunks = [(cfg, expected, jobs[i : i + size]) for i in range(0, len(jobs), size)]
    with ProcessPoolExecutor(cfg.workers) as pool:
        parts = list(pool.map(_run_chunk, chunks))
    return [r for part in parts for r in part]


@dataclass
class SweepResult:
    config: ExperimentConfig
    records: list[TrialRecord]

    def by_axis(self) -> dict:
        out: dict = {}
        for r in self.records:
            out.setdefault(r.axis, []).append(r)
        return out

    def confidence(self) -> dict:
        """Empirical confidence: share of trials where every coalition dominates."""
        return {a: float(np.mean([r.all_dominate for r in rs])) for a, rs in self.by_axis().items()}

    def band(self, S) -> dict:
        """axis -> (min, max, mean) of W_S across trials."""
        out = {}
        for a, rs in self.by_axis().items():
            w = np.array([r.W[S] for r in rs])
            out[a] = (float(w.min()), float(w.max()), float(w.mean()))
        return out

    def band_width(self, S) -> dict:
        return {a: hi - lo for a, (lo, hi, _) in self.band(S).items()}

    def trials_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRIAL_HEADER)
        for r in self.records:
            all_dom = int(r.all_dominate)
            for S in self.config.game.coalitions:
                w.writerow(
                    [fmt(r.axis), r.trial, coalition_label(S), fmt(r.W[S]), fmt(r.E[S]), int(r.W[S] >= r.E[S]), all_dom]
                )
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        conf = self.confidence()
        for a, rs in self.by_axis().items():
            for S in self.config.game.coalitions:
                W = np.array([r.W[S] for r in rs])
                C = W - rs[0].E[S]
                w.writerow(
                    [fmt(a), coalition_label(S), fmt(conf[a])]
                    + [fmt(v) for v in (W.min(), W.max(), W.mean(), C.min(), C.max(), C.mean(), W.max() - W.min())]
                )
        return buf.getvalue()

    def write(self, out_dir) -> dict:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"trials": out / "trials.csv", "summary": out / "summary.csv", "meta": out / "meta.json"}
        paths["trials"].write_text(self.trials_csv())
        paths["summary"].write_text(self.summary_csv())
        paths["meta"].write_text(json.dumps(self.config.describe(), indent=2, sort_keys=True) + "\n")
        return paths


def run_sample_size_sweep(cfg: ExperimentConfig) -> SweepResult:
    if cfg.axis != "sample_size":
        raise ConfigurationError("sample-size sweep needs axis='sample_size'")
    return SweepResult(cfg, run_trials(cfg))


def run_radius_sweep(cfg: ExperimentConfig) -> SweepResult:
    if cfg.axis != "radius":
        raise ConfigurationError("radius sweep needs axis='radius'")
    return SweepResult(cfg, run_trials(cfg))


# -- consistency -------------------------------------------------------------

def default_beta_schedule(K: int, tail: TailParams) -> float:
    """beta_K = c / K**2, summable in K."""
    return tail.c / K**2


@dataclass(frozen=True)
class ConsistencyRow:
    K: int
    radius: float
    beta: float | None
    mean_gap: float
    max_gap: float


@dataclass
class ConsistencyResult:
    rows: list[ConsistencyRow]
    tail: TailParams

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("K", "radius", "beta", "mean_gap", "max_gap"))
        for r in self.rows:
            w.writerow([r.K, fmt(r.radius), "" if r.beta is None else fmt(r.beta), fmt(r.mean_gap), fmt(r.max_gap)])
        return buf.getvalue()

    def gap(self) -> dict:
        return {r.K: r.mean_gap for r in self.rows}


def run_consistency_study(
    sample_sizes: Sequence[int],
    game: GameSpec | None = None,
    distribution: TruncatedGaussianSpec = REFERENCE_DISTRIBUTION,
    tail: TailParams = TailParams(),
    trials: int = 20,
    master_seed: int = 0,
    fixed_radius: float | None = None,
    schedule=default_beta_schedule,
    plan: SamplingMode = SamplingMode.SHARED,
    engine: Engine = Engine.AUTO,
) -> ConsistencyResult:
    """Gap max_S |W_S - E_S| as K grows, with radius from a summable beta schedule.

    With ``fixed_radius`` the radius stays constant instead (a negative
    control whose gap tends to a positive offset).
    """
    game = game or reference_game()
    rows = []
    for K in sample_sizes:
        if fixed_radius is None:
            beta = schedule(K, tail)
            eps = radius_from_beta(beta, K, tail)
        else:
            beta, eps = None, float(fixed_radius)
        cfg = ExperimentConfig(
            axis="sample_size",
            axis_values=(K,),
            game=game,
            distribution=distribution,
            trials=trials,
            radius=eps,
            plan=plan,
            tail=tail,
            master_seed=master_seed,
            engine=engine,
        )
        recs = run_trials(cfg)
        gaps = [max(abs(r.W[S] - r.E[S]) for S in r.W) for r in recs]
        rows.append(ConsistencyRow(int(K), eps, beta, float(np.mean(gaps)), float(np.max(gaps))))
    return ConsistencyResult(rows, tail)


def predicted_offset(game: GameSpec, distribution: TruncatedGaussianSpec, eps: float) -> float:
    """Large-sample limit of max_S (W_S - E_S) at a fixed radius, single affine pieces only.

    Each coalition gains |a| * min(eps, expected headroom toward the
    favourable end of the interval).
    """
    m = distribution.truncated_mean()
    out = 0.0
    for v in game.value_map.values():
        if v.n_pieces != 1 or v.dim != 1:
            raise ConfigurationError("predicted offset needs single-piece one-dimensional values")
        a = float(v.slopes[0, 0])
        head = distribution.hi - m if a > 0 else m - distribution.lo
        out = max(out, abs(a) * min(eps, head))
    return out
