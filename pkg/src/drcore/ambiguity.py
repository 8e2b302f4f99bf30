"""Wasserstein balls around empirical distributions: distance, radius/confidence
calculus, and aggregation of per-coalition confidences."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .distributions import DiscreteDistribution, EmpiricalDistribution
from .errors import ConfigurationError, InputError, InvalidConfidenceError, UnsupportedDimensionError
from .game_model import CoalitionId, NormTag


def wasserstein_1d(d1, d2) -> float:
    """Order-1 Wasserstein distance between two distributions on the real line.

    Integrates the absolute difference of the quantile functions, which are
    step functions with breakpoints at the cumulative weights.
    """
    d1 = d1.as_discrete() if isinstance(d1, EmpiricalDistribution) else d1
    d2 = d2.as_discrete() if isinstance(d2, EmpiricalDistribution) else d2
    if d1.dim != 1 or d2.dim != 1:
        raise UnsupportedDimensionError("wasserstein_1d needs one-dimensional atoms")
    o1 = np.argsort(d1.atoms[:, 0], kind="stable")
    o2 = np.argsort(d2.atoms[:, 0], kind="stable")
    x1, w1 = d1.atoms[o1, 0], d1.weights[o1]
    x2, w2 = d2.atoms[o2, 0], d2.weights[o2]
    c1 = np.cumsum(w1)
    c2 = np.cumsum(w2)
    c1[-1] = c2[-1] = 1.0
    u = np.union1d(c1, c2)
    u = u[u > 0]
    du = np.diff(np.concatenate([[0.0], u]))
    mid = u - du / 2
    q1 = x1[np.minimum(np.searchsorted(c1, mid, side="left"), x1.size - 1)]
    q2 = x2[np.minimum(np.searchsorted(c2, mid, side="left"), x2.size - 1)]
    return float(np.sum(du * np.abs(q1 - q2)))


@dataclass(frozen=True)
class TailParams:
    """Light-tail constants of the concentration bound.

    ``c`` and ``q`` have no closed form; 1.0 is an illustrative default.
    ``A`` is recorded for completeness and never used in a computation.
    ``p2_exponent`` is a user override that lifts the p = 2 exclusion.
    """

    a: float = 2.0
    A: float = 1.0
    c: float = 1.0
    q: float = 1.0
    p: int = 1
    p2_exponent: float | None = None

    def __post_init__(self):
        if not self.a > 1:
            raise ConfigurationError("tail exponent a must exceed 1")
        if not self.A >= 1:
            raise ConfigurationError("moment bound A must be at least 1")
        if not (self.c > 0 and self.q > 0):
            raise ConfigurationError("c and q must be positive")
        if int(self.p) != self.p or self.p < 1:
            raise ConfigurationError("p must be a positive integer")
        if self.p2_exponent is not None and not self.p2_exponent > 0:
            raise ConfigurationError("p = 2 exponent override must be positive")

    def small_radius_exponent(self) -> float:
        if self.p == 2:
            if self.p2_exponent is None:
                raise UnsupportedDimensionError(
                    "the concentration bound excludes p = 2; supply an explicit exponent override"
                )
            return float(self.p2_exponent)
        return float(max(self.p, 2))


def beta_from_radius(eps: float, K: int, t: TailParams) -> float:
    """Confidence parameter for radius ``eps`` and ``K`` samples.

    The result may be >= 1, which means no guarantee.
    """
    if not eps > 0:
        raise InputError("radius must be positive")
    if K < 1:
        raise InputError("need at least one sample")
    e = t.small_radius_exponent() if eps <= 1 else t.a
    return t.c * math.exp(-t.q * K * eps**e)


def radius_from_beta(beta: float, K: int, t: TailParams) -> float:
    """Smallest radius whose ball holds the true law with probability 1 - beta."""
    if not 0 < beta < t.c:
        raise InvalidConfidenceError(f"beta must lie in (0, c={t.c}), got {beta}")
    if K < 1:
        raise InputError("need at least one sample")
    level = (math.log(t.c) - math.log(beta)) / t.q  # c / beta overflows for subnormal beta
    e = t.small_radius_exponent() if K >= level else t.a
    return (level / K) ** (1.0 / e)


def _check_betas(betas: Iterable[float]) -> np.ndarray:
    b = np.asarray(list(betas), dtype=float)
    if b.size == 0:
        raise InputError("no confidences given")
    if np.any(~np.isfinite(b)) or np.any(b < 0) or np.any(b >= 1):
        raise InputError("every per-coalition beta must lie in [0, 1)")
    return b


def aggregate_confidence(per_coalition_betas: Iterable[float]) -> float:
    """Joint confidence for independent per-coalition samples: prod(1 - beta_S)."""
    return float(np.prod(1.0 - _check_betas(per_coalition_betas)))


def aggregate_confidence_bonferroni(per_coalition_betas: Iterable[float]) -> float:
    """Union-bound confidence for samples shared among coalitions; may be <= 0."""
    b = _check_betas(per_coalition_betas)
    return float(np.sum(1.0 - b) - b.size + 1)


@dataclass(frozen=True)
class ConfidenceSummary:
    value: float
    vacuous: bool
    per_coalition: dict


def summarize_confidence(betas: Mapping[CoalitionId, float], bonferroni: bool = False) -> ConfidenceSummary:
    """Aggregate confidence, reporting raw betas >= 1 (or a nonpositive bound) as vacuous."""
    raw = dict(betas)
    if any(b >= 1 for b in raw.values()):
        return ConfidenceSummary(0.0, True, raw)
    agg = aggregate_confidence_bonferroni if bonferroni else aggregate_confidence
    val = agg(raw.values())
    return ConfidenceSummary(val, val <= 0, raw)


@dataclass(frozen=True)
class AmbiguityConfig:
    """Per-coalition radius or confidence, shared tail constants and ground norm.

    ``radii`` and ``betas`` map coalitions to values; ``default_radius`` /
    ``default_beta`` cover coalitions absent from both maps.
    """

    radii: Mapping[CoalitionId, float] = field(default_factory=dict)
    betas: Mapping[CoalitionId, float] = field(default_factory=dict)
    default_radius: float | None = None
    default_beta: float | None = None
    tail: TailParams = field(default_factory=TailParams)
    norm: NormTag = NormTag.ONE

    def __post_init__(self):
        object.__setattr__(self, "norm", NormTag(self.norm))
        both = set(self.radii) & set(self.betas)
        if both:
            raise ConfigurationError(f"coalitions {sorted(both)} have both a radius and a confidence")
        if self.default_radius is not None and self.default_beta is not None:
            raise ConfigurationError("give a default radius or a default confidence, not both")
        for v in list(self.radii.values()) + ([self.default_radius] if self.default_radius is not None else []):
            if v < 0:
                raise ConfigurationError("radii must be nonnegative")
        for v in list(self.betas.values()) + ([self.default_beta] if self.default_beta is not None else []):
            if not 0 < v < 1:
                raise ConfigurationError("confidence parameters must lie in (0, 1)")

    @classmethod
    def uniform_radius(cls, eps: float, **kw) -> "AmbiguityConfig":
        return cls(default_radius=eps, **kw)

    @classmethod
    def uniform_beta(cls, beta: float, **kw) -> "AmbiguityConfig":
        return cls(default_beta=beta, **kw)

    def radius_for(self, S: CoalitionId, K: int) -> float:
        if S in self.radii:
            return float(self.radii[S])
        if S in self.betas:
            return radius_from_beta(self.betas[S], K, self.tail)
        if self.default_radius is not None:
            return float(self.default_radius)
        if self.default_beta is not None:
            return radius_from_beta(self.default_beta, K, self.tail)
        raise ConfigurationError(f"no radius or confidence for coalition {S}")

    def beta_for(self, S: CoalitionId, K: int) -> float:
        """Confidence parameter implied for coalition ``S`` (``inf`` mass for a zero radius)."""
        if S in self.betas:
            return float(self.betas[S])
        if S not in self.radii and self.default_beta is not None:
            return float(self.default_beta)
        eps = self.radius_for(S, K)
        return self.tail.c if eps == 0 else beta_from_radius(eps, K, self.tail)
