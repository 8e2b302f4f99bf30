"""Reference distributions, reproducible sampling, and empirical distributions."""
from __future__ import annotations

import csv
import enum
import io
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy import integrate, special

from .errors import ConfigurationError, DegenerateTruncationError, InputError, NumericalError
from .game_model import BoxSupport, CoalitionId, GameSpec, PiecewiseAffineValue, members

_MIN_MASS = 1e-12


# -- seeding -----------------------------------------------------------------

class Role(enum.IntEnum):
    """Namespaces for derived random streams."""

    COALITION = 1
    AGENT = 2
    SHARED = 3
    TRIAL = 4


def seed_sequence(master_seed: int, role: Role, *ids: int) -> np.random.SeedSequence:
    if not 0 <= int(master_seed) < 2**64:
        raise ConfigurationError(f"seed must be an unsigned 64-bit integer, got {master_seed}")
    return np.random.SeedSequence(int(master_seed), spawn_key=(int(role), *map(int, ids)))


def derive_seed(master_seed: int, role: Role, *ids: int) -> int:
    """Child 64-bit seed; a pure function of its arguments."""
    lo, hi = seed_sequence(master_seed, role, *ids).generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)


def _generator(stream_seed) -> np.random.Generator:
    if isinstance(stream_seed, np.random.Generator):
        return stream_seed
    return np.random.Generator(np.random.PCG64(stream_seed))


# -- distributions -----------------------------------------------------------

@dataclass(frozen=True)
class TruncatedGaussianSpec:
    mean: float
    variance: float
    lo: float
    hi: float

    def __post_init__(self):
        if not self.variance > 0:
            raise ConfigurationError("variance must be positive")
        if not self.lo < self.hi:
            raise ConfigurationError("truncation interval needs lo < hi")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.variance)

    @property
    def alpha(self) -> float:
        return (self.lo - self.mean) / self.sigma

    @property
    def beta(self) -> float:
        return (self.hi - self.mean) / self.sigma

    @property
    def mass(self) -> float:
        """Probability the untruncated normal assigns to [lo, hi]."""
        return float(special.ndtr(self.beta) - special.ndtr(self.alpha))

    @property
    def support(self) -> BoxSupport:
        return BoxSupport([self.lo], [self.hi])

    def _check_mass(self) -> float:
        z = self.mass
        if z < _MIN_MASS:
            raise DegenerateTruncationError(f"truncation interval carries mass {z:.3g} < {_MIN_MASS}")
        return z

    def pdf(self, x):
        z = self._check_mass()
        x = np.asarray(x, dtype=float)
        dens = np.exp(-0.5 * ((x - self.mean) / self.sigma) ** 2) / (self.sigma * math.sqrt(2 * math.pi) * z)
        return np.where((x >= self.lo) & (x <= self.hi), dens, 0.0)

    def cdf(self, x):
        z = self._check_mass()
        x = np.clip(np.asarray(x, dtype=float), self.lo, self.hi)
        return (special.ndtr((x - self.mean) / self.sigma) - special.ndtr(self.alpha)) / z

    def ppf(self, u):
        """Inverse CDF of the truncated law."""
        self._check_mass()
        u = np.asarray(u, dtype=float)
        pa, pb = special.ndtr(self.alpha), special.ndtr(self.beta)
        x = self.mean + self.sigma * special.ndtri(pa + u * (pb - pa))
        return np.clip(x, self.lo, self.hi)

    def truncated_mean(self) -> float:
        z = self._check_mass()
        phi = lambda t: math.exp(-0.5 * t * t) / math.sqrt(2 * math.pi)
        return self.mean - self.sigma * (phi(self.beta) - phi(self.alpha)) / z

    def truncated_std(self) -> float:
        z = self._check_mass()
        phi = lambda t: math.exp(-0.5 * t * t) / math.sqrt(2 * math.pi)
        a, b = self.alpha, self.beta
        r = (phi(b) - phi(a)) / z
        var = self.variance * (1 - (b * phi(b) - a * phi(a)) / z - r * r)
        return math.sqrt(max(var, 0.0))


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finitely supported distribution; ``atoms`` has shape (K, p)."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        w = np.asarray(self.weights, dtype=float).ravel()
        if atoms.ndim != 2 or atoms.shape[0] == 0 or atoms.shape[0] != w.size:
            raise InputError("need at least one atom and one weight per atom")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InputError("weights must be nonnegative and sum to 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    def expectation(self, v: PiecewiseAffineValue) -> float:
        return float(self.weights @ v.evaluate_many(self.atoms))


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Uniform distribution over the observed samples; ``samples`` has shape (K, p)."""

    samples: np.ndarray
    support: BoxSupport | None = None

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2 or s.shape[0] == 0:
            raise InputError("an empirical distribution needs at least one sample")
        if self.support is not None:
            if s.shape[1] != self.support.dim:
                raise InputError("sample dimension does not match the support")
            if not self.support.contains(s):
                raise InputError("samples fall outside the declared support")
        s = s.copy()
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    @property
    def size(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def as_discrete(self) -> DiscreteDistribution:
        return DiscreteDistribution(self.samples, np.full(self.size, 1.0 / self.size))

    def mean_value(self, v: PiecewiseAffineValue) -> float:
        return float(np.mean(v.evaluate_many(self.samples)))

    def __eq__(self, other):
        return isinstance(other, EmpiricalDistribution) and np.array_equal(self.samples, other.samples)

    def __hash__(self):
        return hash(self.samples.tobytes())

    # CSV: one row per sample, header x1..xp

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x{j + 1}" for j in range(self.dim)])
        for row in self.samples:
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, support: BoxSupport | None = None) -> "EmpiricalDistribution":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise InputError("empty CSV")
        header = [h.strip() for h in rows[0]]
        if header != [f"x{j + 1}" for j in range(len(header))]:
            raise InputError(f"expected header x1..xp, got {header}")
        try:
            data = [[float(v) for v in r] for r in rows[1:] if r]
        except ValueError as exc:
            raise InputError(f"non-numeric sample: {exc}") from exc
        if any(len(r) != len(header) for r in data):
            raise InputError("ragged CSV rows")
        return cls(np.array(data, dtype=float).reshape(-1, len(header)), support)

    def save_csv(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def load_csv(cls, path, support: BoxSupport | None = None) -> "EmpiricalDistribution":
        return cls.from_csv(Path(path).read_text(), support)


def sample_truncated_gaussian(spec: TruncatedGaussianSpec, count: int, stream_seed) -> EmpiricalDistribution:
    """``count`` i.i.d. draws by inverse-CDF transform of uniform variates."""
    if count < 1:
        raise ConfigurationError("sample count must be at least 1")
    spec._check_mass()
    u = _generator(stream_seed).random(int(count))
    return EmpiricalDistribution(spec.ppf(u)[:, None], spec.support)


def true_mean_value(spec: TruncatedGaussianSpec, v: PiecewiseAffineValue) -> float:
    """E[u(xi)] under the truncated Gaussian.

    Closed form for a single affine piece, adaptive quadrature (split at the
    kinks) otherwise.
    """
    if v.dim != 1:
        raise InputError("the reference distribution is one-dimensional")
    if v.n_pieces == 1:
        a, b = float(v.slopes[0, 0]), float(v.intercepts[0])
        return b if a == 0.0 else a * spec.truncated_mean() + b
    spec._check_mass()
    kinks = []
    a, b = v.slopes[:, 0], v.intercepts
    for i in range(v.n_pieces):
        for j in range(i + 1, v.n_pieces):
            if a[i] != a[j]:
                t = (b[j] - b[i]) / (a[i] - a[j])
                if spec.lo < t < spec.hi:
                    kinks.append(t)
    f = lambda x: v.evaluate_many(np.array([x]))[0] * float(spec.pdf(x))
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, spec.lo, spec.hi, points=sorted(kinks) or None, epsabs=1e-10, epsrel=1e-10, limit=200)
        except integrate.IntegrationWarning as exc:
            raise NumericalError(f"quadrature did not converge: {exc}") from exc
    if not err <= 1e-8:
        raise NumericalError(f"quadrature error estimate {err:.3g} exceeds 1e-8")
    return float(val)


def quantile_discretization(spec: TruncatedGaussianSpec, n: int = 10_000) -> DiscreteDistribution:
    """``n`` equally weighted atoms at the mid-quantiles of the truncated law."""
    u = (np.arange(n) + 0.5) / n
    return DiscreteDistribution(spec.ppf(u)[:, None], np.full(n, 1.0 / n))


# -- sampling plans ----------------------------------------------------------

class SamplingMode(str, enum.Enum):
    PER_COALITION = "per_coalition"
    PER_AGENT = "per_agent"
    SHARED = "shared"


@dataclass(frozen=True)
class SamplingPlan:
    """How coalitions obtain their samples.

    ``counts`` is a single int (applied to every coalition or agent) or a
    mapping keyed by coalition bitmask (per_coalition) or 1-based agent
    index (per_agent). ``shared`` takes a single int.
    """

    mode: SamplingMode
    counts: int | Mapping[int, int]
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", SamplingMode(self.mode))
        c = self.counts
        vals = [c] if isinstance(c, (int, np.integer)) else list(dict(c).values())
        if any(int(k) < 1 for k in vals):
            raise ConfigurationError("sample counts must be positive")
        if self.mode is SamplingMode.SHARED and not isinstance(c, (int, np.integer)):
            raise ConfigurationError("shared sampling takes a single count")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ConfigurationError("master seed must be an unsigned 64-bit integer")

    def count_for(self, key: int) -> int:
        if isinstance(self.counts, (int, np.integer)):
            return int(self.counts)
        try:
            return int(self.counts[key])
        except KeyError:
            raise ConfigurationError(f"sampling plan has no count for {key}") from None

    def coalition_count(self, S: CoalitionId) -> int:
        """K_S; in per_agent mode the sum of member counts."""
        if self.mode is SamplingMode.PER_AGENT:
            return sum(self.count_for(i) for i in members(S))
        if self.mode is SamplingMode.SHARED:
            return int(self.counts)
        return self.count_for(S)


def build_multisamples(
    plan: SamplingPlan, spec: TruncatedGaussianSpec, game: GameSpec
) -> dict[CoalitionId, EmpiricalDistribution]:
    if game.dim != 1:
        raise ConfigurationError("sampling from the reference distribution requires a one-dimensional game")
    out: dict[CoalitionId, EmpiricalDistribution] = {}
    if plan.mode is SamplingMode.PER_COALITION:
        for S in game.coalitions:
            ss = seed_sequence(plan.master_seed, Role.COALITION, S)
            out[S] = sample_truncated_gaussian(spec, plan.count_for(S), ss)
    elif plan.mode is SamplingMode.PER_AGENT:
        per_agent = {
            i: sample_truncated_gaussian(spec, plan.count_for(i), seed_sequence(plan.master_seed, Role.AGENT, i)).samples
            for i in range(1, game.n_agents + 1)
        }
        for S in game.coalitions:
            out[S] = EmpiricalDistribution(np.vstack([per_agent[i] for i in members(S)]), spec.support)
    else:
        shared = sample_truncated_gaussian(spec, int(plan.counts), seed_sequence(plan.master_seed, Role.SHARED))
        out = {S: shared for S in game.coalitions}
    return out
