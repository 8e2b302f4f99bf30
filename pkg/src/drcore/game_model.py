"""Coalitional games with uncertain max-of-affine coalition values."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import ConfigurationError, InputError

MAX_AGENTS = 20


class NormTag(str, enum.Enum):
    """Ground norm on the uncertainty space."""

    ONE = "one_norm"
    MAX = "max_norm"
    EUCLIDEAN = "euclidean"

    @property
    def dual(self) -> "NormTag":
        return {NormTag.ONE: NormTag.MAX, NormTag.MAX: NormTag.ONE, NormTag.EUCLIDEAN: NormTag.EUCLIDEAN}[self]

    @property
    def ord(self):
        return {NormTag.ONE: 1, NormTag.MAX: np.inf, NormTag.EUCLIDEAN: 2}[self]

    def __call__(self, v) -> float:
        return float(np.linalg.norm(np.atleast_1d(np.asarray(v, dtype=float)), ord=self.ord))


# Coalitions are plain ints: bit i-1 set <=> agent i is a member.
CoalitionId = int


def members(mask: CoalitionId) -> tuple[int, ...]:
    """1-based agent indices in ``mask``."""
    out, i = [], 1
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def mask_of(agents: Iterable[int]) -> CoalitionId:
    mask = 0
    for i in agents:
        if i < 1:
            raise InputError(f"agent indices are 1-based, got {i}")
        mask |= 1 << (i - 1)
    return mask


def coalition_label(mask: CoalitionId) -> str:
    """Compact label such as ``"13"`` for agents {1, 3}; agents above 9 are comma separated."""
    ms = members(mask)
    if all(i < 10 for i in ms):
        return "".join(str(i) for i in ms)
    return ",".join(str(i) for i in ms)


def enumerate_subcoalitions(n_agents: int) -> list[CoalitionId]:
    """All nonempty proper coalitions in ascending bitmask order (2**n - 2 of them)."""
    if not isinstance(n_agents, (int, np.integer)) or not 2 <= n_agents <= MAX_AGENTS:
        raise ConfigurationError(f"number of agents must be in [2, {MAX_AGENTS}], got {n_agents!r}")
    return list(range(1, (1 << n_agents) - 1))


@dataclass(frozen=True)
class BoxSupport:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ConfigurationError("box bounds must be vectors of equal length")
        if np.any(lo > hi) or not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ConfigurationError("box requires finite lo <= hi")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    def contains(self, x, tol: float = 1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def __eq__(self, other):
        return (
            isinstance(other, BoxSupport)
            and np.array_equal(self.lo, other.lo)
            and np.array_equal(self.hi, other.hi)
        )

    def __hash__(self):
        return hash((self.lo.tobytes(), self.hi.tobytes()))


@dataclass(frozen=True)
class PiecewiseAffineValue:
    """``u(xi) = max_m (a_m . xi + b_m)``; ``slopes`` has shape (M, p)."""

    slopes: np.ndarray
    intercepts: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.slopes, dtype=float)
        if a.ndim == 1:
            a = a[:, None]
        b = np.atleast_1d(np.asarray(self.intercepts, dtype=float)).copy()
        if a.ndim != 2 or a.shape[0] == 0 or a.shape[0] != b.size:
            raise ConfigurationError("need at least one piece and one intercept per slope")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ConfigurationError("pieces must be finite")
        a = a.copy()
        a.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "slopes", a)
        object.__setattr__(self, "intercepts", b)

    @classmethod
    def from_pieces(cls, pieces) -> "PiecewiseAffineValue":
        """Build from ``[(a, b), ...]`` where ``a`` is a scalar or vector."""
        pieces = list(pieces)
        if not pieces:
            raise ConfigurationError("need at least one piece")
        rows = [np.atleast_1d(np.asarray(a, dtype=float)) for a, _ in pieces]
        if len({r.size for r in rows}) != 1:
            raise ConfigurationError("all pieces must share the same dimension")
        return cls(np.vstack(rows), np.array([float(b) for _, b in pieces]))

    @classmethod
    def constant(cls, value: float, dim: int = 1) -> "PiecewiseAffineValue":
        return cls(np.zeros((1, dim)), np.array([float(value)]))

    @property
    def dim(self) -> int:
        return self.slopes.shape[1]

    @property
    def n_pieces(self) -> int:
        return self.slopes.shape[0]

    @property
    def pieces(self) -> list[tuple[np.ndarray, float]]:
        return [(self.slopes[m], float(self.intercepts[m])) for m in range(self.n_pieces)]

    def __call__(self, xi) -> float:
        return evaluate_value(self, xi)

    def evaluate_many(self, xs) -> np.ndarray:
        """Vectorised evaluation on an array of points, shape (K, p) or (K,) when p = 1."""
        xs = np.asarray(xs, dtype=float)
        if xs.ndim == 1:
            xs = xs[:, None] if self.dim == 1 else xs[None, :]
        if xs.shape[1] != self.dim:
            raise InputError(f"points have dimension {xs.shape[1]}, value function expects {self.dim}")
        return (xs @ self.slopes.T + self.intercepts).max(axis=1)

    def scaled(self, s: float) -> "PiecewiseAffineValue":
        """Same slopes, intercepts multiplied by ``s``."""
        return PiecewiseAffineValue(self.slopes, self.intercepts * s)

    def __eq__(self, other):
        return (
            isinstance(other, PiecewiseAffineValue)
            and np.array_equal(self.slopes, other.slopes)
            and np.array_equal(self.intercepts, other.intercepts)
        )

    def __hash__(self):
        return hash((self.slopes.tobytes(), self.intercepts.tobytes()))


def evaluate_value(v: PiecewiseAffineValue, xi) -> float:
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.shape != (v.dim,):
        raise InputError(f"xi has shape {xi.shape}, expected ({v.dim},)")
    return float(np.max(v.slopes @ xi + v.intercepts))


def lipschitz_constant(v: PiecewiseAffineValue, norm: NormTag = NormTag.ONE) -> float:
    """Largest dual norm of a slope: a valid Lipschitz constant w.r.t. ``norm``."""
    norm = NormTag(norm)
    return float(max(norm.dual(a) for a in v.slopes))


@dataclass(frozen=True)
class GameSpec:
    n_agents: int
    value_map: Mapping[CoalitionId, PiecewiseAffineValue]
    grand_value: float
    support: BoxSupport

    def __post_init__(self):
        coalitions = enumerate_subcoalitions(self.n_agents)
        vm = dict(self.value_map)
        missing = [S for S in coalitions if S not in vm]
        extra = [S for S in vm if S not in coalitions]
        if missing:
            raise ConfigurationError(f"no value function for coalitions {[members(S) for S in missing]}")
        if extra:
            raise ConfigurationError(f"value functions given for invalid coalitions {sorted(extra)}")
        for S, v in vm.items():
            if v.dim != self.support.dim:
                raise ConfigurationError(
                    f"coalition {members(S)} has dimension {v.dim}, support has {self.support.dim}"
                )
        object.__setattr__(self, "value_map", {S: vm[S] for S in coalitions})
        object.__setattr__(self, "grand_value", float(self.grand_value))

    @property
    def coalitions(self) -> list[CoalitionId]:
        return list(self.value_map)

    @property
    def dim(self) -> int:
        return self.support.dim

    @property
    def m_impl(self) -> int:
        """Coalitions entering products and sums: nonempty and proper, 2**N - 2."""
        return (1 << self.n_agents) - 2

    @property
    def m_reported(self) -> int:
        """The count 2**N - 1 that also includes the empty coalition."""
        return (1 << self.n_agents) - 1

    def with_grand_value(self, u_n: float) -> "GameSpec":
        return GameSpec(self.n_agents, self.value_map, u_n, self.support)

    # serialisation

    def to_dict(self) -> dict:
        return {
            "n_agents": self.n_agents,
            "grand_value": self.grand_value,
            "support": {"lo": self.support.lo.tolist(), "hi": self.support.hi.tolist()},
            "coalitions": [
                {
                    "members": list(members(S)),
                    "pieces": [{"a": a.tolist(), "b": b} for a, b in v.pieces],
                }
                for S, v in self.value_map.items()
            ],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "GameSpec":
        try:
            n = int(d["n_agents"])
            support = BoxSupport(d["support"]["lo"], d["support"]["hi"])
            vm = {}
            for entry in d["coalitions"]:
                S = mask_of(entry["members"])
                if S in vm:
                    raise ConfigurationError(f"coalition {entry['members']} listed twice")
                vm[S] = PiecewiseAffineValue.from_pieces((p["a"], p["b"]) for p in entry["pieces"])
            return cls(n, vm, float(d["grand_value"]), support)
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"malformed game document: {exc!r}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "GameSpec":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "GameSpec":
        return cls.from_json(Path(path).read_text())

    def __eq__(self, other):
        return (
            isinstance(other, GameSpec)
            and self.n_agents == other.n_agents
            and self.grand_value == other.grand_value
            and self.support == other.support
            and dict(self.value_map) == dict(other.value_map)
        )

    def __hash__(self):
        return hash((self.n_agents, self.grand_value, self.support, tuple(self.value_map.items())))


def reference_game(grand_value: float = 12.0) -> GameSpec:
    """The three-agent example: u_S = b_S + xi on [0, 1].

    The grand-coalition value is not part of the example; 12 is an arbitrary
    choice that leaves the expected-value core nonempty.
    """
    intercepts = {(1,): 2.0, (2,): 1.5, (3,): 2.5, (1, 2): 6.0, (2, 3): 6.5, (1, 3): 7.0}
    vm = {mask_of(S): PiecewiseAffineValue.from_pieces([(1.0, b)]) for S, b in intercepts.items()}
    return GameSpec(3, vm, grand_value, BoxSupport([0.0], [1.0]))
