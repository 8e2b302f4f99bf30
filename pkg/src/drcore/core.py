"""Expected-value and distributionally robust cores: construction, allocation,
stability and containment checks."""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .ambiguity import AmbiguityConfig
from .distributions import EmpiricalDistribution, TruncatedGaussianSpec, true_mean_value
from .errors import ConfigurationError, EmptyCoreError, EmptyRegionError, InputError
from .game_model import CoalitionId, GameSpec, enumerate_subcoalitions, members
from .optim import EQ, GE, LinearProgram, feasible_point, min_norm_point, solve_lp
from .worst_case import Engine, WorstCaseResult, build_dual_lp, worst_case

STABILITY_TOL = 1e-8


def membership_matrix(n_agents: int, coalitions) -> np.ndarray:
    """Row per coalition, 1 where the agent belongs to it."""
    M = np.zeros((len(coalitions), n_agents))
    for r, S in enumerate(coalitions):
        for i in members(S):
            M[r, i - 1] = 1.0
    return M


@dataclass(frozen=True)
class CorePolyhedron:
    """``{x : sum(x) = u_N, sum_{i in S} x_i >= t_S for every proper S}``."""

    n_agents: int
    grand_value: float
    thresholds: Mapping[CoalitionId, float]

    def __post_init__(self):
        expected = enumerate_subcoalitions(self.n_agents)
        th = dict(self.thresholds)
        if sorted(th) != expected:
            raise ConfigurationError("need exactly one threshold per nonempty proper coalition")
        object.__setattr__(self, "thresholds", {S: float(th[S]) for S in expected})
        object.__setattr__(self, "grand_value", float(self.grand_value))

    @property
    def coalitions(self) -> list[CoalitionId]:
        return list(self.thresholds)

    def constraints(self):
        """(A_eq, b_eq, G, h) with ``A_eq x = b_eq`` and ``G x >= h``."""
        G = membership_matrix(self.n_agents, self.coalitions)
        h = np.array(list(self.thresholds.values()))
        return np.ones((1, self.n_agents)), np.array([self.grand_value]), G, h

    def scaled(self, s: float) -> "CorePolyhedron":
        return CorePolyhedron(self.n_agents, self.grand_value * s, {S: t * s for S, t in self.thresholds.items()})

    def is_empty(self) -> bool:
        A_eq, b_eq, G, h = self.constraints()
        try:
            feasible_point(A_eq, b_eq, G, h, self.n_agents)
        except EmptyRegionError:
            return True
        return False

    def to_dict(self, x=None) -> dict:
        d = {"u_N": self.grand_value, "thresholds": {str(S): t for S, t in self.thresholds.items()}}
        if x is not None:
            d["x"] = [float(v) for v in np.asarray(x)]
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "CorePolyhedron":
        th = {int(k): float(v) for k, v in d["thresholds"].items()}
        n = max(th).bit_length()
        return cls(n, float(d["u_N"]), th)

    def to_json(self, x=None) -> str:
        return json.dumps(self.to_dict(x), indent=2)


@dataclass(frozen=True)
class Allocation:
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).ravel())

    def coalition_payoff(self, S: CoalitionId) -> float:
        return float(sum(self.x[i - 1] for i in members(S)))


@dataclass(frozen=True)
class StabilityVerdict:
    stable: bool
    efficiency_gap: float
    slacks: dict
    violated: list


@dataclass(frozen=True)
class ContainmentReport:
    dominance: dict  # coalition -> W_S >= E_S
    contained: bool
    max_violation: float
    vacuous: bool = False

    @property
    def all_dominate(self) -> bool:
        return all(self.dominance.values())


def compute_worst_cases(
    game: GameSpec,
    samples: Mapping[CoalitionId, EmpiricalDistribution],
    config: AmbiguityConfig,
    engine: Engine | str = Engine.AUTO,
    workers: int = 1,
) -> dict[CoalitionId, WorstCaseResult]:
    """Per-coalition worst-case expectations; the coalitions are independent problems."""
    missing = [S for S in game.coalitions if S not in samples]
    if missing:
        raise ConfigurationError(f"no samples for coalitions {[members(S) for S in missing]}")

    def one(S):
        emp = samples[S]
        eps = config.radius_for(S, emp.size)
        return worst_case(game.value_map[S], emp, eps, game.support, config.norm, engine)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, game.coalitions))
    else:
        results = [one(S) for S in game.coalitions]
    return dict(zip(game.coalitions, results))


def build_dr_core(
    game: GameSpec,
    samples: Mapping[CoalitionId, EmpiricalDistribution],
    config: AmbiguityConfig,
    engine: Engine | str = Engine.AUTO,
    workers: int = 1,
) -> CorePolyhedron:
    res = compute_worst_cases(game, samples, config, engine, workers)
    return CorePolyhedron(game.n_agents, game.grand_value, {S: r.value for S, r in res.items()})


def build_expected_core(game: GameSpec, dist: TruncatedGaussianSpec) -> CorePolyhedron:
    th = {S: true_mean_value(dist, v) for S, v in game.value_map.items()}
    return CorePolyhedron(game.n_agents, game.grand_value, th)


def find_allocation(core: CorePolyhedron) -> Allocation:
    """Minimum Euclidean-norm allocation in the core; EmptyCoreError if there is none."""
    A_eq, b_eq, G, h = core.constraints()
    try:
        x = min_norm_point(A_eq, b_eq, G, h, n=core.n_agents)
    except EmptyRegionError:
        raise EmptyCoreError("empty DR core: no allocation meets every coalition threshold") from None
    return Allocation(x)


def check_allocation(core: CorePolyhedron, x) -> StabilityVerdict:
    x = x.x if isinstance(x, Allocation) else np.asarray(x, dtype=float).ravel()
    if x.size != core.n_agents:
        raise InputError(f"allocation has {x.size} entries for {core.n_agents} agents")
    gap = float(x.sum() - core.grand_value)
    slacks = {S: float(sum(x[i - 1] for i in members(S)) - t) for S, t in core.thresholds.items()}
    violated = [S for S, s in slacks.items() if s < -STABILITY_TOL]
    return StabilityVerdict(abs(gap) <= STABILITY_TOL and not violated, gap, slacks, violated)


def check_containment(dr: CorePolyhedron, expected: CorePolyhedron) -> ContainmentReport:
    """Is every DR-stable allocation stable in the mean sense?

    Dominance ``W_S >= E_S`` per coalition is sufficient. The exact answer
    comes from one LP per facet of the expected core: the largest violation
    of that facet over the DR core.
    """
    if dr.n_agents != expected.n_agents:
        raise InputError("cores have different numbers of agents")
    if dr.grand_value != expected.grand_value:
        raise InputError("cores have different grand-coalition values")
    dominance = {S: dr.thresholds[S] >= expected.thresholds[S] for S in dr.coalitions}
    A_eq, b_eq, G, h = dr.constraints()
    n = dr.n_agents
    worst = -np.inf
    for S, row in zip(dr.coalitions, G):
        lp = LinearProgram(
            c=row,
            A=np.vstack([A_eq, G]),
            rel=(EQ,) + (GE,) * len(h),
            rhs=np.concatenate([b_eq, h]),
            lower=np.full(n, -np.inf),
        )
        rep = solve_lp(lp)
        if rep.status == "infeasible":
            return ContainmentReport(dominance, True, 0.0, vacuous=True)
        # the sum of members is bounded below on the DR core by its own threshold
        worst = max(worst, expected.thresholds[S] - rep.value)
    return ContainmentReport(dominance, worst <= STABILITY_TOL, max(worst, 0.0))


def find_allocation_monolithic(
    game: GameSpec,
    samples: Mapping[CoalitionId, EmpiricalDistribution],
    config: AmbiguityConfig,
    dual_weight: float = 1e-6,
) -> Allocation:
    """Single lifted program over the allocation and every coalition's dual variables.

    Cross-validation path for small instances. The dual variables carry a
    tiny weight ``dual_weight`` in the objective so the projection is unique;
    the allocation therefore matches the decomposed route up to O(dual_weight).
    """
    N = game.n_agents
    blocks = []
    for S in game.coalitions:
        emp = samples[S]
        eps = config.radius_for(S, emp.size)
        lp, _ = build_dual_lp(game.value_map[S], emp, eps, game.support, config.norm)
        blocks.append((S, lp))
    n = N + sum(lp.n_vars for _, lp in blocks)
    s = np.sqrt(dual_weight)

    A_eq = np.zeros((1, n))
    A_eq[0, :N] = 1.0
    G_rows, h = [], []
    off = N
    for S, lp in blocks:
        nv = lp.n_vars
        # the dual LP rows are all "<=": -A y >= -rhs
        for row, b in zip(lp.A, lp.rhs):
            g = np.zeros(n)
            g[off : off + nv] = -row / s
            G_rows.append(g)
            h.append(-b)
        for j in np.flatnonzero(np.isfinite(lp.lower)):
            g = np.zeros(n)
            g[off + j] = 1.0 / s
            G_rows.append(g)
            h.append(lp.lower[j])
        # sum_{i in S} x_i - objective(y) >= 0
        g = np.zeros(n)
        for i in members(S):
            g[i - 1] = 1.0
        g[off : off + nv] = -lp.c / s
        G_rows.append(g)
        h.append(0.0)
        off += nv
    try:
        y = min_norm_point(A_eq, [game.grand_value], np.array(G_rows), np.array(h), n=n)
    except EmptyRegionError:
        raise EmptyCoreError("empty DR core: no allocation meets every coalition threshold") from None
    return Allocation(y[:N])
