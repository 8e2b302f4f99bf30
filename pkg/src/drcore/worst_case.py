"""Worst-case expectation of a max-of-affine function over a Wasserstein ball.

Three engines compute

    sup { E_Q[u(xi)] : d_W(Q, P_hat) <= eps, Q supported on the box }

* ``dual_lp``: the finite dual program, solved as an LP.
* ``closed_form``: one affine piece on an interval (fractional knapsack).
* ``oracle``: the primal transport LP over a grid, an inner approximation
  used only for cross-checking.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import TextIO

import numpy as np

from .distributions import EmpiricalDistribution
from .errors import InputError, InfeasibleProblemError, NumericalError, UnsupportedDimensionError
from .game_model import BoxSupport, NormTag, PiecewiseAffineValue
from .optim import EQ, LE, LinearProgram, solve_lp

CERT_TOL = 1e-8
N_EUCLIDEAN_SEGMENTS = 16


class Engine(str, enum.Enum):
    DUAL_LP = "dual_lp"
    CLOSED_FORM = "closed_form"
    ORACLE = "oracle"
    AUTO = "auto"


def support_function_box(box: BoxSupport, v) -> float:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.shape != (box.dim,):
        raise InputError(f"vector has shape {v.shape}, box has dimension {box.dim}")
    return float(np.sum(np.where(v >= 0, box.hi * v, box.lo * v)))


def conjugate_neg_affine(a, b: float, y, tol: float = 1e-12) -> float:
    """Conjugate of ``-(a.x + b)`` at ``y``: ``b`` when ``y = -a``, else ``+inf``."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return float(b) if np.all(np.abs(y + a) <= tol) else np.inf


def _euclidean_directions(p: int) -> np.ndarray:
    """Facet normals, scaled so ``d.z <= lam`` for all d cuts out a polygon inside the disk of radius lam.

    A polygon inscribed in the dual ball is the polar of one circumscribing
    the primal unit ball, so the LP value can only overestimate the supremum.
    """
    if p == 1:
        return np.array([[1.0], [-1.0]])
    n = N_EUCLIDEAN_SEGMENTS
    theta = 2 * np.pi * np.arange(n) / n
    return np.column_stack([np.cos(theta), np.sin(theta)]) / np.cos(np.pi / n)


def dual_norm_value(norm: NormTag, z) -> float:
    return NormTag(norm).dual(np.atleast_1d(np.asarray(z, dtype=float)))


@dataclass(frozen=True)
class DualCertificate:
    lam: float
    ell: np.ndarray  # (K,)
    v: np.ndarray  # (K, M, p)
    z: np.ndarray  # (K, M, p), z = v - a_m

    def objective(self, eps: float) -> float:
        return float(self.lam * eps + self.ell.mean())

    def violations(self, u: PiecewiseAffineValue, emp: EmpiricalDistribution, box: BoxSupport, norm: NormTag) -> float:
        """Largest violation of the dual constraints (<= 0 means valid)."""
        norm = NormTag(norm)
        worst = -self.lam
        K, M = self.v.shape[:2]
        for k in range(K):
            xi = emp.samples[k]
            for m in range(M):
                a, b = u.slopes[m], u.intercepts[m]
                worst = max(worst, float(np.max(np.abs(self.z[k, m] - (self.v[k, m] - a)))))
                worst = max(worst, dual_norm_value(norm, self.z[k, m]) - self.lam)
                lhs = b + support_function_box(box, self.v[k, m]) - self.z[k, m] @ xi
                worst = max(worst, lhs - self.ell[k])
        return worst

    def is_valid(self, u, emp, box, norm, tol: float = CERT_TOL) -> bool:
        return self.violations(u, emp, box, norm) <= tol


@dataclass(frozen=True)
class WorstCaseResult:
    value: float
    certificate: DualCertificate | None
    engine: Engine


def _check_inputs(u: PiecewiseAffineValue, emp: EmpiricalDistribution, eps: float, box: BoxSupport):
    if eps < 0:
        raise InputError("radius must be nonnegative")
    if u.dim != box.dim or emp.dim != box.dim:
        raise InputError("value function, samples and support disagree in dimension")
    if not box.contains(emp.samples, tol=1e-12):
        raise InputError("samples lie outside the support box")


def build_dual_lp(u: PiecewiseAffineValue, emp: EmpiricalDistribution, eps: float, box: BoxSupport, norm: NormTag):
    """Assemble the dual program as a LinearProgram plus an index map.

    Variable layout: lambda, ell_1..ell_K, then per (k, m) the sign-split
    v+ (p), v- (p) and, for the max-norm ground, bounds t (p) on |z|.
    The conjugate argument is taken as ``z - v``, so the conjugate of the
    negated affine piece is finite only on ``z = v - a_m``; z is eliminated.
    """
    norm = NormTag(norm)
    K, p, M = emp.size, box.dim, u.n_pieces
    if norm is NormTag.EUCLIDEAN and p > 2:
        raise UnsupportedDimensionError("Euclidean ground norm is supported for p <= 2 only")
    use_t = norm is NormTag.MAX and p > 1
    block = 2 * p + (p if use_t else 0)
    n = 1 + K + K * M * block

    def vp(k, m):
        return 1 + K + (k * M + m) * block

    rows, rel, rhs = [], [], []

    def add(coefs: dict, r: str, b: float):
        row = np.zeros(n)
        for j, c in coefs.items():
            row[j] += c
        rows.append(row)
        rel.append(r)
        rhs.append(b)

    dirs = _euclidean_directions(p) if norm is NormTag.EUCLIDEAN else None
    for k in range(K):
        xi = emp.samples[k]
        for m in range(M):
            a, b = u.slopes[m], float(u.intercepts[m])
            base = vp(k, m)
            # b_m + hi.v+ - lo.v- - (v+ - v- - a_m).xi <= ell_k
            coefs = {1 + k: -1.0}
            for j in range(p):
                coefs[base + j] = box.hi[j] - xi[j]
                coefs[base + p + j] = xi[j] - box.lo[j]
            add(coefs, LE, -b - float(a @ xi))
            # dual-norm bound on z = v+ - v- - a_m
            if norm is NormTag.ONE or (norm is not NormTag.EUCLIDEAN and p == 1):
                for j in range(p):
                    for s in (1.0, -1.0):
                        add({base + j: s, base + p + j: -s, 0: -1.0}, LE, s * a[j])
            elif norm is NormTag.MAX:
                tb = base + 2 * p
                for j in range(p):
                    for s in (1.0, -1.0):
                        add({base + j: s, base + p + j: -s, tb + j: -1.0}, LE, s * a[j])
                add({**{tb + j: 1.0 for j in range(p)}, 0: -1.0}, LE, 0.0)
            else:
                for d in dirs:
                    coefs = {0: -1.0}
                    for j in range(p):
                        coefs[base + j] = d[j]
                        coefs[base + p + j] = -d[j]
                    add(coefs, LE, float(d @ a))

    c = np.zeros(n)
    c[0] = eps
    c[1 : 1 + K] = 1.0 / K
    lower = np.zeros(n)
    lower[1 : 1 + K] = -np.inf
    lp = LinearProgram(c=c, A=np.array(rows), rel=tuple(rel), rhs=np.array(rhs), lower=lower)
    return lp, vp


def worst_case_dual_lp(
    u: PiecewiseAffineValue,
    emp: EmpiricalDistribution,
    eps: float,
    box: BoxSupport,
    norm: NormTag = NormTag.ONE,
    dump: TextIO | None = None,
) -> WorstCaseResult:
    _check_inputs(u, emp, eps, box)
    norm = NormTag(norm)
    lp, vp = build_dual_lp(u, emp, eps, box, norm)
    if dump is not None:
        lp.dump(dump)
    rep = solve_lp(lp)
    if not rep.optimal:
        raise InfeasibleProblemError(f"worst-case dual LP reported {rep.status}")
    x = rep.x
    K, M, p = emp.size, u.n_pieces, box.dim
    v = np.zeros((K, M, p))
    for k in range(K):
        for m in range(M):
            base = vp(k, m)
            v[k, m] = x[base : base + p] - x[base + p : base + 2 * p]
    z = v - u.slopes[None, :, :]
    lam = max(float(x[0]), 0.0)
    # ell from its binding constraints, which tightens the certificate
    ell = np.empty(K)
    for k in range(K):
        xi = emp.samples[k]
        ell[k] = max(
            u.intercepts[m] + support_function_box(box, v[k, m]) - z[k, m] @ xi for m in range(M)
        )
    cert = DualCertificate(lam, ell, v, z)
    return WorstCaseResult(cert.objective(eps), cert, Engine.DUAL_LP)


def closed_form_applies(u: PiecewiseAffineValue, box: BoxSupport) -> bool:
    return u.n_pieces == 1 and box.dim == 1


def worst_case_closed_form_affine(
    u: PiecewiseAffineValue,
    emp: EmpiricalDistribution,
    eps: float,
    box: BoxSupport,
    norm: NormTag = NormTag.ONE,
) -> WorstCaseResult:
    """Single affine piece on an interval: mean + |a| * min(eps, mean headroom).

    Every unit of transport budget buys |a| of value until all atoms sit at
    the favourable end of the interval. Falls back to the dual LP otherwise.
    """
    if not closed_form_applies(u, box):
        return worst_case_dual_lp(u, emp, eps, box, norm)
    _check_inputs(u, emp, eps, box)
    a, b = float(u.slopes[0, 0]), float(u.intercepts[0])
    xs = emp.samples[:, 0]
    K = xs.size
    mean = float(np.mean(a * xs + b))
    if a == 0.0:
        lam, v = 0.0, np.zeros(K)
        value = b
    else:
        headroom = float(np.mean(box.hi[0] - xs)) if a > 0 else float(np.mean(xs - box.lo[0]))
        if eps < headroom:
            lam, v = abs(a), np.zeros(K)
            value = mean + abs(a) * eps
        else:
            lam, v = 0.0, np.full(K, a)
            value = mean + abs(a) * headroom
    sigma = np.where(v >= 0, box.hi[0] * v, box.lo[0] * v)
    ell = b + sigma - (v - a) * xs
    v = v.reshape(K, 1, 1)
    z = v - a
    return WorstCaseResult(value, DualCertificate(lam, ell, v, z), Engine.CLOSED_FORM)


def _grid(box: BoxSupport, grid_points: int) -> np.ndarray:
    axes = [np.linspace(box.lo[j], box.hi[j], grid_points) for j in range(box.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def worst_case_oracle(
    u: PiecewiseAffineValue,
    emp: EmpiricalDistribution,
    eps: float,
    box: BoxSupport,
    grid_points: int = 2001,
    norm: NormTag = NormTag.ONE,
) -> float:
    """Primal transport LP restricted to a grid (plus the atoms themselves).

    Feasible for the original problem, so never exceeds the true supremum.
    """
    _check_inputs(u, emp, eps, box)
    if grid_points < 2:
        raise InputError("grid needs at least two points per axis")
    if box.dim > 2:
        raise UnsupportedDimensionError("the transport oracle handles p <= 2")
    norm = NormTag(norm)
    cand = np.unique(np.vstack([_grid(box, grid_points), emp.samples]), axis=0)
    K, G = emp.size, cand.shape[0]
    gain = u.evaluate_many(cand)
    diff = emp.samples[:, None, :] - cand[None, :, :]
    cost = np.linalg.norm(diff, ord=norm.ord, axis=2) if box.dim > 1 else np.abs(diff[:, :, 0])

    # pi[k, g] flattened row-major
    A = np.zeros((K + 1, K * G))
    for k in range(K):
        A[k, k * G : (k + 1) * G] = 1.0
    A[K] = cost.ravel()
    lp = LinearProgram(
        c=np.tile(gain, K),
        A=A,
        rel=(EQ,) * K + (LE,),
        rhs=np.concatenate([np.full(K, 1.0 / K), [eps]]),
        sense="max",
    )
    rep = solve_lp(lp)
    if not rep.optimal:
        raise NumericalError(f"transport oracle LP reported {rep.status}")
    return rep.value


def worst_case(
    u: PiecewiseAffineValue,
    emp: EmpiricalDistribution,
    eps: float,
    box: BoxSupport,
    norm: NormTag = NormTag.ONE,
    engine: Engine | str = Engine.AUTO,
    grid_points: int = 2001,
) -> WorstCaseResult:
    """Dispatch to an engine; ``auto`` uses the closed form where it applies."""
    engine = Engine(engine)
    norm = NormTag(norm)
    if engine is Engine.AUTO:
        # on the line every supported norm is |.|, so the closed form is norm-agnostic
        engine = Engine.CLOSED_FORM if closed_form_applies(u, box) else Engine.DUAL_LP
    if engine is Engine.CLOSED_FORM:
        return worst_case_closed_form_affine(u, emp, eps, box, norm)
    if engine is Engine.ORACLE:
        return WorstCaseResult(worst_case_oracle(u, emp, eps, box, grid_points, norm), None, Engine.ORACLE)
    return worst_case_dual_lp(u, emp, eps, box, norm)
