"""Dense linear programming and minimum-norm projection onto polyhedra.

Both solvers are deliberately small and dependency-light (numpy only). They
target desk-scale problems: a few thousand variables at most.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyRegionError, NumericalError


@dataclass(frozen=True)
class Tolerances:
    pivot: float = 1e-10
    feasibility: float = 1e-9
    optimality: float = 1e-10
    # iterations before Dantzig pricing gives way to Bland's rule, per (m + n)
    bland_factor: int = 10
    max_active_set_iter: int = 10_000


TOL = Tolerances()

LE, EQ, GE = "<=", "=", ">="


@dataclass(frozen=True)
class LinearProgram:
    """``sense c.x`` subject to ``A x (rel) rhs`` and ``lower <= x <= upper``."""

    c: np.ndarray
    A: np.ndarray
    rel: tuple[str, ...]
    rhs: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    sense: str = "min"

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        n = c.size
        A = np.asarray(self.A, dtype=float).reshape(-1, n)
        rhs = np.asarray(self.rhs, dtype=float).ravel()
        lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float).ravel()
        upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float).ravel()
        rel = tuple(self.rel)
        if A.shape[0] != rhs.size or len(rel) != rhs.size:
            raise ValueError("constraint matrix, relations and right-hand side disagree in length")
        if lower.size != n or upper.size != n:
            raise ValueError("bounds must have one entry per variable")
        if not np.all(np.isfinite(c)):
            raise ValueError("objective entries must be finite")
        if any(r not in (LE, EQ, GE) for r in rel):
            raise ValueError(f"unknown relation in {rel}")
        if self.sense not in ("min", "max"):
            raise ValueError(f"unknown sense {self.sense!r}")
        if np.any(lower > upper):
            raise ValueError("lower bound exceeds upper bound")
        for name, val in (("c", c), ("A", A), ("rhs", rhs), ("lower", lower), ("upper", upper), ("rel", rel)):
            object.__setattr__(self, name, val)

    @property
    def n_vars(self) -> int:
        return self.c.size

    def dump(self, fh) -> None:
        """Write the instance as a plain-text table (objective row, then one row per constraint)."""
        fmt = lambda v: f"{v:.17g}"
        fh.write(f"# sense {self.sense} vars {self.n_vars} rows {self.A.shape[0]}\n")
        fh.write("obj\t" + "\t".join(fmt(v) for v in self.c) + "\n")
        for row, r, b in zip(self.A, self.rel, self.rhs):
            fh.write("row\t" + "\t".join(fmt(v) for v in row) + f"\t{r}\t{fmt(b)}\n")
        fh.write("lower\t" + "\t".join(fmt(v) for v in self.lower) + "\n")
        fh.write("upper\t" + "\t".join(fmt(v) for v in self.upper) + "\n")


@dataclass(frozen=True)
class SolveReport:
    status: str  # "optimal" | "infeasible" | "unbounded"
    value: float
    x: np.ndarray | None
    iterations: int

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class _StandardForm:
    """min c.y s.t. A y = b, y >= 0, with the map back to the original variables."""

    def __init__(self, lp: LinearProgram):
        n = lp.n_vars
        cols = []  # (original index, coefficient) per standard column
        offset = np.zeros(n)
        extra_rows = []  # (std column, upper bound) for doubly bounded variables
        for j in range(n):
            lo, up = lp.lower[j], lp.upper[j]
            if np.isfinite(lo):
                offset[j] = lo
                cols.append((j, 1.0))
                if np.isfinite(up):
                    extra_rows.append((len(cols) - 1, up - lo))
            elif np.isfinite(up):
                offset[j] = up
                cols.append((j, -1.0))
            else:
                cols.append((j, 1.0))
                cols.append((j, -1.0))
        self.col_orig = np.array([j for j, _ in cols], dtype=int)
        self.col_sign = np.array([s for _, s in cols], dtype=float)
        self.offset = offset
        self.n_orig = n

        A = lp.A[:, self.col_orig] * self.col_sign
        b = lp.rhs - lp.A @ offset
        rel = list(lp.rel)
        if extra_rows:
            E = np.zeros((len(extra_rows), len(cols)))
            for r, (k, u) in enumerate(extra_rows):
                E[r, k] = 1.0
            A = np.vstack([A, E])
            b = np.concatenate([b, [u for _, u in extra_rows]])
            rel += [LE] * len(extra_rows)

        n_slack = sum(r != EQ for r in rel)
        m = A.shape[0]
        S = np.zeros((m, n_slack))
        slack_of_row = {}
        k = 0
        for i, r in enumerate(rel):
            if r == LE:
                S[i, k] = 1.0
            elif r == GE:
                S[i, k] = -1.0
            if r != EQ:
                slack_of_row[i] = k
                k += 1
        A = np.hstack([A, S])
        sign = np.where(b < 0, -1.0, 1.0)
        self.A = A * sign[:, None]
        self.b = b * sign
        sgn_c = 1.0 if lp.sense == "min" else -1.0
        self.c = np.concatenate([sgn_c * lp.c[self.col_orig] * self.col_sign, np.zeros(n_slack)])
        n_struct = len(cols)
        # rows whose slack column is +1 after sign normalisation can start basic
        self.initial_slack = {i: n_struct + k for i, k in slack_of_row.items() if self.A[i, n_struct + k] > 0}

    def to_original(self, y: np.ndarray) -> np.ndarray:
        n_struct = self.col_orig.size
        return self.offset + np.bincount(self.col_orig, weights=self.col_sign * y[:n_struct], minlength=self.n_orig)


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    colvals = T[:, col].copy()
    colvals[row] = 0.0
    T -= np.outer(colvals, T[row])


def _run_simplex(T, basis, n_cols, allowed, tol):
    """Minimise the objective held in the last row of tableau ``T``.

    Returns (status, iterations). ``allowed`` masks columns that may enter.
    """
    m = T.shape[0] - 1
    switch = tol.bland_factor * (m + n_cols)
    hard_cap = switch + 50 * (m + n_cols) + 1000
    it = 0
    while True:
        red = T[-1, :n_cols]
        cand = np.flatnonzero(allowed & (red < -tol.optimality))
        if cand.size == 0:
            return "optimal", it
        if it >= hard_cap:
            raise NumericalError(f"simplex did not terminate after {it} pivots")
        if it < switch:
            col = cand[np.argmin(red[cand])]  # argmin returns the lowest index on ties
        else:
            col = cand[0]
        colv = T[:m, col]
        rows = np.flatnonzero(colv > tol.pivot)
        if rows.size == 0:
            return "unbounded", it
        ratios = T[rows, -1] / colv[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
        row = ties[np.argmin(np.asarray(basis)[ties])]
        _pivot(T, row, col)
        basis[row] = col
        it += 1


def solve_lp(lp: LinearProgram, tol: Tolerances = TOL) -> SolveReport:
    """Two-phase dense tableau simplex.

    Dantzig pricing with lowest-index tie-breaks, switching to Bland's rule
    after ``bland_factor * (m + n)`` pivots of a phase.
    """
    sf = _StandardForm(lp)
    A, b, c = sf.A, sf.b, sf.c
    m, n = A.shape

    basis = [-1] * m
    art_rows = []
    for i in range(m):
        if i in sf.initial_slack:
            basis[i] = sf.initial_slack[i]
        else:
            art_rows.append(i)
    n_art = len(art_rows)
    N = n + n_art
    T = np.zeros((m + 1, N + 1))
    T[:m, :n] = A
    T[:m, -1] = b
    for k, i in enumerate(art_rows):
        T[i, n + k] = 1.0
        basis[i] = n + k

    iterations = 0
    if n_art:
        # phase 1: minimise the sum of artificials
        T[-1, :] = 0.0
        T[-1, n:N] = 1.0
        for i in art_rows:
            T[-1] -= T[i]
        allowed = np.ones(N, dtype=bool)
        status, it = _run_simplex(T, basis, N, allowed, tol)
        iterations += it
        if -T[-1, -1] > tol.feasibility * (1.0 + np.abs(b).max(initial=0.0)):
            return SolveReport("infeasible", np.nan, None, iterations)
        # drive remaining artificials out of the basis, dropping redundant rows
        drop = []
        for i in range(m):
            if basis[i] >= n:
                nz = np.flatnonzero(np.abs(T[i, :n]) > 1e-9)
                if nz.size:
                    _pivot(T, i, nz[0])
                    basis[i] = nz[0]
                else:
                    drop.append(i)
        if drop:
            keep = [i for i in range(m) if i not in drop] + [m]
            T = T[keep]
            basis = [basis[i] for i in range(m) if i not in drop]
            m = len(basis)
        T = np.hstack([T[:, :n], T[:, -1:]])

    T[-1, :] = 0.0
    T[-1, :n] = c
    for i, j in enumerate(basis):
        if T[-1, j] != 0.0:
            T[-1] -= T[-1, j] * T[i]
    allowed = np.ones(n, dtype=bool)
    status, it = _run_simplex(T, basis, n, allowed, tol)
    iterations += it
    if status == "unbounded":
        return SolveReport("unbounded", -np.inf if lp.sense == "min" else np.inf, None, iterations)

    # recompute the basic solution from the original data to shed tableau drift
    rows = np.arange(A.shape[0])
    if A.shape[0] != m:
        # redundant rows were removed; recover by least squares on the full system
        B = A[:, basis]
        yb = np.linalg.lstsq(B, b, rcond=None)[0]
    else:
        B = A[np.ix_(rows, basis)]
        try:
            yb = np.linalg.solve(B, b)
        except np.linalg.LinAlgError:
            yb = T[:m, -1].copy()
    y = np.zeros(n)
    y[basis] = np.maximum(yb, 0.0)
    x = sf.to_original(y)
    value = float(lp.c @ x)
    return SolveReport("optimal", value, x, iterations)


def _as_rows(M, n) -> np.ndarray:
    if M is None:
        return np.zeros((0, n))
    return np.asarray(M, dtype=float).reshape(-1, n)


def feasible_point(A_eq, b_eq, G, h, n: int) -> np.ndarray:
    """A point with ``A_eq x = b_eq`` and ``G x >= h``, or EmptyRegionError."""
    A_eq, G = _as_rows(A_eq, n), _as_rows(G, n)
    b_eq = np.asarray(b_eq if b_eq is not None else [], dtype=float).ravel()
    h = np.asarray(h if h is not None else [], dtype=float).ravel()
    lp = LinearProgram(
        c=np.zeros(n),
        A=np.vstack([A_eq, G]),
        rel=(EQ,) * len(b_eq) + (GE,) * len(h),
        rhs=np.concatenate([b_eq, h]),
        lower=np.full(n, -np.inf),
    )
    rep = solve_lp(lp)
    if not rep.optimal:
        raise EmptyRegionError("polyhedron is empty")
    return rep.x


def min_norm_point(
    A_eq=None,
    b_eq=None,
    G=None,
    h=None,
    n: int | None = None,
    tol: Tolerances = TOL,
) -> np.ndarray:
    """Euclidean projection of the origin onto ``{x : A_eq x = b_eq, G x >= h}``.

    Primal active-set method started from a phase-1 vertex. Each iteration
    projects the origin onto the affine hull of the working set, steps
    toward it until a constraint blocks, and releases constraints whose
    multipliers turn negative.
    """
    if n is None:
        for M in (A_eq, G):
            if M is not None and np.asarray(M).size:
                n = np.asarray(M).reshape(len(np.asarray(M)), -1).shape[1]
                break
        else:
            raise ValueError("cannot infer the dimension; pass n")
    A_eq, G = _as_rows(A_eq, n), _as_rows(G, n)
    b_eq = np.asarray(b_eq if b_eq is not None else [], dtype=float).ravel()
    h = np.asarray(h if h is not None else [], dtype=float).ravel()

    x = feasible_point(A_eq, b_eq, G, h, n)

    # keep a linearly independent subset of the equalities
    eq_idx: list[int] = []
    for i in range(A_eq.shape[0]):
        trial = A_eq[eq_idx + [i]]
        if np.linalg.matrix_rank(trial, tol=1e-10) == len(eq_idx) + 1:
            eq_idx.append(i)
    A_e, b_e = A_eq[eq_idx], b_eq[eq_idx]

    work: list[int] = []
    scale = 1.0 + np.abs(h).max(initial=0.0) + np.abs(b_e).max(initial=0.0)
    for _ in range(tol.max_active_set_iter):
        W = np.vstack([A_e, G[work]])
        if W.shape[0]:
            # projection of the origin onto {y : W y = W x}, via W^T = QR
            Q, R = np.linalg.qr(W.T)
            cond = np.linalg.cond(R)
            if not np.isfinite(cond) or cond > 1e12:
                raise NumericalError(f"ill-conditioned working set (condition estimate {cond:.3g})")
            qx = Q.T @ x
            mult = np.linalg.solve(R, qx)
            target = Q @ qx
        else:
            mult = np.zeros(0)
            target = np.zeros(n)
        step = target - x
        if np.linalg.norm(step) <= 1e-12 * (1.0 + np.linalg.norm(x)):
            nu = mult[len(eq_idx):]
            if nu.size == 0 or nu.min() >= -1e-12 * scale:
                return x
            work.pop(int(np.argmin(nu)))
            continue
        # ratio test against inactive inequalities
        alpha, block = 1.0, None
        inactive = [i for i in range(G.shape[0]) if i not in work]
        if inactive:
            Gi = G[inactive]
            d = Gi @ step
            slack = Gi @ x - h[inactive]
            # near-orthogonal rows would make the working set numerically dependent
            thresh = -1e-11 * np.linalg.norm(Gi, axis=1) * np.linalg.norm(step)
            for k in np.flatnonzero(d < thresh):
                a = max(slack[k], 0.0) / -d[k]
                if a < alpha:
                    alpha, block = a, inactive[k]
        x = x + alpha * step
        if block is not None:
            work.append(block)
    raise NumericalError("active-set iteration limit reached")
