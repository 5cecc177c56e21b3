"""Dense bounded-variable primal simplex for small linear programs.

Problems are ``minimize c @ v`` subject to ``A[i] @ v (<=|>=|=) b[i]`` and
``lo <= v <= hi`` with infinite bounds allowed. Every row gets a slack whose
bounds encode its sense; rows whose slack cannot start feasible get a phase-one
artificial. Pricing is Dantzig until an iteration threshold, then Bland.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numba import njit

LE, GE, EQ = "<=", ">=", "="
_SENSES = (LE, GE, EQ)


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class SolverFailure(RuntimeError):
    """Numerical breakdown; distinct from an infeasible or unbounded problem."""


@dataclass(frozen=True)
class Tolerances:
    feasibility: float = 1e-9
    pivot: float = 1e-10
    optimality: float = 1e-9


@dataclass
class LinearProgram:
    c: np.ndarray
    A: np.ndarray
    senses: tuple
    b: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.shape[0]
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        self.senses = tuple(self.senses)
        self.lo = np.broadcast_to(np.asarray(self.lo, dtype=float), (n,)).copy()
        self.hi = np.broadcast_to(np.asarray(self.hi, dtype=float), (n,)).copy()
        if len(self.senses) != self.A.shape[0] or self.b.shape[0] != self.A.shape[0]:
            raise ValueError("row count mismatch between A, senses and b")
        if any(s not in _SENSES for s in self.senses):
            raise ValueError(f"row sense must be one of {_SENSES}")
        if np.any(self.lo > self.hi) or np.any(np.isnan(self.lo)) or np.any(np.isnan(self.hi)):
            raise ValueError("variable bounds need lo <= hi")

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @classmethod
    def from_rows(cls, c, rows: Iterable[tuple], bounds: Sequence[tuple]) -> "LinearProgram":
        """Build from ``(coeffs, sense, rhs)`` rows and ``(lo, hi)`` bounds (``None`` = infinite)."""
        c = np.asarray(c, dtype=float)
        rows = list(rows)
        A = np.array([r[0] for r in rows], dtype=float).reshape(len(rows), c.shape[0])
        lo = [-math.inf if bl is None else bl for bl, _ in bounds]
        hi = [math.inf if bh is None else bh for _, bh in bounds]
        return cls(c, A, [r[1] for r in rows], [r[2] for r in rows], lo, hi)

    def with_objective(self, c) -> "LinearProgram":
        return LinearProgram(c, self.A, self.senses, self.b, self.lo, self.hi)

    def max_violation(self, v) -> float:
        """Largest absolute violation of rows and bounds at ``v``."""
        v = np.asarray(v, dtype=float)
        worst = float(max(np.max(self.lo - v, initial=0.0), np.max(v - self.hi, initial=0.0)))
        if self.n_rows:
            r = self.A @ v - self.b
            s = np.array(self.senses)
            worst = max(
                worst,
                float(np.max(np.where(s == LE, r, 0.0))),
                float(np.max(np.where(s == GE, -r, 0.0))),
                float(np.max(np.where(s == EQ, np.abs(r), 0.0))),
            )
        return worst


@dataclass
class LpSolution:
    status: LpStatus
    point: np.ndarray | None = None
    objective_value: float | None = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


# nonbasic status codes
_AT_LO, _AT_HI, _FREE, _BASIC = 0, 1, 2, 3
# kernel exit codes
_OPTIMAL, _UNBOUNDED, _ITER_LIMIT = 0, 1, 2


@njit(cache=True)
def _iterate(T, x, lo, hi, status, basis, cost, eligible, opt_tol, piv_tol, bland_after, max_iter, iterations):
    """Primal bounded simplex iterations on tableau ``T = B^-1 [A | I | R]``.

    Mutates the state arrays in place. Returns ``(exit code, total iterations)``.
    """
    m, n_total = T.shape
    d = np.empty(n_total)
    phase_iter = 0
    while True:
        if iterations >= max_iter:
            return _ITER_LIMIT, iterations
        # reduced costs
        for j in range(n_total):
            acc = cost[j]
            for i in range(m):
                acc -= cost[basis[i]] * T[i, j]
            d[j] = acc
        bland = phase_iter >= bland_after
        q = -1
        best = opt_tol
        for j in range(n_total):
            if not eligible[j]:
                continue
            st = status[j]
            if st == _AT_LO:
                s = -d[j]
            elif st == _AT_HI:
                s = d[j]
            elif st == _FREE:
                s = abs(d[j])
            else:
                continue
            if s > best:
                q = j
                if bland:
                    break
                best = s
        if q < 0:
            return _OPTIMAL, iterations
        direction = -1.0 if d[q] > 0 else 1.0

        # ratio test
        step = np.inf
        r = -1
        for i in range(m):
            a = direction * T[i, q]
            bi = basis[i]
            if a > piv_tol:
                lim = (x[bi] - lo[bi]) / a
            elif a < -piv_tol:
                lim = (hi[bi] - x[bi]) / -a
            else:
                continue
            if not lim < np.inf:
                continue
            if lim < 0.0:
                lim = 0.0
            if r < 0 or lim < step - 1e-12 * max(1.0, step):
                step = lim
                r = i
            elif lim <= step + 1e-12 * max(1.0, step):
                # tie: Bland takes the smallest basic index, Dantzig the largest pivot
                if bland:
                    if bi < basis[r]:
                        r = i
                elif abs(a) > abs(T[r, q]):
                    r = i
        flip = hi[q] - lo[q]
        if flip <= step:
            if not np.isfinite(flip):
                return _UNBOUNDED, iterations
            for i in range(m):
                x[basis[i]] -= flip * direction * T[i, q]
            if direction > 0:
                x[q] = hi[q]
                status[q] = _AT_HI
            else:
                x[q] = lo[q]
                status[q] = _AT_LO
            iterations += 1
            phase_iter += 1
            continue
        if r < 0:
            return _UNBOUNDED, iterations

        a_r = direction * T[r, q]
        leaving = basis[r]
        if step > 0.0:
            x[q] += direction * step
            for i in range(m):
                x[basis[i]] -= step * direction * T[i, q]
        # leaving variable sits on the bound it hit
        if a_r > 0:
            x[leaving] = lo[leaving]
            status[leaving] = _AT_LO
        else:
            x[leaving] = hi[leaving]
            status[leaving] = _AT_HI

        piv = T[r, q]
        for j in range(n_total):
            T[r, j] /= piv
        for i in range(m):
            if i == r:
                continue
            f = T[i, q]
            if f != 0.0:
                for j in range(n_total):
                    T[i, j] -= f * T[r, j]
        basis[r] = q
        status[q] = _BASIC
        iterations += 1
        phase_iter += 1


class _Simplex:
    """Working state for one solve."""

    def __init__(self, lp: LinearProgram, tol: Tolerances, max_iter: int | None):
        self.tol = tol
        m, n = lp.n_rows, lp.n_vars
        self.m, self.n = m, n
        senses = np.array(lp.senses)
        # slack bounds: a.v + s = b with s >= 0 for <=, s <= 0 for >=, s = 0 for =
        s_lo = np.where(senses == GE, -math.inf, 0.0)
        s_hi = np.where(senses == LE, math.inf, 0.0)

        # structurals start at a finite bound, or 0 when free
        fin_lo = np.isfinite(lp.lo)
        fin_hi = np.isfinite(lp.hi)
        x_struct = np.where(fin_lo, lp.lo, np.where(fin_hi, lp.hi, 0.0))
        st_struct = np.where(fin_lo, _AT_LO, np.where(fin_hi, _AT_HI, _FREE))

        # slack value needed to satisfy each row; artificials absorb what the slack cannot
        need = lp.b - lp.A @ x_struct
        ftol = tol.feasibility
        ok = (s_lo - ftol <= need) & (need <= s_hi + ftol)
        x_slack = np.where(ok, need, np.clip(need, s_lo, s_hi))
        st_slack = np.where(ok, _BASIC, np.where(need < s_lo, _AT_LO, _AT_HI))
        art_rows = np.flatnonzero(~ok)
        n_art = art_rows.size
        art_sign = np.sign(need[art_rows] - x_slack[art_rows])

        R = np.zeros((m, n_art))
        R[art_rows, np.arange(n_art)] = art_sign
        self.art_idx = n + m + np.arange(n_art)
        self.full = np.hstack([lp.A, np.eye(m), R])
        self.b = lp.b

        basis = n + np.arange(m)
        basis[art_rows] = self.art_idx
        self.basis = basis
        self.x = np.concatenate([x_struct, x_slack, np.abs(need[art_rows] - x_slack[art_rows])])
        self.lo = np.concatenate([lp.lo, s_lo, np.zeros(n_art)])
        self.hi = np.concatenate([lp.hi, s_hi, np.full(n_art, math.inf)])
        self.status = np.concatenate([st_struct, st_slack, np.full(n_art, _BASIC)]).astype(np.int64)
        # initial basis matrix is diagonal +-1
        binv = np.ones(m)
        binv[art_rows] = art_sign
        self.T = self.full * binv[:, None]
        self.n_total = n + m + n_art
        self.iterations = 0
        size = self.n_total + m
        self.bland_after = 3 * size
        self.max_iter = max_iter if max_iter is not None else 50 * size + 1000

    def run(self, cost: np.ndarray, eligible: np.ndarray) -> LpStatus:
        """Minimize ``cost @ x`` from the current basic feasible point."""
        code, self.iterations = _iterate(
            self.T,
            self.x,
            self.lo,
            self.hi,
            self.status,
            self.basis,
            cost,
            eligible,
            self.tol.optimality,
            self.tol.pivot,
            self.bland_after,
            self.max_iter,
            self.iterations,
        )
        if code == _ITER_LIMIT:
            raise SolverFailure(f"iteration limit {self.max_iter} reached")
        return LpStatus.UNBOUNDED if code == _UNBOUNDED else LpStatus.OPTIMAL

    def refresh_basic_values(self) -> None:
        """Recompute basic values from the original columns to shed accumulated drift."""
        nb = np.ones(self.n_total, dtype=bool)
        nb[self.basis] = False
        rhs = self.b - self.full[:, nb] @ self.x[nb]
        try:
            self.x[self.basis] = np.linalg.solve(self.full[:, self.basis], rhs)
        except np.linalg.LinAlgError as exc:
            raise SolverFailure("singular basis") from exc


def solve(lp: LinearProgram, tol: Tolerances = Tolerances(), max_iter: int | None = None) -> LpSolution:
    """Solve ``lp``; raises :class:`SolverFailure` on numerical breakdown."""
    n = lp.n_vars
    if lp.n_rows == 0:
        return _solve_box(lp)

    sx = _Simplex(lp, tol, max_iter)
    fixed = sx.lo == sx.hi
    scale = max(1.0, float(np.max(np.abs(lp.b))))

    if sx.art_idx.size:
        phase1_cost = np.zeros(sx.n_total)
        phase1_cost[sx.art_idx] = 1.0
        if sx.run(phase1_cost, ~fixed) is not LpStatus.OPTIMAL:
            raise SolverFailure("phase one did not terminate at an optimum")
        sx.refresh_basic_values()
        if float(np.sum(sx.x[sx.art_idx])) > tol.feasibility * scale:
            return LpSolution(LpStatus.INFEASIBLE, iterations=sx.iterations)
        # artificials are pinned at zero for phase two
        sx.hi[sx.art_idx] = 0.0
        nonbasic_art = sx.status[sx.art_idx] != _BASIC
        sx.x[sx.art_idx[nonbasic_art]] = 0.0
        sx.status[sx.art_idx[nonbasic_art]] = _AT_LO
        fixed = sx.lo == sx.hi

    cost = np.zeros(sx.n_total)
    cost[:n] = lp.c
    if sx.run(cost, ~fixed) is LpStatus.UNBOUNDED:
        return LpSolution(LpStatus.UNBOUNDED, iterations=sx.iterations)
    sx.refresh_basic_values()
    point = np.clip(sx.x[:n], lp.lo, lp.hi)
    viol = lp.max_violation(point)
    if viol > 1e3 * tol.feasibility * scale:
        raise SolverFailure(f"solution violates constraints by {viol:.3g}")
    return LpSolution(LpStatus.OPTIMAL, point=point, objective_value=float(lp.c @ point), iterations=sx.iterations)


def warmup() -> None:
    """Compile (or load from cache) the pivoting kernel outside any timed region."""
    solve(LinearProgram([1.0, 1.0], [[1.0, 1.0]], [GE], [1.0], [0.0, 0.0], [2.0, 2.0]))


def _solve_box(lp: LinearProgram) -> LpSolution:
    point = np.where(lp.c > 0, lp.lo, np.where(lp.c < 0, lp.hi, np.clip(0.0, lp.lo, lp.hi)))
    if np.any(~np.isfinite(point) & (lp.c != 0)):
        return LpSolution(LpStatus.UNBOUNDED)
    return LpSolution(LpStatus.OPTIMAL, point=point, objective_value=float(lp.c @ point))


# --- debug text format ---------------------------------------------------------


def _num(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def dumps(lp: LinearProgram) -> str:
    """Text dump: objective line, lower/upper bound lines, then ``coeffs | sense | rhs`` rows."""
    lines = [
        "objective " + " ".join(_num(v) for v in lp.c),
        "lower " + " ".join(_num(v) for v in lp.lo),
        "upper " + " ".join(_num(v) for v in lp.hi),
    ]
    for a, s, rhs in zip(lp.A, lp.senses, lp.b):
        lines.append(f"{' '.join(_num(v) for v in a)} | {s} | {_num(rhs)}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> LinearProgram:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    heads = {}
    for key, ln in zip(("objective", "lower", "upper"), lines[:3]):
        tag, _, rest = ln.partition(" ")
        if tag != key:
            raise ValueError(f"expected '{key}' line, got {ln!r}")
        heads[key] = [float(v) for v in rest.split()]
    A, senses, b = [], [], []
    for ln in lines[3:]:
        coeffs, sense, rhs = (part.strip() for part in ln.split("|"))
        A.append([float(v) for v in coeffs.split()])
        senses.append(sense)
        b.append(float(rhs))
    n = len(heads["objective"])
    return LinearProgram(heads["objective"], np.array(A).reshape(len(A), n), senses, b, heads["lower"], heads["upper"])
