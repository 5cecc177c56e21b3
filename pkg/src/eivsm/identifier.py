"""Online parameter-interval recursion for LTV errors-in-variables models.

Each step expands the previous intervals by the variation bounds and then
contracts them with ``2 * n_p`` linear programs built from the current
regressor window: the McCormick-relaxed program (``rsm-m``) or the
sign-known program (``rsm-s``).
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from . import lp as lpmod
from .lp import GE, LE, LinearProgram, LpStatus, Tolerances
from .mccormick import Box, m_term_bounds
from .model import Dataset, ModelOrder

RSM_M = "rsm-m"
RSM_S = "rsm-s"
METHODS = (RSM_M, RSM_S)


class EmptyFpsError(RuntimeError):
    """The measurements admit no parameter vector under the declared bounds."""

    def __init__(self, t: int | None, k: int | None = None, msg: str = ""):
        where = f" at t={t}" if t is not None else ""
        super().__init__(f"empty feasible parameter set{where}{': ' + msg if msg else ''}")
        self.t = t
        self.k = k


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PuiState:
    t: int
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape:
            raise ValueError("lower/upper shape mismatch")
        if np.any(lo > hi):
            raise EmptyFpsError(self.t, msg="lower bound above upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def boxes(self) -> list[Box]:
        return [Box(lo, hi) for lo, hi in zip(self.lower, self.upper)]

    def contains(self, theta, slack: float = 0.0) -> np.ndarray:
        theta = np.asarray(theta)
        return (self.lower - slack <= theta) & (theta <= self.upper + slack)


@dataclass(frozen=True)
class RegressorWindow:
    """Measurements entering the step at time ``t``.

    ``y_past[i-1] = y(t-i)`` for i = 1..na and ``u_lags[j] = u(t-j)`` for j = 0..nb.
    """

    t: int
    order: ModelOrder
    y_now: float
    y_past: np.ndarray
    u_lags: np.ndarray

    def __post_init__(self):
        if len(self.y_past) != self.order.na or len(self.u_lags) != self.order.nb + 1:
            raise ValueError("window lengths do not match the model order")

    @property
    def phi(self) -> np.ndarray:
        """``[-y(t-1), ..., -y(t-na), u(t-nk), ..., u(t-nb)]``."""
        return np.concatenate([-np.asarray(self.y_past), np.asarray(self.u_lags)[self.order.nk :]])

    @classmethod
    def at(cls, ds: Dataset, t: int) -> "RegressorWindow":
        order = ds.order
        if not order.lag < t <= ds.N:
            raise ValueError(f"window at t={t} needs {order.lag} < t <= {ds.N}")
        i = t - 1
        return cls(
            t=t,
            order=order,
            y_now=float(ds.y[i]),
            y_past=np.array(ds.y[i - order.na : i][::-1]),
            u_lags=np.array(ds.u[i - order.nb : i + 1][::-1]),
        )


SignSource = Union[np.ndarray, Sequence[float], Callable[[int], np.ndarray]]


@dataclass
class IdentifierConfig:
    delta_eta: float
    delta_zeta: float
    variation: np.ndarray
    initial: PuiState
    method: str = RSM_M
    signs: SignSource | None = None
    tol: Tolerances = field(default_factory=Tolerances)
    on_empty: str = "raise"  # or "hold": keep the time-updated box and continue

    def __post_init__(self):
        self.variation = np.asarray(self.variation, dtype=float)
        if self.delta_eta < 0 or self.delta_zeta < 0 or np.any(self.variation < 0):
            raise ConfigError("noise and variation bounds must be nonnegative")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.method == RSM_S and self.signs is None:
            raise ConfigError("rsm-s needs a sign source")
        if self.on_empty not in ("raise", "hold"):
            raise ConfigError("on_empty must be 'raise' or 'hold'")
        if self.variation.shape != self.initial.lower.shape:
            raise ConfigError("variation bounds and initial intervals differ in length")

    def signs_at(self, t: int) -> np.ndarray:
        src = self.signs
        s = np.asarray(src(t) if callable(src) else src, dtype=float)
        if s.ndim == 2:
            s = s[t - 1]
        if np.any(s == 0) or np.any(np.abs(s) != 1):
            raise ConfigError(f"rsm-s needs a +1/-1 sign for every parameter at t={t}")
        return s


def signs_from_truth(ds: Dataset) -> np.ndarray:
    """Per-step signs of the true parameters, shape ``(N, n_p)``."""
    s = np.sign(ds.theta)
    if np.any(s == 0):
        t, k = np.argwhere(s == 0)[0]
        raise ConfigError(f"true parameter {ds.order.labels[k]} is zero at t={t + 1}; its sign is undefined")
    return s


def initial_pui(theta0, radius) -> PuiState:
    theta0 = np.asarray(theta0, dtype=float)
    return PuiState(0, theta0 - radius, theta0 + radius)


@dataclass
class StepRecord:
    t: int
    pui: PuiState
    box_lower: np.ndarray
    box_upper: np.ndarray
    step_time_us: float
    statuses: tuple = ()
    identified: bool = True

    @property
    def center(self) -> np.ndarray:
        return central_estimate(self.pui)


# --- operations ----------------------------------------------------------------


def time_update(prev: PuiState, variation) -> tuple[np.ndarray, np.ndarray]:
    """Expanded box ``[lower - delta_theta, upper + delta_theta]``."""
    v = np.asarray(variation, dtype=float)
    return prev.lower - v, prev.upper + v


def central_estimate(pui: PuiState) -> np.ndarray:
    return 0.5 * (pui.upper + pui.lower)


def _objective(n_vars: int, k: int, sense: str) -> np.ndarray:
    c = np.zeros(n_vars)
    if sense == "min":
        c[k] = 1.0
    elif sense == "max":
        c[k] = -1.0
    else:
        raise ValueError("sense must be 'min' or 'max'")
    return c


def rsm_m_layout(order: ModelOrder) -> dict:
    """Variable offsets of the relaxed program: theta, M, eta(t-1..t-na), zeta(t..t-nb)."""
    n_p = order.n_p
    return {
        "theta": 0,
        "M": n_p,
        "eta": 2 * n_p,
        "zeta": 2 * n_p + order.na,
        "n_vars": 2 * n_p + order.na + order.nb + 1,
    }


def build_rsm_m_lp(
    window: RegressorWindow,
    box_lower,
    box_upper,
    delta_eta: float,
    delta_zeta: float,
    k: int,
    sense: str,
) -> LinearProgram:
    order = window.order
    n_p, na = order.n_p, order.na
    lay = rsm_m_layout(order)
    n = lay["n_vars"]

    # residual = y(t) - phi.theta - sum M_a + sum M_b, must lie in [-delta_eta, delta_eta]
    res = np.zeros(n)
    res[:n_p] = -window.phi
    res[n_p : n_p + na] = -1.0
    res[n_p + na : 2 * n_p] = 1.0
    rows_A = [res, res]
    senses = [LE, GE]
    rhs = [delta_eta - window.y_now, -delta_eta - window.y_now]

    for kk in range(n_p):
        if order.is_a(kk):
            eps = lay["eta"] + order.lag_of(kk) - 1
            d_eps = delta_eta
        else:
            eps = lay["zeta"] + order.lag_of(kk)
            d_eps = delta_zeta
        env = m_term_bounds(Box(box_lower[kk], box_upper[kk]), d_eps)
        for q in env:
            row = np.zeros(n)
            row[n_p + kk] = q.coef_w
            row[kk] = q.coef_x
            row[eps] = q.coef_y
            rows_A.append(row)
            senses.append(q.sense)
            rhs.append(q.rhs)

    lo = np.concatenate(
        [box_lower, np.full(n_p, -math.inf), np.full(na, -delta_eta), np.full(order.nb + 1, -delta_zeta)]
    )
    hi = np.concatenate([box_upper, np.full(n_p, math.inf), np.full(na, delta_eta), np.full(order.nb + 1, delta_zeta)])
    return LinearProgram(_objective(n, k, sense), np.array(rows_A), senses, rhs, lo, hi)


def build_rsm_s_lp(
    window: RegressorWindow,
    box_lower,
    box_upper,
    delta_eta: float,
    delta_zeta: float,
    signs,
    k: int,
    sense: str,
) -> LinearProgram:
    order = window.order
    signs = np.asarray(signs, dtype=float)
    if signs.shape != (order.n_p,) or np.any(np.abs(signs) != 1):
        raise ConfigError("rsm-s needs a +1/-1 sign for every parameter")
    phi = window.phi
    scale = np.concatenate([np.full(order.na, delta_eta), np.full(order.n_p - order.na, delta_zeta)])
    d_phi = scale * signs
    A = np.vstack([phi - d_phi, phi + d_phi])
    rhs = [window.y_now + delta_eta, window.y_now - delta_eta]
    return LinearProgram(_objective(order.n_p, k, sense), A, [LE, GE], rhs, box_lower, box_upper)


def measurement_update(
    box_lower,
    box_upper,
    window: RegressorWindow,
    config: IdentifierConfig,
) -> tuple[PuiState, tuple]:
    """Contract the expanded box with the current measurement; returns the PUI and LP statuses."""
    order = window.order
    n_p = order.n_p
    if config.method == RSM_M:
        base = build_rsm_m_lp(window, box_lower, box_upper, config.delta_eta, config.delta_zeta, 0, "min")
    else:
        base = build_rsm_s_lp(
            window, box_lower, box_upper, config.delta_eta, config.delta_zeta, config.signs_at(window.t), 0, "min"
        )
    lower = np.empty(n_p)
    upper = np.empty(n_p)
    statuses = []
    for k in range(n_p):
        for sense in ("min", "max"):
            sol = lpmod.solve(base.with_objective(_objective(base.n_vars, k, sense)), config.tol)
            statuses.append(sol.status)
            if sol.status is LpStatus.INFEASIBLE:
                raise EmptyFpsError(window.t, k)
            if sol.status is not LpStatus.OPTIMAL:
                raise lpmod.SolverFailure(f"{sol.status.value} LP at t={window.t}, k={k}")
            if sense == "min":
                lower[k] = sol.objective_value
            else:
                upper[k] = -sol.objective_value
    lower = np.clip(lower, box_lower, box_upper)
    upper = np.clip(upper, box_lower, box_upper)
    # solver-tolerance crossings collapse to a point
    crossed = lower > upper
    if np.any(crossed):
        mid = 0.5 * (lower + upper)
        lower = np.where(crossed, mid, lower)
        upper = np.where(crossed, mid, upper)
    return PuiState(window.t, lower, upper), tuple(statuses)


def run(ds: Dataset, config: IdentifierConfig) -> list[StepRecord]:
    """Run the recursion for t = 1..N."""
    order = ds.order
    if ds.N <= order.lag:
        raise ConfigError(f"dataset length {ds.N} must exceed max(na, nb) = {order.lag}")
    if config.initial.lower.shape != (order.n_p,):
        raise ConfigError(f"initial intervals must have length {order.n_p}")
    lpmod.warmup()
    pui = config.initial
    records = []
    for t in range(1, ds.N + 1):
        box_lo, box_hi = time_update(pui, config.variation)
        if t <= order.lag:
            pui = PuiState(t, box_lo, box_hi)
            records.append(StepRecord(t, pui, box_lo, box_hi, 0.0, (), identified=False))
            continue
        window = RegressorWindow.at(ds, t)
        t0 = time.perf_counter_ns()
        try:
            pui, statuses = measurement_update(box_lo, box_hi, window, config)
        except EmptyFpsError as exc:
            if config.on_empty == "raise":
                raise EmptyFpsError(t, exc.k) from None
            pui, statuses = PuiState(t, box_lo, box_hi), (LpStatus.INFEASIBLE,)
        elapsed = (time.perf_counter_ns() - t0) / 1e3
        records.append(StepRecord(t, pui, box_lo, box_hi, elapsed, statuses))
    return records


# --- reporting -------------------------------------------------------------------


def summarize(records: Sequence[StepRecord], ds: Dataset | None = None, slack: float = 1e-9) -> dict:
    """Containment, interval widths per parameter and per-step timing over identified steps."""
    steps = [r for r in records if r.identified]
    lower = np.array([r.pui.lower for r in steps])
    upper = np.array([r.pui.upper for r in steps])
    width = upper - lower
    labels = ds.order.labels if ds is not None else [f"theta_{k + 1}" for k in range(lower.shape[1])]
    out = {
        "steps": len(steps),
        "mean_width": dict(zip(labels, map(float, width.mean(axis=0)))),
        "max_width": dict(zip(labels, map(float, width.max(axis=0)))),
    }
    if ds is not None:
        truth = np.array([ds.theta_at(r.t) for r in steps])
        inside = (lower - slack <= truth) & (truth <= upper + slack)
        out["containment_rate"] = float(inside.all(axis=1).mean())
        out["containment_per_parameter"] = dict(zip(labels, map(float, inside.mean(axis=0))))
    times = np.array([r.step_time_us for r in steps])
    out["timing"] = {
        "mean_step_time_us": float(times.mean()),
        "p99_step_time_us": float(np.percentile(times, 99)),
    }
    return out


STEP_COLUMNS = ["t", "method", "k", "lower", "upper", "center", "true_theta", "step_time_us"]


def write_records(records: Sequence[StepRecord], method: str, path, ds: Dataset | None = None) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(STEP_COLUMNS)
        for r in records:
            truth = ds.theta_at(r.t) if ds is not None else None
            center = r.center
            for k in range(len(r.pui.lower)):
                wr.writerow(
                    [
                        r.t,
                        method,
                        k + 1,
                        format(r.pui.lower[k], ".17g"),
                        format(r.pui.upper[k], ".17g"),
                        format(center[k], ".17g"),
                        "" if truth is None else format(truth[k], ".17g"),
                        f"{r.step_time_us:.3f}",
                    ]
                )


def write_summary(summary: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
