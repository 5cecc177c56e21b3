"""Brute-force certifier for a single interval update.

Past noise samples are gridded over ``[-delta, delta]`` (endpoints included).
At each grid point the model equation is linear in theta, with the current
output noise free in its bound, so the feasible set is a slab intersected with
the parameter box. The union of the per-point intervals is an inner
approximation of the exact interval.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import lp as lpmod
from .identifier import EmptyFpsError, RegressorWindow, build_rsm_s_lp
from .lp import GE, LE, LinearProgram, LpStatus

MAX_SUBPROBLEMS = 10**7
_CHUNK = 1 << 16


class OracleBudgetError(RuntimeError):
    def __init__(self, required: int, cap: int = MAX_SUBPROBLEMS):
        super().__init__(f"oracle needs {required} subproblems, cap is {cap}")
        self.required = required
        self.cap = cap


@dataclass(frozen=True)
class OracleConfig:
    window: RegressorWindow
    box_lower: np.ndarray
    box_upper: np.ndarray
    delta_eta: float
    delta_zeta: float
    k: int
    grid_points: int = 101

    def __post_init__(self):
        if self.grid_points < 3 or self.grid_points % 2 == 0:
            raise ValueError("grid_points must be an odd integer >= 3")
        object.__setattr__(self, "box_lower", np.asarray(self.box_lower, dtype=float))
        object.__setattr__(self, "box_upper", np.asarray(self.box_upper, dtype=float))

    @property
    def noise_bounds(self) -> np.ndarray:
        """Bound of each gridded noise sample: eta(t-1..t-na), then zeta(t-nk..t-nb)."""
        order = self.window.order
        return np.concatenate([np.full(order.na, self.delta_eta), np.full(order.n_p - order.na, self.delta_zeta)])

    @property
    def n_subproblems(self) -> int:
        # zero-width dimensions collapse to a single point
        dims = int(np.count_nonzero(self.noise_bounds > 0))
        return self.grid_points**dims

    @property
    def spacing(self) -> float:
        return 2.0 * float(self.noise_bounds.max(initial=0.0)) / (self.grid_points - 1)


@dataclass
class Witness:
    theta: np.ndarray
    past_noise: np.ndarray  # same layout as OracleConfig.noise_bounds
    eta_now: float


@dataclass
class OracleResult:
    lower: float
    upper: float
    lower_witness: Witness
    upper_witness: Witness
    n_subproblems: int


def _grid_axes(cfg: OracleConfig) -> list[np.ndarray]:
    return [np.linspace(-d, d, cfg.grid_points) if d > 0 else np.zeros(1) for d in cfg.noise_bounds]


def _grid_chunks(axes: list[np.ndarray]):
    sizes = [len(a) for a in axes]
    total = math.prod(sizes)
    for start in range(0, total, _CHUNK):
        idx = np.unravel_index(np.arange(start, min(total, start + _CHUNK)), sizes)
        yield np.column_stack([a[i] for a, i in zip(axes, idx)])


def _regressors(cfg: OracleConfig, noise: np.ndarray) -> np.ndarray:
    """Noise-corrected regressors ``[-(y(t-i) - eta), ..., u(t-j) - zeta]`` per grid row."""
    order = cfg.window.order
    meas = np.concatenate([np.asarray(cfg.window.y_past), np.asarray(cfg.window.u_lags)[order.nk :]])
    g = meas[None, :] - noise
    g[:, : order.na] *= -1.0
    return g


def slab_intervals(g: np.ndarray, lo: float, hi: float, box_lower, box_upper, k: int):
    """Projection onto coordinate ``k`` of ``{theta in box : lo <= g . theta <= hi}``, row-wise.

    Returns ``(vmin, vmax, feasible)``.
    """
    gl = g * box_lower
    gu = g * box_upper
    cmin = np.minimum(gl, gu)
    cmax = np.maximum(gl, gu)
    smin = cmin.sum(axis=1) - cmin[:, k]
    smax = cmax.sum(axis=1) - cmax[:, k]
    gk = g[:, k]
    # need gk * v in [lo - smax, hi - smin]
    a = lo - smax
    b = hi - smin
    with np.errstate(divide="ignore", invalid="ignore"):
        v1 = a / gk
        v2 = b / gk
    pos = gk > 0
    neg = gk < 0
    vmin = np.where(pos, v1, np.where(neg, v2, -np.inf))
    vmax = np.where(pos, v2, np.where(neg, v1, np.inf))
    zero_ok = (a <= 0) & (b >= 0)
    vmin = np.maximum(vmin, box_lower[k])
    vmax = np.minimum(vmax, box_upper[k])
    feasible = (vmin <= vmax) & (pos | neg | zero_ok)
    return vmin, vmax, feasible


def _lp_interval(g: np.ndarray, lo: float, hi: float, cfg: OracleConfig) -> tuple[float, float, bool]:
    n = g.shape[0]
    base = LinearProgram(np.zeros(n), np.vstack([g, g]), [GE, LE], [lo, hi], cfg.box_lower, cfg.box_upper)
    c = np.zeros(n)
    c[cfg.k] = 1.0
    s_min = lpmod.solve(base.with_objective(c))
    if s_min.status is LpStatus.INFEASIBLE:
        return math.inf, -math.inf, False
    s_max = lpmod.solve(base.with_objective(-c))
    return s_min.objective_value, -s_max.objective_value, True


def _witness(cfg: OracleConfig, noise_row: np.ndarray, v: float) -> Witness:
    """A parameter vector with ``theta_k = v`` consistent with the slab at ``noise_row``."""
    w = cfg.window
    g = _regressors(cfg, noise_row[None, :])[0]
    k = cfg.k
    lo_b, hi_b = cfg.box_lower, cfg.box_upper
    low_cfg = np.where(g >= 0, lo_b, hi_b)
    high_cfg = np.where(g >= 0, hi_b, lo_b)
    low_cfg[k] = high_cfg[k] = v
    s_low = g @ low_cfg
    s_high = g @ high_cfg
    target = min(max(w.y_now, s_low), s_high)
    lam = 0.0 if s_high == s_low else (target - s_low) / (s_high - s_low)
    theta = low_cfg + lam * (high_cfg - low_cfg)
    theta[k] = v
    return Witness(theta=theta, past_noise=noise_row.copy(), eta_now=float(w.y_now - g @ theta))


def pui_bruteforce(cfg: OracleConfig, method: str = "closed-form", dump_path=None) -> OracleResult:
    """Inner approximation of the interval of ``theta_k``.

    ``method="closed-form"`` projects each slab analytically; ``method="lp"``
    solves the two per-point programs with :func:`eivsm.lp.solve`.
    """
    required = cfg.n_subproblems
    if required > MAX_SUBPROBLEMS:
        raise OracleBudgetError(required)
    lo_rhs = cfg.window.y_now - cfg.delta_eta
    hi_rhs = cfg.window.y_now + cfg.delta_eta

    best_lo, best_hi = math.inf, -math.inf
    arg_lo = arg_hi = None
    dump = None
    if dump_path is not None:
        fh = open(dump_path, "w", newline="")
        dump = csv.writer(fh, lineterminator="\n")
        dump.writerow([f"noise_{d + 1}" for d in range(len(cfg.noise_bounds))] + ["lower", "upper", "feasible"])
    try:
        for noise in _grid_chunks(_grid_axes(cfg)):
            g = _regressors(cfg, noise)
            if method == "closed-form":
                vmin, vmax, feas = slab_intervals(g, lo_rhs, hi_rhs, cfg.box_lower, cfg.box_upper, cfg.k)
            elif method == "lp":
                res = [_lp_interval(row, lo_rhs, hi_rhs, cfg) for row in g]
                vmin = np.array([r[0] for r in res])
                vmax = np.array([r[1] for r in res])
                feas = np.array([r[2] for r in res])
            else:
                raise ValueError(f"unknown oracle method {method!r}")
            if dump is not None:
                for row, a, b, f in zip(noise, vmin, vmax, feas):
                    dump.writerow([format(v, ".17g") for v in row] + [format(a, ".17g"), format(b, ".17g"), int(f)])
            if not feas.any():
                continue
            i = int(np.argmin(np.where(feas, vmin, np.inf)))
            if vmin[i] < best_lo:
                best_lo, arg_lo = float(vmin[i]), noise[i].copy()
            i = int(np.argmax(np.where(feas, vmax, -np.inf)))
            if vmax[i] > best_hi:
                best_hi, arg_hi = float(vmax[i]), noise[i].copy()
    finally:
        if dump is not None:
            fh.close()

    if arg_lo is None:
        raise EmptyFpsError(cfg.window.t, cfg.k, "no grid point admits a feasible parameter")
    return OracleResult(
        lower=best_lo,
        upper=best_hi,
        lower_witness=_witness(cfg, arg_lo, best_lo),
        upper_witness=_witness(cfg, arg_hi, best_hi),
        n_subproblems=required,
    )


def model_residual(window: RegressorWindow, witness: Witness) -> float:
    """``A(y - eta) - B(u - zeta)`` at time t for a witness; zero when consistent."""
    order = window.order
    na = order.na
    theta = witness.theta
    acc = window.y_now - witness.eta_now
    for i in range(na):
        acc += theta[i] * (window.y_past[i] - witness.past_noise[i])
    for b_idx, j in enumerate(order.b_lags):
        acc -= theta[na + b_idx] * (window.u_lags[j] - witness.past_noise[na + b_idx])
    return float(acc)


def gap_tolerance(cfg: OracleConfig, c: float = 2.0, floor: float = 1e-9) -> float:
    """Accepted endpoint gap ``c * spacing * (max |regressor| + max box radius)``.

    ``floor`` absorbs solver round-off when the grid spacing is zero.
    """
    radius = float(np.max(0.5 * (cfg.box_upper - cfg.box_lower)))
    return max(c * cfg.spacing * (float(np.max(np.abs(cfg.window.phi))) + radius), floor)


def pui_sign_split(cfg: OracleConfig) -> tuple[float, float]:
    """Exact interval by enumerating sign orthants of the parameter box.

    Inside one orthant every bilinear noise term has a known sign, so the
    feasible set is the sign-known linear program restricted to that orthant.
    Costs at most ``2 ** n_p`` pairs of LPs.
    """
    lo_b, hi_b = cfg.box_lower, cfg.box_upper
    best_lo, best_hi = math.inf, -math.inf
    for signs in itertools.product((-1.0, 1.0), repeat=len(lo_b)):
        s = np.array(signs)
        lo = np.where(s > 0, np.maximum(lo_b, 0.0), lo_b)
        hi = np.where(s > 0, hi_b, np.minimum(hi_b, 0.0))
        if np.any(lo > hi):
            continue
        base = build_rsm_s_lp(cfg.window, lo, hi, cfg.delta_eta, cfg.delta_zeta, s, cfg.k, "min")
        sol = lpmod.solve(base)
        if sol.status is not LpStatus.OPTIMAL:
            continue
        best_lo = min(best_lo, sol.objective_value)
        sol = lpmod.solve(base.with_objective(-base.c))
        best_hi = max(best_hi, -sol.objective_value)
    if best_lo > best_hi:
        raise EmptyFpsError(cfg.window.t, cfg.k, "every sign orthant is infeasible")
    return best_lo, best_hi
