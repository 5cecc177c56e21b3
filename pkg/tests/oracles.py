"""Independent reference implementations used to derive expected values in tests."""

from __future__ import annotations

import itertools

import numpy as np

from eivsm.identifier import RegressorWindow
from eivsm.lp import EQ, GE, LE
from eivsm.model import ModelOrder


def vertex_enumeration(lp, feas_tol: float = 1e-9):
    """Best objective over all basic points of a box-bounded LP.

    Every vertex is the intersection of ``n`` linearly independent hyperplanes
    taken from the rows and the finite bounds. Returns ``None`` when no vertex
    is feasible (for a bounded LP that means infeasible).
    """
    n = lp.n_vars
    if not (np.all(np.isfinite(lp.lo)) and np.all(np.isfinite(lp.hi))):
        raise ValueError("vertex enumeration needs finite bounds")
    planes = [(row, rhs) for row, rhs in zip(lp.A, lp.b)]
    eye = np.eye(n)
    planes += [(eye[i], lp.lo[i]) for i in range(n)]
    planes += [(eye[i], lp.hi[i]) for i in range(n)]

    senses = np.array(lp.senses)
    best = None
    for combo in itertools.combinations(range(len(planes)), n):
        M = np.array([planes[i][0] for i in combo])
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        v = np.linalg.solve(M, np.array([planes[i][1] for i in combo]))
        scale = 1.0 + np.max(np.abs(v))
        if np.any(v < lp.lo - feas_tol * scale) or np.any(v > lp.hi + feas_tol * scale):
            continue
        r = lp.A @ v - lp.b
        tol = feas_tol * (1.0 + np.abs(lp.b) + np.abs(lp.A) @ np.abs(v))
        ok = np.where(senses == LE, r <= tol, np.where(senses == GE, r >= -tol, np.abs(r) <= tol))
        if not ok.all():
            continue
        obj = float(lp.c @ v)
        if best is None or obj < best:
            best = obj
    return best


def random_lp(rng: np.random.Generator, max_vars: int = 4, max_rows: int = 6):
    """Random small LP with finite boxes; about a tenth of the rows are equalities."""
    from eivsm.lp import LinearProgram

    n = int(rng.integers(1, max_vars + 1))
    m = int(rng.integers(1, max_rows + 1))
    lo = rng.uniform(-3, 0, n)
    hi = lo + rng.uniform(0.1, 4, n)
    A = rng.normal(size=(m, n))
    senses = rng.choice([LE, GE, EQ], size=m, p=[0.45, 0.45, 0.1])
    # offsets mostly keep an interior anchor feasible, so most instances have an optimum
    anchor = rng.uniform(lo, hi)
    offset = rng.uniform(-0.3, 1.0, m)
    b = A @ anchor + np.where(senses == LE, offset, np.where(senses == GE, -offset, 0.0))
    c = rng.normal(size=n)
    return LinearProgram(c, A, list(senses), b, lo, hi)


def random_first_order_instance(rng: np.random.Generator):
    """One measurement of a first-order system (na = nb = 1) with a box around the truth.

    Returns ``(window, box_lower, box_upper, delta_eta, delta_zeta, theta)``.
    Box radii and offsets are random, so some boxes straddle zero.
    """
    order = ModelOrder(1, 1)
    theta = np.array(
        [
            rng.uniform(-0.8, 0.8),
            rng.choice([-1, 1]) * rng.uniform(0.3, 2.5),
            rng.choice([-1, 1]) * rng.uniform(0.3, 2.5),
        ]
    )
    de, dz = rng.uniform(0.005, 0.1, 2)
    w_past = rng.uniform(-2, 2)
    x = rng.uniform(-1, 1, 2)
    w = -theta[0] * w_past + theta[1] * x[0] + theta[2] * x[1]
    eta = rng.uniform(-de, de, 2)
    zeta = rng.uniform(-dz, dz, 2)
    window = RegressorWindow(5, order, w + eta[0], np.array([w_past + eta[1]]), x + zeta)
    rad = rng.uniform(0.02, 0.3, 3)
    off = rng.uniform(-1, 1, 3) * rad
    return window, theta + off - rad, theta + off + rad, float(de), float(dz), theta


def arx_residual(ds) -> np.ndarray:
    """``w(t) + sum a_i w(t-i) - sum b_j x(t-j)`` per sample, written without the simulator."""
    order = ds.order
    N = ds.N
    res = np.array(ds.w, dtype=float)
    for i in range(1, order.na + 1):
        shifted = np.concatenate([np.zeros(i), ds.w[: N - i]])
        res += ds.theta[:, i - 1] * shifted
    for col, j in enumerate(range(order.nk, order.nb + 1)):
        shifted = np.concatenate([np.zeros(j), ds.x[: N - j]])
        res -= ds.theta[:, order.na + col] * shifted
    return res
