"""McCormick envelopes for a bilinear product ``w = x * y`` over a box."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


@dataclass(frozen=True)
class Box:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"empty box [{self.lo}, {self.hi}]")

    @property
    def radius(self) -> float:
        return 0.5 * (self.hi - self.lo)

    def __contains__(self, v) -> bool:
        return self.lo <= v <= self.hi


class Inequality(NamedTuple):
    """``coef_w * w + coef_x * x + coef_y * y  (sense)  rhs``."""

    coef_w: float
    coef_x: float
    coef_y: float
    sense: str
    rhs: float
    tag: str

    def slack(self, w, x, y):
        """Nonnegative when satisfied."""
        lhs = self.coef_w * w + self.coef_x * x + self.coef_y * y
        return self.rhs - lhs if self.sense == "<=" else lhs - self.rhs


class EnvelopeConstraints(NamedTuple):
    under_lo: Inequality
    under_hi: Inequality
    over_hi: Inequality
    over_lo: Inequality

    @property
    def under(self) -> tuple[Inequality, Inequality]:
        return (self.under_lo, self.under_hi)

    @property
    def over(self) -> tuple[Inequality, Inequality]:
        return (self.over_hi, self.over_lo)

    def w_interval(self, x, y):
        """Range of ``w`` the envelope admits at ``(x, y)``."""
        lo = np.maximum(*[(q.rhs - q.coef_x * x - q.coef_y * y) / q.coef_w for q in self.under])
        hi = np.minimum(*[(q.rhs - q.coef_x * x - q.coef_y * y) / q.coef_w for q in self.over])
        return lo, hi

    def satisfied(self, w, x, y, tol: float = 0.0):
        return np.all([np.asarray(q.slack(w, x, y)) >= -tol for q in self], axis=0)


def envelope(x_box: Box, y_box: Box) -> EnvelopeConstraints:
    """Four McCormick inequalities, each written with ``w`` isolated on the left.

    w >= xL*y + x*yL - xL*yL      w >= xU*y + x*yU - xU*yU
    w <= xU*y + x*yL - xU*yL      w <= x*yU + xL*y - xL*yU
    """
    xl, xu, yl, yu = x_box.lo, x_box.hi, y_box.lo, y_box.hi
    return EnvelopeConstraints(
        Inequality(1.0, -yl, -xl, ">=", -xl * yl, "under_lo"),
        Inequality(1.0, -yu, -xu, ">=", -xu * yu, "under_hi"),
        Inequality(1.0, -yl, -xu, "<=", -xu * yl, "over_hi"),
        Inequality(1.0, -yu, -xl, "<=", -xl * yu, "over_lo"),
    )


def m_term_bounds(theta_box: Box, delta_eps: float) -> EnvelopeConstraints:
    """Envelope of ``M = theta * eps`` with ``theta`` in ``theta_box`` and ``|eps| <= delta_eps``.

    Inequalities are over ``(M, theta, eps)`` in the ``(w, x, y)`` slots.
    """
    if delta_eps < 0:
        raise ValueError("delta_eps must be nonnegative")
    return envelope(theta_box, Box(-delta_eps, delta_eps))
