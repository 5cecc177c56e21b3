"""LTV errors-in-variables system: parameter trajectories, simulation, SNR helpers.

Time indices run from 1 to N. Signals and noise are zero for t <= 0.
Array index ``i`` of every per-sample sequence holds time ``t = i + 1``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

DIVERGENCE_CAP = 1e9


class UnstableSimulationError(RuntimeError):
    """Raised when the simulated noise-free output blows past the divergence cap."""

    def __init__(self, t: int, value: float):
        super().__init__(f"simulated w({t}) = {value:.3g} exceeds divergence cap {DIVERGENCE_CAP:g}")
        self.t = t
        self.value = value


class DatasetParseError(ValueError):
    def __init__(self, path, line: int, msg: str):
        super().__init__(f"{path}:{line}: {msg}")
        self.line = line


@dataclass(frozen=True)
class ModelOrder:
    """Structure of ``A(t,q^-1) w(t) = B(t,q^-1) x(t)``.

    ``A`` has coefficients a_1..a_na. ``B`` has coefficients b_nk..b_nb, i.e. an
    optional pure input delay ``nk`` removes the leading numerator terms. With
    ``nk = 0`` this is the plain (n_a, n_b) structure with n_p = n_a + n_b + 1.
    """

    na: int
    nb: int
    nk: int = 0

    def __post_init__(self):
        if self.na < 1 or self.nb < 0:
            raise ValueError("need na >= 1 and nb >= 0")
        if self.na < self.nb:
            raise ValueError("need na >= nb")
        if not 0 <= self.nk <= self.nb:
            raise ValueError("need 0 <= nk <= nb")

    @property
    def n_p(self) -> int:
        return self.na + self.nb - self.nk + 1

    @property
    def b_lags(self) -> range:
        return range(self.nk, self.nb + 1)

    @property
    def lag(self) -> int:
        """Largest lag in the regressor; identification starts at ``lag + 1``."""
        return max(self.na, self.nb)

    @property
    def labels(self) -> list[str]:
        return [f"a{i}" for i in range(1, self.na + 1)] + [f"b{j}" for j in self.b_lags]

    def is_a(self, k: int) -> bool:
        return k < self.na

    def lag_of(self, k: int) -> int:
        """Lag of the noise sample multiplying parameter ``k`` (``i`` for a_i, ``j`` for b_j)."""
        return k + 1 if k < self.na else self.nk + (k - self.na)


@dataclass(frozen=True)
class Constant:
    value: float

    def at(self, t):
        return np.full(np.shape(t), float(self.value)) if np.ndim(t) else float(self.value)

    @property
    def variation_bound(self) -> float:
        return 0.0


@dataclass(frozen=True)
class Sinusoid:
    """``offset + amplitude * sin(2 pi t / period)``."""

    offset: float
    amplitude: float
    period: float

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError("sinusoid period must be positive")
        if not math.isfinite(self.amplitude):
            raise ValueError("sinusoid amplitude must be finite")

    def at(self, t):
        return self.offset + self.amplitude * np.sin(2.0 * np.pi * np.asarray(t, dtype=float) / self.period)

    @property
    def variation_bound(self) -> float:
        return 2.0 * math.pi * abs(self.amplitude) / self.period


Trajectory = Union[Constant, Sinusoid]


def variation_bound_of(spec: Trajectory) -> float:
    """Bound on |theta(t) - theta(t-1)| for a sampled trajectory."""
    return spec.variation_bound


def trajectory_matrix(specs: Sequence[Trajectory], t) -> np.ndarray:
    """Parameter values, shape ``(len(t), n_p)``."""
    t = np.asarray(t)
    return np.column_stack([np.broadcast_to(s.at(t), t.shape) for s in specs]).astype(float)


@dataclass(frozen=True)
class NoiseSpec:
    delta_eta: float = 0.0
    delta_zeta: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.delta_eta < 0 or self.delta_zeta < 0:
            raise ValueError("noise bounds must be nonnegative")


@dataclass(frozen=True)
class InputSpec:
    low: float = -1.0
    high: float = 1.0
    seed: int = 0


@dataclass(frozen=True, eq=False)
class Dataset:
    order: ModelOrder
    u: np.ndarray
    y: np.ndarray
    x: np.ndarray
    w: np.ndarray
    eta: np.ndarray
    zeta: np.ndarray
    theta: np.ndarray  # (N, n_p), row i is theta(i + 1)
    theta0: np.ndarray = field(default=None)  # theta(0), None when unknown

    def __post_init__(self):
        for name in ("u", "y", "x", "w", "eta", "zeta", "theta"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.theta0 is not None:
            t0 = np.asarray(self.theta0, dtype=float)
            t0.setflags(write=False)
            object.__setattr__(self, "theta0", t0)
        if self.theta.shape != (len(self.u), self.order.n_p):
            raise ValueError("theta must have shape (N, n_p)")

    @property
    def N(self) -> int:
        return len(self.u)

    @property
    def t(self) -> np.ndarray:
        return np.arange(1, self.N + 1)

    def theta_at(self, t: int) -> np.ndarray:
        if t == 0:
            return self.theta0
        return self.theta[t - 1]


def _noise(rng: np.random.Generator, delta: float, n: int) -> np.ndarray:
    return rng.uniform(-delta, delta, n)


def simulate(
    specs: Sequence[Trajectory],
    order: ModelOrder,
    noise: NoiseSpec,
    input_spec: InputSpec,
    N: int,
) -> Dataset:
    """Simulate the noise-free system driven by a uniform random input, then add bounded noise."""
    if len(specs) != order.n_p:
        raise ValueError(f"expected {order.n_p} trajectories, got {len(specs)}")
    if N <= order.lag:
        raise ValueError(f"N must exceed max(na, nb) = {order.lag}")

    x = np.random.default_rng(input_spec.seed).uniform(input_spec.low, input_spec.high, N)
    theta = trajectory_matrix(specs, np.arange(1, N + 1))
    theta0 = trajectory_matrix(specs, np.array([0]))[0]
    w = simulate_output(theta, x, order)

    rng = np.random.default_rng(noise.seed)
    zeta = _noise(rng, noise.delta_zeta, N)
    eta = _noise(rng, noise.delta_eta, N)
    return Dataset(order=order, u=x + zeta, y=w + eta, x=x, w=w, eta=eta, zeta=zeta, theta=theta, theta0=theta0)


def simulate_output(theta: np.ndarray, x: np.ndarray, order: ModelOrder) -> np.ndarray:
    """Noise-free output ``w`` for parameter rows ``theta`` and input ``x``."""
    N = len(x)
    na = order.na
    b_lags = list(order.b_lags)
    # zero-padded buffers: index lag + i holds time i + 1
    pad = order.lag
    xp = np.concatenate([np.zeros(pad), x])
    wp = np.zeros(pad + N)
    for i in range(N):
        row = theta[i]
        acc = 0.0
        for a_idx in range(na):
            acc -= row[a_idx] * wp[pad + i - (a_idx + 1)]
        for b_idx, j in enumerate(b_lags):
            acc += row[na + b_idx] * xp[pad + i - j]
        if not abs(acc) <= DIVERGENCE_CAP:
            raise UnstableSimulationError(i + 1, acc)
        wp[pad + i] = acc
    return wp[pad:]


def _snr(signal: np.ndarray, noise: np.ndarray) -> float:
    noise_energy = float(np.sum(np.square(noise)))
    if noise_energy == 0.0:
        return math.inf
    return 10.0 * math.log10(float(np.sum(np.square(signal))) / noise_energy)


def snr_input(ds: Dataset) -> float:
    """Input SNR in dB; ``math.inf`` when the input noise is identically zero."""
    return _snr(ds.x, ds.zeta)


def snr_output(ds: Dataset) -> float:
    """Output SNR in dB; ``math.inf`` when the output noise is identically zero."""
    return _snr(ds.w, ds.eta)


def delta_for_snr(signal, target_snr: float) -> float:
    """Uniform noise bound whose expected energy ``N delta^2 / 3`` hits ``target_snr``."""
    s = np.asarray(signal, dtype=float)
    energy = float(np.sum(s * s))
    if energy <= 0:
        raise ValueError("signal energy must be positive")
    if math.isinf(target_snr) and target_snr > 0:
        return 0.0
    return math.sqrt(3.0 * energy / (len(s) * 10.0 ** (target_snr / 10.0)))


def simulate_for_snr(
    specs: Sequence[Trajectory],
    order: ModelOrder,
    snr_x: float,
    snr_w: float,
    noise_seed: int,
    input_spec: InputSpec,
    N: int,
) -> Dataset:
    """Simulate with noise bounds picked by :func:`delta_for_snr` from the noise-free signals."""
    clean = simulate(specs, order, NoiseSpec(seed=noise_seed), input_spec, N)
    noise = NoiseSpec(
        delta_eta=delta_for_snr(clean.w, snr_w),
        delta_zeta=delta_for_snr(clean.x, snr_x),
        seed=noise_seed,
    )
    return simulate(specs, order, noise, input_spec, N)


# --- CSV ---------------------------------------------------------------------

_BASE_COLUMNS = ["t", "u", "y", "x", "w", "eta", "zeta"]


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_dataset(ds: Dataset, path) -> None:
    n_p = ds.order.n_p
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(_BASE_COLUMNS + [f"theta_{k}" for k in range(1, n_p + 1)])
        cols = np.column_stack([ds.u, ds.y, ds.x, ds.w, ds.eta, ds.zeta, ds.theta])
        for t, row in zip(ds.t, cols):
            wr.writerow([str(t)] + [_fmt(v) for v in row])


def read_dataset(path, order: ModelOrder, theta0=None) -> Dataset:
    """Parse a dataset CSV; errors name the offending line."""
    n_p = order.n_p
    expected = _BASE_COLUMNS + [f"theta_{k}" for k in range(1, n_p + 1)]
    rows = []
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        try:
            header = next(rd)
        except StopIteration:
            raise DatasetParseError(path, 1, "empty file") from None
        if header != expected:
            raise DatasetParseError(path, 1, f"expected header {','.join(expected)}")
        for line_no, rec in enumerate(rd, start=2):
            if len(rec) != len(expected):
                raise DatasetParseError(path, line_no, f"expected {len(expected)} fields, got {len(rec)}")
            try:
                t = int(rec[0])
                vals = [float(v) for v in rec[1:]]
            except ValueError as exc:
                raise DatasetParseError(path, line_no, str(exc)) from None
            if t != line_no - 1:
                raise DatasetParseError(path, line_no, f"expected t = {line_no - 1}, got {t}")
            rows.append(vals)
    if not rows:
        raise DatasetParseError(path, 2, "no samples")
    data = np.array(rows)
    return Dataset(
        order=order,
        u=data[:, 0],
        y=data[:, 1],
        x=data[:, 2],
        w=data[:, 3],
        eta=data[:, 4],
        zeta=data[:, 5],
        theta=data[:, 6:],
        theta0=theta0,
    )
