"""Experiment configuration files and the shipped presets.

Configs are INI files with a ``[meta] version`` key. Trajectories are written
one per parameter, e.g. ``a1 = sinusoid 0.2 0.4 500`` (offset, amplitude,
period) or ``a2 = constant 0.25``.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .identifier import METHODS, ConfigError, IdentifierConfig, initial_pui, signs_from_truth
from .model import (
    Constant,
    Dataset,
    InputSpec,
    ModelOrder,
    NoiseSpec,
    Sinusoid,
    Trajectory,
    delta_for_snr,
    simulate,
    variation_bound_of,
)

CONFIG_VERSION = 1
PRESETS = ("example1", "example2", "noisefree")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    order: ModelOrder
    trajectories: tuple
    N: int
    seed: int = 1
    input_low: float = -1.0
    input_high: float = 1.0
    snr_x: float | None = None
    snr_w: float | None = None
    delta_eta: float | None = None
    delta_zeta: float | None = None
    variation: tuple | None = None  # None means derived from the trajectories
    initial_radius: float = 0.5
    method: str = "rsm-m"
    signs: str = "from-truth"
    on_empty: str = "raise"

    def __post_init__(self):
        has_snr = self.snr_x is not None or self.snr_w is not None
        has_delta = self.delta_eta is not None or self.delta_zeta is not None
        if has_snr == has_delta:
            raise ConfigError("give exactly one of target SNRs (snr_x, snr_w) or noise bounds (delta_eta, delta_zeta)")
        if has_snr and (self.snr_x is None or self.snr_w is None):
            raise ConfigError("both snr_x and snr_w are required")
        if has_delta and (self.delta_eta is None or self.delta_zeta is None):
            raise ConfigError("both delta_eta and delta_zeta are required")
        if len(self.trajectories) != self.order.n_p:
            raise ConfigError(f"expected {self.order.n_p} trajectories ({', '.join(self.order.labels)})")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if self.N <= self.order.lag:
            raise ConfigError("N must exceed max(na, nb)")
        if self.initial_radius < 0:
            raise ConfigError("initial_radius must be nonnegative")

    def replace(self, **changes) -> "ExperimentConfig":
        if "snr_x" in changes or "snr_w" in changes:
            changes.setdefault("delta_eta", None)
            changes.setdefault("delta_zeta", None)
        elif "delta_eta" in changes or "delta_zeta" in changes:
            changes.setdefault("snr_x", None)
            changes.setdefault("snr_w", None)
        return dataclasses.replace(self, **changes)

    @property
    def seeds(self) -> tuple[int, int]:
        """Independent (input, noise) seeds derived from the experiment seed."""
        state = np.random.SeedSequence(self.seed).generate_state(2)
        return int(state[0]), int(state[1])

    @property
    def variation_bounds(self) -> np.ndarray:
        if self.variation is not None:
            return np.asarray(self.variation, dtype=float)
        return np.array([variation_bound_of(s) for s in self.trajectories])

    def theta0(self) -> np.ndarray:
        return np.array([float(s.at(0)) for s in self.trajectories])

    def simulate(self) -> Dataset:
        input_seed, noise_seed = self.seeds
        inp = InputSpec(self.input_low, self.input_high, input_seed)
        if self.snr_x is not None:
            clean = simulate(self.trajectories, self.order, NoiseSpec(seed=noise_seed), inp, self.N)
            noise = NoiseSpec(delta_for_snr(clean.w, self.snr_w), delta_for_snr(clean.x, self.snr_x), noise_seed)
        else:
            noise = NoiseSpec(self.delta_eta, self.delta_zeta, noise_seed)
        return simulate(self.trajectories, self.order, noise, inp, self.N)

    def identifier_config(self, delta_eta: float, delta_zeta: float, ds: Dataset, method: str | None = None):
        method = method or self.method
        signs = None
        if method == "rsm-s":
            if self.signs != "from-truth":
                try:
                    signs = np.array([float(v) for v in self.signs.split()])
                except ValueError:
                    raise ConfigError(f"bad sign list {self.signs!r}") from None
                if signs.shape != (self.order.n_p,):
                    raise ConfigError(f"sign list needs {self.order.n_p} entries")
            else:
                signs = signs_from_truth(ds)
        theta0 = ds.theta0 if ds.theta0 is not None else self.theta0()
        return IdentifierConfig(
            delta_eta=delta_eta,
            delta_zeta=delta_zeta,
            variation=self.variation_bounds,
            initial=initial_pui(theta0, self.initial_radius),
            method=method,
            signs=signs,
            on_empty=self.on_empty,
        )


def _parse_trajectory(text: str) -> Trajectory:
    parts = text.split()
    try:
        if parts[0] == "constant" and len(parts) == 2:
            return Constant(float(parts[1]))
        if parts[0] == "sinusoid" and len(parts) == 4:
            return Sinusoid(float(parts[1]), float(parts[2]), float(parts[3]))
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"bad trajectory {text!r}: {exc}") from None
    raise ConfigError(f"bad trajectory {text!r}; use 'constant V' or 'sinusoid OFFSET AMPLITUDE PERIOD'")


def _opt_float(sec, key):
    v = sec.get(key)
    return None if v is None or v.strip() == "" else float(v)


def parse_config(text: str, name: str = "custom") -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    version = cp.getint("meta", "version", fallback=None)
    if version != CONFIG_VERSION:
        raise ConfigError(f"config version {version} unsupported; expected {CONFIG_VERSION}")
    try:
        order = ModelOrder(cp.getint("model", "na"), cp.getint("model", "nb"), cp.getint("model", "nk", fallback=0))
        traj_sec = cp["trajectory"]
        trajectories = tuple(_parse_trajectory(traj_sec[label]) for label in order.labels)
        noise = cp["noise"] if cp.has_section("noise") else {}
        ident = cp["identify"] if cp.has_section("identify") else {}
        variation = ident.get("variation", "auto").strip()
        return ExperimentConfig(
            name=cp.get("meta", "name", fallback=name),
            order=order,
            trajectories=trajectories,
            N=cp.getint("run", "N"),
            seed=cp.getint("run", "seed", fallback=1),
            input_low=cp.getfloat("input", "low", fallback=-1.0),
            input_high=cp.getfloat("input", "high", fallback=1.0),
            snr_x=_opt_float(noise, "snr_x"),
            snr_w=_opt_float(noise, "snr_w"),
            delta_eta=_opt_float(noise, "delta_eta"),
            delta_zeta=_opt_float(noise, "delta_zeta"),
            variation=None if variation == "auto" else tuple(float(v) for v in variation.split()),
            initial_radius=float(ident.get("initial_radius", 0.5)),
            method=ident.get("method", "rsm-m").strip(),
            signs=ident.get("signs", "from-truth").strip(),
            on_empty=ident.get("on_empty", "raise").strip(),
        )
    except KeyError as exc:
        raise ConfigError(f"missing config entry {exc}") from None
    except (configparser.Error, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), name=path.stem)


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return resources.files("eivsm.presets").joinpath(f"{name}.ini").read_text()


def load_preset(name: str) -> ExperimentConfig:
    return parse_config(preset_text(name), name=name)


def snr_label(v: float) -> float | str:
    return "inf" if math.isinf(v) else v
