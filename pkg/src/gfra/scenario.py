"""Experiment world generation: user drops, activity, pilots and payloads.

Everything here is a pure function of its parameters and an explicit rng, so
trials can be drawn concurrently and replayed exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import db_to_linear

# Path-loss model: gain(dB) = -128.1 - 36.7 log10(r) with r in km.
_PL_INTERCEPT_DB = -128.1
_PL_SLOPE_DB = 36.7


def path_loss(distance_km: float | np.ndarray) -> float | np.ndarray:
    """Distance-dependent channel gain in dB (negative), distance in km."""
    d = np.asarray(distance_km, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = _PL_INTERCEPT_DB - _PL_SLOPE_DB * np.log10(d)
    return float(out) if np.isscalar(distance_km) else out


@dataclass(frozen=True)
class UserPopulation:
    """Per-user distances (km) and linear large-scale path gains."""

    distances: np.ndarray
    path_gains: np.ndarray

    @property
    def n_users(self) -> int:
        return self.distances.size


@dataclass(frozen=True)
class ActivityPattern:
    """Binary activity indicators and the equivalent index set."""

    indicators: np.ndarray

    @property
    def active_set(self) -> np.ndarray:
        return np.flatnonzero(self.indicators)

    @property
    def n_active(self) -> int:
        return int(self.indicators.sum())


@dataclass(frozen=True)
class PilotMatrix:
    """Non-orthogonal pilot sequences, one row per user (N x L)."""

    entries: np.ndarray

    @property
    def n_users(self) -> int:
        return self.entries.shape[0]

    @property
    def pilot_len(self) -> int:
        return self.entries.shape[1]


def sample_positions(n_users: int, radius_km: float, rng: np.random.Generator) -> UserPopulation:
    """Drop users uniformly over a disc and derive their path gains.

    Uniform area density means the radial cdf is (r/R)^2, hence the sqrt.
    """
    if radius_km <= 0:
        raise ValueError("radius must be positive")
    r = radius_km * np.sqrt(rng.uniform(size=n_users))
    r = np.maximum(r, 1e-9)  # keep the log finite for a draw at the center
    gains = db_to_linear(path_loss(r))
    return UserPopulation(distances=r, path_gains=gains)


def sample_activity(n_users: int, n_active: int, rng: np.random.Generator) -> ActivityPattern:
    """Pick exactly K active users uniformly without replacement."""
    if not 0 <= n_active <= n_users:
        raise ValueError("need 0 <= K <= N")
    indicators = np.zeros(n_users, dtype=np.int8)
    chosen = rng.choice(n_users, size=n_active, replace=False)
    indicators[chosen] = 1
    return ActivityPattern(indicators=indicators)


def gen_pilots(n_users: int, pilot_len: int, rng: np.random.Generator) -> PilotMatrix:
    """i.i.d. CN(0, 1) pilot symbols, unit average power per entry.

    Unit per-entry power matches the normalized data constellation, so pilot
    and data phases are transmitted at the same power.
    """
    if pilot_len < 1:
        raise ValueError("pilot_len must be >= 1")
    shape = (n_users, pilot_len)
    entries = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    return PilotMatrix(entries=entries)


def gen_payload(n_blocks: int, payload_bits: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform random payload bits, one row per block ((n_blocks, N_b), uint8)."""
    if payload_bits < 1:
        raise ValueError("payload_bits must be >= 1")
    return rng.integers(0, 2, size=(n_blocks, payload_bits), dtype=np.uint8)
