"""Effective channel synthesis and the received block Y = sqrt(g) H X + N."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .scenario import ActivityPattern, UserPopulation


@dataclass(frozen=True)
class ChannelRealization:
    """One quasi-static block: small-scale draws and the effective matrix.

    Column n of ``effective`` is u_n * sqrt(beta_n) * alpha_n, i.e. exactly
    zero for inactive users; activity lives inside the channel matrix.
    """

    small_scale: np.ndarray  # (M, N) complex, CN(0, 1) entries
    effective: np.ndarray  # (M, N) complex


@dataclass(frozen=True)
class TransmitBlock:
    """Pilot-then-data symbol matrix for all users ((N, T) complex)."""

    symbols: np.ndarray
    pilot_len: int

    @property
    def data_part(self) -> np.ndarray:
        return self.symbols[:, self.pilot_len:]


@dataclass(frozen=True)
class ReceivedBlock:
    """Base-station samples, one row per antenna ((M, T) complex)."""

    samples: np.ndarray


def make_channel(
    activity: ActivityPattern,
    population: UserPopulation,
    n_antennas: int,
    rng: np.random.Generator,
) -> ChannelRealization:
    """Draw one block's channel: i.i.d. CN(0, beta_n) columns, zeroed when inactive."""
    n_users = population.n_users
    if activity.indicators.size != n_users:
        raise ValueError("activity/population size mismatch")
    shape = (n_antennas, n_users)
    alpha = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    effective = alpha * np.sqrt(population.path_gains) * activity.indicators
    return ChannelRealization(small_scale=alpha, effective=effective)


def transmit(
    channel: ChannelRealization,
    block: TransmitBlock,
    tx_power: float,
    noise_var: float,
    rng: np.random.Generator,
) -> ReceivedBlock:
    """Y = sqrt(tx_power) * H @ X + noise, noise i.i.d. CN(0, noise_var)."""
    h = channel.effective
    x = block.symbols
    if h.shape[1] != x.shape[0]:
        raise ValueError(f"inner dimensions disagree: H is {h.shape}, X is {x.shape}")
    y = np.sqrt(tx_power) * (h @ x)
    if noise_var > 0:
        m, t = y.shape
        noise = (rng.standard_normal((m, t)) + 1j * rng.standard_normal((m, t))) * np.sqrt(
            noise_var / 2.0
        )
        y = y + noise
    return ReceivedBlock(samples=y)


def dump_block(
    out_dir: str | Path,
    channel: ChannelRealization,
    block: TransmitBlock,
    received: ReceivedBlock,
) -> Path:
    """Debug dump of (H, X, Y) as little-endian (re, im) float64 pairs, row-major.

    Each matrix goes to its own .bin; shapes live in manifest.json next to them.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    arrays = {"H": channel.effective, "X": block.symbols, "Y": received.samples}
    manifest = {}
    for name, arr in arrays.items():
        np.ascontiguousarray(arr).astype("<c16").tofile(out / f"{name}.bin")
        manifest[name] = {"shape": list(arr.shape), "layout": "row-major (re, im) float64 LE"}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return out
