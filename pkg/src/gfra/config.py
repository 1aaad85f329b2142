"""System configuration and unit bookkeeping.

All scalar parameters of one simulated uplink live in :class:`SystemConfig`.
Powers are stored linearly (watts); the loader accepts the usual dBm / dBm/Hz
inputs and converts once, so the rest of the code never sees decibels.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path


def db_to_linear(db: float) -> float:
    """dB -> linear power ratio."""
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    """Linear power ratio -> dB."""
    if x <= 0:
        raise ValueError("linear power must be positive")
    return 10.0 * math.log10(x)


def dbm_to_watts(dbm: float) -> float:
    """dBm -> watts."""
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(w: float) -> float:
    """Watts -> dBm."""
    if w <= 0:
        raise ValueError("power must be positive")
    return 10.0 * math.log10(w) + 30.0


def noise_variance_watts(density_dbm_hz: float, bandwidth_hz: float) -> float:
    """Noise power over a bandwidth, from a one-sided density in dBm/Hz."""
    return dbm_to_watts(density_dbm_hz) * bandwidth_hz


# Default radio parameters (uplink cellular scenario).
TX_POWER_DBM = 23.0
NOISE_DENSITY_DBM_HZ = -169.0
BANDWIDTH_HZ = 1e6
CELL_RADIUS_KM = 0.5


@dataclass(frozen=True)
class SystemConfig:
    """Scalar parameters of one link-level experiment.

    Counts follow the uplink block structure: a block of ``block_len`` symbols
    starts with ``pilot_len`` pilots, the remaining ``data_len`` symbols carry
    one rate-1/2 LDPC codeword of ``coded_bits`` bits (QPSK, 2 bits/symbol).
    """

    n_users: int = 200
    n_active: int = 40
    n_antennas: int = 64
    block_len: int = 200
    pilot_len: int = 50
    payload_bits: int = 142
    crc_bits: int = 8
    tx_power: float = dbm_to_watts(TX_POWER_DBM)
    noise_var: float = noise_variance_watts(NOISE_DENSITY_DBM_HZ, BANDWIDTH_HZ)
    threshold: float = 0.4
    turbo_iters: int = 3
    detector_iters: int = 100
    detector_tol: float = 1e-5
    damping: float = 0.3
    warmup_pilot_iters: int = 10
    decoder_iters: int = 50
    cell_radius_km: float = CELL_RADIUS_KM
    alist_path: str | None = None
    master_seed: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.n_active <= self.n_users:
            raise ValueError("need 0 <= K <= N")
        if self.pilot_len < 1 or self.pilot_len >= self.block_len:
            raise ValueError("need 1 <= L < T")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        if self.tx_power <= 0 or self.noise_var <= 0:
            raise ValueError("powers must be positive")
        if self.coded_bits != 2 * self.info_bits:
            raise ValueError(
                f"rate-1/2 bookkeeping broken: N_c={self.coded_bits} != 2*N_d={2 * self.info_bits}"
            )

    @property
    def data_len(self) -> int:
        """L_d = T - L data symbols per block."""
        return self.block_len - self.pilot_len

    @property
    def info_bits(self) -> int:
        """N_d = payload + CRC bits entering the encoder."""
        return self.payload_bits + self.crc_bits

    @property
    def coded_bits(self) -> int:
        """N_c = 2 * L_d coded bits (QPSK carries 2 bits/symbol)."""
        return 2 * self.data_len

    @property
    def activity_prior(self) -> float:
        """lambda = K/N, the activity likelihood assumed by the receiver."""
        return self.n_active / self.n_users

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)


# Field aliases accepted by the config file loader.
_ALIASES = {
    "n": "n_users",
    "k": "n_active",
    "m": "n_antennas",
    "t": "block_len",
    "l": "pilot_len",
    "n_b": "payload_bits",
    "nb": "payload_bits",
    "theta": "threshold",
    "q1": "turbo_iters",
    "q2": "detector_iters",
    "eps1": "detector_tol",
    "epsilon1": "detector_tol",
    "seed": "master_seed",
}

_FIELD_NAMES = {f.name for f in dataclasses.fields(SystemConfig)}


def _parse_scalar(text: str):
    text = text.strip().strip("\"'")
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", "null"):
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def _parse_flat(text: str) -> dict:
    """Parse a flat ``key = value`` file (TOML-style scalars, # comments)."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line or line.startswith("["):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = line.split("=", 1)
        out[key.strip()] = _parse_scalar(val)
    return out


def config_from_mapping(raw: dict) -> SystemConfig:
    """Build a :class:`SystemConfig` from loosely-named keys.

    Accepts dataclass field names, short aliases (N, K, M, T, L, theta, Q1,
    Q2, seed) and radio-unit keys ``tx_power_dbm``, ``noise_density_dbm_hz``
    plus ``bandwidth_hz`` which are converted to watts here.
    """
    kwargs: dict = {}
    dbm = {k.lower(): v for k, v in raw.items()}

    tx_dbm = dbm.pop("tx_power_dbm", None)
    dens = dbm.pop("noise_density_dbm_hz", None)
    bw = dbm.pop("bandwidth_hz", BANDWIDTH_HZ)
    noise_dbm = dbm.pop("noise_power_dbm", None)

    for key, val in dbm.items():
        name = _ALIASES.get(key, key)
        if name not in _FIELD_NAMES:
            raise KeyError(f"unknown config key {key!r}")
        if val is not None or name == "alist_path":
            kwargs[name] = val
    if tx_dbm is not None:
        kwargs["tx_power"] = dbm_to_watts(float(tx_dbm))
    if dens is not None:
        kwargs["noise_var"] = noise_variance_watts(float(dens), float(bw))
    if noise_dbm is not None:
        kwargs["noise_var"] = dbm_to_watts(float(noise_dbm))
    return SystemConfig(**kwargs)


def load_config(path: str | Path) -> SystemConfig:
    """Load a config file; JSON and flat key=value are both accepted."""
    text = Path(path).read_text()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return config_from_mapping(json.loads(text))
    return config_from_mapping(_parse_flat(text))


def table1_config(**overrides) -> SystemConfig:
    """Full-scale defaults (N=200, M=64, T=200, L=50, 23 dBm / -169 dBm/Hz)."""
    return SystemConfig(**overrides)


def reduced_config(**overrides) -> SystemConfig:
    """Desk-scale configuration: N=50, M=16, L=20, T=170 (keeps N_c=300)."""
    base = dict(n_users=50, n_antennas=16, pilot_len=20, block_len=170, n_active=10)
    base.update(overrides)
    return SystemConfig(**base)
