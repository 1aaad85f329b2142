"""QPSK mapping and the probability/LLR algebra between detector and decoder.

Bit patterns are read left to right: position 0 is the first bit of a pair.
With Gray labeling, position 0 selects the sign of the imaginary part and
position 1 the sign of the real part. Coded bit j (0-based) belongs to data
symbol j // 2 at position j % 2, so codeword <-> symbol reshapes are
contiguous.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

LLR_CLIP = 30.0

# Gray-labeled unit-power QPSK, indexed by the bit-pair value (b0 b1).
_S = 1.0 / np.sqrt(2.0)
QPSK_POINTS = np.array(
    [_S + 1j * _S, -_S + 1j * _S, _S - 1j * _S, -_S - 1j * _S], dtype=complex
)
QPSK_BITS = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.uint8)
BITS_PER_SYMBOL = 2


@dataclass
class ModemDiagnostics:
    """Counts distributions whose pre-renormalization mass drifted > 1e-6."""

    renorm_events: int = 0

    def reset(self) -> None:
        self.renorm_events = 0


DIAGNOSTICS = ModemDiagnostics()


@dataclass(frozen=True)
class Constellation:
    points: np.ndarray = field(default_factory=lambda: QPSK_POINTS.copy())
    bit_map: np.ndarray = field(default_factory=lambda: QPSK_BITS.copy())

    @property
    def size(self) -> int:
        return self.points.size

    @property
    def bits_per_symbol(self) -> int:
        return self.bit_map.shape[1]


QPSK = Constellation()


def qpsk_map(bits: np.ndarray) -> np.ndarray:
    """Map bit pairs to constellation points; accepts (..., 2) or flat (2k,)."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.ndim == 1:
        if bits.size % 2:
            raise ValueError("bit count must be even for QPSK")
        bits = bits.reshape(-1, 2)
    idx = bits[..., 0].astype(int) * 2 + bits[..., 1].astype(int)
    return QPSK_POINTS[idx]


def qpsk_demap(points: np.ndarray) -> np.ndarray:
    """Nearest-point hard demapping back to bit pairs (..., 2)."""
    pts = np.asarray(points, dtype=complex)
    idx = np.abs(pts[..., None] - QPSK_POINTS).argmin(axis=-1)
    return QPSK_BITS[idx]


def modulate_codeword(bits: np.ndarray) -> np.ndarray:
    """Coded bits (N_c,) -> data symbols (N_c/2,), contiguous pairing."""
    return qpsk_map(np.asarray(bits, dtype=np.uint8).reshape(-1, 2))


def normalize_distribution(probs: np.ndarray) -> np.ndarray:
    """Renormalize symbol distributions along the last axis, counting drift."""
    probs = np.asarray(probs, dtype=float)
    total = probs.sum(axis=-1, keepdims=True)
    if np.any(np.abs(total - 1.0) > 1e-6):
        DIAGNOSTICS.renorm_events += int(np.count_nonzero(np.abs(total - 1.0) > 1e-6))
    if np.any(total <= 0):
        raise ValueError("symbol distribution with non-positive mass")
    return probs / total


def bit_priors_to_symbol_prior(p0: np.ndarray) -> np.ndarray:
    """Per-bit p(c=0) pairs (..., 2) -> symbol distributions (..., 4).

    Bits of one symbol are independent, so the prior of point s is the
    product of its mapped bits' probabilities.
    """
    p0 = np.asarray(p0, dtype=float)
    probs = np.ones(p0.shape[:-1] + (QPSK_POINTS.size,), dtype=float)
    for s, pattern in enumerate(QPSK_BITS):
        for pos, b in enumerate(pattern):
            probs[..., s] = probs[..., s] * (p0[..., pos] if b == 0 else 1.0 - p0[..., pos])
    return normalize_distribution(probs)


def symbol_posterior_to_bit_posterior(dist: np.ndarray) -> np.ndarray:
    """Symbol distributions (..., 4) -> per-bit p(c=0) of shape (..., 2)."""
    dist = np.asarray(dist, dtype=float)
    out = np.empty(dist.shape[:-1] + (BITS_PER_SYMBOL,), dtype=float)
    for pos in range(BITS_PER_SYMBOL):
        mask = QPSK_BITS[:, pos] == 0
        out[..., pos] = dist[..., mask].sum(axis=-1)
    return out


def prob_to_llr(p0: np.ndarray, p1: np.ndarray | None = None) -> np.ndarray:
    """ln(p0/p1) with saturation at +-30; p1 defaults to 1-p0."""
    p0 = np.clip(np.asarray(p0, dtype=float), 0.0, 1.0)
    p1 = 1.0 - p0 if p1 is None else np.clip(np.asarray(p1, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore"):
        llr = np.log(p0) - np.log(p1)
    return np.clip(llr, -LLR_CLIP, LLR_CLIP)


def llr_to_prob(llr: np.ndarray) -> np.ndarray:
    """Inverse of :func:`prob_to_llr`: p(c=0) = e^L / (1 + e^L)."""
    return expit(np.asarray(llr, dtype=float))


def extrinsic(posterior_llr: np.ndarray, prior_llr: np.ndarray) -> np.ndarray:
    """Remove the prior from a posterior LLR (clipped difference)."""
    return np.clip(
        np.asarray(posterior_llr, dtype=float) - np.asarray(prior_llr, dtype=float),
        -LLR_CLIP,
        LLR_CLIP,
    )


def symbol_posteriors_to_llrs(eta: np.ndarray) -> np.ndarray:
    """Per-symbol posteriors (L_d, 4) -> posterior LLRs of the N_c coded bits."""
    p0 = symbol_posterior_to_bit_posterior(eta)
    return prob_to_llr(p0).reshape(-1)


def llrs_to_symbol_priors(llr: np.ndarray) -> np.ndarray:
    """Coded-bit LLRs (N_c,) -> per-symbol prior distributions (N_c/2, 4)."""
    p0 = llr_to_prob(np.asarray(llr, dtype=float).reshape(-1, BITS_PER_SYMBOL))
    return bit_priors_to_symbol_prior(p0)


def uniform_symbol_priors(n_users: int, n_symbols: int) -> np.ndarray:
    """Uniform constellation priors of shape (n_users, n_symbols, 4)."""
    return np.full((n_users, n_symbols, QPSK_POINTS.size), 0.25)
