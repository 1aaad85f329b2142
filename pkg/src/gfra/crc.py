"""Bit-serial CRC-8 framing (polynomial 0x07, init 0x00, no reflection).

The payload length is not byte-aligned, so the shift-register form over
individual bits is the normative definition here; byte-wise results follow
from feeding bits MSB-first.
"""

from __future__ import annotations

import numpy as np

CRC_POLY = 0x07
CRC_BITS = 8


def crc8(bits: np.ndarray) -> int:
    """CRC-8 register value after clocking in ``bits`` (MSB-first convention)."""
    reg = 0
    for b in np.asarray(bits, dtype=np.uint8):
        msb = ((reg >> 7) ^ int(b)) & 1
        reg = (reg << 1) & 0xFF
        if msb:
            reg ^= CRC_POLY
    return reg


def crc8_attach(payload: np.ndarray) -> np.ndarray:
    """Append the 8 CRC bits (MSB first) to a payload bit vector."""
    payload = np.asarray(payload, dtype=np.uint8)
    if payload.ndim != 1:
        raise ValueError("payload must be a 1-D bit vector")
    reg = crc8(payload)
    tail = np.array([(reg >> (7 - i)) & 1 for i in range(CRC_BITS)], dtype=np.uint8)
    return np.concatenate([payload, tail])


def crc8_check(block: np.ndarray) -> bool:
    """True iff the trailing 8 bits match the CRC of the leading bits."""
    block = np.asarray(block, dtype=np.uint8)
    if block.size < CRC_BITS:
        raise ValueError("block shorter than the CRC field")
    payload, tail = block[:-CRC_BITS], block[-CRC_BITS:]
    reg = crc8(payload)
    expect = np.array([(reg >> (7 - i)) & 1 for i in range(CRC_BITS)], dtype=np.uint8)
    return bool(np.array_equal(tail, expect))


def bytes_to_bits(data: bytes) -> np.ndarray:
    """Unpack bytes to a bit vector, MSB first (for byte-aligned test vectors)."""
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))
