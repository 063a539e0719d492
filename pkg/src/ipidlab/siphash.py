"""Pure-Python SipHash-2-4 over byte strings with a 128-bit key.

Used to map flows to bucket indices. The implementation follows the
reference definition (2 compression rounds, 4 finalization rounds,
little-endian word loading, length byte in the top byte of the final
word) and is validated against the reference test vectors.
"""
from __future__ import annotations

import struct

_MASK64 = (1 << 64) - 1


def _sipround(v0: int, v1: int, v2: int, v3: int) -> tuple[int, int, int, int]:
    v0 = (v0 + v1) & _MASK64
    v1 = ((v1 << 13) | (v1 >> 51)) & _MASK64
    v1 ^= v0
    v0 = ((v0 << 32) | (v0 >> 32)) & _MASK64
    v2 = (v2 + v3) & _MASK64
    v3 = ((v3 << 16) | (v3 >> 48)) & _MASK64
    v3 ^= v2
    v0 = (v0 + v3) & _MASK64
    v3 = ((v3 << 21) | (v3 >> 43)) & _MASK64
    v3 ^= v0
    v2 = (v2 + v1) & _MASK64
    v1 = ((v1 << 17) | (v1 >> 47)) & _MASK64
    v1 ^= v2
    v2 = ((v2 << 32) | (v2 >> 32)) & _MASK64
    return v0, v1, v2, v3


def siphash24(key: bytes, data: bytes) -> int:
    """64-bit SipHash-2-4 of ``data`` under a 16-byte ``key``."""
    if len(key) != 16:
        raise ValueError("siphash24 key must be exactly 16 bytes")
    k0, k1 = struct.unpack_from("<QQ", key)
    v0 = k0 ^ 0x736F6D6570736575
    v1 = k1 ^ 0x646F72616E646F6D
    v2 = k0 ^ 0x6C7967656E657261
    v3 = k1 ^ 0x7465646279746573

    n = len(data)
    end = n - (n % 8)
    for off in range(0, end, 8):
        (m,) = struct.unpack_from("<Q", data, off)
        v3 ^= m
        v0, v1, v2, v3 = _sipround(v0, v1, v2, v3)
        v0, v1, v2, v3 = _sipround(v0, v1, v2, v3)
        v0 ^= m
    # final word: remaining bytes, zero padded, length in the top byte
    m = (n & 0xFF) << 56
    tail = data[end:]
    m |= int.from_bytes(tail, "little")
    v3 ^= m
    v0, v1, v2, v3 = _sipround(v0, v1, v2, v3)
    v0, v1, v2, v3 = _sipround(v0, v1, v2, v3)
    v0 ^= m

    v2 ^= 0xFF
    for _ in range(4):
        v0, v1, v2, v3 = _sipround(v0, v1, v2, v3)
    return v0 ^ v1 ^ v2 ^ v3
