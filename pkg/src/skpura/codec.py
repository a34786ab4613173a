"""Bit-level SKP encoding and decoding.

The B_a index-modulation bits select, through a mixed-radix enumeration,
one nonzero position per segment of a and a constellation value for every
segment except the first (whose value is the fixed reference). The B_x
bits go through the FEC chain (see the fec module) to form x, and the
transmitted codeword is the Kronecker product v = a (x) x.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import CONSTELLATION, N_POINTS, S_REF, SkpConfig


@dataclass(frozen=True)
class SparseVector:
    """Index-modulated vector: one nonzero per segment.

    supports -- (I_IM,) int array, 0-based position within each segment
    values   -- (I_IM,) complex array of unit-modulus points, values[0] == S_REF
    """

    supports: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "supports", np.asarray(self.supports, dtype=np.int64))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.complex128))

    def key(self) -> tuple:
        """Hashable identity (support positions + constellation indices)."""
        idx = tuple(int(np.argmin(np.abs(CONSTELLATION - v))) for v in self.values)
        return tuple(int(u) for u in self.supports), idx


def bits_to_int(bits) -> int:
    """MSB-first bit vector -> integer."""
    n = 0
    for b in bits:
        n = (n << 1) | int(b)
    return n


def int_to_bits(n: int, width: int) -> np.ndarray:
    """Integer -> MSB-first bit vector of fixed width."""
    return np.array([(n >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def _mixed_radix_bases(cfg: SkpConfig) -> list[int]:
    # Support digits are the most significant, then value digits.
    return [cfg.L_IM] * cfg.I_IM + [N_POINTS] * (cfg.I_IM - 1)


def encode_a(b_a, cfg: SkpConfig) -> SparseVector:
    """Map B_a bits to a sparse vector via mixed-radix enumeration."""
    b_a = np.asarray(b_a)
    if b_a.size != cfg.B_a:
        raise ValueError(f"expected {cfg.B_a} bits, got {b_a.size}")
    n = bits_to_int(b_a)
    bases = _mixed_radix_bases(cfg)
    digits = [0] * len(bases)
    for i in range(len(bases) - 1, -1, -1):
        n, digits[i] = divmod(n, bases[i])
    if n != 0:
        raise ValueError("bit pattern outside the enumerable range")
    supports = np.array(digits[: cfg.I_IM], dtype=np.int64)
    values = np.empty(cfg.I_IM, dtype=np.complex128)
    values[0] = S_REF
    values[1:] = CONSTELLATION[digits[cfg.I_IM :]]
    return SparseVector(supports, values)


def decode_a(a_hat: SparseVector, cfg: SkpConfig):
    """Invert encode_a.

    Returns (bits, exact). Supports/values whose mixed-radix integer falls
    outside the 2^B_a image are clamped to the top codeword and flagged
    exact=False; the function is total.
    """
    supports, value_idx = a_hat.key()
    digits = list(supports) + list(value_idx[1:])
    bases = _mixed_radix_bases(cfg)
    n = 0
    for base, d in zip(bases, digits):
        n = n * base + d
    exact = n < 2**cfg.B_a
    if not exact:
        n = 2**cfg.B_a - 1
    return int_to_bits(n, cfg.B_a), exact


def dense_a(a: SparseVector, cfg: SkpConfig) -> np.ndarray:
    """Length-L_a dense representation."""
    out = np.zeros(cfg.L_a, dtype=np.complex128)
    out[np.arange(cfg.I_IM) * cfg.L_IM + a.supports] = a.values
    return out


def global_positions(a: SparseVector, cfg: SkpConfig) -> np.ndarray:
    """0-based positions of the nonzeros within the length-L_a vector."""
    return np.arange(cfg.I_IM) * cfg.L_IM + a.supports


def assemble_v(a: SparseVector, x: np.ndarray, cfg: SkpConfig) -> np.ndarray:
    """Kronecker codeword v = a (x) x, length L_a * L_x, squared norm I_IM * L_x."""
    return np.kron(dense_a(a, cfg), np.asarray(x, dtype=np.complex128))


def split_packet(bits, cfg: SkpConfig):
    """Split a B-bit packet into its index-modulation and FEC halves."""
    bits = np.asarray(bits)
    if bits.size != cfg.B:
        raise ValueError(f"expected {cfg.B} packet bits, got {bits.size}")
    return bits[: cfg.B_a], bits[cfg.B_a :]


def join_packet(b_a, b_x) -> np.ndarray:
    return np.concatenate([np.asarray(b_a, dtype=np.uint8), np.asarray(b_x, dtype=np.uint8)])
