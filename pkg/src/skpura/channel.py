"""Frame generation: packets, Rayleigh channels, and the observation Y = GX + W.

Reshape conventions (0-based):
  v = a (x) x           with v[la * L_x + lx] = a[la] * x[lx]
  g = h (x) a           with g[m * L_a + la] = h[m] * a[la]
  Y in C^{(M L_a) x L_x} with y[i * L_x + lx] = Y[i, lx]  (row-major flatten)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import codec, fec
from .config import S_REF, SkpConfig

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(z: int) -> int:
    z = (z + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def mix64(*values: int) -> int:
    """Splittable 64-bit seed derivation: fold each value through splitmix64.

    Frozen contract: h starts at 0 and absorbs each value v as
    h = splitmix64(h ^ (v mod 2^64)). Used for frame and trial seeds so a
    run is bit-reproducible at any worker count.
    """
    h = 0
    for v in values:
        h = _splitmix64(h ^ (int(v) & _MASK64))
    return h


def frame_seed(master_seed: int, point_index: int, frame_index: int) -> int:
    return mix64(master_seed, point_index, frame_index)


def complex_normal(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    """i.i.d. CN(0, var) samples."""
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass
class FrameTruth:
    """Ground truth of one simulated frame."""

    packets: np.ndarray          # (K_a, B) bits
    H: np.ndarray                # (M, K_a) channels, columns CN(0, I)
    A: list                      # K_a SparseVectors
    X: np.ndarray                # (K_a, L_x) transmitted symbols
    Y: np.ndarray                # (M*L_a, L_x) observation
    N0: float
    collisions_resampled: int = 0
    G: np.ndarray = field(default=None, repr=False)  # (M*L_a, K_a)


def encode_x(b_x, cfg: SkpConfig) -> np.ndarray:
    """Full x vector: e_ref reference symbols followed by the coded block."""
    coded = fec.cc_encode(b_x, fec.CcSpec(cfg.fec_rate))
    return np.concatenate([np.full(cfg.e_ref, S_REF, dtype=np.complex128), coded])


def encode_packet(bits, cfg: SkpConfig):
    """Packet bits -> (SparseVector a, symbol vector x)."""
    b_a, b_x = codec.split_packet(bits, cfg)
    return codec.encode_a(b_a, cfg), encode_x(b_x, cfg)


def simulate_frame(cfg: SkpConfig, rng_seed) -> FrameTruth:
    """Draw K_a distinct packets, encode, and form Y = sum_j g_j x_j^T + W."""
    rng = np.random.default_rng(rng_seed)
    packets = np.empty((cfg.K_a, cfg.B), dtype=np.uint8)
    seen = set()
    collisions = 0
    j = 0
    while j < cfg.K_a:
        bits = rng.integers(0, 2, size=cfg.B, dtype=np.uint8)
        key = bits.tobytes()
        if key in seen:
            collisions += 1
            continue
        seen.add(key)
        packets[j] = bits
        j += 1

    H = complex_normal(rng, (cfg.M, cfg.K_a))
    A = []
    X = np.empty((cfg.K_a, cfg.L_x), dtype=np.complex128)
    G = np.empty((cfg.M * cfg.L_a, cfg.K_a), dtype=np.complex128)
    for j in range(cfg.K_a):
        a, x = encode_packet(packets[j], cfg)
        A.append(a)
        X[j] = x
        G[:, j] = np.kron(H[:, j], codec.dense_a(a, cfg))

    Y = G @ X
    if cfg.N0 > 0:
        Y = Y + complex_normal(rng, Y.shape, cfg.N0)
    return FrameTruth(
        packets=packets, H=H, A=A, X=X, Y=Y, N0=cfg.N0,
        collisions_resampled=collisions, G=G,
    )
