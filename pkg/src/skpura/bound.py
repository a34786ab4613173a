"""PUPE performance limit for MIMO unsourced random access.

Each channel realization draws the K_a squared channel norms; users are
ranked by norm and the largest jointly-decodable subset is found by a
descending line search over the per-rate capacity conditions, with the
undecoded remainder treated as interference. Averaging the undecodable
fraction over realizations gives the PUPE limit, and a bisection with
common random numbers locates the minimum Eb/N0 meeting a target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BoundConfig:
    M: int
    K_a: int
    T_tot: int = 3200
    B: int = 96
    eps: float = 0.1
    realizations: int = 100_000
    ebn0_lo_db: float = -30.0
    ebn0_hi_db: float = 40.0
    tol_db: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.eps <= 1.0:
            raise ValueError("eps must lie in (0, 1]")
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")


def max_decodable(h_norms_sq, P: float, N0: float, T_tot: int, B: int, M: int) -> int:
    """Largest decodable subset size for one realization.

    h_norms_sq must be sorted in descending order; the k-th condition
    compares the sum rate of the k weakest decoded users (interference
    from all undecoded users) against B*k bits.
    """
    h = np.asarray(h_norms_sq, dtype=np.float64)
    if np.any(np.diff(h) > 0):
        raise ValueError("h_norms_sq must be sorted in descending order")
    k_a = h.size
    p_over_m = P / M
    for k_dec in range(k_a, 0, -1):
        interference = N0 + p_over_m * h[k_dec:].sum()
        # Cumulative power of the weakest 1..k_dec decoded users.
        weak_cumsum = np.cumsum(h[:k_dec][::-1]) * p_over_m
        k_vec = np.arange(1, k_dec + 1)
        rates = T_tot * np.log2(1.0 + weak_cumsum / interference)
        if np.all(rates > B * k_vec):
            return k_dec
    return 0


def _max_decodable_rows(h_sorted: np.ndarray, P: float, N0: float,
                        T_tot: int, B: int, M: int) -> np.ndarray:
    """Vectorized max_decodable over rows of a (R, K_a) descending-sorted array."""
    R, k_a = h_sorted.shape
    p_over_m = P / M
    result = np.zeros(R, dtype=np.int64)
    undecided = np.ones(R, dtype=bool)
    for k_dec in range(k_a, 0, -1):
        rows = np.nonzero(undecided)[0]
        if rows.size == 0:
            break
        h_sub = h_sorted[rows, :k_dec]
        interference = N0 + p_over_m * h_sorted[rows, k_dec:].sum(axis=1)
        weak_cumsum = np.cumsum(h_sub[:, ::-1], axis=1) * p_over_m
        k_vec = np.arange(1, k_dec + 1)
        rates = T_tot * np.log2(1.0 + weak_cumsum / interference[:, None])
        ok = np.all(rates > B * k_vec, axis=1)
        hit = rows[ok]
        result[hit] = k_dec
        undecided[hit] = False
    return result


def draw_norms(cfg: BoundConfig, seed=None) -> np.ndarray:
    """(realizations, K_a) squared norms, each a sum of M unit-mean exponentials."""
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    h = rng.gamma(shape=cfg.M, scale=1.0, size=(cfg.realizations, cfg.K_a))
    return -np.sort(-h, axis=1)


def pupe_limit(cfg: BoundConfig, ebn0_db: float, norms: np.ndarray = None) -> float:
    """Mean undecodable fraction over channel realizations at one Eb/N0."""
    if norms is None:
        norms = draw_norms(cfg)
    N0 = 1.0
    P = cfg.B * 10.0 ** (ebn0_db / 10.0) * N0
    k_dec = _max_decodable_rows(norms, P, N0, cfg.T_tot, cfg.B, cfg.M)
    return float(np.mean((cfg.K_a - k_dec) / cfg.K_a))


def required_ebn0(cfg: BoundConfig, norms: np.ndarray = None) -> float:
    """Minimum Eb/N0 (dB) with pupe_limit <= eps, by bisection.

    The same channel draws are reused across all evaluations (common random
    numbers), making the objective monotone and the search deterministic.
    Returns +inf when even the top of the bracket misses the target.
    """
    if norms is None:
        norms = draw_norms(cfg)
    lo, hi = cfg.ebn0_lo_db, cfg.ebn0_hi_db
    if pupe_limit(cfg, lo, norms) <= cfg.eps:
        return lo
    if pupe_limit(cfg, hi, norms) > cfg.eps:
        return math.inf
    while hi - lo > cfg.tol_db:
        mid = 0.5 * (lo + hi)
        if pupe_limit(cfg, mid, norms) <= cfg.eps:
            hi = mid
        else:
            lo = mid
    return hi
