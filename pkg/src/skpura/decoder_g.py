"""Per-user decoding of g = h (x) a.

Given the engine's Gaussian message on the user's column of G, this module
builds a short list of index-modulation candidates (closed-form per-block
likelihoods, best-first support enumeration), refines each candidate by
alternating channel/value estimation, and synthesizes the spike+Gaussian
feedback message over the candidate list.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .codec import SparseVector, global_positions
from .config import CONSTELLATION, S_REF, SkpConfig

TAU_FLOOR = 1e-12


@dataclass
class GaussianBlockMsg:
    """Engine message on one user's g column, viewed per antenna and position.

    ghat -- (M, L_a) means; column la is the length-M block of position la
    nu   -- (M, L_a) variances (floored)
    """

    ghat: np.ndarray
    nu: np.ndarray

    @classmethod
    def from_flat(cls, ghat_col, nu_col, M: int, L_a: int):
        """Engine columns are ordered antenna-major: index m * L_a + la."""
        return cls(
            ghat=np.asarray(ghat_col, dtype=np.complex128).reshape(M, L_a),
            nu=np.maximum(np.asarray(nu_col, dtype=np.float64).reshape(M, L_a), TAU_FLOOR),
        )


@dataclass
class SegmentTable:
    """Per-position marginal log-likelihoods and per-segment support probabilities."""

    log_val: np.ndarray   # (L_a, n_points) log L(a_la = s), channel integrated out
    log_zero: np.ndarray  # (L_a,) log L(a_la = 0)
    log_pos: np.ndarray   # (I_IM, L_IM) normalized log Pr{support = l}


@dataclass
class Candidate:
    vector: SparseVector
    h_mean: np.ndarray   # (M,) posterior mean of the channel
    h_var: np.ndarray    # (M,) posterior variance per antenna
    log_weight: float    # marginal likelihood of the final a (h integrated out)
    objective_trail: list = field(default_factory=list)


def element_likelihoods(msg: GaussianBlockMsg, cfg: SkpConfig, h_prior_var: float = 1.0) -> SegmentTable:
    """Closed-form per-position likelihoods with the channel integrated out.

    Under a_la = s the block observation is CN(0, nu + |s|^2 * h_prior_var)
    per antenna; under a_la = 0 it is CN(0, nu).
    """
    g2 = np.abs(msg.ghat) ** 2
    log_zero = np.sum(-np.log(np.pi * msg.nu) - g2 / msg.nu, axis=0)
    abs_s2 = np.abs(CONSTELLATION) ** 2
    var_on = msg.nu[:, :, None] + abs_s2 * h_prior_var
    log_val = np.sum(-np.log(np.pi * var_on) - g2[:, :, None] / var_on, axis=0)

    log_any = logsumexp(log_val, axis=1)  # sum over constellation values
    seg_zero = log_zero.reshape(cfg.I_IM, cfg.L_IM)
    seg_any = log_any.reshape(cfg.I_IM, cfg.L_IM)
    total_zero = seg_zero.sum(axis=1, keepdims=True)
    log_pos = seg_any + (total_zero - seg_zero)
    log_pos -= logsumexp(log_pos, axis=1, keepdims=True)
    return SegmentTable(log_val=log_val, log_zero=log_zero, log_pos=log_pos)


def top_supports(table: SegmentTable, n_top: int) -> np.ndarray:
    """The n_top support vectors with the largest product probability.

    Best-first frontier search over per-segment rank vectors: popping a
    node pushes its I_IM successors, each advancing one segment to its
    next-ranked position. Ordering matches exhaustive ranking with ties
    broken by the lexicographically smallest support.
    """
    if n_top < 1:
        raise ValueError("n_top must be >= 1")
    log_pos = table.log_pos
    n_seg, n_pos = log_pos.shape
    n_top = min(n_top, n_pos**n_seg)

    # Per-segment position order: descending probability, ties by position.
    order = np.empty((n_seg, n_pos), dtype=np.int64)
    sorted_lp = np.empty((n_seg, n_pos))
    for i in range(n_seg):
        order[i] = np.lexsort((np.arange(n_pos), -log_pos[i]))
        sorted_lp[i] = log_pos[i, order[i]]

    def score(ranks):
        return sum(sorted_lp[i, r] for i, r in enumerate(ranks))

    def support_of(ranks):
        return tuple(int(order[i, r]) for i, r in enumerate(ranks))

    start = (0,) * n_seg
    heap = [(-score(start), support_of(start), start)]
    visited = {start}
    out = []
    while heap and len(out) < n_top:
        _, support, ranks = heapq.heappop(heap)
        out.append(support)
        for i in range(n_seg):
            if ranks[i] + 1 < n_pos:
                nxt = ranks[:i] + (ranks[i] + 1,) + ranks[i + 1 :]
                if nxt not in visited:
                    visited.add(nxt)
                    heapq.heappush(heap, (-score(nxt), support_of(nxt), nxt))
    return np.array(out, dtype=np.int64)


def _h_step(positions, values, msg: GaussianBlockMsg):
    """Channel posterior given the nonzero pattern: CN prior, per-antenna diagonal."""
    inv_nu = 1.0 / msg.nu[:, positions]                    # (M, I)
    prec = 1.0 + inv_nu.sum(axis=1)
    num = (np.conj(values) * msg.ghat[:, positions] * inv_nu).sum(axis=1)
    mean = num / prec
    return mean, 1.0 / prec


def _map_objective(positions, values, h, msg: GaussianBlockMsg):
    """Complete-data coordinate-ascent objective at (a, h).

    Sum over nonzero blocks of (|g|^2 - |g - s h|^2)/nu minus the channel
    prior penalty; the all-zero baseline makes empty supports score zero.
    """
    gh = msg.ghat[:, positions]
    nu = msg.nu[:, positions]
    delta = (np.abs(gh) ** 2 - np.abs(gh - values * h[:, None]) ** 2) / nu
    return float(delta.sum() - np.sum(np.abs(h) ** 2))


def _marginal_log_weight(positions, values, msg: GaussianBlockMsg):
    """log p(message | a) with h integrated out, per-antenna Gaussian marginal."""
    inv_nu = 1.0 / msg.nu[:, positions]
    rho = 1.0 + inv_nu.sum(axis=1)
    t = (np.conj(values) * msg.ghat[:, positions] * inv_nu).sum(axis=1)
    base = np.sum(-np.log(np.pi * msg.nu) - np.abs(msg.ghat) ** 2 / msg.nu)
    return float(base + np.sum(-np.log(rho) + np.abs(t) ** 2 / rho))


def rigm_init_values(support, msg: GaussianBlockMsg, cfg: SkpConfig) -> np.ndarray:
    """Reference-anchored initial values for a support.

    The segment-1 block carries the known reference, which anchors the
    channel estimate; the remaining segments pick their point by per-block
    maximum likelihood against that anchor. Stands in for a rotationally
    invariant mixture initializer; the refinement loop dominates quality.
    """
    positions = np.arange(cfg.I_IM) * cfg.L_IM + np.asarray(support)
    h0 = msg.ghat[:, positions[0]] * np.conj(S_REF)
    values = np.empty(cfg.I_IM, dtype=np.complex128)
    values[0] = S_REF
    for i in range(1, cfg.I_IM):
        gh = msg.ghat[:, positions[i]]
        nu = msg.nu[:, positions[i]]
        scores = [
            np.sum(-np.abs(gh - s * h0) ** 2 / nu) for s in CONSTELLATION
        ]
        values[i] = CONSTELLATION[int(np.argmax(scores))]
    return values


def refine_candidate(a_init: SparseVector, msg: GaussianBlockMsg, cfg: SkpConfig,
                     max_rounds: int = 10) -> Candidate:
    """Alternate channel MAP / per-segment value-position MAP until a is stable."""
    supports = a_init.supports.copy()
    values = a_init.values.copy()
    trail = []
    h_mean = h_var = None

    inv_nu_all = 1.0 / msg.nu
    gh_over_nu = msg.ghat * inv_nu_all
    for _ in range(max_rounds):
        positions = np.arange(cfg.I_IM) * cfg.L_IM + supports
        h_mean, h_var = _h_step(positions, values, msg)

        # Score every (position, value) jointly: 2 Re(s * T) - W per block,
        # where T and W fold the channel estimate into each position.
        t_all = (np.conj(msg.ghat) * h_mean[:, None] * inv_nu_all).sum(axis=0)  # (L_a,)
        w_all = (np.abs(h_mean[:, None]) ** 2 * inv_nu_all).sum(axis=0)         # (L_a,)
        score = 2.0 * np.real(CONSTELLATION[None, :] * t_all[:, None]) - w_all[:, None]

        new_supports = supports.copy()
        new_values = values.copy()
        for i in range(cfg.I_IM):
            seg = slice(i * cfg.L_IM, (i + 1) * cfg.L_IM)
            if i == 0:
                seg_score = 2.0 * np.real(S_REF * t_all[seg]) - w_all[seg]
                new_supports[i] = int(np.argmax(seg_score))
                new_values[i] = S_REF
            else:
                flat = np.argmax(score[seg])
                new_supports[i] = int(flat // len(CONSTELLATION))
                new_values[i] = CONSTELLATION[int(flat % len(CONSTELLATION))]

        new_positions = np.arange(cfg.I_IM) * cfg.L_IM + new_supports
        trail.append(_map_objective(new_positions, new_values, h_mean, msg))
        if np.array_equal(new_supports, supports) and np.array_equal(new_values, values):
            break
        supports, values = new_supports, new_values

    positions = np.arange(cfg.I_IM) * cfg.L_IM + supports
    h_mean, h_var = _h_step(positions, values, msg)
    vec = SparseVector(supports, values)
    return Candidate(
        vector=vec, h_mean=h_mean, h_var=h_var,
        log_weight=_marginal_log_weight(positions, values, msg),
        objective_trail=trail,
    )


def build_candidates(msg: GaussianBlockMsg, cfg: SkpConfig, n_top: int) -> list:
    """Initial supports -> reference-anchored values -> refinement, deduplicated."""
    table = element_likelihoods(msg, cfg)
    cands = []
    seen = {}
    for support in top_supports(table, n_top):
        values = rigm_init_values(support, msg, cfg)
        cand = refine_candidate(SparseVector(support, values), msg, cfg)
        key = cand.vector.key()
        if key not in seen:
            seen[key] = True
            cands.append(cand)
    return cands


def synthesize_message(cands: list, msg: GaussianBlockMsg, cfg: SkpConfig, table: SegmentTable = None):
    """Spike+Gaussian feedback message per element of g over the candidate list.

    Candidate weights at position la use the factorized per-block
    log-likelihoods with block la left out; the Gaussian component
    moment-matches value * channel over the nonzero candidates, each
    carrying its leave-block-out channel posterior.

    Returns (lam, mu, tau) arrays of shape (M, L_a).
    """
    if not cands:
        raise ValueError("candidate list must be nonempty")
    if table is None:
        table = element_likelihoods(msg, cfg)
    M, L_a = msg.ghat.shape
    n = len(cands)

    # Per-candidate per-block factorized log-likelihood and its total.
    blk = np.tile(table.log_zero, (n, 1))          # (n, L_a)
    pos = np.empty((n, cfg.I_IM), dtype=np.int64)
    val_idx = np.empty((n, cfg.I_IM), dtype=np.int64)
    for k, c in enumerate(cands):
        pos[k] = global_positions(c.vector, cfg)
        val_idx[k] = [int(np.argmin(np.abs(CONSTELLATION - v))) for v in c.vector.values]
        blk[k, pos[k]] = table.log_val[pos[k], val_idx[k]]
    total = blk.sum(axis=1)

    if not np.isfinite(total).any():
        lam = np.full((M, L_a), 1.0 / cfg.L_IM)
        return lam, np.zeros((M, L_a), dtype=np.complex128), np.ones((M, L_a))

    # Leave-one-out weights: w[k, la] normalized over candidates per block.
    loo = total[:, None] - blk                     # (n, L_a)
    loo -= loo.max(axis=0, keepdims=True)
    w = np.exp(loo)
    w /= w.sum(axis=0, keepdims=True)

    lam = np.zeros((M, L_a))
    mu_num = np.zeros((M, L_a), dtype=np.complex128)
    m2_num = np.zeros((M, L_a))
    wsum = np.zeros(L_a)
    for k, c in enumerate(cands):
        inv_nu = 1.0 / msg.nu[:, pos[k]]                       # (M, I)
        vals = c.vector.values
        prec_full = 1.0 + inv_nu.sum(axis=1, keepdims=True)     # (M, 1)
        num_full = (np.conj(vals) * msg.ghat[:, pos[k]] * inv_nu).sum(axis=1, keepdims=True)
        # Leave block la out of the channel posterior for each nonzero block.
        prec_loo = prec_full - inv_nu
        num_loo = num_full - np.conj(vals) * msg.ghat[:, pos[k]] * inv_nu
        h_loo = num_loo / prec_loo
        g_mean = vals * h_loo                                   # (M, I)
        g_var = 1.0 / prec_loo
        wk = w[k, pos[k]]                                       # (I,)
        wsum[pos[k]] += wk
        lam[:, pos[k]] += wk
        mu_num[:, pos[k]] += wk * g_mean
        m2_num[:, pos[k]] += wk * (np.abs(g_mean) ** 2 + g_var)

    # Positions with negligible nonzero mass keep an inert Gaussian part.
    active = wsum > 1e-12
    mu = np.zeros((M, L_a), dtype=np.complex128)
    tau = np.full((M, L_a), 1.0)
    mu[:, active] = mu_num[:, active] / wsum[active]
    m2 = np.zeros((M, L_a))
    m2[:, active] = m2_num[:, active] / wsum[active]
    tau[:, active] = np.maximum(m2[:, active] - np.abs(mu[:, active]) ** 2, TAU_FLOOR)
    lam = np.clip(lam, 0.0, 1.0)
    lam[:, ~active] = 0.0
    return lam, mu, tau
