"""Tail-biting convolutional FEC with puncturing, QPSK mapping, and BCJR decoding.

Mother code: rate-1/2, generators (23, 33) octal, constraint length 5
(16 states). Rate 3/4 keeps the period-3 pattern [11, 10, 10] of the two
output streams; "uncoded" bypasses the trellis entirely. Coded bits are
Gray-mapped pairwise onto pi/4-QPSK.

The decoder is a BCJR with exact tail-biting handled by propagating
forward/backward state masses jointly over all 16 possible start states
(probability domain, renormalized each step), so per-bit posteriors equal
the exhaustive codebook sum. Per-symbol extrinsics exclude both of the
symbol's own bit priors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import CONSTELLATION, RATE_3_4, RATE_HALF, UNCODED

G0 = 0o23
G1 = 0o33
MEMORY = 4
N_STATES = 16

LLR_CLAMP = 30.0


def _parity(x: int) -> int:
    return bin(x).count("1") & 1


def _build_trellis():
    """Next-state and output tables over (state, input bit).

    State s holds the last MEMORY inputs, most recent in the MSB; the
    5-bit register is (input << MEMORY) | s.
    """
    ns = np.zeros((N_STATES, 2), dtype=np.int64)
    out0 = np.zeros((N_STATES, 2), dtype=np.int64)
    out1 = np.zeros((N_STATES, 2), dtype=np.int64)
    for s in range(N_STATES):
        for b in (0, 1):
            reg = (b << MEMORY) | s
            ns[s, b] = (b << (MEMORY - 1)) | (s >> 1)
            out0[s, b] = _parity(reg & G0)
            out1[s, b] = _parity(reg & G1)
    return ns, out0, out1


NEXT_STATE, OUT0, OUT1 = _build_trellis()

# Puncture pattern for rate 3/4: per step index mod 3, which streams survive.
# Keeping stream 0 everywhere is required: any period-3 pattern that drops a
# stream-0 bit gives this mother code a zero-weight tail-biting cycle, making
# the punctured code non-injective at every length.
_PUNCTURE_3_4 = [(True, True), (True, False), (True, False)]


@dataclass(frozen=True)
class CcSpec:
    """Convolutional code spec; only the rate varies between configs."""

    rate: str

    def n_info_bits(self, n_symbols: int) -> int:
        if self.rate == RATE_HALF:
            return n_symbols
        if self.rate == RATE_3_4:
            if (2 * n_symbols) % 4 != 0:
                raise ValueError("rate-3/4 symbol count must give whole puncture periods")
            return 3 * n_symbols // 2
        return 2 * n_symbols

    def n_symbols(self, n_info: int) -> int:
        if self.rate == RATE_HALF:
            return n_info
        if self.rate == RATE_3_4:
            if n_info % 3 != 0:
                raise ValueError("rate-3/4 needs info length divisible by 3")
            return 2 * n_info // 3
        if n_info % 2 != 0:
            raise ValueError("uncoded mode needs an even bit count")
        return n_info // 2

    def survivors(self, n_info: int):
        """(step, stream) pairs of coded bits that survive puncturing, in order."""
        pairs = []
        for t in range(n_info):
            keep0, keep1 = _PUNCTURE_3_4[t % 3] if self.rate == RATE_3_4 else (True, True)
            if keep0:
                pairs.append((t, 0))
            if keep1:
                pairs.append((t, 1))
        return pairs


def gray_map(bits: np.ndarray) -> np.ndarray:
    """Pairs (b1, b0) -> pi/4-QPSK symbols; b1 flips the real sign, b0 the imaginary."""
    bits = np.asarray(bits).reshape(-1, 2)
    return CONSTELLATION[2 * bits[:, 0] + bits[:, 1]]


def gray_demap(symbol_idx: np.ndarray) -> np.ndarray:
    """Constellation indices -> interleaved (b1, b0) bit stream."""
    idx = np.asarray(symbol_idx, dtype=np.int64)
    out = np.empty(2 * idx.size, dtype=np.uint8)
    out[0::2] = idx >> 1
    out[1::2] = idx & 1
    return out


def _tb_encode_bits(info: np.ndarray) -> np.ndarray:
    """Mother-code output streams, shape (n_info, 2), tail-biting."""
    info = np.asarray(info, dtype=np.int64)
    n = info.size
    if n < MEMORY:
        raise ValueError("tail-biting needs at least MEMORY info bits")
    state = 0
    for b in info[-MEMORY:]:
        state = NEXT_STATE[state, b]
    coded = np.empty((n, 2), dtype=np.uint8)
    for t, b in enumerate(info):
        coded[t, 0] = OUT0[state, b]
        coded[t, 1] = OUT1[state, b]
        state = NEXT_STATE[state, b]
    return coded


def cc_encode(b_x, spec: CcSpec) -> np.ndarray:
    """Encode info bits to the coded QPSK symbol vector (length L_x - e_ref)."""
    b_x = np.asarray(b_x, dtype=np.int64).ravel()
    if spec.rate == UNCODED:
        if b_x.size % 2 != 0:
            raise ValueError("uncoded mode needs an even bit count")
        return gray_map(b_x)
    coded = _tb_encode_bits(b_x)
    kept = np.array([coded[t, j] for t, j in spec.survivors(b_x.size)], dtype=np.uint8)
    return gray_map(kept)


def symbol_bit_marginals(priors: np.ndarray):
    """P(b1=1) and P(b0=1) for each symbol distribution over the 4 points."""
    priors = np.asarray(priors, dtype=np.float64)
    p_b1 = priors[:, 2] + priors[:, 3]
    p_b0 = priors[:, 1] + priors[:, 3]
    return p_b1, p_b0


def _bit_logprobs_from_p1(p1: np.ndarray) -> np.ndarray:
    """Clamped per-bit log-probability pairs (lp[c=0], lp[c=1]) from P(bit=1)."""
    p1 = np.clip(np.asarray(p1, dtype=np.float64), 1e-300, 1.0)
    p0 = np.clip(1.0 - p1, 1e-300, 1.0)
    llr = np.clip(np.log(p0) - np.log(p1), -LLR_CLAMP, LLR_CLAMP)
    lp1 = -np.logaddexp(0.0, llr)
    lp0 = -np.logaddexp(0.0, -llr)
    return np.stack([lp0, lp1], axis=-1)


@dataclass
class BcjrResult:
    extrinsic: np.ndarray      # (n_symbols, 4) per-symbol extrinsic distributions
    hard_bits: np.ndarray      # (n_info,) decoded info bits
    bit_posteriors: np.ndarray  # (n_info, 2) info-bit posterior probabilities


def _check_priors(priors: np.ndarray):
    priors = np.asarray(priors, dtype=np.float64)
    if priors.ndim != 2 or priors.shape[1] != 4:
        raise ValueError("symbol priors must have shape (n, 4)")
    if not np.allclose(priors.sum(axis=1), 1.0, atol=1e-6):
        raise ValueError("symbol priors must be normalized")
    return priors


def _channel_logprobs(priors: np.ndarray, spec: CcSpec, n_info: int) -> np.ndarray:
    """Per (step, stream, bit value) log-probs; punctured entries stay uniform."""
    lp = np.full((n_info, 2, 2), -np.log(2.0))
    p_b1, p_b0 = symbol_bit_marginals(priors)
    lp_b1 = _bit_logprobs_from_p1(p_b1)
    lp_b0 = _bit_logprobs_from_p1(p_b0)
    survivors = spec.survivors(n_info)
    for k, (t, j) in enumerate(survivors):
        lp[t, j] = lp_b1[k // 2] if k % 2 == 0 else lp_b0[k // 2]
    return lp


def _symbol_pairs(spec: CcSpec, n_info: int):
    """For each symbol: its two surviving coded-bit slots ((t, stream), (t, stream))."""
    surv = spec.survivors(n_info)
    return [(surv[2 * i], surv[2 * i + 1]) for i in range(len(surv) // 2)]


# Grouping of (state, input) slots by their output bit pair, and of
# (state, input, next input) slots by the (first-step stream j1, second-step
# stream j2) output pair, used to bin path metrics into symbol extrinsics.
def _build_groups():
    outs = (OUT0, OUT1)
    one = [[] for _ in range(4)]
    for s in range(N_STATES):
        for b in (0, 1):
            one[2 * OUT0[s, b] + OUT1[s, b]].append(2 * s + b)
    two = {}
    ns2 = np.zeros((N_STATES, 2, 2), dtype=np.int64)
    for j1 in (0, 1):
        for j2 in (0, 1):
            two[(j1, j2)] = [[] for _ in range(4)]
    for s in range(N_STATES):
        for b in (0, 1):
            mid = NEXT_STATE[s, b]
            for b2 in (0, 1):
                ns2[s, b, b2] = NEXT_STATE[mid, b2]
                for j1 in (0, 1):
                    for j2 in (0, 1):
                        c = 2 * outs[j1][s, b] + outs[j2][mid, b2]
                        two[(j1, j2)][c].append(4 * s + 2 * b + b2)
    return np.array(one), {k: np.array(v) for k, v in two.items()}, ns2


_GROUP_ONE, _GROUP_TWO, _NS2 = _build_groups()

# Flat transition list (s, b) used to scatter branch weights into the
# state-to-state propagation matrices.
_TR_S = np.repeat(np.arange(N_STATES), 2)
_TR_B = np.tile(np.array([0, 1]), N_STATES)
_TR_NS = NEXT_STATE[_TR_S, _TR_B]


def bcjr_decode(symbol_priors, spec: CcSpec) -> BcjrResult:
    """Soft-in soft-out decode of the coded symbol block.

    symbol_priors -- (n_symbols, 4) normalized distributions over the constellation.
    Returns per-symbol extrinsics (own symbol's bit priors excluded), hard
    info-bit decisions, and info-bit posteriors.
    """
    priors = _check_priors(symbol_priors)
    n_sym = priors.shape[0]

    if spec.rate == UNCODED:
        extrinsic = np.full((n_sym, 4), 0.25)
        hard = gray_demap(np.argmax(priors, axis=1))
        post1 = np.empty((2 * n_sym, 2))
        p_b1, p_b0 = symbol_bit_marginals(priors)
        post1[0::2, 1] = p_b1
        post1[1::2, 1] = p_b0
        post1[:, 0] = 1.0 - post1[:, 1]
        return BcjrResult(extrinsic, hard, post1)

    n_info = spec.n_info_bits(n_sym)
    lp = _channel_logprobs(priors, spec, n_info)

    # Branch weights exp(gamma)[t, s, b]; info bits carry a uniform prior.
    # Channel log-probs are clamped, so the exponentials stay in range and
    # the whole recursion runs in the probability domain with per-step
    # renormalization (only likelihood ratios matter downstream).
    gamma_e = np.exp(lp[:, 0, OUT0] + lp[:, 1, OUT1])

    # State-to-state propagation matrices W[t, s, ns] (two branches per row).
    W = np.zeros((n_info, N_STATES, N_STATES))
    W[:, _TR_S, _TR_NS] = gamma_e[:, _TR_S, _TR_B]

    # Forward/backward state masses carry an extra leading axis for the
    # start state p; tail-biting keeps only paths that return to p.
    alpha = np.empty((n_info + 1, N_STATES, N_STATES))
    alpha[0] = np.eye(N_STATES)
    for t in range(n_info):
        a = alpha[t] @ W[t]
        alpha[t + 1] = a / a.max()

    beta = np.empty((n_info + 1, N_STATES, N_STATES))
    beta[n_info] = np.eye(N_STATES)
    for t in range(n_info - 1, -1, -1):
        b = beta[t + 1] @ W[t].T
        beta[t] = b / b.max()

    # Info-bit posteriors: joint over (start state p, state s, input b).
    beta_next = beta[1:][:, :, NEXT_STATE]                    # (t, p, s, b)
    joint = np.einsum("tps,tsb,tpsb->tb", alpha[:-1], gamma_e, beta_next)
    bit_post = joint / joint.sum(axis=1, keepdims=True)
    hard = (bit_post[:, 1] > bit_post[:, 0]).astype(np.uint8)

    # Aligned pairs: both bits sit on one branch, so that branch's channel
    # weight drops entirely from the extrinsic metric.
    metric_one = np.einsum("tps,tpsb->tsb", alpha[:-1], beta_next).reshape(
        n_info, 2 * N_STATES
    )

    pairs = _symbol_pairs(spec, n_info)
    ext = np.empty((n_sym, 4))
    aligned = np.array([i for i, ((t1, _), (t2, _)) in enumerate(pairs) if t1 == t2])
    if aligned.size:
        ta = np.array([pairs[i][0][0] for i in aligned])
        ext[aligned] = metric_one[ta][:, _GROUP_ONE].sum(axis=2)
    mis = np.array([i for i, ((t1, _), (t2, _)) in enumerate(pairs) if t1 != t2], dtype=int)
    if mis.size:
        # Two adjacent branches; the only surviving channel weights on them
        # are the symbol's own bits, so alpha/beta carry the whole metric.
        tm = np.array([pairs[i][0][0] for i in mis])
        j1, j2 = pairs[mis[0]][0][1], pairs[mis[0]][1][1]
        gathered = beta[tm + 2][:, :, _NS2]                   # (t, p, s, b, b2)
        m = np.einsum("tps,tpsbc->tsbc", alpha[tm], gathered)
        ext[mis] = m.reshape(len(tm), 4 * N_STATES)[:, _GROUP_TWO[(j1, j2)]].sum(axis=2)
    ext /= ext.sum(axis=1, keepdims=True)
    return BcjrResult(ext, hard, bit_post)
