"""Receiver orchestration: module iteration, multi-trial packet decision, PUPE.

One trial iterates factorization, per-user g decoding, and per-user x
decoding until the hard decisions settle. Trials restart with fresh random
initializations; decoded packets vote into a pending list whose priorities
drive the final output list of at most K_a packets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import bigamp, codec, decoder_g, decoder_x, fec
from .channel import mix64
from .config import CONSTELLATION, SkpConfig


@dataclass
class ReceiverOpts:
    n_top: int = 10
    p_thr: int = 3
    t_max: int = 30
    outer_iters: int = 10
    seed: int = 0
    bigamp: bigamp.BigAmpOpts = field(default_factory=bigamp.BigAmpOpts)


@dataclass
class PendingEntry:
    bits: np.ndarray
    priority: int
    first_seen: int


class PendingList:
    """Cross-trial vote table: exact-match packets accumulate priority."""

    def __init__(self):
        self._entries: dict[bytes, PendingEntry] = {}

    def merge(self, packets, trial_index: int):
        for bits in packets:
            bits = np.asarray(bits, dtype=np.uint8)
            key = bits.tobytes()
            if key in self._entries:
                self._entries[key].priority += 1
            else:
                self._entries[key] = PendingEntry(bits, 1, trial_index)

    def count_at_least(self, p_thr: int) -> int:
        return sum(1 for e in self._entries.values() if e.priority >= p_thr)

    def top(self, k: int):
        entries = sorted(
            self._entries.values(),
            key=lambda e: (-e.priority, e.first_seen, e.bits.tobytes()),
        )
        return [e.bits for e in entries[:k]]

    def __len__(self):
        return len(self._entries)


def uninformative_priors(cfg: SkpConfig):
    """Starting priors: spike+Gaussian with the segment occupancy rate on G,
    uniform constellation weights on X."""
    R = cfg.M * cfg.L_a
    lam = np.full((R, cfg.K_a), 1.0 / cfg.L_IM)
    mu = np.zeros((R, cfg.K_a), dtype=np.complex128)
    tau = np.ones((R, cfg.K_a))
    phi = np.full((cfg.K_a, cfg.L_x, len(CONSTELLATION)), 1.0 / len(CONSTELLATION))
    return (lam, mu, tau), phi


def _packet_from_user(candidate, xmsg, spec, cfg, xres=None):
    """Assemble the hard packet for one user from its best candidate and x."""
    b_a, _ = codec.decode_a(candidate.vector, cfg)
    hard_bits, _ = decoder_x.hard_decide_x(xmsg, spec, cfg, plain=xres)
    return codec.join_packet(b_a, hard_bits)


def _evict_duplicates(weights, g_cols, packets, threshold=0.9):
    """Indices of engine columns to re-randomize.

    Two columns modeling the same user show up as identical decoded packets
    or near-collinear g estimates; the copy with the larger candidate
    weight stays, the rest are freed so the next engine run can latch onto
    whatever signal is left unexplained.
    """
    k = g_cols.shape[1]
    norms = np.linalg.norm(g_cols, axis=0) + 1e-30
    evict = set()
    for i in range(k):
        for j in range(i + 1, k):
            if i in evict or j in evict:
                continue
            same_packet = np.array_equal(packets[i], packets[j])
            corr = abs(g_cols[:, i].conj() @ g_cols[:, j]) / (norms[i] * norms[j])
            if same_packet or corr > threshold:
                evict.add(j if weights[i] >= weights[j] else i)
    return evict


def decode_frame_once(Y: np.ndarray, cfg: SkpConfig, opts: ReceiverOpts, trial_seed: int):
    """One receiver trial; returns K_a estimated packets ([] if the engine diverges)."""
    rng = np.random.default_rng(trial_seed)
    spec = fec.CcSpec(cfg.fec_rate)
    g_prior, x_phi = uninformative_priors(cfg)
    fresh_g, fresh_phi = uninformative_priors(cfg)
    x0 = g0 = None
    prev_packets = None
    packets = []

    try:
        for _ in range(opts.outer_iters):
            res = bigamp.run_bigamp(
                Y, g_prior, x_phi, CONSTELLATION, cfg.N0,
                opts=opts.bigamp, rng=rng, x0=x0, g0=g0,
            )

            lam = np.empty_like(g_prior[0])
            mu = np.empty_like(g_prior[1])
            tau = np.empty_like(g_prior[2])
            new_phi = np.empty_like(x_phi)
            packets = []
            weights = np.empty(cfg.K_a)
            for j in range(cfg.K_a):
                gmsg = decoder_g.GaussianBlockMsg.from_flat(
                    res.g_ext[:, j], res.vg_ext[:, j], cfg.M, cfg.L_a
                )
                table = decoder_g.element_likelihoods(gmsg, cfg)
                cands = decoder_g.build_candidates(gmsg, cfg, opts.n_top)
                lam_j, mu_j, tau_j = decoder_g.synthesize_message(cands, gmsg, cfg, table)
                lam[:, j] = lam_j.reshape(-1)
                mu[:, j] = mu_j.reshape(-1)
                tau[:, j] = tau_j.reshape(-1)

                xmsg = decoder_x.XChannelMsg(res.x_ext[j], res.vx_ext[j])
                xres = decoder_x.decode_x(xmsg, spec, cfg)
                new_phi[j] = xres.extrinsic

                best = max(cands, key=lambda c: c.log_weight)
                weights[j] = best.log_weight
                packets.append(_packet_from_user(best, xmsg, spec, cfg, xres=xres))

            x0, g0 = res.x_post.copy(), res.g_post.copy()

            # Two engine columns locked on one user starve another user of a
            # column; free the weaker copies and let them re-converge.
            evicted = _evict_duplicates(weights, res.g_post, packets)
            for j in evicted:
                lam[:, j] = fresh_g[0][:, 0]
                mu[:, j] = 0.0
                tau[:, j] = 1.0
                new_phi[j] = fresh_phi[0]
                x0[j] = CONSTELLATION[rng.integers(0, len(CONSTELLATION), cfg.L_x)]
                g0[:, j] = np.sqrt(fresh_g[0][0, 0] / 2.0) * (
                    rng.standard_normal(cfg.M * cfg.L_a)
                    + 1j * rng.standard_normal(cfg.M * cfg.L_a)
                )

            g_prior = (lam, mu, tau)
            x_phi = new_phi

            if not evicted and prev_packets is not None and all(
                np.array_equal(p, q) for p, q in zip(packets, prev_packets)
            ):
                break
            prev_packets = None if evicted else packets
    except bigamp.EngineDivergence:
        return []

    return packets


@dataclass
class FrameDecodeResult:
    packets: list
    trials_used: int
    pending_size: int


def run_trials(trial_fn, k_a: int, opts: ReceiverOpts) -> FrameDecodeResult:
    """Multi-trial packet decision: vote, early-stop, and select the top K_a.

    trial_fn(trial_index) -> list of estimated packets for that trial.
    """
    pending = PendingList()
    trials = 0
    for t in range(opts.t_max):
        trials = t + 1
        pending.merge(trial_fn(t), t)
        if pending.count_at_least(opts.p_thr) >= k_a:
            break
    return FrameDecodeResult(pending.top(k_a), trials, len(pending))


def decode_frame(Y: np.ndarray, cfg: SkpConfig, opts: ReceiverOpts) -> FrameDecodeResult:
    """Full receiver: up to t_max independently seeded trials, merged by votes."""

    def trial(t):
        return decode_frame_once(Y, cfg, opts, mix64(opts.seed, 0x5EED, t))

    return run_trials(trial, cfg.K_a, opts)


def evaluate_pupe(truth_packets: np.ndarray, decoded_list) -> float:
    """Fraction of active users whose packet is missing from the list or
    duplicates another active user's packet."""
    truth_packets = np.asarray(truth_packets, dtype=np.uint8)
    k_a = truth_packets.shape[0]
    decoded = {np.asarray(p, dtype=np.uint8).tobytes() for p in decoded_list}
    truth_keys = [p.tobytes() for p in truth_packets]
    errors = 0
    for j, key in enumerate(truth_keys):
        duplicated = any(i != j and truth_keys[i] == key for i in range(k_a))
        if duplicated or key not in decoded:
            errors += 1
    return errors / k_a
