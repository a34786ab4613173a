"""Per-user decoding of x: reference combining plus BCJR extrinsics.

The first e_ref symbols all carry one (unknown-during-iteration) reference
value, so each reference position's outgoing message is the product of the
other reference positions' likelihoods. The coded tail goes through the
soft-in soft-out FEC decoder. The known reference value is applied only at
the final hard decision, where it selects the constellation rotation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import fec
from .config import CONSTELLATION, S_REF, SkpConfig


@dataclass
class XChannelMsg:
    """Engine message on one user's row of X: per-symbol Gaussian mean/variance."""

    xhat: np.ndarray  # (L_x,)
    vx: np.ndarray    # (L_x,)

    def log_likelihoods(self) -> np.ndarray:
        """(L_x, 4) normalized log-likelihood of each constellation point."""
        v = np.maximum(np.asarray(self.vx, dtype=np.float64), 1e-12)
        ll = -np.abs(self.xhat[:, None] - CONSTELLATION[None, :]) ** 2 / v[:, None]
        return ll - logsumexp(ll, axis=1, keepdims=True)


def combine_reference(log_like_ref: np.ndarray) -> np.ndarray:
    """Extrinsic distributions for the reference positions.

    log_like_ref -- (e_ref, 4) per-position log-likelihoods.
    Position i gets the normalized product over the other positions; a
    single reference yields the uniform distribution (empty product).
    """
    log_like_ref = np.asarray(log_like_ref, dtype=np.float64)
    total = log_like_ref.sum(axis=0, keepdims=True)
    ext = total - log_like_ref
    ext -= logsumexp(ext, axis=1, keepdims=True)
    return np.exp(ext)


@dataclass
class XDecodeResult:
    extrinsic: np.ndarray  # (L_x, 4) outgoing symbol distributions
    hard_bits: np.ndarray  # (B_x,) info-bit decisions (no de-rotation applied)
    coded: fec.BcjrResult


def decode_x(msg: XChannelMsg, spec: fec.CcSpec, cfg: SkpConfig) -> XDecodeResult:
    """Reference positions via product combining, coded positions via BCJR."""
    ll = msg.log_likelihoods()
    extrinsic = np.empty((cfg.L_x, len(CONSTELLATION)))
    extrinsic[: cfg.e_ref] = combine_reference(ll[: cfg.e_ref])
    coded_priors = np.exp(ll[cfg.e_ref :])
    coded_priors /= coded_priors.sum(axis=1, keepdims=True)
    res = fec.bcjr_decode(coded_priors, spec)
    extrinsic[cfg.e_ref :] = res.extrinsic
    return XDecodeResult(extrinsic=extrinsic, hard_bits=res.hard_bits, coded=res)


def reference_rotation(msg: XChannelMsg, cfg: SkpConfig) -> complex:
    """Constellation rotation maximizing the joint reference posterior.

    Returns the factor phi such that dividing the estimated symbols by phi
    aligns the decoded common reference value with the known one; phi is
    estimated_reference / S_REF and is always a QPSK rotation.
    """
    ll = msg.log_likelihoods()
    joint = ll[: cfg.e_ref].sum(axis=0)
    s_est = CONSTELLATION[int(np.argmax(joint))]
    return s_est / S_REF


def hard_decide_x(msg: XChannelMsg, spec: fec.CcSpec, cfg: SkpConfig,
                  plain: XDecodeResult = None):
    """Final de-rotated hard decision on the FEC bits.

    Evaluates the coded-part likelihoods at the de-rotated points
    (phi * s), which permutes the constellation, then decodes. When the
    winning rotation is the identity, an already-computed unrotated decode
    is reused as-is.
    """
    phi = reference_rotation(msg, cfg)
    if plain is not None and phi == 1:
        return plain.hard_bits, phi
    v = np.maximum(np.asarray(msg.vx, dtype=np.float64), 1e-12)
    ll = -np.abs(msg.xhat[cfg.e_ref :, None] - phi * CONSTELLATION[None, :]) ** 2 / v[cfg.e_ref :, None]
    ll -= logsumexp(ll, axis=1, keepdims=True)
    priors = np.exp(ll)
    priors /= priors.sum(axis=1, keepdims=True)
    res = fec.bcjr_decode(priors, spec)
    return res.hard_bits, phi
