"""Bilinear generalized AMP for the sparse factorization Y ~= G X.

One engine invocation iterates the scalar-variance AMP recursion with
pluggable element priors: spike+Gaussian on entries of G and discrete
constellation distributions on entries of X. The extrinsic outputs are
the Gaussian pseudo-observation messages of each element (mean/variance
before the prior is applied), which downstream structured decoders
consume.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class EngineDivergence(RuntimeError):
    """Numerical blow-up inside the factorization loop; the trial is wasted."""


@dataclass
class BigAmpOpts:
    max_iter: int = 100
    tol: float = 1e-6
    damping: float = 0.7
    tau_floor: float = 1e-12
    var_ceiling: float = 1e12
    # Cold-start means are random draws at the full prior energy on both
    # sides: if either side starts near zero while its variance is O(1),
    # the Onsager correction factors (1 - v * sum) blow up the other
    # side's extrinsic means on the first iteration.
    init_scale: float = 1.0          # scale of the constellation draw added to x
    init_jitter: float = None        # variance of the g jitter; None = prior variance


@dataclass
class BigAmpResult:
    x_ext: np.ndarray   # (N, L) extrinsic means of X
    vx_ext: np.ndarray  # (N, L) extrinsic variances of X
    g_ext: np.ndarray   # (R, N) extrinsic means of G
    vg_ext: np.ndarray  # (R, N) extrinsic variances of G
    x_post: np.ndarray
    vx_post: np.ndarray
    g_post: np.ndarray
    vg_post: np.ndarray
    z_post: np.ndarray
    vz_post: np.ndarray
    iterations: int = 0
    converged: bool = False


def discrete_posterior(xhat, vx, log_phi, points, tau_floor=1e-12):
    """Posterior mean/variance of a constellation prior under a CN(xhat, vx) likelihood.

    log_phi -- (..., n_points) prior log-weights (need not be normalized)
    points  -- (n_points,) constellation
    """
    vx = np.maximum(vx, tau_floor)
    logw = log_phi - (np.abs(xhat[..., None] - points) ** 2) / vx[..., None]
    logw -= logw.max(axis=-1, keepdims=True)
    w = np.exp(logw)
    w /= w.sum(axis=-1, keepdims=True)
    mean = w @ points
    second = w @ (np.abs(points) ** 2)
    var = np.maximum(second - np.abs(mean) ** 2, tau_floor)
    return mean, var


def spike_gauss_posterior(ghat, vg, lam, mu, tau, tau_floor=1e-12):
    """Posterior mean/variance for the prior (1-lam) delta(g) + lam CN(g; mu, tau)."""
    vg = np.maximum(vg, tau_floor)
    tv = tau + vg
    # log evidence of each mixture component under the CN(ghat, vg) likelihood
    log_on = np.log(np.clip(lam, 1e-300, 1.0)) - np.log(np.pi * tv) - np.abs(ghat - mu) ** 2 / tv
    log_off = np.log(np.clip(1.0 - lam, 1e-300, 1.0)) - np.log(np.pi * vg) - np.abs(ghat) ** 2 / vg
    post_lam = 1.0 / (1.0 + np.exp(np.clip(log_off - log_on, -700, 700)))
    m1 = (tau * ghat + vg * mu) / tv
    t1 = tau * vg / tv
    mean = post_lam * m1
    var = post_lam * t1 + post_lam * (1.0 - post_lam) * np.abs(m1) ** 2
    return mean, np.maximum(var, tau_floor)


def prior_moments_g(lam, mu, tau):
    """Mean and variance of the spike+Gaussian prior itself."""
    mean = lam * mu
    var = lam * (tau + np.abs(mu) ** 2) - np.abs(mean) ** 2
    return mean, var


def prior_moments_x(phi, points):
    mean = phi @ points
    var = phi @ (np.abs(points) ** 2) - np.abs(mean) ** 2
    return mean, var


def run_bigamp(
    Y: np.ndarray,
    g_prior,             # (lam, mu, tau), each (R, N)
    x_phi: np.ndarray,   # (N, L, n_points) normalized prior weights
    points: np.ndarray,  # constellation
    N0: float,
    opts: BigAmpOpts = None,
    rng: np.random.Generator = None,
    x0: np.ndarray = None,
    g0: np.ndarray = None,
    vx0: np.ndarray = None,
    vg0: np.ndarray = None,
) -> BigAmpResult:
    """Run the damped AMP factorization loop until the product estimate settles.

    x0/g0 warm-start the element means; otherwise means start at the prior
    mean plus a random perturbation (a fresh draw per trial).
    """
    opts = opts or BigAmpOpts()
    rng = rng or np.random.default_rng()
    lam = np.asarray(g_prior[0], dtype=np.float64)
    mu = np.asarray(g_prior[1], dtype=np.complex128)
    tau = np.asarray(g_prior[2], dtype=np.float64)
    R, N = lam.shape
    L = Y.shape[1]
    log_phi = np.log(np.clip(x_phi, 1e-300, None))

    g_mean_prior, g_var_prior = prior_moments_g(lam, mu, tau)
    x_mean_prior, x_var_prior = prior_moments_x(x_phi, points)

    if x0 is not None:
        x_t = np.array(x0, dtype=np.complex128)
    else:
        # Perturbation shrinks as the prior concentrates, keeping the
        # init energy consistent with the prior's own spread.
        draw = points[rng.integers(0, len(points), size=(N, L))]
        x_t = x_mean_prior + opts.init_scale * np.sqrt(x_var_prior.real) * draw
    vx_t = np.maximum(x_var_prior.real if vx0 is None else np.asarray(vx0), opts.tau_floor)

    if g0 is not None:
        g_t = np.array(g0, dtype=np.complex128)
    else:
        jitter = g_var_prior.real if opts.init_jitter is None else opts.init_jitter
        g_t = g_mean_prior.astype(np.complex128) + np.sqrt(np.maximum(jitter, 0.0) / 2.0) * (
            rng.standard_normal((R, N)) + 1j * rng.standard_normal((R, N))
        )
    vg_t = np.maximum(g_var_prior.real if vg0 is None else np.asarray(vg0), opts.tau_floor)

    s_hat = np.zeros((R, L), dtype=np.complex128)
    p_bar_prev = None
    beta = opts.damping

    x_ext = vx_ext = g_ext = vg_ext = None
    z_post = vz_post = None
    converged = False
    it = 0

    for it in range(1, opts.max_iter + 1):
        abs_g2 = np.abs(g_t) ** 2
        abs_x2 = np.abs(x_t) ** 2

        vp_bar = abs_g2 @ vx_t + vg_t @ abs_x2
        p_bar = g_t @ x_t
        if p_bar_prev is not None:
            p_bar = beta * p_bar + (1.0 - beta) * p_bar_prev
        vp = vp_bar + vg_t @ vx_t
        vp = np.maximum(vp, opts.tau_floor)
        p_hat = p_bar - s_hat * vp_bar

        vz_post = vp * N0 / (vp + N0)
        z_post = (vp * Y + N0 * p_hat) / (vp + N0)

        vs = np.maximum((1.0 - vz_post / vp) / vp, 0.0)
        s_new = (z_post - p_hat) / vp
        s_hat = beta * s_new + (1.0 - beta) * s_hat

        vx_ext = 1.0 / np.clip(abs_g2.T @ vs, 1.0 / opts.var_ceiling, None)
        x_ext = x_t * (1.0 - vx_ext * (vg_t.T @ vs)) + vx_ext * (np.conj(g_t).T @ s_hat)
        vg_ext = 1.0 / np.clip(vs @ abs_x2.T, 1.0 / opts.var_ceiling, None)
        g_ext = g_t * (1.0 - vg_ext * (vs @ vx_t.T)) + vg_ext * (s_hat @ np.conj(x_t).T)

        x_new, vx_new = discrete_posterior(x_ext, vx_ext, log_phi, points, opts.tau_floor)
        g_new, vg_new = spike_gauss_posterior(g_ext, vg_ext, lam, mu, tau, opts.tau_floor)

        x_t = beta * x_new + (1.0 - beta) * x_t
        g_t = beta * g_new + (1.0 - beta) * g_t
        vx_t = vx_new
        vg_t = vg_new

        if not (np.isfinite(p_bar).all() and np.isfinite(x_t).all() and np.isfinite(g_t).all()):
            raise EngineDivergence(f"non-finite state at iteration {it}")

        if p_bar_prev is not None:
            num = np.sum(np.abs(p_bar - p_bar_prev) ** 2)
            den = np.sum(np.abs(p_bar) ** 2)
            if num <= opts.tol * den:
                p_bar_prev = p_bar
                converged = True
                break
        p_bar_prev = p_bar

    return BigAmpResult(
        x_ext=x_ext, vx_ext=vx_ext, g_ext=g_ext, vg_ext=vg_ext,
        x_post=x_t, vx_post=vx_t, g_post=g_t, vg_post=vg_t,
        z_post=z_post, vz_post=vz_post,
        iterations=it, converged=converged,
    )
