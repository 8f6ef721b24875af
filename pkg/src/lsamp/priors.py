"""Scalar Bernoulli-Gaussian kernels and support-belief messages.

Everything here is elementwise and vectorised over numpy arrays. Support
beliefs are combined in the log-odds domain so that products over thousands
of frames never underflow.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import InvalidArgumentError

PROB_EPS = 1e-12
VAR_FLOOR = 1e-12
_LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class Hyperparams:
    """Global prior and likelihood parameters.

    ``noise_var`` holds one noise variance per frame.
    """

    lam: float = 0.5
    g0_mean: float = 0.0
    g0_var: float = 1.0
    noise_var: np.ndarray = None
    rank: int = 1

    def __post_init__(self):
        if self.noise_var is None:
            self.noise_var = np.array([100.0])
        self.noise_var = np.atleast_1d(np.asarray(self.noise_var, dtype=float))
        self.lam = float(np.clip(self.lam, PROB_EPS, 1.0 - PROB_EPS))
        self.g0_mean = float(self.g0_mean)
        self.g0_var = float(self.g0_var)
        if not np.isfinite(self.g0_mean) or not self.g0_var > 0:
            raise InvalidArgumentError("g0_var must be positive and g0_mean finite")
        if not np.all(np.isfinite(self.noise_var)):
            raise InvalidArgumentError("noise_var must be finite")
        self.noise_var = np.maximum(self.noise_var, VAR_FLOOR)
        self.rank = int(self.rank)
        if self.rank < 1:
            raise InvalidArgumentError("rank must be >= 1")

    def copy(self):
        return Hyperparams(self.lam, self.g0_mean, self.g0_var,
                           self.noise_var.copy(), self.rank)

    def as_dict(self):
        return {"lam": self.lam, "g0_mean": self.g0_mean, "g0_var": self.g0_var,
                "noise_var": self.noise_var.tolist(), "rank": self.rank}


@dataclass
class BGPriorField:
    """Per-entry Bernoulli-Gaussian prior over the N x T signal matrix."""

    support_prob: np.ndarray
    active_mean: np.ndarray
    active_var: np.ndarray

    @classmethod
    def flat(cls, shape, lam=0.5, mean=0.0, var=1.0):
        return cls(np.full(shape, float(lam)), np.full(shape, float(mean)),
                   np.full(shape, float(var)))

    def __post_init__(self):
        self.support_prob = clip_prob(self.support_prob)
        self.active_mean = np.asarray(self.active_mean, dtype=float)
        self.active_var = np.maximum(np.asarray(self.active_var, dtype=float), VAR_FLOOR)
        if not (self.support_prob.shape == self.active_mean.shape == self.active_var.shape):
            raise InvalidArgumentError("prior field arrays must share one shape")

    def column(self, t):
        return (self.support_prob[:, t], self.active_mean[:, t], self.active_var[:, t])


@dataclass
class SupportBeliefs:
    outgoing: np.ndarray
    posterior_local: np.ndarray
    row_posterior: np.ndarray


def clip_prob(p):
    return np.clip(np.asarray(p, dtype=float), PROB_EPS, 1.0 - PROB_EPS)


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise InvalidArgumentError("non-finite input")


def _check_prob(p):
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise InvalidArgumentError("probabilities must lie in [0, 1]")


def log_normal_pdf(x, mean, var):
    return -0.5 * (_LOG_2PI + np.log(var) + (x - mean) ** 2 / var)


def _scalarize(*arrays):
    if all(np.ndim(a) == 0 for a in arrays):
        return tuple(float(a) for a in arrays)
    return arrays


def bg_posterior(r, vr, lam, q, vq):
    """Full scalar Bernoulli-Gaussian posterior.

    Prior ``(1-lam) delta(x) + lam N(x; q, vq)``, observation ``N(r; x, vr)``.

    Returns
    -------
    mean, var, pi, gamma, nu
        Posterior mean and variance, posterior activity probability, and
        the mean/variance of ``x`` conditioned on being active.
    """
    r, vr, lam, q, vq = (np.asarray(a, dtype=float) for a in (r, vr, lam, q, vq))
    _check_finite(r, vr, lam, q, vq)
    _check_prob(lam)
    vr = np.maximum(vr, VAR_FLOOR)
    vq = np.maximum(vq, 0.0)
    s = vq + vr
    with np.errstate(divide="ignore"):
        log_act = np.log(lam) + log_normal_pdf(r, q, s)
        log_off = np.log1p(-lam) + log_normal_pdf(r, 0.0, vr)
    lse = np.logaddexp(log_act, log_off)
    pi = np.exp(log_act - lse)
    pi_off = np.exp(log_off - lse)
    gamma = (r * vq + q * vr) / s
    nu = vq * vr / s
    mean = pi * gamma
    # pi*(nu + gamma^2) - (pi*gamma)^2, rearranged to avoid cancellation
    var = pi * nu + pi * pi_off * gamma ** 2
    return mean, var, pi, gamma, nu


def bg_posterior_moments(r, vr, lam, q, vq):
    """MMSE denoiser for the Bernoulli-Gaussian prior.

    Returns ``(mean, var, pi)``; scalars in give floats out.
    """
    mean, var, pi, _, _ = bg_posterior(r, vr, lam, q, vq)
    return _scalarize(mean, var, pi)


def support_posterior(u_hat, u_var, q_hat, q_var):
    """Posterior local support probability of one coefficient.

    Ratio of the evidence for an active coefficient with amplitude belief
    ``N(q_hat, q_var)`` against a zero coefficient, both observed through
    the Gaussian message ``N(u_hat, u_var)``; evaluated in the log domain.
    """
    u_hat, u_var, q_hat, q_var = (np.asarray(a, dtype=float)
                                  for a in (u_hat, u_var, q_hat, q_var))
    _check_finite(u_hat, u_var, q_hat, q_var)
    u_var = np.maximum(u_var, VAR_FLOOR)
    q_var = np.maximum(q_var, 0.0)
    log_ratio = log_normal_pdf(0.0, u_hat, u_var) - log_normal_pdf(u_hat, q_hat, q_var + u_var)
    p = clip_prob(expit(-log_ratio))
    return float(p) if p.ndim == 0 else p


def _logit(p):
    return np.log(p) - np.log1p(-p)


def _row_lambda_logit(lam, n_rows):
    lam = np.asarray(lam, dtype=float)
    _check_finite(lam)
    _check_prob(lam)
    lam = clip_prob(lam)
    if lam.ndim == 0:
        return np.full(n_rows, _logit(lam))
    if lam.shape != (n_rows,):
        raise InvalidArgumentError("lambda must be a scalar or one value per row")
    return _logit(lam)


def _belief_logits(posterior_local):
    p = np.asarray(posterior_local, dtype=float)
    if p.ndim != 2:
        raise InvalidArgumentError("posterior_local must be an N x T matrix")
    _check_finite(p)
    _check_prob(p)
    # clamped beliefs keep every log term above log(PROB_EPS), so the
    # total-minus-own leave-one-out subtraction never meets -inf
    return _logit(clip_prob(p))


def support_outgoing_logit(lam, posterior_local):
    """Unclamped log-odds of the leave-one-out support messages."""
    ell = _belief_logits(posterior_local)
    total = ell.sum(axis=1, keepdims=True)
    prior = _row_lambda_logit(lam, ell.shape[0])[:, None]
    return prior + (total - ell)


def support_outgoing(lam, posterior_local):
    """Support prior for each entry from the sparsity rate and all other frames.

    ``lam`` may be a scalar or a per-row vector. Cost is O(N T): each entry
    is the row total of log-odds minus its own term.
    """
    return clip_prob(expit(support_outgoing_logit(lam, posterior_local)))


def row_support_posterior(lam, posterior_local):
    """Row activity probability combining ``lam`` with every frame's belief."""
    ell = _belief_logits(posterior_local)
    prior = _row_lambda_logit(lam, ell.shape[0])
    return clip_prob(expit(prior + ell.sum(axis=1)))


def combine_beliefs(p, q):
    """Bayes product of two independent binary beliefs."""
    p, q = clip_prob(p), clip_prob(q)
    return clip_prob(expit(_logit(p) + _logit(q)))
