"""Bilinear GAMP for the joint-sparse low-rank factorisation ``X = G L``.

The observation is the matrix of extrinsic pseudo-data handed over by the
per-frame solvers: entry ``(n, t)`` is seen through ``N(u_hat; x_nt, u_var)``.
``G`` (N x R) carries a Bernoulli-Gaussian prior whose activity is shared
along each row, ``L`` (R x T) a standard normal prior.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, SolverDivergedError
from .priors import (VAR_FLOOR, Hyperparams, bg_posterior, clip_prob,
                     row_support_posterior, support_outgoing, support_posterior)
from .sensing import derive_rng

_STREAM_BIGAMP = 11
# precision below which a factor's pseudo-observation carries no information
_NO_INFO = 1e-300


@dataclass
class BigampOptions:
    max_iters: int = 200
    tol: float = 1e-7
    damping: float = 0.75
    seed: int = 0
    rank_penalty: float = 2.0
    workers: int = 1

    def __post_init__(self):
        if self.max_iters < 1 or not self.tol > 0 or not 0 <= self.damping < 1:
            raise InvalidArgumentError("invalid BiG-AMP options")

    @property
    def step(self):
        return 1.0 - self.damping


@dataclass
class PseudoObservation:
    u_hat: np.ndarray
    u_var: np.ndarray

    def __post_init__(self):
        self.u_hat = np.asarray(self.u_hat, dtype=float)
        self.u_var = np.broadcast_to(np.asarray(self.u_var, dtype=float),
                                     self.u_hat.shape).copy()
        if self.u_hat.ndim != 2:
            raise InvalidArgumentError("pseudo-observation must be an N x T matrix")
        if not (np.all(np.isfinite(self.u_hat)) and np.all(np.isfinite(self.u_var))):
            raise InvalidArgumentError("pseudo-observation must be finite")
        self.u_var = np.maximum(self.u_var, VAR_FLOOR)

    @property
    def shape(self):
        return self.u_hat.shape


@dataclass
class FactorEstimate:
    G_hat: np.ndarray
    G_var: np.ndarray
    L_hat: np.ndarray
    L_var: np.ndarray
    q_hat: np.ndarray
    q_var: np.ndarray
    g_support: np.ndarray
    rank: int
    iters: int
    g_pi: np.ndarray = None
    g_active_mean: np.ndarray = None
    g_active_var: np.ndarray = None
    fit_trace: list = field(default_factory=list)

    @property
    def X_hat(self):
        return self.G_hat @ self.L_hat


def _row_prior(support_in, hyper, N):
    if support_in is None:
        return np.full(N, hyper.lam)
    s = np.asarray(support_in, dtype=float)
    if s.ndim == 0:
        return np.full(N, float(s))
    if s.ndim == 2:
        # per-entry beliefs about the same row variable: pool them
        s = row_support_posterior(hyper.lam, s)
    if s.shape != (N,):
        raise InvalidArgumentError("support_in must be a scalar, an N-vector or an N x T matrix")
    return clip_prob(s)


def _denoise_G(q_hat, q_var, row_prior, g0, v0):
    """BG posterior for every G entry with activity tied along rows."""
    to_row = support_posterior(q_hat, q_var, g0, v0)
    lam = support_outgoing(row_prior, np.atleast_2d(to_row))
    mean, var, pi, gamma, nu = bg_posterior(q_hat, q_var, lam, g0, v0)
    return mean, var, pi, gamma, nu, to_row


# initial variance of the random L draw: well below the unit prior so the
# first G update trusts the random directions enough to break symmetry
_L_VAR0 = 0.1


def _onsager_factor(f):
    # the (1 - var products) factor turns negative on very noisy pseudo-data,
    # flipping the sign of the previous estimate; keep it non-negative
    return np.maximum(f, 0.0)


@dataclass
class _BigampState:
    g_hat: np.ndarray
    g_var: np.ndarray
    l_hat: np.ndarray
    l_var: np.ndarray
    g_bar: np.ndarray
    l_bar: np.ndarray
    s_hat: np.ndarray
    s_var: np.ndarray | None
    p_var: np.ndarray | None
    pbar_var: np.ndarray | None = None

    def finite(self):
        return all(np.all(np.isfinite(a)) for a in
                   (self.g_hat, self.g_var, self.l_hat, self.l_var, self.s_hat))


def _bigamp_step(st, u, uv, rho, g0, v0, d):
    """One damped BiG-AMP iteration; ``d`` is the step size (1 = undamped)."""
    g_hat, g_var, l_hat, l_var = st.g_hat, st.g_var, st.l_hat, st.l_var
    with np.errstate(over="ignore", invalid="ignore"):
        pbar_var = (g_hat ** 2) @ l_var + g_var @ (l_hat ** 2)
    p_bar = g_hat @ l_hat
    p_var = pbar_var + g_var @ l_var
    if st.p_var is not None:
        # both variances share one damping so that pbar_var <= p_var holds;
        # otherwise the Onsager term amplifies s_hat geometrically
        pbar_var = d * pbar_var + (1.0 - d) * st.pbar_var
        p_var = d * p_var + (1.0 - d) * st.p_var
    p_hat = p_bar - st.s_hat * pbar_var
    s_var = 1.0 / (p_var + uv)
    s_hat = (u - p_hat) * s_var
    if st.s_var is not None:
        s_hat = d * s_hat + (1.0 - d) * st.s_hat
        s_var = d * s_var + (1.0 - d) * st.s_var
    g_bar, l_bar = st.g_bar, st.l_bar

    # pseudo-data for L
    l_prec = (g_bar ** 2).T @ s_var
    l_ok = l_prec > _NO_INFO
    l_rvar = 1.0 / np.where(l_ok, l_prec, 1.0)
    l_rhat = l_bar * _onsager_factor(1.0 - l_rvar * (g_var.T @ s_var)) + l_rvar * (g_bar.T @ s_hat)
    # pseudo-data for G
    g_prec = s_var @ (l_bar ** 2).T
    g_ok = g_prec > _NO_INFO
    g_qvar = 1.0 / np.where(g_ok, g_prec, 1.0)
    g_qhat = g_bar * _onsager_factor(1.0 - g_qvar * (s_var @ l_var.T)) + g_qvar * (s_hat @ l_bar.T)

    # standard normal prior on L; a factor whose partner carries no
    # information yet keeps its current belief
    l_new = np.where(l_ok, l_rhat / (1.0 + l_rvar), l_hat)
    lv_new = np.where(l_ok, l_rvar / (1.0 + l_rvar), l_var)
    if not (np.all(np.isfinite(g_qhat)) and np.all(np.isfinite(g_qvar))):
        return None, None
    g_new, gv_new, pi, gamma, nu, to_row = _denoise_G(
        np.where(g_ok, g_qhat, 0.0), np.where(g_ok, g_qvar, 1.0), rho, g0, v0)
    g_new = np.where(g_ok, g_new, g_hat)
    gv_new = np.maximum(np.where(g_ok, gv_new, g_var), 0.0)
    lv_new = np.maximum(lv_new, 0.0)
    new = _BigampState(g_new, gv_new, l_new, lv_new,
                       d * g_new + (1.0 - d) * g_bar, d * l_new + (1.0 - d) * l_bar,
                       s_hat, s_var, p_var, pbar_var)
    return new, (pi, gamma, nu, np.where(g_ok, to_row, 0.5))


def bigamp_solve(obs, R, hyper=None, support_in=None, opts=None, init=None):
    """Factor the pseudo-observed matrix into joint-sparse ``G`` and dense ``L``.

    Parameters
    ----------
    obs : PseudoObservation
    R : int
        Factorisation rank, ``1 <= R <= min(N, T)``.
    hyper : Hyperparams, optional
        Supplies the row activity rate and the active-entry moments of ``G``.
    support_in : float, array of shape (N,) or (N, T), optional
        Prior row-activity beliefs; defaults to ``hyper.lam``.
    opts : BigampOptions, optional
    init : FactorEstimate, optional
        Warm start; otherwise ``L`` is drawn standard normal from ``opts.seed``.

    Returns
    -------
    FactorEstimate
        ``q_hat``/``q_var`` are the extrinsic Gaussian beliefs on each entry of
        the product, excluding that entry's own pseudo-observation.
    """
    if not isinstance(obs, PseudoObservation):
        obs = PseudoObservation(*obs)
    hyper = hyper or Hyperparams()
    opts = opts or BigampOptions()
    N, T = obs.shape
    R = int(R)
    if not 1 <= R <= min(N, T):
        raise InvalidArgumentError(f"rank {R} outside [1, {min(N, T)}]")
    u, uv = obs.u_hat, obs.u_var
    rho = _row_prior(support_in, hyper, N)
    g0, v0 = hyper.g0_mean, hyper.g0_var

    if init is not None and init.rank == R:
        g_hat, g_var = init.G_hat.copy(), init.G_var.copy()
        l_hat, l_var = init.L_hat.copy(), init.L_var.copy()
    else:
        lam0 = rho[:, None] * np.ones((1, R))
        g_hat = lam0 * g0
        g_var = lam0 * v0 + lam0 * (1.0 - lam0) * g0 ** 2
        l_hat = derive_rng(opts.seed, _STREAM_BIGAMP, R).standard_normal((R, T))
        l_var = np.full((R, T), _L_VAR0)
    state = _BigampState(g_hat, g_var, l_hat, l_var, g_hat.copy(), l_hat.copy(),
                         np.zeros((N, T)), None, None)
    prev = g_hat @ l_hat
    norm_u = max(np.linalg.norm(u), 1e-300)
    fit_trace = []
    it = 0
    for it in range(1, opts.max_iters + 1):
        state, aux = _bigamp_step(state, u, uv, rho, g0, v0, opts.step)
        if state is None or not state.finite():
            raise SolverDivergedError(f"BiG-AMP state became non-finite at iteration {it}",
                                      iteration=it, phase="bigamp")
        cur = state.g_hat @ state.l_hat
        fit_trace.append(float(np.linalg.norm(cur - u) / norm_u))
        change = np.linalg.norm(cur - prev) / max(np.linalg.norm(prev), 1e-12)
        prev = cur
        if change <= opts.tol and it > 1:
            break

    g_hat, g_var, l_hat, l_var = state.g_hat, state.g_var, state.l_hat, state.l_var
    s_hat = state.s_hat
    pi, gamma, nu, to_row = aux
    pbar_var = (g_hat ** 2) @ l_var + g_var @ (l_hat ** 2)
    q_var = np.maximum(pbar_var + g_var @ l_var, VAR_FLOOR)
    q_hat = g_hat @ l_hat - s_hat * pbar_var
    g_support = row_support_posterior(rho, to_row)
    return FactorEstimate(G_hat=g_hat, G_var=g_var, L_hat=l_hat, L_var=l_var,
                          q_hat=q_hat, q_var=q_var, g_support=g_support, rank=R,
                          iters=it, g_pi=pi, g_active_mean=gamma, g_active_var=nu,
                          fit_trace=fit_trace)


def _ridge_solve(A, b):
    # relative ridge keeps rank-deficient normal equations (e.g. an all-zero
    # factor column) solvable without biasing well-posed ones
    scale = max(np.trace(A) / len(A), 1e-300)
    return np.linalg.solve(A + 1e-10 * scale * np.eye(len(A)), b)


def low_rank_fit(u_hat, weights, r, iters=50):
    """Weighted least-squares rank-``r`` approximation of ``u_hat``.

    Truncated SVD when the weights are uniform, otherwise alternating
    weighted least squares started from the SVD.
    """
    U, s, Vt = np.linalg.svd(u_hat, full_matrices=False)
    G = U[:, :r] * s[:r]
    L = Vt[:r]
    if np.ptp(weights) <= 1e-12 * np.max(weights):
        return G @ L
    for _ in range(iters):
        for t in range(u_hat.shape[1]):
            Gw = G * weights[:, t:t + 1]
            L[:, t] = _ridge_solve(G.T @ Gw, Gw.T @ u_hat[:, t])
        for n in range(u_hat.shape[0]):
            Lw = L * weights[n]
            G[n] = _ridge_solve(L @ Lw.T, Lw @ u_hat[n])
    return G @ L


def rank_log_likelihood(obs, r):
    """``2 ln p(obs | rank-r maximum-likelihood fit)``."""
    w = 1.0 / obs.u_var
    fit = low_rank_fit(obs.u_hat, w, r)
    return float(-np.sum((obs.u_hat - fit) ** 2 * w) - np.sum(np.log(2 * np.pi * obs.u_var)))


def rank_penalty(r, N, T, scale=2.0):
    """BIC-style penalty ``scale * r (N + T - r) ln(N T)``."""
    return scale * r * (N + T - r) * np.log(N * T)


def select_rank(obs, R_max, hyper=None, opts=None):
    """Rank maximising the penalised log-likelihood; ties go to the smaller rank."""
    if not isinstance(obs, PseudoObservation):
        obs = PseudoObservation(*obs)
    opts = opts or BigampOptions()
    N, T = obs.shape
    R_max = int(R_max)
    if not 1 <= R_max <= min(N, T):
        raise InvalidArgumentError(f"R_max {R_max} outside [1, {min(N, T)}]")
    ranks = range(1, R_max + 1)
    if opts.workers > 1:
        with ThreadPoolExecutor(opts.workers) as pool:
            loglik = list(pool.map(lambda r: rank_log_likelihood(obs, r), ranks))
    else:
        loglik = [rank_log_likelihood(obs, r) for r in ranks]
    scores = [ll - rank_penalty(r, N, T, opts.rank_penalty) for r, ll in zip(ranks, loglik)]
    best = 0
    for i in range(1, len(scores)):
        if scores[i] > scores[best]:
            best = i
    return best + 1
