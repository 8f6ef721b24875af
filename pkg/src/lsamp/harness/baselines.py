"""Ablation baselines sharing the per-frame machinery of the turbo loop.

``baseline_independent`` solves every frame on its own with per-frame EM.
``baseline_jointsparse`` keeps the inter-frame support messages but fixes
the active-coefficient prior at the pooled ``(g0_mean, g0_var)``, so no
amplitude structure is exploited.
"""
from __future__ import annotations

import numpy as np

from ..errors import SolverDivergedError
from ..priors import (PROB_EPS, VAR_FLOOR, BGPriorField, clip_prob, row_support_posterior,
                      support_outgoing, support_posterior)
from ..turbo import (Reconstruction, TurboConfig, _effective_operators, _gamp_phase,
                     _initial_hyper, _stack, _with_retry, turbo_convergence)


def _amplitude_moments(pi, gamma, nu, axis=None):
    """Activity-weighted mean and variance of the active amplitudes."""
    w = np.sum(pi, axis=axis)
    safe = np.maximum(w, PROB_EPS)
    mean = np.sum(pi * gamma, axis=axis) / safe
    centred = gamma - (mean if axis is None else np.expand_dims(mean, axis))
    var = np.sum(pi * (nu + centred ** 2), axis=axis) / safe
    return mean, np.maximum(var, VAR_FLOOR), w > PROB_EPS


def _noise_update(meas, frames, shared):
    sq = np.array([np.sum((y - r.z_hat) ** 2 + r.z_var)
                   for y, r in zip(meas.observations, frames)])
    counts = meas.m_per_frame.astype(float)
    tau = np.full(meas.T, sq.sum() / counts.sum()) if shared else sq / counts
    return np.maximum(tau, VAR_FLOOR)


def _frame_em_loop(meas, basis, config, joint):
    config = config or TurboConfig()
    ops = _effective_operators(meas, basis)
    N, T = meas.N, meas.T
    hyper = _initial_hyper(meas, config, 1)
    lam = np.full(T, hyper.lam)
    mean = np.full(T, hyper.g0_mean)
    var = np.full(T, hyper.g0_var)
    prior = BGPriorField.flat((N, T), hyper.lam, hyper.g0_mean, hyper.g0_var)
    gamp_opts = config.gamp
    X_hat = None
    hyper_trace, conv_trace = [], []
    support_row = np.full(N, hyper.lam)
    outer = 0
    for outer in range(1, config.max_outer_iters + 1):
        frames, gamp_opts = _with_retry(
            lambda o: _gamp_phase(ops, meas, prior, hyper, o, config.workers),
            gamp_opts, "gamp", outer, X_hat)
        X_new = _stack(frames, "x_hat")
        if not np.all(np.isfinite(X_new)):
            raise SolverDivergedError("non-finite reconstruction", phase="gamp",
                                      outer_iteration=outer, partial=X_hat)
        pi = _stack(frames, "pi")
        gamma, nu = _stack(frames, "active_mean"), _stack(frames, "active_var")
        if joint:
            u_hat, u_var = _stack(frames, "u_hat"), _stack(frames, "u_var")
            local = np.atleast_2d(support_posterior(u_hat, u_var, prior.active_mean,
                                                    prior.active_var))
            support_row = row_support_posterior(hyper.lam, local)
            outgoing = support_outgoing(hyper.lam, local)
            m, v, ok = _amplitude_moments(pi, gamma, nu)
            hyper.lam = float(clip_prob(np.mean(support_row)))
            if ok:
                hyper.g0_mean, hyper.g0_var = float(m), float(v)
            prior = BGPriorField(outgoing, np.full((N, T), hyper.g0_mean),
                                 np.full((N, T), hyper.g0_var))
        else:
            m, v, ok = _amplitude_moments(pi, gamma, nu, axis=0)
            lam = clip_prob(np.mean(pi, axis=0))
            mean = np.where(ok, m, mean)
            var = np.where(ok, v, var)
            support_row = clip_prob(np.mean(pi, axis=1))
            hyper.lam = float(np.mean(lam))
            prior = BGPriorField(np.broadcast_to(lam, (N, T)), np.broadcast_to(mean, (N, T)),
                                 np.broadcast_to(var, (N, T)))
        if config.learn_noise_var:
            hyper.noise_var = _noise_update(meas, frames, config.shared_noise_var)
        hyper_trace.append(hyper.copy())
        prev = np.zeros_like(X_new) if X_hat is None else X_hat
        conv_trace.append(turbo_convergence(prev, X_new))
        X_hat = X_new
        if outer > 1 and conv_trace[-1] <= config.outer_tol:
            break
    return Reconstruction(X_hat=X_hat, F_hat=np.asarray(basis) @ X_hat, G_hat=None,
                          L_hat=None, rank=None, support_row=support_row,
                          hyper_trace=hyper_trace, convergence_trace=conv_trace,
                          outer_iters=outer)


def baseline_independent(meas, basis, config=None):
    """Per-frame GAMP with per-frame EM and no inter-frame messages."""
    return _frame_em_loop(meas, basis, config, joint=False)


def baseline_jointsparse(meas, basis, config=None):
    """Turbo support messages without the low-rank amplitude phase."""
    return _frame_em_loop(meas, basis, config, joint=True)
