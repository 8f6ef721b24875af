"""Turbo orchestration of the per-frame and factorisation phases.

One outer iteration runs GAMP on every frame under the current prior field,
turns the extrinsic pseudo-data into support messages, factors the
pseudo-data with BiG-AMP, refreshes the prior field from the factorisation
and finally re-estimates the hyperparameters by EM.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .bigamp import BigampOptions, PseudoObservation, bigamp_solve, select_rank
from .errors import InvalidArgumentError, SolverDivergedError
from .gamp import FrameProblem, GampOptions, gamp_solve_frame
from .priors import (PROB_EPS, VAR_FLOOR, BGPriorField, Hyperparams, SupportBeliefs,
                     row_support_posterior, support_outgoing, support_posterior)

RANK_MODES = ("auto", "fixed")


@dataclass
class TurboConfig:
    """Settings of the outer loop.

    ``rank`` is the fixed rank when ``rank_mode == "fixed"`` and the largest
    candidate rank when ``rank_mode == "auto"``. In auto mode the outer loop
    first factors at the largest rank until the relative change of ``X_hat``
    drops to ``rank_select_tol`` (after at least ``rank_warmup`` and at most
    ``rank_warmup_max`` iterations); the rank is then selected once on the
    current pseudo-data (or at every later iteration with ``reselect_rank``)
    and ``max_outer_iters`` further iterations are allowed.
    ``init_noise_var=None`` starts from the noise variances stored with the
    measurements.
    """

    max_outer_iters: int = 20
    outer_tol: float = 1e-5
    init_lambda: float = 0.5
    init_g0_mean: float = 0.0
    init_g0_var: float = 1.0
    init_noise_var: float | None = 100.0
    rank_mode: str = "auto"
    rank: int = 6
    rank_warmup: int = 5
    rank_warmup_max: int = 25
    rank_select_tol: float = 1e-2
    reselect_rank: bool = False
    learn_noise_var: bool = True
    shared_noise_var: bool = False
    gamp: GampOptions = field(default_factory=GampOptions)
    bigamp: BigampOptions = field(default_factory=BigampOptions)
    master_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if isinstance(self.gamp, dict):
            self.gamp = GampOptions(**self.gamp)
        if isinstance(self.bigamp, dict):
            self.bigamp = BigampOptions(**self.bigamp)
        if self.max_outer_iters < 1 or not self.outer_tol > 0:
            raise InvalidArgumentError("max_outer_iters must be >= 1 and outer_tol > 0")
        if self.rank_mode not in RANK_MODES:
            raise InvalidArgumentError(f"rank_mode must be one of {RANK_MODES}")
        if int(self.rank) < 1 or not 1 <= int(self.rank_warmup) <= int(self.rank_warmup_max):
            raise InvalidArgumentError("need rank >= 1 and 1 <= rank_warmup <= rank_warmup_max")
        if not self.rank_select_tol > 0:
            raise InvalidArgumentError("rank_select_tol must be positive")
        if self.init_noise_var is not None and not self.init_noise_var > 0:
            raise InvalidArgumentError("init_noise_var must be positive")
        if self.workers < 1:
            raise InvalidArgumentError("workers must be >= 1")


@dataclass
class Reconstruction:
    X_hat: np.ndarray
    F_hat: np.ndarray
    G_hat: np.ndarray | None
    L_hat: np.ndarray | None
    rank: int | None
    support_row: np.ndarray
    hyper_trace: list
    convergence_trace: list
    outer_iters: int
    X_var: np.ndarray | None = None


def turbo_convergence(X_prev, X_curr):
    """Relative Frobenius change ``||X_curr - X_prev|| / max(||X_prev||, 1e-12)``."""
    X_prev = np.asarray(X_prev, dtype=float)
    X_curr = np.asarray(X_curr, dtype=float)
    if X_prev.shape != X_curr.shape:
        raise InvalidArgumentError(f"shape mismatch: {X_prev.shape} vs {X_curr.shape}")
    return float(np.linalg.norm(X_curr - X_prev) / max(np.linalg.norm(X_prev), 1e-12))


def em_update(hyper, frame_results, factor_estimate, support, learn_noise_var=True,
              shared_noise_var=False, observations=None):
    """One EM refresh of ``(lam, g0_mean, g0_var, noise_var)``.

    Parameters
    ----------
    hyper : Hyperparams
    frame_results : list of FrameResult
        Used for the noise update (``z_hat``, ``z_var``).
    factor_estimate : FactorEstimate or None
        Source of the G-entry posteriors; ``None`` keeps ``g0_*`` unchanged.
    support : SupportBeliefs
    observations : list of arrays
        Frame observations ``y_t``, required when ``learn_noise_var``.
    """
    new = hyper.copy()
    new.lam = float(np.mean(support.row_posterior))

    if factor_estimate is not None and factor_estimate.g_pi is not None:
        pi = factor_estimate.g_pi
        gamma = factor_estimate.g_active_mean
        nu = factor_estimate.g_active_var
        w = float(pi.sum())
        if w > PROB_EPS:
            mean = float(np.sum(pi * gamma) / w)
            var = float(np.sum(pi * (nu + (gamma - mean) ** 2)) / w)
            new.g0_mean = mean
            new.g0_var = max(var, VAR_FLOOR)

    if learn_noise_var:
        if observations is None:
            raise InvalidArgumentError("observations are required for the noise update")
        sq = [np.sum((y - r.z_hat) ** 2 + r.z_var) for y, r in zip(observations, frame_results)]
        counts = np.array([len(y) for y in observations], dtype=float)
        if shared_noise_var:
            tau = np.full(len(sq), np.sum(sq) / counts.sum())
        else:
            tau = np.asarray(sq) / counts
        new.noise_var = np.maximum(tau, VAR_FLOOR)
    # re-run the invariant clamps
    return Hyperparams(new.lam, new.g0_mean, new.g0_var, new.noise_var, new.rank)


def _effective_operators(meas, basis):
    basis = np.asarray(basis, dtype=float)
    if basis.shape != (meas.N, meas.N):
        raise InvalidArgumentError(f"basis must be {meas.N} x {meas.N}")
    cache = {}
    ops = []
    for Phi in meas.matrices:
        # shared matrices (common ensemble) are multiplied once
        key = id(Phi)
        if key not in cache:
            cache[key] = Phi @ basis
        ops.append(cache[key])
    return ops


def _initial_hyper(meas, config, rank):
    if config.init_noise_var is None:
        tau = meas.noise_var
    else:
        tau = np.full(meas.T, float(config.init_noise_var))
    return Hyperparams(config.init_lambda, config.init_g0_mean, config.init_g0_var, tau, rank)


def _gamp_phase(ops, meas, prior, hyper, opts, workers):
    def solve(t):
        problem = FrameProblem(ops[t], meas.observations[t], prior.column(t),
                               hyper.noise_var[t])
        return gamp_solve_frame(problem, opts)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(solve, range(meas.T)))
    return [solve(t) for t in range(meas.T)]


def _with_retry(fn, opts, phase, outer, partial):
    """Run ``fn(opts)``; on divergence retry once with the step size halved."""
    try:
        return fn(opts), opts
    except SolverDivergedError:
        heavier = replace(opts, damping=1.0 - 0.5 * opts.step)
        try:
            return fn(heavier), heavier
        except SolverDivergedError as exc:
            raise SolverDivergedError(
                f"{phase} phase diverged at outer iteration {outer}: {exc}",
                iteration=exc.iteration, phase=phase, outer_iteration=outer,
                partial=partial) from exc


def _stack(results, name):
    return np.stack([getattr(r, name) for r in results], axis=1)


def run_ls_amp(meas, basis, config=None):
    """Reconstruct a low-rank, joint-sparse signal matrix from per-frame measurements.

    Parameters
    ----------
    meas : MeasurementSet
        Matrices act on the dense data; the solver works on ``Phi_t @ basis``.
    basis : ndarray, shape (N, N)
        Orthonormal synthesis basis.
    config : TurboConfig, optional

    Returns
    -------
    Reconstruction

    Raises
    ------
    SolverDivergedError
        When a phase diverges twice in a row; ``phase``, ``outer_iteration``
        and the last finite ``X_hat`` (``partial``) are attached.
    """
    config = config or TurboConfig()
    ops = _effective_operators(meas, basis)
    N, T = meas.N, meas.T
    if config.rank > min(N, T):
        raise InvalidArgumentError(f"rank {config.rank} exceeds min(N, T) = {min(N, T)}")
    hyper = _initial_hyper(meas, config, config.rank)
    prior = BGPriorField.flat((N, T), hyper.lam, hyper.g0_mean, hyper.g0_var)
    gamp_opts = config.gamp
    big_opts = replace(config.bigamp, seed=config.master_seed)
    auto = config.rank_mode == "auto"
    rank = config.rank

    X_hat = None
    factor = None
    hyper_trace, conv_trace = [], []
    # outer iteration at which the rank was fixed; the iteration budget
    # counts from there
    chosen_at = None if auto else 1
    outer = 0
    while chosen_at is None or outer < chosen_at - 1 + config.max_outer_iters:
        outer += 1
        frames, gamp_opts = _with_retry(
            lambda o: _gamp_phase(ops, meas, prior, hyper, o, config.workers),
            gamp_opts, "gamp", outer, X_hat)
        X_new = _stack(frames, "x_hat")
        X_var = _stack(frames, "x_var")
        if not np.all(np.isfinite(X_new)):
            raise SolverDivergedError("non-finite reconstruction", phase="gamp",
                                      outer_iteration=outer, partial=X_hat)
        u_hat, u_var = _stack(frames, "u_hat"), _stack(frames, "u_var")
        change = turbo_convergence(np.zeros_like(X_new) if X_hat is None else X_hat, X_new)

        # support messages leaving the frames and the leave-one-out priors
        # for the next pass (Jacobi schedule across frames)
        local = np.atleast_2d(support_posterior(u_hat, u_var, prior.active_mean,
                                                prior.active_var))
        beliefs = SupportBeliefs(support_outgoing(hyper.lam, local), local,
                                 row_support_posterior(hyper.lam, local))

        obs = PseudoObservation(u_hat, u_var)
        if chosen_at is None:
            # pseudo-data from an unsettled warm-up understate the rank
            ready = outer >= config.rank_warmup and outer > 1 and change <= config.rank_select_tol
            if ready or outer >= config.rank_warmup_max:
                chosen_at = outer
                rank = select_rank(obs, config.rank, hyper, big_opts)
        elif auto and config.reselect_rank:
            rank = select_rank(obs, config.rank, hyper, big_opts)
        hyper.rank = rank
        init = factor if factor is not None and factor.rank == rank else None
        factor, big_opts = _with_retry(
            lambda o: bigamp_solve(obs, rank, hyper, hyper.lam, o, init),
            big_opts, "bigamp", outer, X_new)

        hyper = em_update(hyper, frames, factor, beliefs, config.learn_noise_var,
                          config.shared_noise_var, meas.observations)
        prior = BGPriorField(beliefs.outgoing, factor.q_hat, factor.q_var)
        hyper_trace.append(hyper.copy())
        conv_trace.append(change)
        X_hat = X_new
        if outer > 1 and chosen_at is not None and outer > chosen_at \
                and change <= config.outer_tol:
            break

    return Reconstruction(
        X_hat=X_hat, F_hat=np.asarray(basis) @ X_hat, G_hat=factor.G_hat,
        L_hat=factor.L_hat, rank=factor.rank, support_row=beliefs.row_posterior,
        hyper_trace=hyper_trace, convergence_trace=conv_trace, outer_iters=outer,
        X_var=X_var)
