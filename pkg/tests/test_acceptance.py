"""End-to-end acceptance checks; each test reports one PASS/FAIL line."""
import time

import numpy as np
import pytest

from lsamp.bigamp import PseudoObservation, select_rank
from lsamp.gamp import FrameProblem, gamp_solve_frame
from lsamp.harness.baselines import baseline_independent
from lsamp.harness.config import SweepSpec
from lsamp.harness.metrics import cnmse
from lsamp.harness.sweep import median_curve, run_sweep
from lsamp.priors import (PROB_EPS, bg_posterior_moments, combine_beliefs, row_support_posterior,
                          support_outgoing)
from lsamp.sensing import MeasurementSet, dct_basis, gen_ls_signal, measure_signal
from lsamp.turbo import TurboConfig, run_ls_amp
from oracles import exhaustive_mmse, leave_one_out_direct, quadrature_bg_moments, support_subspace_ls

RATIOS = [0.2, 0.3, 0.4, 0.5]


def _db(x):
    return 10 * np.log10(x)


def test_denoiser_matches_quadrature(report):
    rng = np.random.default_rng(2024)
    n = 10_000
    r = rng.uniform(-5, 5, n)
    vr = 10 ** rng.uniform(-2, 1, n)
    lam = rng.uniform(0.01, 0.99, n)
    q = rng.uniform(-3, 3, n)
    vq = 10 ** rng.uniform(-2, 1, n)
    start = time.perf_counter()
    mean, var, pi = bg_posterior_moments(r, vr, lam, q, vq)
    worst = 0.0
    for i in range(n):
        ref = quadrature_bg_moments(r[i], vr[i], lam[i], q[i], vq[i])
        for got, want in zip((mean[i], var[i], pi[i]), ref):
            worst = max(worst, abs(got - want) / max(abs(want), 1e-300))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8 and elapsed < 60
    report(1, ok, f"max relative error {worst:.2e} over {n} draws, {elapsed:.1f} s")
    assert ok


def test_gamp_matches_exhaustive_mmse(report):
    start = time.perf_counter()
    errs = []
    for seed in range(100):
        rng = np.random.default_rng(seed)
        A = rng.normal(size=(4, 6)) / 2.0
        x = np.zeros(6)
        x[rng.choice(6, 2, replace=False)] = rng.normal(size=2)
        z = A @ x
        tau = np.mean(z ** 2) * 10 ** -4.0
        y = z + np.sqrt(tau) * rng.normal(size=4)
        lam = 2 / 6
        res = gamp_solve_frame(FrameProblem(A, y, (lam, 0.0, 1.0), tau))
        ref = exhaustive_mmse(A, y, tau, lam, 0.0, 1.0)
        errs.append(np.sum((res.x_hat - ref) ** 2) / np.sum(ref ** 2))
    elapsed = time.perf_counter() - start
    med = _db(np.median(errs))
    ok = med <= -20 and elapsed < 60
    report(2, ok, f"median NMSE vs exact MMSE {med:.1f} dB over 100 seeds, {elapsed:.1f} s")
    assert ok


def _random_beliefs(rng):
    N, T = rng.integers(1, 6), rng.integers(2, 9)
    kind = rng.integers(3)
    if kind == 0:
        p = rng.uniform(size=(N, T))
    elif kind == 1:
        # saturated and near-saturated entries around the clamp
        p = rng.choice([0.0, PROB_EPS, 1e-11, 0.5, 1 - 1e-11, 1 - PROB_EPS, 1.0], size=(N, T))
    else:
        p = 10.0 ** rng.uniform(-13, 0, size=(N, T))
        p = np.where(rng.uniform(size=(N, T)) < 0.5, p, 1 - p)
    lam = rng.choice([rng.uniform(0.01, 0.99), PROB_EPS, 1 - PROB_EPS, 1e-11])
    return float(lam), p


def test_support_message_algebra(report):
    rng = np.random.default_rng(7)
    worst_loo = worst_row = 0.0
    for _ in range(10_000):
        lam, p = _random_beliefs(rng)
        out = support_outgoing(lam, p)
        worst_loo = max(worst_loo, np.max(np.abs(out - leave_one_out_direct(lam, p))))
        # leave-one-out message times the own belief is the row posterior
        row = row_support_posterior(lam, p)
        joined = combine_beliefs(out, p)
        free = (out > 1e-6) & (out < 1 - 1e-6) & (p > 1e-6) & (p < 1 - 1e-6)
        free &= (row[:, None] > 1e-6) & (row[:, None] < 1 - 1e-6)
        if free.any():
            gap = np.abs(joined - row[:, None])[free]
            worst_row = max(worst_row, float(gap.max()))
    ok = worst_loo <= 1e-10 and worst_row <= 1e-10
    report(3, ok, f"leave-one-out error {worst_loo:.1e}, row-combine error {worst_row:.1e} "
                  "over 10^4 matrices")
    assert ok


def test_identity_acquisition(report):
    truth = gen_ls_signal(64, 16, 2, 8, seed=11)
    meas = MeasurementSet([np.eye(64)] * 16, [truth.F[:, t].copy() for t in range(16)],
                          np.full(16, 1e-12))
    start = time.perf_counter()
    rec = run_ls_amp(meas, dct_basis(64), TurboConfig())
    elapsed = time.perf_counter() - start
    err = cnmse(truth.X, rec.X_hat)
    ok = err <= 1e-6 and elapsed < 30
    report(4, ok, f"CNMSE {err:.1e}, {elapsed:.1f} s")
    assert ok


def _acceptance_problem(seed, ratio):
    truth = gen_ls_signal(128, 32, 3, 16, seed=(5, seed), basis=dct_basis(128))
    meas = measure_signal(truth.F, ratio, 25.0, "gaussian", seed=(6, seed))
    return truth, meas


@pytest.mark.slow
def test_oracle_gap(report):
    basis = dct_basis(128)
    start = time.perf_counter()
    ours, oracle = [], []
    for seed in range(10):
        truth, meas = _acceptance_problem(seed, 0.35)
        ours.append(_db(cnmse(truth.X, run_ls_amp(meas, basis, TurboConfig()).X_hat)))
        oracle.append(_db(cnmse(truth.X, support_subspace_ls(truth, meas, basis))))
    elapsed = time.perf_counter() - start
    gap = np.median(ours) - np.median(oracle)
    ok = gap <= 5.0 and elapsed < 300
    report(5, ok, f"median {np.median(ours):.2f} dB vs oracle {np.median(oracle):.2f} dB "
                  f"(gap {gap:.2f} dB), {elapsed:.0f} s")
    assert ok


@pytest.mark.slow
def test_ablation_gap(report):
    basis = dct_basis(128)
    start = time.perf_counter()
    ours, indep = [], []
    for seed in range(10):
        truth, meas = _acceptance_problem(seed, 0.30)
        ours.append(_db(cnmse(truth.X, run_ls_amp(meas, basis, TurboConfig()).X_hat)))
        indep.append(_db(cnmse(truth.X, baseline_independent(meas, basis, TurboConfig()).X_hat)))
    elapsed = time.perf_counter() - start
    a, b = np.median(ours), np.median(indep)
    ok = a <= b - 3.0 and elapsed < 300
    report(6, ok, f"lsamp {a:.2f} dB vs independent {b:.2f} dB, {elapsed:.0f} s")
    assert ok


@pytest.mark.slow
def test_rank_selection(report):
    start = time.perf_counter()
    picks = []
    for seed in range(50):
        truth = gen_ls_signal(64, 32, 3, 8, seed=(8, seed), basis=np.eye(64))
        rng = np.random.default_rng((9, seed))
        tau = np.mean(truth.X ** 2) * 10 ** -2.5
        u = truth.X + np.sqrt(tau) * rng.normal(size=truth.X.shape)
        picks.append(select_rank(PseudoObservation(u, np.full(u.shape, tau)), 6))
    elapsed = time.perf_counter() - start
    rate = np.mean(np.array(picks) == 3)
    ok = rate >= 0.9 and elapsed < 300
    report(7, ok, f"rank 3 selected in {rate:.0%} of 50 seeds "
                  f"(picks {np.bincount(picks, minlength=7)[1:].tolist()}), {elapsed:.0f} s")
    assert ok


def _sweep_spec():
    return SweepSpec(ratios=RATIOS, seeds=10, ensembles=["gaussian", "rademacher"],
                     algorithms=["lsamp"], save_reconstructions=True)


@pytest.fixture(scope="module")
def sweep(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep")
    start = time.perf_counter()
    rows = run_sweep(_sweep_spec(), out)
    return out, rows, time.perf_counter() - start


def _inversions(curve):
    drops = np.diff([m for _, m in curve])
    return [d for d in drops if d > 0]


@pytest.mark.slow
def test_sweep_trend(sweep, report):
    _, rows, elapsed = sweep
    gauss = median_curve(rows, "lsamp", "gaussian")
    rad = median_curve(rows, "lsamp", "rademacher")
    inv = _inversions(gauss)
    monotone = len(inv) <= 1 and all(d <= 0.5 for d in inv)
    gap = max(abs(a - b) for (_, a), (_, b) in zip(gauss, rad))
    ok = monotone and gap <= 1.0 and elapsed < 900
    fmt = lambda c: " ".join(f"{m:.2f}" for _, m in c)
    report(8, ok, f"gaussian [{fmt(gauss)}] rademacher [{fmt(rad)}] dB, "
                  f"max gap {gap:.2f} dB, {elapsed:.0f} s")
    assert ok


@pytest.mark.slow
def test_sweep_determinism(sweep, tmp_path, report):
    first, _, _ = sweep
    second = tmp_path / "again"
    run_sweep(_sweep_spec(), second)
    files = sorted(p.relative_to(first) for p in first.rglob("*")
                   if p.is_file() and p.name != "timings.csv")
    differ = [str(f) for f in files if (first / f).read_bytes() != (second / f).read_bytes()]
    ok = not differ and len(files) > 80
    report(9, ok, f"{len(files)} files compared, {len(differ)} differ")
    assert ok
