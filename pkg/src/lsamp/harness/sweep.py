"""CNMSE-versus-compression-ratio sweeps with paired seeds."""
from __future__ import annotations

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..sensing import ENSEMBLES, dct_basis, gen_ls_signal, measure_signal
from ..turbo import run_ls_amp
from .baselines import baseline_independent, baseline_jointsparse
from .metrics import cnmse_detail, support_scores, to_db
from .svg import line_chart
from .tensorio import write_tensor

COLUMNS = ("ratio", "seed", "ensemble", "algorithm", "m", "cnmse_db", "f1", "rank", "zero_cols")
SOLVERS = {"lsamp": run_ls_amp, "independent": baseline_independent,
           "jointsparse": baseline_jointsparse}

# stream tags for the sweep's seed derivation
_SIGNAL = 0
_MEASURE = 1


def signal_seed(master_seed, seed):
    return (master_seed, _SIGNAL, seed)


def measurement_seed(master_seed, seed, ratio_index, ensemble):
    return (master_seed, _MEASURE, seed, ratio_index, ENSEMBLES.index(ensemble))


def _jobs(spec):
    return [(ens, i, ratio, s) for ens in spec.ensembles
            for i, ratio in enumerate(spec.ratios) for s in range(spec.seeds)]


def _run_job(spec, basis, job, recon_dir):
    ens, ratio_index, ratio, seed = job
    truth = gen_ls_signal(spec.N, spec.T, spec.R, spec.K, seed=signal_seed(spec.master_seed, seed),
                          basis=basis)
    meas = measure_signal(truth.F, ratio, spec.snr_db, ens,
                          seed=measurement_seed(spec.master_seed, seed, ratio_index, ens))
    config = replace(spec.turbo, master_seed=spec.master_seed)
    rows, timings = [], []
    for algo in spec.algorithms:
        start = time.perf_counter()
        recon = SOLVERS[algo](meas, basis, config)
        elapsed = time.perf_counter() - start
        value, zeros = cnmse_detail(truth.X, recon.X_hat)
        f1 = support_scores(truth.support, recon.support_row)[2]
        rows.append({"ratio": repr(ratio), "seed": seed, "ensemble": ens, "algorithm": algo,
                     "m": int(meas.m_per_frame[0]), "cnmse_db": repr(to_db(value)),
                     "f1": repr(f1), "rank": "" if recon.rank is None else recon.rank,
                     "zero_cols": zeros})
        timings.append((ratio, seed, ens, algo, elapsed))
        if recon_dir is not None:
            write_tensor(recon_dir / f"{ens}_r{ratio:g}_s{seed}_{algo}.lst1", recon.X_hat)
    return rows, timings


def run_sweep(spec, out):
    """Run every (ensemble, ratio, seed, algorithm) point and write the results.

    Writes ``results.csv`` (deterministic for a fixed spec), ``timings.csv``
    (wall-clock, not reproducible) and one ``cnmse_<ensemble>.svg`` chart
    per ensemble into ``out``.

    Returns
    -------
    list of dict
        The CSV rows in job order.
    """
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        recon_dir = None
        if spec.save_reconstructions:
            recon_dir = out / "recon"
            recon_dir.mkdir(exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror}") from exc
    basis = dct_basis(spec.N)
    jobs = _jobs(spec)
    if spec.workers > 1:
        with ThreadPoolExecutor(spec.workers) as pool:
            results = list(pool.map(lambda j: _run_job(spec, basis, j, recon_dir), jobs))
    else:
        results = [_run_job(spec, basis, j, recon_dir) for j in jobs]

    rows = [r for job_rows, _ in results for r in job_rows]
    _write_csv(out / "results.csv", COLUMNS, rows)
    timing_rows = [dict(zip(("ratio", "seed", "ensemble", "algorithm", "runtime_s"), t))
                   for _, ts in results for t in ts]
    _write_csv(out / "timings.csv", ("ratio", "seed", "ensemble", "algorithm", "runtime_s"),
               timing_rows)
    for ens in spec.ensembles:
        series = {algo: [(ratio, med) for ratio, med in median_curve(rows, algo, ens)]
                  for algo in spec.algorithms}
        svg = line_chart(series, "M/N", "median CNMSE [dB]", title=f"{ens} ensemble")
        try:
            (out / f"cnmse_{ens}.svg").write_text(svg, encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot write {out / f'cnmse_{ens}.svg'}: {exc.strerror}") from exc
    return rows


def _write_csv(path, columns, rows):
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def read_results(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def median_curve(rows, algorithm, ensemble):
    """``[(ratio, median cnmse_db), ...]`` sorted by ratio."""
    groups = {}
    for r in rows:
        if r["algorithm"] == algorithm and r["ensemble"] == ensemble:
            groups.setdefault(float(r["ratio"]), []).append(float(r["cnmse_db"]))
    return [(ratio, float(np.median(v))) for ratio, v in sorted(groups.items())]
