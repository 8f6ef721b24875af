"""Command-line entry point: ``lsamp generate|acquire|reconstruct|sweep``.

Exit codes: 0 success, 2 invalid arguments or configuration, 3 solver
divergence, 4 I/O or file-format error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import time


from .errors import (DegenerateSignalError, FormatError, IngestionError, InvalidArgumentError,
                     SolverDivergedError)
from .harness.config import SweepSpec, from_dict, load_json
from .harness.metrics import evaluate
from .harness.sweep import SOLVERS, run_sweep
from .harness.tensorio import read_measurements, read_tensors, write_measurements, write_tensors
from .priors import Hyperparams
from .sensing import cube_to_signal, dct_basis, gen_ls_signal, measure_signal
from .turbo import TurboConfig

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("lsamp")


def _cmd_generate(args):
    hyper = Hyperparams(lam=args.k / args.n, g0_mean=args.g0_mean, g0_var=args.g0_var)
    ens = gen_ls_signal(args.n, args.t, args.r, args.k, hyper, seed=args.seed)
    write_tensors(args.out, [ens.F, ens.X, ens.support.astype(float), ens.H, ens.L])
    log.info("wrote %s (N=%d, T=%d, R=%d, K=%d)", args.out, args.n, args.t, args.r, args.k)


def _dense_data(path):
    """Dense data ``F`` from a generated file (first record) or a 3-D cube."""
    first = read_tensors(path)[0]
    if first.ndim == 3:
        return cube_to_signal(first)[1]
    if first.ndim != 2:
        raise IngestionError(f"{path}: expected an N x T matrix or a rows x cols x bands cube")
    return first


def _cmd_acquire(args):
    F = _dense_data(args.inp)
    meas = measure_signal(F, args.ratio, args.snr_db, args.ensemble, seed=args.seed)
    write_measurements(args.out, meas)
    log.info("wrote %s (T=%d frames, M=%d)", args.out, meas.T, meas.m_per_frame[0])


def _cmd_reconstruct(args):
    meas = read_measurements(args.meas)
    if args.basis != "dct":
        raise InvalidArgumentError(f"unsupported basis {args.basis!r}")
    basis = dct_basis(meas.N)
    config = load_json(args.config, TurboConfig) if args.config else TurboConfig()
    if args.rank != "auto":
        try:
            rank = int(args.rank)
        except ValueError:
            raise InvalidArgumentError("--rank must be 'auto' or a positive integer") from None
        config = from_dict(TurboConfig, {**_shallow(config), "rank_mode": "fixed", "rank": rank})
    config.master_seed = args.seed
    start = time.perf_counter()
    recon = SOLVERS[args.algo](meas, basis, config)
    elapsed = time.perf_counter() - start
    write_tensors(args.out, [recon.X_hat, recon.F_hat])
    if args.metrics:
        row = {"algorithm": args.algo, "rank": "" if recon.rank is None else recon.rank,
               "outer_iters": recon.outer_iters, "runtime_s": f"{elapsed:.3f}"}
        if args.truth:
            records = read_tensors(args.truth)
            X = records[1] if len(records) > 1 else basis.T @ _dense_data(args.truth)
            support = records[2].astype(bool) if len(records) > 2 else None
            m = evaluate(X, recon, support)
            row.update(cnmse=repr(m.cnmse), cnmse_db=repr(m.cnmse_db),
                       f1="" if m.support_f1 is None else repr(m.support_f1),
                       zero_cols=m.zero_columns)
        with open(args.metrics, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(row), lineterminator="\n")
            writer.writeheader()
            writer.writerow(row)
    log.info("wrote %s after %d outer iterations", args.out, recon.outer_iters)


def _shallow(config):
    return {f: getattr(config, f) for f in config.__dataclass_fields__}


def _cmd_sweep(args):
    spec = load_json(args.config, SweepSpec)
    rows = run_sweep(spec, args.out)
    log.info("wrote %d rows to %s", len(rows), args.out)


def build_parser():
    p = argparse.ArgumentParser(prog="lsamp", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="draw a synthetic low-rank joint-sparse signal")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--t", type=int, required=True)
    g.add_argument("--r", type=int, required=True)
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--g0-mean", type=float, default=0.0)
    g.add_argument("--g0-var", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_generate)

    a = sub.add_parser("acquire", help="simulate per-frame compressed measurements")
    a.add_argument("--in", dest="inp", required=True)
    a.add_argument("--ratio", type=float, required=True)
    a.add_argument("--snr-db", type=float, default=25.0)
    a.add_argument("--ensemble", default="gaussian",
                   choices=["gaussian", "rademacher", "common", "common-gaussian"])
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out", required=True)
    a.set_defaults(func=_cmd_acquire)

    r = sub.add_parser("reconstruct", help="recover the signal from a measurement file")
    r.add_argument("--meas", required=True)
    r.add_argument("--basis", default="dct")
    r.add_argument("--algo", default="lsamp", choices=sorted(SOLVERS))
    r.add_argument("--rank", default="auto")
    r.add_argument("--config", help="TurboConfig JSON")
    r.add_argument("--truth", help="generated signal file for metrics")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", required=True)
    r.add_argument("--metrics")
    r.set_defaults(func=_cmd_reconstruct)

    s = sub.add_parser("sweep", help="run a CNMSE-versus-M/N sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_sweep)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        args.func(args)
    except SolverDivergedError as exc:
        print(f"error: solver diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (FormatError, IngestionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InvalidArgumentError, DegenerateSignalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
