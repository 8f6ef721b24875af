import csv
import json
import subprocess
import sys

import numpy as np
import pytest

import lsamp.cli as cli
from lsamp.errors import SolverDivergedError
from lsamp.harness.tensorio import read_measurements, read_tensors, write_tensor


def _generate(tmp_path):
    out = tmp_path / "signal.lst1"
    args = ["generate", "--n", "32", "--t", "8", "--r", "2", "--k", "6", "--seed", "1",
            "--out", str(out)]
    assert cli.main(args) == 0
    return out


def test_generate_records(tmp_path):
    F, X, support, H, L = read_tensors(_generate(tmp_path))
    assert F.shape == X.shape == (32, 8) and support.sum() == 6
    np.testing.assert_allclose(X, (support[:, None] * H) @ L)


def test_full_pipeline(tmp_path):
    signal = _generate(tmp_path)
    meas = tmp_path / "meas.lst1"
    assert cli.main(["acquire", "--in", str(signal), "--ratio", "0.5", "--snr-db", "30",
                     "--ensemble", "rademacher", "--seed", "2", "--out", str(meas)]) == 0
    assert read_measurements(meas).m_per_frame.tolist() == [16] * 8
    # 16 measurements per frame are too few to learn a noise level per frame reliably
    config = tmp_path / "turbo.json"
    config.write_text(json.dumps({"shared_noise_var": True}))
    recon, metrics = tmp_path / "recon.lst1", tmp_path / "metrics.csv"
    assert cli.main(["reconstruct", "--meas", str(meas), "--rank", "2", "--config", str(config),
                     "--truth", str(signal), "--out", str(recon), "--metrics", str(metrics)]) == 0
    X_hat, F_hat = read_tensors(recon)
    assert X_hat.shape == F_hat.shape == (32, 8)
    (row,) = csv.DictReader(metrics.open())
    assert float(row["cnmse_db"]) < -15 and row["rank"] == "2"


def test_acquire_from_cube(tmp_path):
    cube = tmp_path / "cube.lst1"
    write_tensor(cube, np.random.default_rng(0).normal(size=(2, 3, 16)))
    meas = tmp_path / "meas.lst1"
    assert cli.main(["acquire", "--in", str(cube), "--ratio", "0.25", "--out", str(meas)]) == 0
    m = read_measurements(meas)
    assert m.T == 6 and m.N == 16


def test_baseline_algorithm(tmp_path):
    signal = _generate(tmp_path)
    meas = tmp_path / "meas.lst1"
    cli.main(["acquire", "--in", str(signal), "--ratio", "0.5", "--out", str(meas)])
    out = tmp_path / "recon.lst1"
    assert cli.main(["reconstruct", "--meas", str(meas), "--algo", "independent",
                     "--out", str(out)]) == 0


def test_sweep(tmp_path):
    config = tmp_path / "sweep.json"
    config.write_text(json.dumps({
        "ratios": [0.5], "seeds": 1, "N": 12, "T": 4, "R": 1, "K": 3,
        "algorithms": ["lsamp"], "turbo": {"rank_mode": "fixed", "rank": 1,
                                           "max_outer_iters": 2}}))
    assert cli.main(["sweep", "--config", str(config), "--out", str(tmp_path / "res")]) == 0
    assert (tmp_path / "res" / "results.csv").exists()


class TestExitCodes:
    def test_bad_rank(self, tmp_path, capsys):
        signal = _generate(tmp_path)
        meas = tmp_path / "meas.lst1"
        cli.main(["acquire", "--in", str(signal), "--ratio", "0.5", "--out", str(meas)])
        code = cli.main(["reconstruct", "--meas", str(meas), "--rank", "two",
                         "--out", str(tmp_path / "r.lst1")])
        assert code == 2 and "rank" in capsys.readouterr().err

    def test_unknown_config_key(self, tmp_path):
        config = tmp_path / "sweep.json"
        config.write_text('{"ratio": [0.5]}')
        assert cli.main(["sweep", "--config", str(config), "--out", str(tmp_path)]) == 2

    def test_invalid_generator_dimensions(self, tmp_path):
        assert cli.main(["generate", "--n", "8", "--t", "4", "--r", "5", "--k", "4",
                         "--out", str(tmp_path / "x.lst1")]) == 2

    def test_missing_file(self, tmp_path):
        assert cli.main(["reconstruct", "--meas", str(tmp_path / "nope.lst1"),
                         "--out", str(tmp_path / "r.lst1")]) == 4

    def test_corrupt_file(self, tmp_path, capsys):
        bad = tmp_path / "bad.lst1"
        bad.write_bytes(b"garbage!" * 4)
        assert cli.main(["reconstruct", "--meas", str(bad), "--out", str(tmp_path / "r")]) == 4
        assert "offset 0" in capsys.readouterr().err

    def test_divergence(self, tmp_path, monkeypatch):
        signal = _generate(tmp_path)
        meas = tmp_path / "meas.lst1"
        cli.main(["acquire", "--in", str(signal), "--ratio", "0.5", "--out", str(meas)])

        def boom(*args, **kw):
            raise SolverDivergedError("non-finite", iteration=3, phase="gamp")

        monkeypatch.setitem(cli.SOLVERS, "lsamp", boom)
        assert cli.main(["reconstruct", "--meas", str(meas), "--out", str(tmp_path / "r")]) == 3

    def test_usage_error(self):
        with pytest.raises(SystemExit) as info:
            cli.main(["reconstruct"])
        assert info.value.code == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "lsamp.cli", "--help"], capture_output=True,
                          text=True, check=False)
    assert proc.returncode == 0 and "reconstruct" in proc.stdout
