import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lsamp.errors import DegenerateSignalError, IngestionError, InvalidArgumentError
from lsamp.priors import Hyperparams
from lsamp.sensing import (MeasurementSet, acquire_frame, cube_to_signal, dct_basis,
                           gen_ls_signal, gen_measurement_matrix, measure_signal,
                           signal_to_cube, snr_to_noise_var, tile_cube)


class TestBasis:
    def test_single_atom(self):
        np.testing.assert_allclose(dct_basis(1), [[1.0]], rtol=0, atol=1e-15)

    def test_constant_signal_hits_dc(self):
        coeffs = dct_basis(4).T @ np.ones(4)
        np.testing.assert_allclose(coeffs, [2, 0, 0, 0], atol=1e-14)

    def test_norm_preserved(self):
        x = np.random.default_rng(0).normal(size=8)
        assert np.linalg.norm(dct_basis(8) @ x) == pytest.approx(np.linalg.norm(x), abs=1e-12)

    @given(st.integers(1, 40))
    @settings(max_examples=20, deadline=None)
    def test_orthonormal(self, n):
        Psi = dct_basis(n)
        np.testing.assert_allclose(Psi.T @ Psi, np.eye(n), atol=1e-12)

    def test_rejects_zero(self):
        with pytest.raises(InvalidArgumentError):
            dct_basis(0)


class TestMatrices:
    def test_rademacher_entries(self):
        A = gen_measurement_matrix("rademacher", 4, 4, seed=5)
        assert set(np.unique(A)) <= {-0.5, 0.5}

    def test_gaussian_column_norms(self):
        A = gen_measurement_matrix("gaussian", 1000, 8, seed=5)
        norms = np.sum(A ** 2, axis=0)
        assert np.all((norms > 0.8) & (norms < 1.2))

    @pytest.mark.parametrize("kind", ["gaussian", "rademacher", "common"])
    def test_deterministic(self, kind):
        a = gen_measurement_matrix(kind, 6, 9, seed=(3, 1))
        b = gen_measurement_matrix(kind, 6, 9, seed=(3, 1))
        assert a.tobytes() == b.tobytes()

    def test_unknown_kind(self):
        with pytest.raises(InvalidArgumentError):
            gen_measurement_matrix("bernoulli", 2, 2, 0)


class TestAcquisition:
    def test_noiseless(self):
        rng = np.random.default_rng(1)
        A, x = rng.normal(size=(5, 7)), rng.normal(size=7)
        np.testing.assert_array_equal(acquire_frame(A, x, 0.0, seed=2), A @ x)
        np.testing.assert_array_equal(acquire_frame(A, np.zeros(7), 0.0, seed=2), np.zeros(5))

    def test_noise_variance(self):
        A = np.zeros((100_000, 1))
        y = acquire_frame(A, np.zeros(1), 0.04, seed=9)
        assert abs(np.var(y) - 0.04) <= 0.02 * 0.04

    def test_shape_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            acquire_frame(np.ones((3, 4)), np.ones(3), 0.0, seed=0)

    @pytest.mark.parametrize("z, snr, tau", [
        (np.ones(5), 0.0, 1.0),
        (np.ones(4), 10.0, 0.1),
        (np.ones(3), 25.0, 10 ** -2.5),
    ])
    def test_snr_to_noise_var(self, z, snr, tau):
        assert snr_to_noise_var(z, snr) == pytest.approx(tau, rel=1e-12)

    def test_snr_of_zero_signal(self):
        with pytest.raises(DegenerateSignalError):
            snr_to_noise_var(np.zeros(4), 25.0)

    def test_measure_signal_hits_target_snr(self):
        truth = gen_ls_signal(32, 6, 2, 6, seed=4)
        meas = measure_signal(truth.F, 0.5, 20.0, "gaussian", seed=1)
        assert meas.T == 6 and list(meas.m_per_frame) == [16] * 6
        for t in range(meas.T):
            z = meas.matrices[t] @ truth.F[:, t]
            assert meas.noise_var[t] == pytest.approx(np.mean(z ** 2) / 100, rel=1e-12)

    def test_common_ensemble_shares_matrix(self):
        F = np.random.default_rng(0).normal(size=(10, 3))
        meas = measure_signal(F, 0.4, None, "common", seed=2)
        assert all(A is meas.matrices[0] for A in meas.matrices)
        np.testing.assert_allclose(meas.observations[1], meas.matrices[0] @ F[:, 1])

    def test_measurement_set_validation(self):
        with pytest.raises(InvalidArgumentError):
            MeasurementSet([np.ones((2, 3))], [np.ones(3)], np.ones(1))
        with pytest.raises(InvalidArgumentError):
            MeasurementSet([np.ones((2, 3)), np.ones((2, 4))], [np.ones(2)] * 2, np.ones(2))


class TestSignal:
    def test_structure(self):
        ens = gen_ls_signal(16, 8, 2, 4, seed=11)
        assert np.count_nonzero(np.any(ens.X != 0, axis=1)) == 4
        s = np.linalg.svd(ens.X, compute_uv=False)
        assert np.sum(s > 1e-10 * s[0]) == 2
        np.testing.assert_allclose(ens.X, (ens.support[:, None] * ens.H) @ ens.L)
        np.testing.assert_allclose(ens.F, dct_basis(16) @ ens.X)

    def test_deterministic(self):
        a, b = gen_ls_signal(16, 8, 2, 4, seed=3), gen_ls_signal(16, 8, 2, 4, seed=3)
        assert a.X.tobytes() == b.X.tobytes()

    @pytest.mark.parametrize("args", [(16, 8, 1, 0), (16, 8, 5, 4), (16, 3, 4, 8), (4, 8, 2, 5)])
    def test_invalid_dimensions(self, args):
        with pytest.raises(InvalidArgumentError):
            gen_ls_signal(*args)

    def test_hyperparams_shift_amplitudes(self):
        ens = gen_ls_signal(64, 4, 1, 64, Hyperparams(g0_mean=5.0, g0_var=1e-6), seed=0)
        np.testing.assert_allclose(ens.H, 5.0, atol=0.01)


class TestCube:
    def test_shape(self):
        X, F, layout = cube_to_signal(np.random.default_rng(0).normal(size=(8, 8, 16)))
        assert X.shape == (16, 64) and F.shape == (16, 64) and layout.T == 64

    def test_roundtrip(self):
        cube = np.random.default_rng(1).normal(size=(3, 5, 8))
        X, F, layout = cube_to_signal(cube)
        np.testing.assert_allclose(dct_basis(8) @ X, F, rtol=1e-10, atol=1e-12)
        np.testing.assert_array_equal(signal_to_cube(F, layout), cube)

    def test_constant_cube(self):
        X, _, _ = cube_to_signal(np.full((2, 3, 8), 1.5))
        assert np.all(np.abs(X[1:]) < 1e-12) and np.all(X[0] > 0)

    @pytest.mark.parametrize("cube", [np.ones((2, 2)), np.full((2, 2, 2), np.nan),
                                      np.ones((0, 2, 2))])
    def test_rejects(self, cube):
        with pytest.raises(IngestionError):
            cube_to_signal(cube)

    def test_tiles_cover_cube(self):
        cube = np.arange(5 * 7 * 2, dtype=float).reshape(5, 7, 2)
        total = sum(sub.size for _, _, sub in tile_cube(cube, 3))
        assert total == cube.size
