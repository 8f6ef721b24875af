"""Sparsifying basis, measurement ensembles, noisy acquisition and ground truth.

Conventions
-----------
* ``basis`` (Psi) is N x N orthonormal and maps sparse coefficients to data:
  ``f_t = Psi @ x_t``.  Analysis is ``x_t = Psi.T @ f_t``.
* Measurement matrices stored in a :class:`MeasurementSet` act on the dense
  data ``f_t``; solvers form the effective operator ``A_t = Phi_t @ Psi``.
* Pixels of a ``rows x cols x bands`` cube are enumerated column-major,
  ``t = row + col * rows``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dct

from .errors import DegenerateSignalError, IngestionError, InvalidArgumentError
from .priors import Hyperparams

ENSEMBLES = ("gaussian", "rademacher", "common")
_ALIASES = {"common-gaussian": "common", "pm1": "rademacher"}

# stream tags keep independent draws from colliding for equal seeds
_STREAM_MATRIX = 1
_STREAM_NOISE = 2
_STREAM_SIGNAL = 3


def derive_rng(*keys):
    """Generator seeded by non-negative integers (tuples are flattened)."""
    flat = []
    for k in keys:
        flat.extend(derive_keys(k))
    return np.random.default_rng(np.random.SeedSequence(flat))


def derive_keys(key):
    if isinstance(key, (tuple, list)):
        return [int(k) for sub in key for k in derive_keys(sub)]
    return [int(key)]


def normalize_kind(kind):
    kind = _ALIASES.get(kind, kind)
    if kind not in ENSEMBLES:
        raise InvalidArgumentError(f"unknown measurement ensemble {kind!r}")
    return kind


@dataclass
class SignalEnsemble:
    X: np.ndarray
    F: np.ndarray
    support: np.ndarray | None = None
    H: np.ndarray | None = None
    L: np.ndarray | None = None

    @property
    def K(self):
        if self.support is not None:
            return int(self.support.sum())
        return int(np.count_nonzero(np.any(self.X != 0, axis=1)))

    @property
    def shape(self):
        return self.X.shape


@dataclass
class MeasurementSet:
    matrices: list
    observations: list
    noise_var: np.ndarray
    ensemble_kind: str = "gaussian"

    def __post_init__(self):
        if len(self.matrices) != len(self.observations):
            raise InvalidArgumentError("one observation vector per matrix required")
        self.noise_var = np.asarray(self.noise_var, dtype=float)
        if self.noise_var.shape != (len(self.matrices),):
            raise InvalidArgumentError("noise_var must have one entry per frame")
        N = None
        for A, y in zip(self.matrices, self.observations):
            if A.ndim != 2 or A.shape[0] < 1 or y.shape != (A.shape[0],):
                raise InvalidArgumentError("frame matrix / observation shape mismatch")
            if N is not None and A.shape[1] != N:
                raise InvalidArgumentError("all frames must share N")
            N = A.shape[1]
            if not (np.all(np.isfinite(A)) and np.all(np.isfinite(y))):
                raise InvalidArgumentError("measurements must be finite")

    @property
    def T(self):
        return len(self.matrices)

    @property
    def N(self):
        return self.matrices[0].shape[1]

    @property
    def m_per_frame(self):
        return np.array([A.shape[0] for A in self.matrices])


@dataclass
class CubeLayout:
    rows: int
    cols: int
    bands: int
    mapping: str = field(default="pixel-column-major")

    @property
    def T(self):
        return self.rows * self.cols

    @property
    def N(self):
        return self.bands


def dct_basis(N):
    """Orthonormal DCT-II synthesis matrix ``Psi`` (columns are the atoms)."""
    if int(N) < 1:
        raise InvalidArgumentError("N must be >= 1")
    analysis = dct(np.eye(int(N)), type=2, norm="ortho", axis=0)
    return np.ascontiguousarray(analysis.T)


def gen_measurement_matrix(kind, M, N, seed):
    """Random M x N sensing matrix with unit expected column norm.

    ``gaussian`` and ``common`` draw i.i.d. N(0, 1/M) entries; ``rademacher``
    draws +-1/sqrt(M) with equal probability.
    """
    kind = normalize_kind(kind)
    M, N = int(M), int(N)
    if M < 1 or N < 1:
        raise InvalidArgumentError("M and N must be >= 1")
    rng = derive_rng(seed, _STREAM_MATRIX)
    if kind == "rademacher":
        signs = rng.integers(0, 2, size=(M, N)) * 2 - 1
        return signs / np.sqrt(M)
    return rng.standard_normal((M, N)) / np.sqrt(M)


def acquire_frame(A, x, noise_var, seed):
    """Noisy linear acquisition ``y = A x + w``, ``w ~ N(0, noise_var I)``."""
    A = np.asarray(A, dtype=float)
    x = np.asarray(x, dtype=float)
    if A.ndim != 2 or x.shape != (A.shape[1],):
        raise InvalidArgumentError(f"shape mismatch: A {A.shape}, x {x.shape}")
    if not noise_var >= 0:
        raise InvalidArgumentError("noise_var must be non-negative")
    z = A @ x
    if noise_var == 0:
        return z
    rng = derive_rng(seed, _STREAM_NOISE)
    return z + np.sqrt(noise_var) * rng.standard_normal(z.shape)


def snr_to_noise_var(z, snr_db):
    z = np.asarray(z, dtype=float)
    power = float(np.mean(z ** 2)) if z.size else 0.0
    if power == 0.0:
        raise DegenerateSignalError("noiseless measurements are all zero; SNR undefined")
    return power * 10.0 ** (-snr_db / 10.0)


def gen_ls_signal(N, T, R, K, hyper=None, seed=0, basis=None):
    """Draw a low-rank, joint-sparse ground truth ``X = diag(s) H L``.

    ``H`` has i.i.d. N(g0_mean, g0_var) entries, ``L`` standard normal
    entries, and ``K`` active rows are chosen uniformly without replacement.
    """
    N, T, R, K = int(N), int(T), int(R), int(K)
    if min(N, T, R, K) < 1:
        raise InvalidArgumentError("N, T, R, K must all be >= 1")
    if K > N:
        raise InvalidArgumentError("K must not exceed N")
    if R > min(K, T):
        raise InvalidArgumentError("rank R must satisfy R <= min(K, T)")
    if hyper is None:
        hyper = Hyperparams()
    rng = derive_rng(seed, _STREAM_SIGNAL)
    support = np.zeros(N, dtype=bool)
    support[rng.choice(N, size=K, replace=False)] = True
    H = hyper.g0_mean + np.sqrt(hyper.g0_var) * rng.standard_normal((N, R))
    L = rng.standard_normal((R, T))
    X = (support[:, None] * H) @ L
    if basis is None:
        basis = dct_basis(N)
    return SignalEnsemble(X=X, F=basis @ X, support=support, H=H, L=L)


def measure_signal(F, ratio, snr_db, kind="gaussian", seed=0):
    """Per-frame compressed acquisition of the dense data columns ``F``.

    ``M = max(1, round(ratio * N))`` rows per frame; the noise variance of
    each frame is set from that frame's noiseless power to meet ``snr_db``
    (``None`` or ``inf`` means noiseless).
    """
    kind = normalize_kind(kind)
    F = np.asarray(F, dtype=float)
    N, T = F.shape
    if not 0 < ratio <= 1:
        raise InvalidArgumentError("ratio must lie in (0, 1]")
    M = max(1, int(round(ratio * N)))
    common = gen_measurement_matrix(kind, M, N, seed) if kind == "common" else None
    mats, obs, taus = [], [], []
    for t in range(T):
        Phi = common if common is not None else gen_measurement_matrix(kind, M, N, (seed, t))
        z = Phi @ F[:, t]
        if snr_db is None or np.isinf(snr_db) or not np.any(z):
            tau = 0.0
        else:
            tau = snr_to_noise_var(z, snr_db)
        obs.append(acquire_frame(Phi, F[:, t], tau, (seed, t)))
        mats.append(Phi)
        taus.append(tau)
    return MeasurementSet(mats, obs, np.array(taus), kind)


def cube_to_signal(cube, basis=None):
    """Flatten a ``rows x cols x bands`` cube into pixel spectra.

    Returns ``(X, F, layout)`` where ``F`` is bands x pixels and ``X = Psi.T F``.
    """
    cube = np.asarray(cube)
    if cube.ndim != 3:
        raise IngestionError(f"expected a 3-D cube, got {cube.ndim} dimensions")
    if not np.issubdtype(cube.dtype, np.number):
        raise IngestionError("cube entries must be numeric")
    cube = cube.astype(float)
    if not np.all(np.isfinite(cube)):
        raise IngestionError("cube contains non-finite voxels")
    rows, cols, bands = cube.shape
    if rows * cols * bands == 0:
        raise IngestionError("cube has an empty dimension")
    F = cube.reshape((rows * cols, bands), order="F").T.copy()
    if basis is None:
        basis = dct_basis(bands)
    if basis.shape != (bands, bands):
        raise IngestionError("basis size does not match the band count")
    return basis.T @ F, F, CubeLayout(rows, cols, bands)


def signal_to_cube(F, layout):
    """Inverse of the pixel flattening in :func:`cube_to_signal`."""
    F = np.asarray(F)
    return F.T.reshape((layout.rows, layout.cols, layout.bands), order="F")


def tile_cube(cube, tile):
    """Yield ``(row0, col0, sub_cube)`` spatial tiles of at most ``tile`` pixels a side."""
    tr, tc = (tile, tile) if np.isscalar(tile) else tile
    if tr < 1 or tc < 1:
        raise InvalidArgumentError("tile size must be >= 1")
    rows, cols = cube.shape[:2]
    for c0 in range(0, cols, tc):
        for r0 in range(0, rows, tr):
            yield r0, c0, cube[r0:r0 + tr, c0:c0 + tc]
