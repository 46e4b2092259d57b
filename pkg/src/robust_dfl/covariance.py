"""Calibration statistics: sample covariance, eigen-networks, Ledoit-Wolf
shrinkage and the exponential spatial prior over voxels."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .geometry import VoxelGrid
from .ingest import frames_matrix

DEFAULT_SIGMA_X2 = 0.001
DEFAULT_DELTA = 1.0


class CovarianceError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SampleCovariance:
    matrix: np.ndarray
    mean: np.ndarray
    sample_count: int

    @property
    def n_links(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    """Eigenpairs sorted by descending eigenvalue; column ``U[:, i]`` is the
    ``i``-th eigen-network."""

    U: np.ndarray
    eigenvalues: np.ndarray

    def intrinsic_basis(self, k: int) -> np.ndarray:
        if not 0 <= k <= self.U.shape[1]:
            raise CovarianceError(f"k={k} outside [0, {self.U.shape[1]}]")
        return self.U[:, :k]

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.eigenvalues) @ self.U.T


@dataclass(frozen=True, eq=False)
class ShrinkageCovariance:
    matrix: np.ndarray
    nu: float
    mu: float
    sample: SampleCovariance


@dataclass(frozen=True, eq=False)
class SpatialCovariance:
    matrix: np.ndarray
    sigma_x2: float
    delta: float


def sample_covariance(calibration) -> SampleCovariance:
    """Unbiased (``1/(M-1)``) covariance of the calibration frames."""
    Y = frames_matrix(calibration)
    M = Y.shape[0]
    if M < 2:
        raise CovarianceError(f"need at least 2 calibration frames, got {M}")
    mu = Y.mean(axis=0)
    X = Y - mu
    C = X.T @ X / (M - 1)
    C = 0.5 * (C + C.T)
    return SampleCovariance(C, mu, M)


def _check_symmetric(C: np.ndarray) -> None:
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise CovarianceError("covariance must be square")
    scale = max(float(np.abs(C).max(initial=0.0)), 1.0)
    if not np.allclose(C, C.T, rtol=0.0, atol=1e-12 * scale):
        raise CovarianceError("covariance is not symmetric")


def eigen_networks(C: SampleCovariance | np.ndarray) -> EigenDecomposition:
    """Eigendecomposition ``C = U diag(lam) U^T`` with ``lam`` descending.

    Each eigenvector is sign-normalized so its largest-magnitude entry is
    positive. Round-off negatives in the spectrum are clipped to zero.
    """
    A = C.matrix if isinstance(C, SampleCovariance) else np.asarray(C, float)
    _check_symmetric(A)
    lam, U = np.linalg.eigh(0.5 * (A + A.T))
    lam = lam[::-1]
    U = U[:, ::-1]
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    U = U * signs
    lam = np.clip(lam, 0.0, None)
    return EigenDecomposition(np.ascontiguousarray(U), lam)


def ledoit_wolf_shrinkage(calibration, sample: SampleCovariance | None = None) -> float:
    """Optimal shrinkage intensity toward ``mu * I``, clamped to ``[0, 1]``."""
    Y = frames_matrix(calibration)
    S = sample if sample is not None else sample_covariance(Y)
    M, L = Y.shape
    X = Y - S.mean
    mu = np.trace(S.matrix) / L
    d2 = float(np.sum((S.matrix - mu * np.eye(L)) ** 2))
    if d2 == 0.0:
        return 1.0
    # sum_t ||x x^T - S||_F^2 expanded so no L x L outer product is formed
    sq = np.einsum("ij,ij->i", X, X)
    quad = np.einsum("ij,jk,ik->i", X, S.matrix, X)
    b2_bar = float(np.sum(sq**2 - 2.0 * quad + np.sum(S.matrix**2))) / M**2
    b2 = min(b2_bar, d2)
    return float(np.clip(b2 / d2, 0.0, 1.0))


def ledoit_wolf(calibration, nu: float | None = None) -> ShrinkageCovariance:
    """Shrinkage estimate ``nu * mu * I + (1 - nu) * S`` of the noise covariance.

    ``S`` is the sample covariance of the calibration frames and
    ``mu = trace(S) / L``. ``nu`` is estimated from the data unless given.
    """
    S = sample_covariance(calibration)
    L = S.n_links
    mu = float(np.trace(S.matrix)) / L
    if nu is None:
        nu = ledoit_wolf_shrinkage(calibration, S)
    elif not 0.0 <= nu <= 1.0:
        raise CovarianceError("nu must lie in [0, 1]")
    C = (1.0 - nu) * S.matrix
    C[np.diag_indices(L)] += nu * mu
    return ShrinkageCovariance(C, float(nu), mu, S)


def exp_spatial_cov(
    grid: VoxelGrid | np.ndarray,
    sigma_x2: float = DEFAULT_SIGMA_X2,
    delta: float = DEFAULT_DELTA,
) -> SpatialCovariance:
    """Exponential kernel ``(sigma_x2 / delta) * exp(-||z_i - z_j|| / delta)``
    over voxel centers (or any ``(P, 2)`` point array)."""
    if not sigma_x2 > 0 or not delta > 0:
        raise CovarianceError("sigma_x2 and delta must be positive")
    pts = grid.local_centers if isinstance(grid, VoxelGrid) else np.asarray(grid, float)
    D = cdist(pts, pts)
    return SpatialCovariance((sigma_x2 / delta) * np.exp(-D / delta), sigma_x2, delta)
