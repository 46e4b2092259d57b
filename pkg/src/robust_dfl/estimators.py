"""Linear reconstruction operators (VRTI, SubVRT, LSVRT), image estimation and
argmax localization.

Every estimator is a precomputed ``(P, L)`` matrix ``Pi`` so that the motion
image of a variance frame ``y`` is ``Pi @ y``. Operators are built with
Cholesky solves; no explicit inverse is formed except ``C_x^{-1}``, which the
LSVRT normal matrix needs as a summand.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from os import PathLike
from typing import Literal

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .covariance import (
    EigenDecomposition,
    ShrinkageCovariance,
    SpatialCovariance,
    eigen_networks,
    ledoit_wolf,
)
from .forward_model import WeightMatrix
from .geometry import VoxelGrid
from .ingest import VarianceFrame, frames_matrix

DEFAULT_ALPHA = 100.0
CACHE_FORMAT_VERSION = 1


class EstimatorError(ValueError):
    pass


class StaleOperatorError(EstimatorError):
    pass


@dataclass(frozen=True)
class VrtiConfig:
    alpha: float = DEFAULT_ALPHA
    q_kind: Literal["identity", "first_difference"] = "identity"

    def __post_init__(self):
        if not self.alpha > 0:
            raise EstimatorError("alpha must be positive")
        if self.q_kind not in ("identity", "first_difference"):
            raise EstimatorError(f"unknown Tikhonov matrix {self.q_kind!r}")


@dataclass(frozen=True)
class SubVrtConfig:
    k: int = 4

    def __post_init__(self):
        if self.k < 0:
            raise EstimatorError("k must be non-negative")


@dataclass(frozen=True, eq=False)
class ProjectionOperator:
    matrix: np.ndarray
    kind: Literal["vrti", "subvrt", "lsvrt"]
    provenance: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape


@dataclass(frozen=True, eq=False)
class MotionImage:
    x_hat: np.ndarray
    t: int | None = None


def _dense(W) -> np.ndarray:
    if isinstance(W, WeightMatrix):
        W = W.values
    return W.toarray() if sp.issparse(W) else np.asarray(W, float)


def difference_operator(nx: int, ny: int) -> sp.csr_matrix:
    """First differences along x stacked over first differences along y."""

    def d1(n):
        return sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n))

    Dx = sp.kron(sp.identity(ny), d1(nx))
    Dy = sp.kron(d1(ny), sp.identity(nx))
    return sp.vstack([Dx, Dy]).tocsr()


def tikhonov_gram(P: int, cfg: VrtiConfig, grid: VoxelGrid | None = None) -> np.ndarray:
    """``Q^T Q`` for the configured Tikhonov matrix."""
    if cfg.q_kind == "identity":
        return np.eye(P)
    if grid is None or grid.n_voxels != P:
        raise EstimatorError("first_difference regularization needs the voxel grid")
    Q = difference_operator(grid.nx, grid.ny)
    return (Q.T @ Q).toarray()


def _regularized_factor(Wd: np.ndarray, cfg: VrtiConfig, grid: VoxelGrid | None):
    A = Wd.T @ Wd + cfg.alpha * tikhonov_gram(Wd.shape[1], cfg, grid)
    msg = "W^T W + alpha Q^T Q is singular; use q_kind='identity' or a larger alpha"
    try:
        fac = la.cho_factor(A, lower=False, check_finite=False)
    except la.LinAlgError:
        raise EstimatorError(msg) from None
    # a numerically singular PSD matrix can still factor; catch tiny pivots
    piv = np.abs(np.diag(fac[0]))
    if piv.min() ** 2 <= A.shape[0] * np.finfo(float).eps * np.abs(np.diag(A)).max():
        raise EstimatorError(msg)
    return fac


def build_vrti(
    W: WeightMatrix, cfg: VrtiConfig = VrtiConfig(), grid: VoxelGrid | None = None
) -> ProjectionOperator:
    """Tikhonov operator ``(W^T W + alpha Q^T Q)^{-1} W^T``."""
    Wd = _dense(W)
    fac = _regularized_factor(Wd, cfg, grid)
    Pi = la.cho_solve(fac, Wd.T, check_finite=False)
    return ProjectionOperator(Pi, "vrti", {"alpha": cfg.alpha, "q_kind": cfg.q_kind})


def extrinsic_projector(eig: EigenDecomposition, k: int) -> np.ndarray:
    """``I - U_k U_k^T``: projection onto the complement of the top-k eigen-networks."""
    Uk = eig.intrinsic_basis(k)
    P = -Uk @ Uk.T
    P[np.diag_indices_from(P)] += 1.0
    return P


def build_subvrt(
    W: WeightMatrix,
    cfg_v: VrtiConfig,
    eig: EigenDecomposition,
    cfg_s: SubVrtConfig,
    grid: VoxelGrid | None = None,
) -> ProjectionOperator:
    """SubVRT operator ``(W^T W + alpha Q^T Q)^{-1} W^T (I - U_k U_k^T)``.

    The right-hand side ``W^T (I - U_k U_k^T)`` is formed before the solve, so
    with ``k = 0`` the result is bit-identical to :func:`build_vrti`.
    """
    Wd = _dense(W)
    L = Wd.shape[0]
    if eig.U.shape[0] != L:
        raise EstimatorError(f"eigen-networks have {eig.U.shape[0]} links, W has {L}")
    if not 0 <= cfg_s.k <= L:
        raise EstimatorError(f"k={cfg_s.k} outside [0, {L}]")
    Uk = eig.U[:, : cfg_s.k]
    rhs = Wd.T - (Wd.T @ Uk) @ Uk.T
    fac = _regularized_factor(Wd, cfg_v, grid)
    Pi = la.cho_solve(fac, rhs, check_finite=False)
    return ProjectionOperator(
        Pi, "subvrt", {"alpha": cfg_v.alpha, "q_kind": cfg_v.q_kind, "k": cfg_s.k}
    )


def project_extrinsic(eig: EigenDecomposition, k: int, y) -> np.ndarray:
    """Remove the component of ``y`` lying in the span of the top-``k`` eigen-networks."""
    y = y.y if isinstance(y, VarianceFrame) else np.asarray(y, float)
    if y.shape[-1] != eig.U.shape[0]:
        raise EstimatorError(f"frame has {y.shape[-1]} links, expected {eig.U.shape[0]}")
    Uk = eig.intrinsic_basis(k)
    return y - (y @ Uk) @ Uk.T


def _cholesky(C: np.ndarray, what: str):
    try:
        return la.cho_factor(C, lower=False, check_finite=False)
    except la.LinAlgError:
        raise EstimatorError(f"{what} is not positive definite") from None


def build_lsvrt(
    W: WeightMatrix,
    C_n: ShrinkageCovariance | np.ndarray,
    C_x: SpatialCovariance | np.ndarray,
) -> ProjectionOperator:
    """LSVRT operator ``(W^T C_n^{-1} W + C_x^{-1})^{-1} W^T C_n^{-1}`` (zero prior mean)."""
    Wd = _dense(W)
    Cn = C_n.matrix if isinstance(C_n, ShrinkageCovariance) else np.asarray(C_n, float)
    Cx = C_x.matrix if isinstance(C_x, SpatialCovariance) else np.asarray(C_x, float)
    L, P = Wd.shape
    if Cn.shape != (L, L) or Cx.shape != (P, P):
        raise EstimatorError("covariance shapes do not match W")
    CninvW = la.cho_solve(_cholesky(Cn, "C_n"), Wd, check_finite=False)
    Cx_inv = la.cho_solve(_cholesky(Cx, "C_x"), np.eye(P), check_finite=False)
    A = Wd.T @ CninvW + 0.5 * (Cx_inv + Cx_inv.T)
    Pi = la.cho_solve(_cholesky(A, "LSVRT normal matrix"), CninvW.T, check_finite=False)
    prov = {}
    if isinstance(C_n, ShrinkageCovariance):
        prov.update(nu=C_n.nu, mu=C_n.mu)
    if isinstance(C_x, SpatialCovariance):
        prov.update(sigma_x2=C_x.sigma_x2, delta=C_x.delta)
    return ProjectionOperator(Pi, "lsvrt", prov)


def estimate_image(op: ProjectionOperator, y) -> MotionImage:
    t = None
    if isinstance(y, VarianceFrame):
        t, y = y.t, y.y
    y = np.asarray(y, float)
    if y.shape != (op.matrix.shape[1],):
        raise EstimatorError(f"frame length {y.shape} does not match operator {op.shape}")
    return MotionImage(op.matrix @ y, t)


def estimate_images(op: ProjectionOperator, frames) -> np.ndarray:
    """Images for a batch of frames as an ``(n_frames, P)`` array."""
    Y = frames_matrix(frames)
    if Y.shape[1] != op.matrix.shape[1]:
        raise EstimatorError(f"frames have {Y.shape[1]} links, operator expects {op.shape[1]}")
    return Y @ op.matrix.T


def localize(img: MotionImage | np.ndarray, grid: VoxelGrid) -> np.ndarray:
    """Center of the voxel with the largest image value (lowest index on ties)."""
    x = img.x_hat if isinstance(img, MotionImage) else np.asarray(img)
    return grid.centers[int(np.argmax(x))].copy()


def localize_all(images: np.ndarray, grid: VoxelGrid) -> np.ndarray:
    return grid.centers[np.argmax(images, axis=1)]


# ---------------------------------------------------------------------------
# SubVRT / LSVRT connection


def subspace_selector(L: int, k: int) -> np.ndarray:
    """Diagonal of ``S``: ``k`` zeros followed by ``L - k`` ones."""
    s = np.ones(L)
    s[:k] = 0.0
    return s


def selector_identity_deviation(eig: EigenDecomposition, k: int) -> float:
    """``max |U S U^T - (I - U_k U_k^T)|``."""
    S = subspace_selector(eig.U.shape[0], k)
    lhs = (eig.U * S) @ eig.U.T
    return float(np.abs(lhs - extrinsic_projector(eig, k)).max())


@dataclass(frozen=True)
class ConnectionReport:
    """Outcome of checking the LSVRT operator against its eigen form.

    ``deviation`` compares the direct operator with the one built from the
    eigen form of ``C_n^{-1}`` using the shrunk spectrum
    ``nu*mu + (1 - nu)*lambda_i``; it is the quantity expected to be at
    round-off level. ``split_form_deviation`` checks that
    ``c1 (1/lambda_i + c2)`` equals ``1/(nu*mu) + 1/((1 - nu) lambda_i)`` on the
    ``n_valid`` eigen-directions with ``lambda_i > 1e-12 * lambda_1``.
    ``split_form_gap`` is the largest relative difference between those
    split-form weights and the exact inverse weights ``1/(nu*mu + (1-nu) lambda_i)``;
    it is not small in general because inverting a sum is not the sum of the
    inverses.
    """

    deviation: float
    split_form_deviation: float
    split_form_gap: float
    subvrt_deviation: float
    nu: float
    mu: float
    c1: float
    c2: float
    n_valid: int
    skipped: bool = False


def _rel_dev(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.abs(a - b).max() / np.abs(b).max())


def verify_estimator_connection(
    W: WeightMatrix,
    cfg_v: VrtiConfig,
    calibration,
    C_x: SpatialCovariance,
    k: int = 1,
    grid: VoxelGrid | None = None,
    nu: float | None = None,
) -> ConnectionReport:
    """Build the LSVRT and SubVRT operators two ways each and report the gaps.

    Deviations are ``max |A - B| / max |B|``. When the shrinkage ``nu`` is 0 or 1
    the constants ``c1 = 1/(1 - nu)`` and ``c2 = (1 - nu)/(nu mu)`` are undefined;
    the report then has ``skipped=True`` and NaN deviations.
    """
    C_n = ledoit_wolf(calibration, nu=nu)
    nu, mu = C_n.nu, C_n.mu
    if not 0.0 < nu < 1.0:
        nan = float("nan")
        return ConnectionReport(nan, nan, nan, nan, nu, mu, nan, nan, 0, skipped=True)
    c1 = 1.0 / (1.0 - nu)
    c2 = (1.0 - nu) / (nu * mu)

    Wd = _dense(W)
    direct = build_lsvrt(Wd, C_n, C_x).matrix

    eig = eigen_networks(C_n.sample)
    U, lam = eig.U, eig.eigenvalues
    shrunk = nu * mu + (1.0 - nu) * lam
    Cn_inv = (U / shrunk) @ U.T
    Cx = C_x.matrix if isinstance(C_x, SpatialCovariance) else np.asarray(C_x)
    A = Wd.T @ Cn_inv @ Wd + np.linalg.inv(Cx)
    via_eigen = np.linalg.solve(A, Wd.T @ Cn_inv)
    deviation = _rel_dev(via_eigen, direct)

    valid = lam > 1e-12 * lam[0]
    lv = lam[valid]
    split = c1 * (1.0 / lv + c2)
    expanded = 1.0 / (nu * mu) + 1.0 / ((1.0 - nu) * lv)
    split_dev = float(np.max(np.abs(split - expanded) / np.abs(expanded)))
    gap = float(np.max(np.abs(split - 1.0 / shrunk[valid]) * shrunk[valid]))

    sub_direct = build_subvrt(Wd, cfg_v, eig, SubVrtConfig(k), grid).matrix
    Pi1 = build_vrti(Wd, cfg_v, grid).matrix
    sub_selector = Pi1 @ ((U * subspace_selector(U.shape[0], k)) @ U.T)
    sub_dev = _rel_dev(sub_selector, sub_direct) if np.abs(sub_direct).max() > 0 else 0.0

    return ConnectionReport(
        deviation, split_dev, gap, sub_dev, nu, mu, c1, c2, int(valid.sum())
    )


# ---------------------------------------------------------------------------
# provenance and on-disk cache


def fingerprint(*parts) -> str:
    """SHA-256 over arrays (dtype, shape, bytes) and JSON-serializable values."""
    h = hashlib.sha256()
    for p in parts:
        if isinstance(p, np.ndarray):
            a = np.ascontiguousarray(p)
            h.update(str(a.dtype).encode())
            h.update(str(a.shape).encode())
            h.update(a.tobytes())
        elif sp.issparse(p):
            c = p.tocsr()
            for a in (c.indptr, c.indices, c.data):
                h.update(np.ascontiguousarray(a).tobytes())
            h.update(str(c.shape).encode())
        else:
            h.update(json.dumps(p, sort_keys=True, default=str).encode())
        h.update(b"|")
    return h.hexdigest()


def save_operator(op: ProjectionOperator, path: str | PathLike, fp: str) -> None:
    with open(path, "wb") as fh:
        np.savez(
            fh,
            format_version=np.int64(CACHE_FORMAT_VERSION),
            fingerprint=np.array(fp),
            kind=np.array(op.kind),
            provenance=np.array(json.dumps(op.provenance, sort_keys=True)),
            matrix=op.matrix,
        )


def load_operator(path: str | PathLike, expected_fingerprint: str | None = None) -> ProjectionOperator:
    """Load a cached operator, rejecting unknown format versions and, when
    ``expected_fingerprint`` is given, operators built from different inputs."""
    with np.load(path, allow_pickle=False) as z:
        version = int(z["format_version"])
        if version != CACHE_FORMAT_VERSION:
            raise StaleOperatorError(f"{path}: cache format {version}, expected {CACHE_FORMAT_VERSION}")
        fp = str(z["fingerprint"])
        if expected_fingerprint is not None and fp != expected_fingerprint:
            raise StaleOperatorError(f"{path}: operator fingerprint does not match inputs")
        prov = json.loads(str(z["provenance"]))
        prov["fingerprint"] = fp
        return ProjectionOperator(z["matrix"].copy(), str(z["kind"]), prov)
