import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_dfl.covariance import (
    CovarianceError,
    eigen_networks,
    exp_spatial_cov,
    ledoit_wolf,
    ledoit_wolf_shrinkage,
    sample_covariance,
)
from robust_dfl.geometry import VoxelGrid


def cov_oracle(Y):
    M, L = len(Y), len(Y[0])
    mu = [sum(Y[t][i] for t in range(M)) / M for i in range(L)]
    C = np.zeros((L, L))
    for i in range(L):
        for j in range(L):
            C[i, j] = sum((Y[t][i] - mu[i]) * (Y[t][j] - mu[j]) for t in range(M)) / (M - 1)
    return C


def shrinkage_oracle(Y):
    """Optimal shrinkage intensity written out term by term."""
    Y = np.asarray(Y, float)
    M, L = Y.shape
    S = cov_oracle(Y)
    mu = np.trace(S) / L
    d2 = np.sum((S - mu * np.eye(L)) ** 2)
    xbar = Y.mean(axis=0)
    b2 = 0.0
    for t in range(M):
        x = Y[t] - xbar
        b2 += np.sum((np.outer(x, x) - S) ** 2)
    b2 = min(b2 / M**2, d2)
    return 1.0 if d2 == 0 else b2 / d2


def test_identical_frames_zero():
    C = sample_covariance(np.tile([1.0, 2.0, 3.0], (6, 1)))
    assert np.all(C.matrix == 0)


def test_two_frames_rank_one(rng):
    C = sample_covariance(rng.normal(size=(2, 5)))
    assert np.linalg.matrix_rank(C.matrix, tol=1e-10) <= 1


def test_hand_value():
    C = sample_covariance([[0.0, 0.0], [2.0, 2.0]])
    np.testing.assert_allclose(C.matrix, [[2.0, 2.0], [2.0, 2.0]])


def test_matches_oracle(rng):
    for _ in range(30):
        L, M = rng.integers(1, 9), rng.integers(2, 21)
        Y = rng.gamma(2.0, 1.0, size=(M, L))
        np.testing.assert_allclose(sample_covariance(Y).matrix, cov_oracle(Y.tolist()), atol=1e-9, rtol=0)


def test_too_few_frames():
    with pytest.raises(CovarianceError):
        sample_covariance(np.zeros((1, 3)))
    with pytest.raises(CovarianceError):
        ledoit_wolf(np.zeros((1, 3)))


def test_rank_and_psd(rng):
    Y = rng.normal(size=(10, 30))
    C = sample_covariance(Y).matrix
    w = np.linalg.eigvalsh(C)
    assert np.linalg.matrix_rank(C, tol=1e-9 * w.max()) <= 9
    assert w.min() >= -1e-9 * w.max()
    assert np.abs(C - C.T).max() <= 1e-12


def test_eigen_identity():
    e = eigen_networks(np.eye(4))
    np.testing.assert_allclose(e.eigenvalues, 1.0)


def test_eigen_diagonal():
    e = eigen_networks(np.diag([1.0, 3.0]))
    np.testing.assert_allclose(e.eigenvalues, [3.0, 1.0])
    np.testing.assert_allclose(e.U[:, 0], [0.0, 1.0])


def test_eigen_rejects_asymmetric():
    with pytest.raises(CovarianceError):
        eigen_networks(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_eigen_properties(rng):
    Y = rng.gamma(1.5, 2.0, size=(40, 25))
    S = sample_covariance(Y)
    e = eigen_networks(S)
    C = S.matrix
    assert np.all(np.diff(e.eigenvalues) <= 0)
    np.testing.assert_allclose(e.U.T @ e.U, np.eye(25), atol=1e-9)
    rel = np.linalg.norm(e.reconstruct() - C) / np.linalg.norm(C)
    assert rel <= 1e-8
    for i in range(25):
        assert np.abs(C @ e.U[:, i] - e.eigenvalues[i] * e.U[:, i]).max() <= 1e-8 * e.eigenvalues[0]
    # sign convention
    idx = np.argmax(np.abs(e.U), axis=0)
    assert np.all(e.U[idx, np.arange(25)] > 0)


def test_eigen_repeated_values_projector(rng):
    Q, _ = np.linalg.qr(rng.normal(size=(6, 6)))
    C = Q @ np.diag([5.0, 5.0, 2.0, 1.0, 1.0, 1.0]) @ Q.T
    C = 0.5 * (C + C.T)
    e = eigen_networks(C)
    Pk = e.U[:, :2] @ e.U[:, :2].T
    np.testing.assert_allclose(Pk, Q[:, :2] @ Q[:, :2].T, atol=1e-10)


def test_shrinkage_matches_oracle(rng):
    for _ in range(20):
        M, L = rng.integers(3, 20), rng.integers(2, 9)
        Y = rng.gamma(2.0, 1.0, size=(M, L))
        assert ledoit_wolf_shrinkage(Y) == pytest.approx(shrinkage_oracle(Y), abs=1e-12)


def test_shrinkage_endpoints(rng):
    Y = rng.normal(size=(12, 5))
    S = sample_covariance(Y).matrix
    mu = np.trace(S) / 5
    np.testing.assert_allclose(ledoit_wolf(Y, nu=1.0).matrix, mu * np.eye(5), atol=1e-14)
    np.testing.assert_allclose(ledoit_wolf(Y, nu=0.0).matrix, S, atol=1e-14)


def test_shrinkage_invertible_when_m_below_l(rng):
    Y = rng.gamma(2.0, 1.0, size=(50, 100))
    C = ledoit_wolf(Y)
    assert 0 < C.nu <= 1
    w = np.linalg.eigvalsh(C.matrix)
    assert w.min() > 0
    assert w.min() >= C.nu * C.mu - 1e-9
    assert np.abs(C.matrix - C.matrix.T).max() == 0


@settings(max_examples=30)
@given(st.floats(0.0, 1.0))
def test_shrinkage_preserves_trace(nu):
    Y = np.random.default_rng(7).normal(size=(15, 8))
    S = sample_covariance(Y).matrix
    assert np.trace(ledoit_wolf(Y, nu=nu).matrix) == pytest.approx(np.trace(S), rel=1e-12)


def test_spatial_cov_values():
    g = VoxelGrid((0, 0), 1.0, 3, 1)
    C = exp_spatial_cov(g, sigma_x2=0.5, delta=1.0).matrix
    assert C[0, 0] == pytest.approx(0.5)
    assert C[0, 1] == pytest.approx(0.5 * np.exp(-1.0))
    np.testing.assert_array_equal(C, C.T)
    assert np.all(np.diag(C) == C[0, 0])


def test_spatial_cov_monotone_in_distance():
    g = VoxelGrid((0, 0), 0.3, 6, 5)
    C = exp_spatial_cov(g, 0.001, 0.7).matrix
    D = np.hypot(*(g.centers[:, None, :] - g.centers[None, :, :]).transpose(2, 0, 1))
    order = np.argsort(D[0])
    assert np.all(np.diff(C[0][order]) <= 0) and np.all(C > 0)


@pytest.mark.parametrize("n", [1, 5, 12, 20])
def test_spatial_cov_positive_definite(n):
    C = exp_spatial_cov(VoxelGrid((0, 0), 0.3, n, n)).matrix
    assert np.linalg.eigvalsh(C).min() > 0


def test_spatial_cov_rejects_bad_params():
    g = VoxelGrid((0, 0), 1.0, 2, 2)
    with pytest.raises(CovarianceError):
        exp_spatial_cov(g, 0.0, 1.0)
    with pytest.raises(CovarianceError):
        exp_spatial_cov(g, 1.0, -1.0)
