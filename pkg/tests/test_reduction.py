import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corrop import reduction
from corrop.reduction import DataSet, compute_svd, decode, encode, reconstruction_error, truncate


def test_diagonal_singular_values():
    A = np.zeros((5, 3))
    A[0, 0], A[1, 1], A[2, 2] = 3.0, 2.0, 1.0
    U, s = compute_svd(A)
    np.testing.assert_allclose(s, [3.0, 2.0, 1.0], atol=1e-14)
    assert U.shape == (5, 3)


def test_zero_matrix():
    U, s = compute_svd(np.zeros((4, 3)))
    assert np.all(s == 0.0)
    assert U.shape == (4, 0)


def test_reconstruction_of_random_matrix():
    A = np.random.default_rng(0).standard_normal((6, 4))
    U, s = compute_svd(A)
    # U spans the column space, so the projection restores A
    assert np.linalg.norm(A - U @ (U.T @ A)) <= 1e-10 * np.linalg.norm(A)
    np.testing.assert_allclose(s, np.linalg.svd(A, compute_uv=False), rtol=1e-10)


def test_gram_eigenpairs_accurate():
    A = np.random.default_rng(1).standard_normal((30, 8))
    U, s = compute_svd(A)
    V = A.T @ U / s[: U.shape[1]]
    for j in range(U.shape[1]):
        defect = np.linalg.norm(A.T @ (A @ V[:, j]) - s[j] ** 2 * V[:, j])
        assert defect <= 1e-8 * s[0] ** 2


def test_wide_matrix_path():
    A = np.random.default_rng(7).standard_normal((5, 9))
    U, s = compute_svd(A)
    assert U.shape == (5, 5)
    assert len(s) == 5
    np.testing.assert_allclose(s, np.linalg.svd(A, compute_uv=False), rtol=1e-10)


def test_sign_convention_deterministic():
    A = np.random.default_rng(2).standard_normal((10, 6))
    U1, _ = compute_svd(A)
    U2, _ = compute_svd(A.copy())
    assert np.array_equal(U1, U2)
    for j in range(U1.shape[1]):
        assert U1[np.argmax(np.abs(U1[:, j])), j] > 0.0


def _projector(A, r):
    mean = A.mean(axis=1)
    return truncate(compute_svd(A - mean[:, None]), mean, r), mean


def test_truncate_full_rank_round_trip():
    A = np.random.default_rng(3).standard_normal((7, 5))
    p, mean = _projector(A, np.linalg.matrix_rank(A - A.mean(axis=1)[:, None]))
    centered = A - mean[:, None]
    for j in range(A.shape[1]):
        x = mean + centered[:, j]
        assert np.linalg.norm(decode(p, encode(p, x)) - x) <= 1e-10


def test_truncate_rank_one_data():
    base = np.outer(np.arange(1.0, 5.0), np.ones(6)) * np.linspace(1, 2, 6)
    p, _ = _projector(base, 1)
    assert reconstruction_error(p, base) <= 1e-20


def test_truncate_range_checked():
    A = np.random.default_rng(4).standard_normal((6, 4))
    svd = compute_svd(A)
    with pytest.raises(ValueError):
        truncate(svd, A.mean(axis=1), 0)
    with pytest.raises(ValueError):
        truncate(svd, A.mean(axis=1), 5)


@pytest.mark.parametrize("r", [25, 50, 100])
def test_reference_reduced_dimensions(r):
    # the grid of reduced dimensions the experiments sweep over
    A = np.random.default_rng(5).standard_normal((150, 120))
    p, _ = _projector(A, r)
    assert p.basis.shape == (150, r)
    assert np.abs(p.basis.T @ p.basis - np.eye(r)).max() <= 1e-12


def test_encode_special_points():
    A = np.random.default_rng(6).standard_normal((8, 5))
    p, mean = _projector(A, 3)
    assert np.linalg.norm(encode(p, mean)) == 0.0
    for j in range(3):
        coords = encode(p, mean + p.basis[:, j])
        np.testing.assert_allclose(coords, np.eye(3)[j], atol=1e-14)
        np.testing.assert_allclose(decode(p, np.eye(3)[j]), mean + p.basis[:, j], atol=1e-14)
    assert np.array_equal(decode(p, np.zeros(3)), mean)


def test_decode_is_affine():
    A = np.random.default_rng(8).standard_normal((9, 6))
    p, _ = _projector(A, 4)
    a = np.random.default_rng(9).standard_normal(4)
    b = np.random.default_rng(10).standard_normal(4)
    lhs = decode(p, a + b)
    rhs = decode(p, a) + decode(p, b) - p.mean
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


@settings(deadline=None, max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_round_trip_error_is_projection_residual(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((8, 6))
    p, _ = _projector(A, 2)
    x = rng.standard_normal(8)
    lhs = np.linalg.norm(decode(p, encode(p, x)) - x)
    centered = x - p.mean
    rhs = np.linalg.norm(centered - p.basis @ (p.basis.T @ centered))
    assert lhs <= rhs + 1e-12


def test_reconstruction_error_identities():
    A = np.random.default_rng(11).standard_normal((12, 9))
    mean = A.mean(axis=1)
    svd = compute_svd(A - mean[:, None])
    _, s = svd
    errors = []
    for r in range(1, 9):
        p = truncate(svd, mean, r)
        e_r = reconstruction_error(p, A)
        expected = np.sum(s[r:] ** 2) / A.shape[1]
        assert abs(e_r - expected) <= 1e-10 * max(expected, 1e-30)
        errors.append(e_r)
    assert all(b <= a + 1e-12 for a, b in zip(errors, errors[1:]))


def test_beats_random_bases():
    rng = np.random.default_rng(12)
    A = rng.standard_normal((20, 10))
    mean = A.mean(axis=1)
    p = truncate(compute_svd(A - mean[:, None]), mean, 3)
    best = reconstruction_error(p, A)
    centered = A - mean[:, None]
    for _ in range(50):
        Q = np.linalg.qr(rng.standard_normal((20, 3)))[0]
        other = np.sum((centered - Q @ (Q.T @ centered)) ** 2) / A.shape[1]
        assert best <= other + 1e-12


def test_dataset_means_and_validation():
    m = np.random.default_rng(13).standard_normal((5, 7))
    u = np.random.default_rng(14).standard_normal((6, 7))
    ds = DataSet.from_columns(m, u, "p1", seed=1)
    np.testing.assert_allclose(ds.m_mean, m.mean(axis=1))
    np.testing.assert_allclose(ds.u_mean, u.mean(axis=1))
    with pytest.raises(ValueError):
        DataSet.from_columns(m, u[:, :5], "p1", seed=1)


def test_non_finite_rejected():
    A = np.ones((3, 3))
    A[1, 1] = np.nan
    with pytest.raises(ValueError):
        compute_svd(A)
