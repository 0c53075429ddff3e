import numpy as np
import pytest

from fracdenoise.linalg import ContractError, NumericFailure, matmul, qr, svd
from fracdenoise import linalg


def naive_matmul(a, b):
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            acc = 0.0
            for k in range(a.shape[1]):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc
    return out


class TestMatmul:
    def test_identity(self):
        m = np.arange(9.0).reshape(3, 3)
        np.testing.assert_array_equal(matmul(np.eye(3), m), m)

    def test_hand_case(self):
        np.testing.assert_array_equal(matmul([[1, 2], [3, 4]], [[5], [6]]), [[17], [39]])

    def test_against_triple_loop(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((48, 192))
        b = rng.standard_normal((192, 48))
        assert np.max(np.abs(matmul(a, b) - naive_matmul(a, b))) < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(ContractError):
            matmul(np.ones((2, 3)), np.ones((2, 3)))

    def test_non_finite_rejected(self):
        with pytest.raises(ContractError):
            matmul([[np.nan]], [[1.0]])

    def test_associativity(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            a, b, c = (rng.standard_normal((4, 4)) for _ in range(3))
            np.testing.assert_allclose(matmul(matmul(a, b), c), matmul(a, matmul(b, c)), atol=1e-10)


class TestQR:
    def test_three_four_five(self):
        q, r = qr([[3.0], [4.0]])
        sign = np.sign(r[0, 0])
        np.testing.assert_allclose(q * sign, [[0.6], [0.8]], atol=1e-12)
        np.testing.assert_allclose(r * sign, [[5.0]], atol=1e-12)

    def test_orthonormal_input(self):
        rng = np.random.default_rng(2)
        a, _ = np.linalg.qr(rng.standard_normal((10, 4)))
        q, r = qr(a)
        signs = np.sign(np.diag(r))
        np.testing.assert_allclose(q * signs, a, atol=1e-10)
        np.testing.assert_allclose(np.abs(r), np.eye(4), atol=1e-10)

    @pytest.mark.parametrize("shape", [(64, 16), (5, 5), (100, 37), (256, 256)])
    def test_factorization(self, shape):
        a = np.random.default_rng(3).standard_normal(shape)
        q, r = qr(a)
        assert np.max(np.abs(q.T @ q - np.eye(shape[1]))) < 1e-10
        assert np.linalg.norm(q @ r - a) / np.linalg.norm(a) < 1e-10
        np.testing.assert_array_equal(r, np.triu(r))

    def test_rank_deficient(self):
        a = np.zeros((6, 3))
        a[:, 0] = np.arange(6.0)
        q, r = qr(a)
        assert np.max(np.abs(q.T @ q - np.eye(3))) < 1e-10
        np.testing.assert_allclose(q @ r, a, atol=1e-12)

    def test_wide_rejected(self):
        with pytest.raises(ContractError):
            qr(np.ones((2, 3)))


class TestSVD:
    def test_diagonal(self):
        u, s, v = svd(np.diag([3.0, 2.0, 1.0]))
        np.testing.assert_allclose(s, [3, 2, 1], atol=1e-14)
        np.testing.assert_allclose(np.abs(u), np.eye(3), atol=1e-14)
        np.testing.assert_allclose(np.abs(v), np.eye(3), atol=1e-14)

    def test_rank_one(self):
        rng = np.random.default_rng(4)
        _, s, _ = svd(np.outer(rng.standard_normal(7), rng.standard_normal(11)))
        assert np.sum(s > 1e-10) == 1

    @pytest.mark.parametrize("shape", [(53, 192), (192, 53), (40, 40), (3968, 12)])
    def test_reconstruction(self, shape):
        a = np.random.default_rng(5).standard_normal(shape)
        u, s, v = svd(a)
        k = min(shape)
        assert np.linalg.norm((u * s) @ v.T - a) / np.linalg.norm(a) < 1e-8
        assert np.max(np.abs(u.T @ u - np.eye(k))) < 1e-8
        assert np.max(np.abs(v.T @ v - np.eye(k))) < 1e-8
        assert np.all(s >= 0) and np.all(np.diff(s) <= 0)
        np.testing.assert_allclose(s, np.linalg.svd(a, compute_uv=False), rtol=1e-10, atol=1e-12)

    def test_eckart_young(self):
        a = np.random.default_rng(6).standard_normal((30, 20))
        u, s, v = svd(a)
        for r in (1, 5, 12):
            approx = (u[:, :r] * s[:r]) @ v[:, :r].T
            assert abs(np.linalg.norm(a - approx) - np.sqrt(np.sum(s[r:] ** 2))) < 1e-8

    def test_zero_matrix_has_orthonormal_factors(self):
        u, s, v = svd(np.zeros((5, 3)))
        np.testing.assert_array_equal(s, 0.0)
        np.testing.assert_allclose(u.T @ u, np.eye(3), atol=1e-12)

    def test_does_not_mutate_input(self):
        a = np.random.default_rng(7).standard_normal((6, 9))
        before = a.copy()
        svd(a)
        np.testing.assert_array_equal(a, before)

    def test_iteration_cap(self, monkeypatch):
        monkeypatch.setattr(linalg, "SVD_MAX_SWEEPS", 1)
        with pytest.raises(NumericFailure):
            svd(np.random.default_rng(8).standard_normal((20, 10)))

    def test_deterministic(self):
        a = np.random.default_rng(9).standard_normal((25, 17))
        first = svd(a)
        second = svd(a)
        for x, y in zip(first, second):
            np.testing.assert_array_equal(x, y)
