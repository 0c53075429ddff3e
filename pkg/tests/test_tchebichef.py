import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracdenoise.linalg import ContractError
from fracdenoise.tchebichef import MomentVector, build_basis, forward, inverse, order_recurrence


@pytest.mark.parametrize("n", [4, 16, 250, 512])
def test_orthonormal_rows(n):
    q = build_basis(n).q
    assert np.max(np.abs(q @ q.T - np.eye(n))) < 1e-8


def test_constant_row():
    np.testing.assert_allclose(build_basis(4).q[0], 0.5, atol=1e-15)
    np.testing.assert_allclose(build_basis(250).q[0], 1 / np.sqrt(250), atol=1e-15)


def test_first_order_row_closed_form():
    n = 4
    x = np.arange(n)
    expected = (2 * x + 1 - n) * np.sqrt(3 / (n * (n * n - 1)))
    np.testing.assert_allclose(build_basis(n).q[1], expected, atol=1e-14)
    np.testing.assert_allclose(build_basis(n).q[1], [-0.6708, -0.2236, 0.2236, 0.6708], atol=1e-4)


@pytest.mark.parametrize("n", [4, 7, 16, 20])
def test_matches_order_recurrence_on_short_lengths(n):
    np.testing.assert_allclose(build_basis(n).q, order_recurrence(n), atol=1e-10)


def test_order_recurrence_breaks_down_on_long_lengths():
    # The reason build_basis runs along x instead.
    q = order_recurrence(250)
    with np.errstate(all="ignore"):
        assert not np.max(np.abs(q @ q.T - np.eye(250))) < 1e-8


def test_truncated_order():
    b = build_basis(16, 5)
    assert b.q.shape == (6, 16)
    np.testing.assert_array_equal(b.q, build_basis(16).q[:6])


@pytest.mark.parametrize("order", [0, 4])
def test_order_out_of_range(order):
    with pytest.raises(ContractError):
        build_basis(4, order)


class TestForward:
    def test_constant_signal(self):
        n, c = 250, 1.7
        t = forward(build_basis(n), np.full(n, c))
        expected = np.zeros(n)
        expected[0] = c * np.sqrt(n)
        np.testing.assert_allclose(t, expected, atol=1e-10)

    def test_zero_signal(self):
        np.testing.assert_array_equal(forward(build_basis(16), np.zeros(16)), 0.0)

    def test_against_double_loop(self):
        n = 250
        b = build_basis(n)
        x = np.random.default_rng(0).standard_normal(n)
        expected = np.zeros(n)
        for p in range(n):
            acc = 0.0
            for k in range(n):
                acc += b.q[p, k] * x[k]
            expected[p] = acc
        assert np.max(np.abs(forward(b, x) - expected)) < 1e-10

    def test_length_mismatch(self):
        with pytest.raises(ContractError):
            forward(build_basis(16), np.zeros(15))


class TestInverse:
    @pytest.mark.parametrize("n", [4, 16, 250, 512])
    def test_round_trip_and_parseval(self, n):
        b = build_basis(n)
        x = np.random.default_rng(n).standard_normal(n)
        t = forward(b, x)
        assert np.max(np.abs(inverse(b, t) - x)) < 1e-8
        assert abs(np.linalg.norm(t) - np.linalg.norm(x)) < 1e-8

    def test_scaled_first_unit_vector(self):
        n = 250
        t = np.zeros(n)
        t[0] = np.sqrt(n)
        np.testing.assert_allclose(inverse(build_basis(n), t), 1.0, atol=1e-12)

    def test_accepts_moment_vector(self):
        b = build_basis(8)
        mv = MomentVector(forward(b, np.arange(8.0)), 8)
        np.testing.assert_allclose(inverse(b, mv), np.arange(8.0), atol=1e-12)

    def test_truncation_error_is_dropped_energy(self):
        n, p = 250, 60
        full = build_basis(n)
        part = build_basis(n, p)
        x = np.random.default_rng(1).standard_normal(n)
        t = forward(full, x)
        err = np.sum((inverse(part, t[: p + 1]) - x) ** 2)
        assert abs(err - np.sum(t[p + 1 :] ** 2)) < 1e-8

    def test_length_mismatch(self):
        with pytest.raises(ContractError):
            inverse(build_basis(16, 5), np.zeros(7))


def test_energy_compaction_on_smooth_signal():
    n = 250
    x = np.linspace(0, 1, n)
    signal = np.sin(2 * np.pi * 1.5 * x) + 0.5 * np.cos(2 * np.pi * 3 * x)
    t = forward(build_basis(n), signal)
    assert np.sum(t[: n // 4] ** 2) / np.sum(t**2) >= 0.99


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 64), st.integers(0, 2**32 - 1))
def test_round_trip_property(n, seed):
    b = build_basis(n)
    x = np.random.default_rng(seed).standard_normal(n)
    np.testing.assert_allclose(inverse(b, forward(b, x)), x, atol=1e-10)
