import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from mcx import linalg

from conftest import random_hermitian


class TestHermitian:
    def test_accepts_and_freezes(self):
        a = linalg.hermitian([[2, 1j], [-1j, 3]])
        assert a.dtype == np.complex128
        assert not a.flags.writeable

    def test_symmetrizes_within_tolerance(self):
        a = linalg.hermitian([[1.0, 2.0 + 1e-13], [2.0, 0.0]])
        assert a[0, 1] == a[1, 0]

    def test_rejects_non_hermitian(self):
        with pytest.raises(linalg.NotHermitianError):
            linalg.hermitian([[0, 1], [0, 0]])

    def test_rejects_non_square_and_empty(self):
        with pytest.raises(ValueError):
            linalg.hermitian(np.zeros((2, 3)))
        with pytest.raises(ValueError):
            linalg.hermitian(np.zeros((0, 0)))

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            linalg.hermitian([[math.nan]])


class TestEig:
    def test_pauli_x(self):
        w, _ = linalg.eig_hermitian([[0, 1], [1, 0]])
        np.testing.assert_allclose(w, [-1, 1], atol=1e-14)

    def test_diagonal(self):
        w, q = linalg.eig_hermitian(np.diag([2.0, 5.0, 7.0]))
        np.testing.assert_allclose(w, [2, 5, 7], atol=1e-14)
        np.testing.assert_allclose(np.abs(q), np.eye(3), atol=1e-14)

    def test_random_8x8_reconstruction(self, rng):
        a = linalg.hermitian(random_hermitian(rng, 8))
        w, q = linalg.eig_hermitian(a)
        tol = 1e-10 * (1 + linalg.spectral_norm(a))
        assert np.max(np.abs((q * w) @ q.conj().T - a)) < tol
        assert np.max(np.abs(q.conj().T @ q - np.eye(8))) < 1e-10
        assert np.all(np.diff(w) >= 0)

    def test_matches_lapack(self, rng):
        a = linalg.hermitian(random_hermitian(rng, 12, 3.0))
        np.testing.assert_allclose(linalg.eigvalsh(a), np.linalg.eigvalsh(a), atol=1e-12)

    def test_batch_matches_single(self, rng):
        stack = np.stack([random_hermitian(rng, 4) for _ in range(5)])
        batch = linalg.eigvalsh_batch(stack)
        for a, w in zip(stack, batch):
            np.testing.assert_allclose(w, linalg.eigvalsh(a), atol=1e-13)

    def test_lambda_extremes(self):
        a = np.diag([-3.0, 1.0, 2.0])
        assert linalg.lambda_max(a) == pytest.approx(2.0)
        assert linalg.lambda_min(a) == pytest.approx(-3.0)

    @settings(max_examples=60, deadline=None)
    @given(arrays(np.float64, (4, 4), elements=st.floats(-1e3, 1e3)))
    def test_reconstruction_property(self, m):
        a = linalg.hermitian((m + m.T) / 2)
        w, q = linalg.eig_hermitian(a)
        tol = 1e-10 * (1 + linalg.spectral_norm(a))
        assert np.max(np.abs((q * w) @ q.conj().T - a)) <= tol


class TestMatrixFunction:
    def test_exp_zero_is_identity(self):
        np.testing.assert_allclose(linalg.matrix_function(np.zeros((3, 3)), np.exp), np.eye(3), atol=1e-15)

    def test_abs_diagonal(self):
        np.testing.assert_allclose(linalg.mabs(np.diag([-2.0, 3.0])), np.diag([2.0, 3.0]), atol=1e-15)

    def test_exp_against_taylor(self):
        x = np.array([[0.0, 1.0], [1.0, 0.0]])
        taylor = sum(np.linalg.matrix_power(x, k) / math.factorial(k) for k in range(30))
        np.testing.assert_allclose(linalg.expm(x), taylor, atol=1e-13)
        assert linalg.expm(x)[0, 0].real == pytest.approx(1.5430806348152437, abs=1e-12)

    def test_domain_violation(self):
        with pytest.raises(linalg.DomainError) as err:
            linalg.matrix_function(np.diag([-1.0, 4.0]), np.sqrt, linalg.NONNEGATIVE)
        assert err.value.eigenvalue == pytest.approx(-1.0)

    def test_msqrt_squares_back(self, rng):
        g = rng.standard_normal((4, 4))
        p = linalg.hermitian(g @ g.T)
        s = linalg.msqrt(p)
        np.testing.assert_allclose(s @ s, p, atol=1e-10)

    def test_output_is_hermitian(self, rng):
        a = linalg.hermitian(random_hermitian(rng, 5))
        m = linalg.expm(a, 0.7)
        np.testing.assert_allclose(m, m.conj().T, atol=1e-14)


class TestNorms:
    def test_identity_frobenius(self):
        assert linalg.schatten_norm(np.eye(3), 2) == pytest.approx(math.sqrt(3), rel=1e-14)

    def test_spectral(self):
        assert linalg.schatten_norm(np.diag([3.0, -4.0]), math.inf) == pytest.approx(4.0)

    def test_trace_norm(self):
        assert linalg.schatten_norm([[0, 1], [1, 0]], 1) == pytest.approx(2.0)

    def test_rejects_small_p(self):
        with pytest.raises(ValueError):
            linalg.schatten_norm(np.eye(2), 0.5)

    def test_rectangular_uses_singular_values(self, rng):
        b = rng.standard_normal((3, 5))
        sv = np.linalg.svd(b, compute_uv=False)
        assert linalg.schatten_norm(b, 3) == pytest.approx(np.sum(sv ** 3) ** (1 / 3), rel=1e-12)

    def test_no_overflow(self):
        assert linalg.schatten_norm(np.diag([1e200, 1e200]), 4) == pytest.approx(1e200 * 2 ** 0.25, rel=1e-12)


class TestTraces:
    def test_identity(self):
        assert linalg.traces(np.eye(4)) == pytest.approx((4, 1))

    def test_traceless(self):
        assert linalg.traces(np.diag([1.0, -1.0])) == pytest.approx((0, 0))

    def test_complex(self):
        assert linalg.traces([[2, 1j], [-1j, 3]]) == pytest.approx((5, 2.5))


class TestOrder:
    def test_identity_below_twice(self):
        assert linalg.psd_leq(np.eye(2), 2 * np.eye(2))

    def test_indefinite(self):
        assert not linalg.psd_leq(np.diag([1.0, -1.0]), np.zeros((2, 2)))

    def test_square_convexity(self, rng):
        for _ in range(50):
            a = linalg.hermitian(random_hermitian(rng, 4))
            b = linalg.hermitian(random_hermitian(rng, 4))
            h = (a + b) / 2
            assert linalg.psd_leq(h @ h, (a @ a + b @ b) / 2, 1e-10)


class TestDilation:
    def test_scalar(self):
        dil = linalg.hermitian_dilation([[3.0]])
        np.testing.assert_allclose(dil, [[0, 3], [3, 0]])
        assert linalg.spectral_norm(dil) == pytest.approx(3.0)

    def test_row(self):
        dil = linalg.hermitian_dilation([[1.0, 0.0]])
        assert dil.shape == (3, 3)
        assert linalg.lambda_max(dil) == pytest.approx(1.0)

    def test_norm_preserved(self, rng):
        b = rng.standard_normal((3, 5)) + 1j * rng.standard_normal((3, 5))
        assert linalg.spectral_norm(linalg.hermitian_dilation(b)) == pytest.approx(np.linalg.norm(b, 2), rel=1e-10)


class TestEntropy:
    def test_log_ntrace_exp_zero(self):
        assert linalg.log_ntrace_exp(np.zeros((3, 3))) == pytest.approx(0.0, abs=1e-15)

    def test_entropy_of_identity(self):
        # normalized trace one, so W = I has zero entropy term
        assert linalg.entropy_term(np.eye(3)) == pytest.approx(0.0, abs=1e-15)

    def test_log_ntrace_exp_large_argument(self):
        assert linalg.log_ntrace_exp(np.diag([1000.0, 0.0])) == pytest.approx(1000 - math.log(2), rel=1e-14)
