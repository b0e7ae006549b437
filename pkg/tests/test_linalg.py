import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from resourcelab import _kernels, linalg
from resourcelab.errors import DimensionMismatch, DimensionOverflow, DomainError, NonHermitianInput

from conftest import random_hermitian


def partial_trace_oracle(M, dims, keep):
    # explicit index loops over the full tensor
    n = len(dims)
    kd = [dims[k] for k in keep]
    out = np.zeros((math.prod(kd), math.prod(kd)), dtype=complex)
    strides = [math.prod(dims[i + 1:]) for i in range(n)]
    for row in itertools.product(*[range(d) for d in dims]):
        for col in itertools.product(*[range(d) for d in dims]):
            if any(row[i] != col[i] for i in range(n) if i not in keep):
                continue
            r = sum(row[i] * strides[i] for i in range(n))
            c = sum(col[i] * strides[i] for i in range(n))
            kr = 0
            kc = 0
            for k in keep:
                kr = kr * dims[k] + row[k]
                kc = kc * dims[k] + col[k]
            out[kr, kc] += M[r, c]
    return out


class TestHermitianEig:
    def test_hand_2x2(self):
        # [[2, i], [-i, 2]] has eigenvalues 1 and 3
        w, U = linalg.hermitian_eig(np.array([[2, 1j], [-1j, 2]]), method="jacobi")
        assert_allclose(w, [1.0, 3.0], atol=1e-14)
        assert_allclose(abs(U[0, 1]), 1 / math.sqrt(2), atol=1e-14)

    def test_diagonal_input_untouched(self):
        w, U = linalg.hermitian_eig(np.diag([3.0, -1.0, 2.0]), method="jacobi")
        assert_allclose(w, [-1.0, 2.0, 3.0])
        assert_allclose(np.abs(U), np.eye(3)[:, [1, 2, 0]])

    def test_zero_matrix(self):
        w, U = linalg.hermitian_eig(np.zeros((4, 4)), method="jacobi")
        assert_allclose(w, 0.0)
        assert_allclose(U, np.eye(4))

    @pytest.mark.parametrize("d", [1, 2, 3, 7, 20, 64])
    def test_matches_lapack(self, d, rng):
        M = random_hermitian(d, rng)
        dec = linalg.hermitian_eig(M, method="jacobi")
        assert_allclose(dec.eigenvalues, np.linalg.eigvalsh(M), atol=1e-11)
        assert_allclose(dec.reconstruct(), M, atol=1e-10)
        assert_allclose(dec.eigenvectors.conj().T @ dec.eigenvectors, np.eye(d), atol=1e-12)

    def test_degenerate_spectrum(self, rng):
        U = np.linalg.qr(rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6)))[0]
        M = U @ np.diag([1, 1, 1, 2, 2, 5.0]) @ U.conj().T
        dec = linalg.hermitian_eig(M, method="jacobi")
        assert_allclose(dec.eigenvalues, [1, 1, 1, 2, 2, 5], atol=1e-12)
        assert_allclose(dec.reconstruct(), M, atol=1e-12)

    def test_auto_switches_to_lapack(self, rng):
        M = random_hermitian(130, rng)
        dec = linalg.hermitian_eig(M)
        assert_allclose(dec.reconstruct(), M, atol=1e-10)

    def test_rejects_non_hermitian(self):
        with pytest.raises(NonHermitianInput):
            linalg.hermitian_eig(np.array([[1, 2], [0, 1]]))
        with pytest.raises(NonHermitianInput):
            linalg.as_hermitian(np.array([[np.nan, 0], [0, 1]]))

    def test_rejects_non_square(self):
        with pytest.raises(DimensionMismatch):
            linalg.as_hermitian(np.zeros((2, 3)))

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            linalg.hermitian_eig(np.eye(2), method="qr")

    def test_upper_triangle_is_authoritative(self):
        M = np.array([[1.0, 0.5 + 1e-13j], [0.5, 1.0]])
        H = linalg.as_hermitian(M)
        assert H[1, 0] == np.conj(H[0, 1])

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 12), st.integers(0, 2**32 - 1))
    def test_reconstruction_property(self, d, seed):
        M = random_hermitian(d, np.random.default_rng(seed))
        dec = linalg.hermitian_eig(M, method="jacobi")
        assert np.all(np.diff(dec.eigenvalues) >= 0)
        assert np.max(np.abs(dec.reconstruct() - M)) <= 1e-10 * max(1.0, np.abs(M).max())


class TestKernelsBackends:
    def test_numpy_and_numba_jacobi_agree(self, rng):
        M = random_hermitian(24, rng)
        w1, V1, s1 = _kernels.jacobi_eigh_numpy(M.copy(), 1e-13, 100)
        w2, V2, s2 = _kernels.jacobi_eigh_numba(M.copy(), 1e-13, 100)
        assert s1 == s2
        assert_allclose(w1, w2, atol=1e-12)
        assert_allclose(V1, V2, atol=1e-10)

    def test_numpy_and_numba_mixing_agree(self, rng):
        from resourcelab import quantum

        rho = quantum.random_density_matrix(10, rng)
        V = rng.normal(size=(10, 5)) + 1j * rng.normal(size=(10, 5))
        V /= np.linalg.norm(V, axis=1, keepdims=True)
        a = _kernels.mixing_ascent_numpy(rho, V.copy(), 30, 0.0)
        b = _kernels.mixing_ascent_numba(rho, V.copy(), 30, 0.0)
        assert_allclose(a[0], b[0], atol=1e-12)
        assert_allclose(a[2], b[2], atol=1e-12)

    def test_env_flag_selects_numpy(self, monkeypatch):
        monkeypatch.setenv("RESOURCELAB_DISABLE_NUMBA", "1")
        assert _kernels.backend() == "numpy"
        w, _ = linalg.hermitian_eig(np.array([[0, 1], [1, 0]]), method="jacobi")
        assert_allclose(w, [-1, 1], atol=1e-15)
        monkeypatch.setenv("RESOURCELAB_DISABLE_NUMBA", "0")
        assert _kernels.backend() == "numba"

    def test_tiny_offdiagonal_does_not_overflow(self):
        M = np.array([[1.0, 1e-200], [1e-200, -1.0]])
        with np.errstate(over="raise", invalid="raise", divide="raise"):
            w, _, _ = _kernels.jacobi_eigh_numpy(M.astype(complex), 1e-13, 100)
        assert_allclose(sorted(w), [-1, 1])


class TestMatrixFunctions:
    def test_sqrt(self, rng):
        G = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
        P = G @ G.conj().T
        S = linalg.sqrtm_psd(P)
        assert_allclose(S @ S, P, atol=1e-10)

    def test_log_support_only(self):
        P = np.diag([0.5, 0.5, 0.0])
        L = linalg.matrix_function(P, np.log2, support_only=True)
        assert_allclose(np.diag(L), [-1, -1, 0])

    def test_log_of_singular_raises(self):
        with pytest.raises(DomainError):
            linalg.matrix_function(np.diag([1.0, 0.0]), np.log)


class TestTensorAndTrace:
    def test_tensor_power_dims(self):
        assert linalg.tensor_power(np.eye(2), 3).shape == (8, 8)
        assert linalg.tensor_power(np.eye(2), 0).shape == (1, 1)

    def test_tensor_cap(self):
        with pytest.raises(DimensionOverflow):
            linalg.tensor_power(np.eye(2), 13)

    @pytest.mark.parametrize("dims,keep", [([2, 3], [0]), ([2, 3], [1]), ([2, 2, 3], [0, 2]), ([3, 2, 2], [1]),
                                           ([2, 3, 2], []), ([2, 2], [0, 1])])
    def test_partial_trace_vs_loops(self, dims, keep, rng):
        d = math.prod(dims)
        M = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        assert_allclose(linalg.partial_trace(M, dims, keep), partial_trace_oracle(M, dims, keep), atol=1e-12)

    def test_partial_trace_product(self, rng):
        from resourcelab import quantum

        a, b = quantum.random_density_matrix(2, rng), quantum.random_density_matrix(3, rng)
        assert_allclose(linalg.partial_trace(np.kron(a, b), [2, 3], [1]), b, atol=1e-14)

    def test_partial_trace_errors(self):
        with pytest.raises(DimensionMismatch):
            linalg.partial_trace(np.eye(6), [2, 2], [0])
        with pytest.raises(DimensionMismatch):
            linalg.partial_trace(np.eye(4), [2, 2], [2])

    def test_trace_distance(self):
        assert linalg.trace_distance(np.diag([1, 0]), np.diag([0, 1])) == pytest.approx(1.0)

    def test_psd_check(self):
        ok, lam = linalg.psd_check(np.diag([1.0, -1e-12]))
        assert ok and lam == pytest.approx(-1e-12)
        assert not linalg.psd_check(np.diag([1.0, -1e-3]))[0]


class TestJson:
    def test_roundtrip(self, rng):
        M = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        assert_allclose(linalg.from_json(linalg.to_json(M)), M)

    @pytest.mark.parametrize("obj", [{"dim": 2, "re": [1, 0, 0]}, {"re": [1]}, {"dim": 2, "re": [1, 0, 0, "x"]},
                                     {"dim": 1, "re": [float("nan")]}])
    def test_malformed(self, obj):
        with pytest.raises(DimensionMismatch):
            linalg.from_json(obj)
