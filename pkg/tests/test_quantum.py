import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from resourcelab import linalg, quantum
from resourcelab.errors import DimensionMismatch, InvalidParams, InvalidState
from resourcelab.quantum import FlaggedIsotropicParams


def uhlmann_fidelity_oracle(rho, sigma):
    # independent route: nuclear norm via singular values of sqrt(rho) sqrt(sigma)
    def sqrt(M):
        w, U = np.linalg.eigh(M)
        return (U * np.sqrt(np.clip(w, 0, None))) @ U.conj().T

    return np.sum(np.linalg.svd(sqrt(rho) @ sqrt(sigma), compute_uv=False)) ** 2


class TestStates:
    def test_plus(self):
        assert_allclose(quantum.plus_state(), 0.5 * np.ones((2, 2)))

    def test_validate_accepts_and_canonicalises(self):
        rho = quantum.validate_state(np.diag([0.25, 0.75]))
        assert rho.dtype == np.complex128

    @pytest.mark.parametrize("bad", [np.diag([0.5, 0.6]), np.diag([1.2, -0.2]), np.array([[0.5, 0.5], [0, 0.5]]),
                                     np.ones((2, 3)) / 2])
    def test_validate_rejects(self, bad):
        with pytest.raises(InvalidState):
            quantum.validate_state(bad)

    def test_entropy(self):
        assert quantum.entropy(quantum.maximally_mixed(8)) == pytest.approx(3.0)
        assert quantum.entropy(quantum.plus_state()) == pytest.approx(0.0, abs=1e-12)

    def test_is_pure(self, rng):
        assert quantum.is_pure(quantum.random_pure(5, rng))
        assert not quantum.is_pure(quantum.random_density_matrix(5, rng))

    def test_pure_vector_phase(self, rng):
        rho = quantum.random_pure(4, rng)
        v = quantum.pure_vector(rho)
        assert_allclose(np.outer(v, v.conj()), rho, atol=1e-12)
        j = np.argmax(np.abs(v))
        assert abs(v[j].imag) < 1e-14 and v[j].real > 0


class TestFidelity:
    def test_orthogonal(self):
        assert quantum.fidelity(np.diag([1.0, 0]), np.diag([0, 1.0])) == pytest.approx(0.0)

    def test_pure_overlap(self):
        # |<0|+>|^2 = 1/2
        assert quantum.fidelity(np.diag([1.0, 0]), quantum.plus_state()) == pytest.approx(0.5)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 6), st.integers(0, 2**32 - 1))
    def test_against_svd_oracle(self, d, seed):
        r = np.random.default_rng(seed)
        a, b = quantum.random_density_matrix(d, r), quantum.random_density_matrix(d, r)
        f = quantum.fidelity(a, b)
        assert f == pytest.approx(uhlmann_fidelity_oracle(a, b), abs=1e-9)
        assert f == pytest.approx(quantum.fidelity(b, a), abs=1e-9)
        assert -1e-12 <= f <= 1 + 1e-9

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            quantum.fidelity(np.eye(2) / 2, np.eye(3) / 3)


class TestOperations:
    def test_depolarizing_is_channel(self):
        op = quantum.QuantumOperation(quantum.depolarizing_kraus(0.3))
        assert op.is_trace_preserving()
        out = op.apply(quantum.plus_state())
        assert_allclose(out.mat, 0.7 * quantum.plus_state() + 0.15 * np.eye(2))

    def test_rejects_trace_increasing(self):
        with pytest.raises(InvalidParams):
            quantum.QuantumOperation([np.eye(2) * 1.1])

    def test_rejects_mixed_shapes(self):
        with pytest.raises(DimensionMismatch):
            quantum.QuantumOperation([np.eye(2), np.eye(3)])
        with pytest.raises(DimensionMismatch):
            quantum.QuantumOperation([])

    def test_apply_shape(self):
        with pytest.raises(DimensionMismatch):
            quantum.QuantumOperation([np.eye(2)]).apply(np.eye(3) / 3)

    def test_composition(self, rng):
        a = quantum.random_cptni(2, 3, rng)
        b = quantum.random_cptni(3, 2, rng)
        rho = quantum.random_density_matrix(2, rng)
        assert_allclose(a.then(b).apply(rho).mat, b.apply(a.apply(rho).mat).mat, atol=1e-12)

    def test_random_cptni_scale(self, rng):
        op = quantum.random_cptni(3, 4, rng, scale=0.6)
        assert linalg.eigvalsh(op.effect())[-1] == pytest.approx(0.6, rel=1e-9)

    def test_measure_prepare_kraus_form(self, rng):
        E = 0.5 * quantum.random_density_matrix(3, rng)
        st_ = quantum.random_density_matrix(2, rng)
        mp = quantum.MeasurePrepare(E, st_)
        rho = quantum.random_density_matrix(3, rng)
        via_kraus = quantum.QuantumOperation(mp.kraus_operators()).apply(rho)
        assert_allclose(via_kraus.mat, mp.apply(rho).mat, atol=1e-12)

    def test_instrument_channel_and_coarse_grain(self, rng):
        P0 = np.diag([1.0, 0])
        inst = quantum.Instrument([quantum.QuantumOperation([P0]), quantum.QuantumOperation([np.eye(2) - P0])])
        outs = inst.apply_all(quantum.plus_state())
        assert [o.weight for o in outs] == pytest.approx([0.5, 0.5])
        cg = inst.coarse_grain([0])
        assert cg.branches[0].apply(quantum.plus_state()).weight == pytest.approx(0.5)
        assert inst.channel().apply(quantum.plus_state()).weight == pytest.approx(1.0)

    def test_instrument_must_sum_to_channel(self):
        with pytest.raises(InvalidParams):
            quantum.Instrument([quantum.QuantumOperation([0.5 * np.eye(2)])])

    def test_normalize_zero_weight(self):
        with pytest.raises(InvalidState):
            quantum.SubnormalizedState(np.zeros((2, 2)), 0.0).normalized()

    def test_local_operation(self):
        op = quantum.local_operation([np.array([[0, 1], [1, 0]])], 2)
        assert_allclose(op.apply(np.diag([1.0, 0, 0, 0])).mat, np.diag([0, 0, 1.0, 0]))


class TestBipartite:
    def test_max_entangled(self):
        phi = quantum.max_entangled(2)
        assert_allclose(phi[[0, 0, 3, 3], [0, 3, 0, 3]], 0.5)
        with pytest.raises(InvalidParams):
            quantum.max_entangled(1)

    def test_isotropic_fidelity(self):
        rho = quantum.isotropic(3, 0.7)
        assert quantum.fidelity(rho, quantum.max_entangled(3)) == pytest.approx(0.7)
        assert np.trace(rho).real == pytest.approx(1.0)

    def test_twirl_preserves_fidelity(self, rng):
        rho = quantum.random_density_matrix(9, rng)
        tw = quantum.isotropic_twirl(rho, 3)
        phi = quantum.max_entangled(3)
        assert np.real(np.trace(phi @ tw)) == pytest.approx(np.real(np.trace(phi @ rho)))
        U = quantum.random_unitary(3, rng)
        W = np.kron(U, U.conj())
        assert_allclose(W @ tw @ W.conj().T, tw, atol=1e-12)

    def test_regroup_pairs_maps_product_of_bells(self):
        # Phi_2 (x) Phi_2 in pair order regroups to Phi_4
        phi2 = quantum.max_entangled(2)
        assert_allclose(quantum.regroup_pairs(np.kron(phi2, phi2), 2), quantum.max_entangled(4), atol=1e-14)

    def test_flagged_state_is_normalised(self):
        p = FlaggedIsotropicParams(2, 0.1, 0.05)
        rho = quantum.validate_state(quantum.flagged_isotropic(p))
        assert rho.shape == (25, 25)
        assert rho[-1, -1].real == pytest.approx(0.05)

    def test_flagged_overlap_with_pairs(self):
        # both expansions give 1 - eps - delta = 0.85; the white-noise weight eps/(1 - 1/16) contributes 1/16 of itself
        p = FlaggedIsotropicParams(2, 0.1, 0.05)
        phi = quantum.embed_pair_block(quantum.max_entangled(4), 2)
        w = 0.1 / (1 - 1 / 16)
        assert (1 - w - 0.05) + w / 16 == pytest.approx(0.85, abs=1e-15)
        for rho in (quantum.flagged_isotropic(p), quantum.flagged_isotropic_white(p)):
            assert np.real(np.trace(phi @ rho)) == pytest.approx(0.85, abs=1e-12)

    def test_flagged_white_noise_form_agrees(self):
        for p in (FlaggedIsotropicParams(1, 0.2, 0.1), FlaggedIsotropicParams(2, 0.1, 0.05)):
            assert_allclose(quantum.flagged_isotropic_white(p), quantum.flagged_isotropic(p), atol=1e-14)

    def test_flagged_m0(self):
        rho = quantum.flagged_isotropic(FlaggedIsotropicParams(0, 0.0, 0.25))
        assert_allclose(np.diagonal(rho).real, [0.75, 0, 0, 0.25])

    @pytest.mark.parametrize("kw", [dict(m=-1, eps=0, delta=0), dict(m=1, eps=0.7, delta=0.4),
                                    dict(m=0, eps=0.1, delta=0), dict(m=1, eps=-0.1, delta=0), dict(m=1.5, eps=0, delta=0)])
    def test_params_validation(self, kw):
        with pytest.raises(InvalidParams):
            FlaggedIsotropicParams(**kw)

    def test_params_dict_roundtrip(self):
        p = FlaggedIsotropicParams(3, 0.1, 0.2)
        assert FlaggedIsotropicParams.from_dict(p.to_dict()) == p
        with pytest.raises(InvalidParams):
            FlaggedIsotropicParams.from_dict({"m": 1, "eps": 0, "delta": 0, "extra": 1})
