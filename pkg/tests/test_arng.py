import math

import numpy as np
import pytest

import oracles
from resourcelab import arng, linalg, quantum
from resourcelab.errors import FreeInput, FreeTarget, InfeasibleStep, InvalidParams, UnsupportedFreeSet
from resourcelab.freesets import FlaggedIsotropicFreeSet, IncoherentFreeSet


def skewed_source(seed=3):
    rho = quantum.random_density_matrix(2, np.random.default_rng(seed))
    return 0.3 * rho + 0.7 * quantum.plus_state()


class TestTargetCopies:
    def test_grid_rates(self):
        assert arng.target_copies(0.29, 100) == 29
        assert arng.target_copies(0.9, 10) == 9
        assert arng.target_copies(0.0, 5) == 0


class TestPlusSelfConversion:
    def test_golden_record(self):
        # A = |+^8><+^8|, a = 2^-8, lam_7 = 2^7, mu = 127 / 255
        pipe = arng.ArngPipeline(quantum.plus_state(), quantum.plus_state())
        rec = pipe.run(8, 0.9)
        assert rec.k == 7
        assert rec.a_n == pytest.approx(2.0**-8)
        assert rec.lambda_n == pytest.approx(128.0)
        assert rec.mu_n == pytest.approx(127 / 255)
        assert rec.p_n == pytest.approx(1.0) and rec.fidelity == pytest.approx(1.0)
        assert rec.type1 == pytest.approx(0.0, abs=1e-12)
        assert rec.bounds_hold()

    def test_infeasible_step_is_cached(self):
        pipe = arng.ArngPipeline(quantum.plus_state(), quantum.plus_state())
        with pytest.raises(InfeasibleStep):
            pipe.run_k(2, 3)
        with pytest.raises(InfeasibleStep):
            pipe.run_k(2, 3)

    def test_zero_copies_rejected(self):
        pipe = arng.ArngPipeline(quantum.plus_state(), quantum.plus_state())
        with pytest.raises(InvalidParams):
            pipe.step(1, 0.5)

    def test_records_are_memoised(self):
        pipe = arng.ArngPipeline(quantum.plus_state(), quantum.plus_state())
        assert pipe.run(6, 0.5) is pipe.run_k(6, 3)


@pytest.fixture(scope="module")
def pipe():
    return arng.ArngPipeline(skewed_source(), quantum.plus_state(), chi=0.3)


class TestSkewedSource:
    def test_record_matches_direct_computation(self, pipe):
        rec = pipe.run(5, 0.4)
        step = pipe.step(5, 0.4)
        rho5 = linalg.tensor_power(skewed_source(), 5)
        A = step.test.A
        acc = np.real(np.trace(A @ rho5))
        assert rec.p_n == pytest.approx(acc + step.mu * (1 - acc), abs=1e-12)
        out = acc * step.omega + step.mu * (1 - acc) * step.pi
        assert rec.fidelity == pytest.approx(np.real(np.trace(out @ step.omega)) / rec.p_n, abs=1e-12)

    @pytest.mark.parametrize("n", [3, 4, 6, 8])
    def test_bounds_hold(self, pipe, n):
        rec = pipe.run(n, 0.4)
        assert rec.bounds_hold(1e-9)
        assert rec.rng_method == "vertex-classes"

    def test_generated_robustness_by_qubit_oracle(self, pipe):
        # k = 1 target copy: every free input, correlated ones included, stays within the analytic bound
        step = pipe.step(4, 0.25)
        assert step.k == 1
        op = step.map()
        r = np.random.default_rng(1)
        worst = 0.0
        for alpha in (0.01, 0.1, 1.0):
            for p in r.dirichlet(np.full(16, alpha), size=300):
                out = op.apply(np.diag(p).astype(complex))
                worst = max(worst, oracles.qubit_robustness(out.mat / out.weight) - 1.0)
        cert = arng.certify_step(step, IncoherentFreeSet(2))
        assert worst <= cert.delta_measured + 1e-9
        assert cert.delta_measured <= step.rng_delta_analytic + 1e-9

    def test_completed_channel_is_trace_preserving(self, pipe):
        step = pipe.step(4, 0.25)
        E = step.completed_channel().effect()
        assert np.allclose(E, np.eye(16))

    def test_mu_decay(self, pipe):
        recs = [pipe.run(n, 0.4) for n in range(3, 10)]
        n0, last = arng.mu_decay(recs)
        assert 3 <= n0 <= 9 and last == recs[-1].mu_n
        assert all(b.mu_n <= a.mu_n for a, b in zip(recs, recs[1:]) if a.n >= n0)
        assert last < 0.1
        with pytest.raises(InvalidParams):
            arng.mu_decay([])


class TestMixedTarget:
    def test_exact_split_for_small_mixed_target(self):
        omega = 0.8 * quantum.plus_state() + 0.1 * np.eye(2)
        pipe = arng.ArngPipeline(quantum.plus_state(), omega, chi=0.3)
        omega2, lam2, pi2 = pipe.target(2)
        sigma2 = (omega2 + (lam2 - 1) * pi2) / lam2
        assert IncoherentFreeSet(4).is_free(sigma2, tol=1e-12)
        assert np.trace(sigma2).real == pytest.approx(1.0)
        assert linalg.eigvalsh(pi2)[0] >= -1e-9
        # robustness of the product is at most the product of robustnesses
        assert lam2 <= pipe._single.lam**2 + 1e-9
        rec = pipe.run(6, 0.3)
        assert rec.bounds_hold()


class TestValidation:
    def test_free_source(self):
        with pytest.raises(FreeInput):
            arng.ArngPipeline(np.eye(2) / 2, quantum.plus_state())

    def test_free_target(self):
        with pytest.raises(FreeTarget):
            arng.ArngPipeline(quantum.plus_state(), np.diag([0.3, 0.7]))

    def test_chi_range(self):
        with pytest.raises(InvalidParams):
            arng.ArngPipeline(quantum.plus_state(), quantum.plus_state(), chi=1.0)

    def test_family_checks(self):
        with pytest.raises(UnsupportedFreeSet):
            arng.ArngPipeline(quantum.plus_state(), quantum.plus_state(), F_in=FlaggedIsotropicFreeSet(0))
        with pytest.raises(InvalidParams):
            arng.ArngPipeline(quantum.plus_state(), quantum.plus_state(), F_in=IncoherentFreeSet(3))

    def test_mu_threshold_enforced(self):
        step = arng.ArngPipeline(quantum.plus_state(), quantum.plus_state()).step(4, 0.5)
        with pytest.raises(InvalidParams):
            arng.ArngStep(step.n, step.k, step.test, step.type1, step.a, step.lam, 0.5 * step.mu, step.omega, step.pi)

    def test_build_arng_step_default_rate(self):
        step = arng.build_arng_step(quantum.plus_state(), quantum.plus_state(), n=5, chi_margin=0.3)
        assert step.k == math.floor(0.7 * 5)


class TestRecord:
    def test_row_columns(self):
        rec = arng.ArngPipeline(quantum.plus_state(), quantum.plus_state()).run(4, 0.5)
        assert tuple(rec.row()) == arng.RECORD_COLUMNS

    def test_bounds_detect_violation(self):
        rec = arng.ProtocolRunRecord(1, 1, 0.5, 1.0, 0.0, 0.9, 0.1, 2.0, 0.1, 0.0, 0.0, 1.0, "analytic", 0.5)
        # p_bound = 1 - 0.9 * 0.9 = 0.19 holds; fidelity fine; shrink p below it
        assert rec.bounds_hold()
        rec.p_n = 0.1
        assert not rec.bounds_hold()
