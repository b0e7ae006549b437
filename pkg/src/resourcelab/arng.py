"""Probabilistic conversion maps built from a hypothesis test and a robustness split.

For ``n`` input copies and ``k = floor(r n)`` target copies the map is

    X -> Tr(A X) omega_k + mu Tr((I - A) X) pi_k

where ``A`` is a test effect accepting ``rho^{(x)n}``, ``omega_k`` is the
target and ``pi_k`` the resource component of ``omega_k = lam sigma_k -
(lam - 1) pi_k``.  With ``a = max_sigma Tr(A sigma)`` the choice
``mu = (lam - 1) / (1/a - 1)`` sends every free input to a state of bounded
robustness.  The trace-preserving completion routes the rejected weight to the
maximally mixed state.
"""

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import freesets, linalg, quantum, stein
from .config import DEFAULT
from .errors import FreeInput, FreeTarget, InfeasibleStep, InvalidParams, UnsupportedFreeSet

log = logging.getLogger(__name__)

EXACT_DECOMPOSITION_MAX_DIM = 64
RNG_CHECK_MAX_DIM = 1024


def target_copies(rate, n):
    """``floor(rate * n)`` robust to binary rounding of grid rates like 0.29."""
    return int(math.floor(rate * n + 1e-9))


@dataclass(frozen=True)
class ArngStep:
    n: int
    k: int
    test: stein.TestOperator
    type1: float
    a: float
    lam: float
    mu: float
    omega: np.ndarray
    pi: np.ndarray
    target_eps: float = 0.0

    def __post_init__(self):
        need = (self.lam - 1.0) / (1.0 / self.a - 1.0)
        if self.mu < need - 1e-12:
            raise InvalidParams(f"mu = {self.mu} below the free-output threshold {need}")

    @property
    def out_dim(self):
        return self.omega.shape[0]

    def map(self):
        """The conversion map as a sum of two measure-and-prepare branches."""
        A = self.test.A
        I = np.eye(A.shape[0])
        return quantum.OperationSum([quantum.MeasurePrepare(A, self.omega),
                                     quantum.MeasurePrepare(self.mu * (I - A), self.pi)])

    def failure_branch(self):
        A = self.test.A
        I = np.eye(A.shape[0])
        return quantum.MeasurePrepare((1.0 - self.mu) * (I - A), quantum.maximally_mixed(self.out_dim))

    def completed_channel(self):
        return quantum.OperationSum([self.map(), self.failure_branch()])

    @property
    def rng_delta_analytic(self):
        return 1.0 / (self.lam - 1.0)


@dataclass
class ProtocolRunRecord:
    n: int
    k: int
    p_n: float
    fidelity: float
    eps_n: float
    type1: float
    mu_n: float
    lambda_n: float
    a_n: float
    target_eps: float
    rng_delta: float
    rng_delta_analytic: float
    rng_method: str
    assembled_fidelity: float

    @property
    def p_bound(self):
        return 1.0 - self.type1 * (1.0 - self.mu_n)

    @property
    def fidelity_bound(self):
        d = self.type1
        return (1.0 - d) * (1.0 - self.target_eps) / (1.0 - d + self.mu_n * d)

    @property
    def p_slack(self):
        return self.p_n - self.p_bound

    @property
    def fidelity_slack(self):
        return self.fidelity - self.fidelity_bound

    @property
    def rng_slack(self):
        return self.rng_delta_analytic - self.rng_delta

    @property
    def assembled_slack(self):
        return self.assembled_fidelity - self.p_n * (1.0 - self.eps_n)

    def bounds_hold(self, slack=1e-9):
        return (self.p_slack >= -slack and self.fidelity_slack >= -slack and self.rng_slack >= -slack
                and self.assembled_slack >= -slack)

    def row(self):
        out = asdict(self)
        out.update(p_bound=self.p_bound, fidelity_bound=self.fidelity_bound)
        return out


RECORD_COLUMNS = ("n", "k", "p_n", "fidelity", "eps_n", "type1", "mu_n", "lambda_n", "a_n", "target_eps",
                  "rng_delta", "rng_delta_analytic", "rng_method", "assembled_fidelity", "p_bound",
                  "fidelity_bound")


class ArngPipeline:
    """Builds and runs the conversion map for ``rho -> omega`` at any ``n``.

    Test effects are cached per ``n`` and target decompositions per ``k``.
    ``chi`` sets the test exponent ``relent(rho) (1 - chi/4)``.
    """

    def __init__(self, rho, omega, F_in=None, F_out=None, chi=0.1, tol=None, rng_check=True):
        self.tol = DEFAULT if tol is None else tol
        self.rho = quantum.validate_state(rho, self.tol)
        self.omega = quantum.validate_state(omega, self.tol)
        self.F_in = F_in or freesets.IncoherentFreeSet(self.rho.shape[0])
        self.F_out = F_out or freesets.IncoherentFreeSet(self.omega.shape[0])
        for F, st in ((self.F_in, self.rho), (self.F_out, self.omega)):
            if not isinstance(F, freesets.IncoherentFreeSet):
                raise UnsupportedFreeSet("conversion pipeline runs on the incoherent family")
            if F.local_dim != st.shape[0]:
                raise InvalidParams(f"{F!r} does not match a state of dim {st.shape[0]}")
        if not 0.0 < chi < 1.0:
            raise InvalidParams("chi must lie in (0, 1)")
        self.chi = chi
        self.relent_in = self.F_in.relent(self.rho)
        self.relent_out = self.F_out.relent(self.omega)
        if self.relent_in <= self.tol.free_lambda:
            raise FreeInput("source state is free")
        if self.relent_out <= self.tol.free_lambda:
            raise FreeTarget("target state is free")
        try:
            self._single = freesets.robustness_decomposition(self.omega, self.F_out, self.tol)
        except FreeInput as exc:
            raise FreeTarget("target state has unit robustness") from exc
        self.stein_rate = self.relent_in * (1.0 - chi / 4.0)
        self.rng_check = rng_check
        self._tests = {}
        self._targets = {}
        self._records = {}

    @property
    def theory_ratio(self):
        return self.relent_in / self.relent_out

    def test(self, n):
        if n not in self._tests:
            self._tests[n] = self._build_test(n)
        return self._tests[n]

    def _build_test(self, n):
        rho_n = linalg.tensor_power(self.rho, n, cap=self.tol.dimension_cap)
        sigma_n = linalg.tensor_power(self.F_in.dephase(self.rho), n, cap=self.tol.dimension_cap)
        test = stein.np_test(rho_n, sigma_n, 2.0 ** (n * self.stein_rate), n=n, tol=self.tol)
        return test, stein.evaluate(test, rho_n, self.F_in)

    def target(self, k):
        """``(omega^{(x)k}, lam_k, pi_k)``; exact split when pure or small."""
        if k not in self._targets:
            dim = self.omega.shape[0] ** k
            omega_k = linalg.tensor_power(self.omega, k, cap=self.tol.dimension_cap)
            if quantum.is_pure(self.omega) or dim > EXACT_DECOMPOSITION_MAX_DIM:
                dec = freesets.tensor_decomposition(self._single, k)
            else:
                dec = freesets.robustness_decomposition(omega_k, freesets.IncoherentFreeSet(dim), self.tol)
            self._targets[k] = (omega_k, dec.lam, dec.pi)
        return self._targets[k]

    def step(self, n, rate):
        return self.step_k(n, target_copies(rate, n))

    def step_k(self, n, k):
        if k < 1:
            raise InvalidParams(f"no target copies requested at n={n}")
        test, rep = self.test(n)
        a = rep.type2_worst
        omega_k, lam, pi = self.target(k)
        if a >= 1.0:
            raise InfeasibleStep(f"test accepts a free state with certainty at n={n}")
        mu = (lam - 1.0) / (1.0 / a - 1.0)
        if mu > 1.0 + 1e-12:
            raise InfeasibleStep(f"mu = {mu:.6g} > 1 at n={n}, k={k}")
        return ArngStep(n, k, test, rep.type1, a, lam, min(mu, 1.0), omega_k, pi)

    def run(self, n, rate):
        return self.run_k(n, target_copies(rate, n))

    def run_k(self, n, k):
        """Record for ``n -> k`` copies; :class:`InfeasibleStep` when ``mu > 1``."""
        key = (n, k)
        if key not in self._records:
            try:
                step = self.step_k(n, k)
            except InfeasibleStep as exc:
                self._records[key] = exc
            else:
                rho_n = linalg.tensor_power(self.rho, n, cap=self.tol.dimension_cap)
                self._records[key] = apply_arng_step(step, rho_n, self.F_in, rng_check=self.rng_check, tol=self.tol)
        rec = self._records[key]
        if isinstance(rec, Exception):
            raise rec
        return rec


def build_arng_step(rho, omega, F=None, n=1, rate=None, chi_margin=0.1, tol=None):
    """One-off conversion step; ``rate`` defaults to the theory ratio minus ``chi_margin``."""
    pipe = ArngPipeline(rho, omega, F_in=F, chi=chi_margin, tol=tol)
    if rate is None:
        rate = pipe.theory_ratio - chi_margin
    return pipe.step(n, rate)


def apply_arng_step(step, rho_n, F_in, rng_check=True, tol=None):
    """Run ``step`` on ``rho_n`` and collect every quantity the bounds refer to."""
    tol = DEFAULT if tol is None else tol
    target = step.omega
    out = step.map().apply(rho_n)
    p = min(max(out.weight, 0.0), 1.0)
    fid = quantum.fidelity(out.normalized(), target) if p > 0 else 0.0
    fid = min(max(fid, 0.0), 1.0)
    full = step.completed_channel().apply(rho_n).mat
    assembled = min(max(quantum.fidelity(full, target), 0.0), 1.0)
    if rng_check and step.out_dim <= RNG_CHECK_MAX_DIM:
        cert = certify_step(step, F_in, tol)
        rng_delta, method = cert.delta_measured, cert.method
    else:
        rng_delta, method = step.rng_delta_analytic, "analytic"
    return ProtocolRunRecord(step.n, step.k, p, fid, 1.0 - fid, step.type1, step.mu, step.lam, step.a,
                             step.target_eps, rng_delta, step.rng_delta_analytic, method, assembled)


def certify_step(step, F_in, tol=None):
    """Measured robustness generated by the step on free inputs.

    The output on a free input depends on it only through ``Tr(A sigma)``, so
    one computational vertex per distinct diagonal value of ``A`` covers all
    vertices exactly.
    """
    diag = np.round(np.real(np.diagonal(step.test.A)), 13)
    _, first = np.unique(diag, return_index=True)
    probes = []
    for i in sorted(first):
        v = np.zeros(step.test.A.shape, dtype=np.complex128)
        v[i, i] = 1.0
        probes.append(v)
    cert = freesets.certify_rng(step.map(), F_in, n_in=step.n, extra_probes=probes, vertices=False,
                                F_out=freesets.IncoherentFreeSet(step.out_dim), analytic_bound=step.rng_delta_analytic,
                                tol=tol)
    cert.method = "vertex-classes"
    return cert


def mu_decay(records):
    """Return ``(n0, last_mu)`` where ``mu`` is nonincreasing from ``n0`` on.

    ``records`` must be ordered by ``n``.
    """
    if not records:
        raise InvalidParams("no records to analyse")
    n0 = records[0].n
    for prev, cur in zip(records, records[1:]):
        if cur.mu_n > prev.mu_n + 1e-15:
            n0 = cur.n
    return n0, records[-1].mu_n
