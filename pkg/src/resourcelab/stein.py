"""Hypothesis testing of ``rho^{(x)n}`` against a free family.

The test effects are Neyman-Pearson projectors ``{rho_n - mu sigma_n >= 0}``.
Against the incoherent family the worst-case type-II error over *all* free
states (correlated ones included) is the largest diagonal entry of the
effect, so every number reported here is exact.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .config import DEFAULT
from .errors import DimensionMismatch, InvalidParams, RateTooHigh, UnsupportedFreeSet
from .freesets import IncoherentFreeSet

log = logging.getLogger(__name__)

TIE_TOL = 1e-12


@dataclass(frozen=True)
class TestOperator:
    """Two-outcome test effect ``0 <= A <= I`` on ``n`` copies."""

    __test__ = False  # keep pytest from collecting this class

    A: np.ndarray
    n: int
    mu: float = None

    def __post_init__(self):
        A = np.asarray(self.A)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionMismatch(f"test effect must be square, got {A.shape}")
        w = linalg.eigvalsh(A)
        if w[0] < -1e-9 or w[-1] > 1.0 + 1e-9:
            raise InvalidParams(f"test effect spectrum [{w[0]:.3e}, {w[-1]:.3e}] leaves [0, 1]")

    @property
    def dim(self):
        return self.A.shape[0]


@dataclass(frozen=True)
class TestReport:
    __test__ = False

    n: int
    type1: float
    type2_worst: float
    mu: float = None

    @property
    def exponent(self):
        if self.type2_worst <= 0.0:
            return math.inf
        return -math.log2(self.type2_worst) / self.n

    def row(self):
        return {"n": self.n, "mu": self.mu, "type1": self.type1, "type2_worst": self.type2_worst,
                "exponent": self.exponent}


def np_test(rho_n, sigma_n, mu, n=1, tol=None):
    """Projector onto the eigenvalues of ``rho_n - mu sigma_n`` that are ``>= -1e-12``.

    Including the near-kernel slice makes the choice deterministic and
    maximises acceptance at ties.
    """
    rho_n = np.asarray(rho_n, dtype=np.complex128)
    sigma_n = np.asarray(sigma_n, dtype=np.complex128)
    if rho_n.shape != sigma_n.shape:
        raise DimensionMismatch(f"hypotheses have shapes {rho_n.shape} and {sigma_n.shape}")
    if mu < 0:
        raise InvalidParams("threshold mu must be non-negative")
    w, U = linalg.hermitian_eig(rho_n - mu * sigma_n, tol=tol)
    keep = U[:, w >= -TIE_TOL]
    A = keep @ keep.conj().T
    return TestOperator(0.5 * (A + A.conj().T), n, float(mu))


def type1_error(test, rho_n):
    return min(max(1.0 - float(np.real(np.sum(test.A.T * rho_n))), 0.0), 1.0)


def worst_case_type2(test, F, n=None):
    """``sup_{sigma in F_n} Tr(A sigma)``; exact for the incoherent family."""
    if not isinstance(F, IncoherentFreeSet):
        raise UnsupportedFreeSet(f"no exact worst-case type-II error for {F!r}")
    n = test.n if n is None else n
    if test.dim != F.dim(n):
        raise DimensionMismatch(f"effect dim {test.dim} does not match {n} copies of {F!r}")
    return min(max(float(np.max(np.real(np.diagonal(test.A)))), 0.0), 1.0)


def evaluate(test, rho_n, F):
    return TestReport(test.n, type1_error(test, rho_n), worst_case_type2(test, F), test.mu)


def build_An_sequence(rho, F, n_max, rate, delta_target=None, map_fn=map, tol=None):
    """Test effects for ``n = 1..n_max`` at exponent target ``rate`` (bits).

    Uses ``mu_n = 2^{n rate}`` against the i.i.d. dephased state.  Entries
    are independent in ``n``; ``map_fn`` may be a parallel map provided it
    preserves order.  Returns a list of ``(TestOperator, TestReport)``.
    """
    tol = DEFAULT if tol is None else tol
    if not isinstance(F, IncoherentFreeSet):
        raise UnsupportedFreeSet("test sequences are built against the incoherent family only")
    rho = np.asarray(rho, dtype=np.complex128)
    relent = F.relent(rho)
    if rate < 0 or (rate > 0 and rate >= relent):
        raise RateTooHigh(f"exponent target {rate} is not below the relative entropy {relent:.6f}")
    sigma = F.dephase(rho)

    def one(n):
        rho_n = linalg.tensor_power(rho, n, cap=tol.dimension_cap)
        sigma_n = linalg.tensor_power(sigma, n, cap=tol.dimension_cap)
        test = np_test(rho_n, sigma_n, 2.0 ** (n * rate), n=n, tol=tol)
        return test, evaluate(test, rho_n, F)

    out = list(map_fn(one, range(1, n_max + 1)))
    if delta_target is not None:
        over = [rep.n for _, rep in out if rep.type1 > delta_target]
        if over:
            log.warning("type-I error exceeds %.3g at n = %s", delta_target, over)
    return out


def type2_error(test, sigma_n):
    """Type-II error ``Tr(A sigma_n)`` against one alternative."""
    return min(max(float(np.real(np.sum(test.A.T * sigma_n))), 0.0), 1.0)


def threshold_scan(rho_n, sigma_n, mus, F, n=1):
    """Errors along a grid of thresholds.

    Returns ``(type1, type2, type2_worst)`` lists.  The first is
    nondecreasing and the second nonincreasing in ``mu`` (Neyman-Pearson
    optimality at each threshold); the worst case over the free family need
    not be monotone when ``rho_n`` and ``sigma_n`` do not commute.
    """
    tests = [np_test(rho_n, sigma_n, mu, n=n) for mu in mus]
    return ([type1_error(t, rho_n) for t in tests], [type2_error(t, sigma_n) for t in tests],
            [worst_case_type2(t, F) for t in tests])


REPORT_COLUMNS = ("n", "mu", "type1", "type2_worst", "exponent")
