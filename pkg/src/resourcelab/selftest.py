"""Fast invariant checks runnable from the command line.

Each check takes the active :class:`~resourcelab.config.Tolerances` and a
seeded generator, returns a short detail string, and raises
``AssertionError`` on failure.
"""

import math
from typing import NamedTuple

import numpy as np

from . import arng, distillation, freesets, linalg, quantum, rates, stein
from .quantum import FlaggedIsotropicParams

CHECKS = {}


def check(name):
    def register(fn):
        CHECKS[name] = fn
        return fn

    return register


class CheckResult(NamedTuple):
    name: str
    ok: bool
    detail: str


@check("config.tolerances")
def _tolerances(tol, rng):
    try:
        tol.validate()
    except ValueError as exc:
        raise AssertionError(str(exc)) from None
    return "all fields in range"


@check("linalg.eig_reconstruction")
def _eig(tol, rng):
    worst = 0.0
    for d in (2, 5, 16, 40):
        M = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        M = M + M.conj().T
        worst = max(worst, float(np.max(np.abs(linalg.hermitian_eig(M, method="jacobi", tol=tol).reconstruct() - M))))
    assert worst <= tol.eig_reconstruction, f"reconstruction error {worst:.2e}"
    return f"max error {worst:.1e}"


@check("linalg.partial_trace")
def _ptrace(tol, rng):
    a = quantum.random_density_matrix(2, rng)
    b = quantum.random_density_matrix(3, rng)
    err = np.max(np.abs(linalg.partial_trace(np.kron(a, b), [2, 3], [0]) - a))
    assert err < 1e-12, f"partial trace error {err:.2e}"
    return f"error {err:.1e}"


@check("freesets.dmax_closed_forms")
def _dmax_closed(tol, rng):
    F = freesets.IncoherentFreeSet(2)
    plus = F.dmax(quantum.plus_state(), tol=tol).dmax
    qutrit = freesets.IncoherentFreeSet(3).dmax(quantum.max_coherent(3), tol=tol).dmax
    assert abs(plus - 1.0) < 1e-9 and abs(qutrit - math.log2(3)) < 1e-9, (plus, qutrit)
    return f"plus {plus:.9f}, qutrit {qutrit:.9f}"


@check("freesets.dmax_certified_gap")
def _dmax_gap(tol, rng):
    worst = 0.0
    for d in (3, 6, 12):
        res = freesets.IncoherentFreeSet(d).dmax(quantum.random_density_matrix(d, rng), tol=tol)
        worst = max(worst, res.gap)
    return f"worst gap {worst:.1e} bits"


@check("freesets.dmax_above_relent")
def _dmax_relent(tol, rng):
    F = freesets.IncoherentFreeSet(4)
    worst = math.inf
    for _ in range(20):
        rho = quantum.random_density_matrix(4, rng)
        worst = min(worst, F.dmax(rho, tol=tol).dmax - F.relent(rho))
    assert worst >= -1e-9, f"dmax below relent by {-worst:.2e}"
    return f"min margin {worst:.3e}"


@check("freesets.relent_additivity")
def _relent_add(tol, rng):
    F = freesets.IncoherentFreeSet(2)
    rho = quantum.random_density_matrix(2, rng)
    one = F.relent(rho)
    err = max(abs(F.relent(linalg.tensor_power(rho, n)) - n * one) for n in (2, 3))
    assert err <= 1e-8, f"additivity error {err:.2e}"
    return f"error {err:.1e}"


@check("freesets.flagged_certificate")
def _flagged(tol, rng):
    p = FlaggedIsotropicParams(2, 0.1, 0.05)
    res = freesets.FlaggedIsotropicFreeSet(2).dmax(quantum.flagged_isotropic(p))
    assert abs(res.lam - 3.45) < 1e-12 and res.gap < 1e-12, res.lam
    return f"lambda {res.lam:.12f}"


@check("stein.threshold_monotone")
def _stein_mono(tol, rng):
    F = freesets.IncoherentFreeSet(4)
    rho = quantum.random_density_matrix(4, rng)
    t1, t2, _ = stein.threshold_scan(rho, F.dephase(rho), np.linspace(0, 4, 21), F)
    assert all(b >= a - 1e-12 for a, b in zip(t1, t1[1:])), "type-I error not monotone"
    assert all(b <= a + 1e-12 for a, b in zip(t2, t2[1:])), "type-II error not monotone"
    return "21 thresholds"


@check("stein.worst_case_exact")
def _stein_exact(tol, rng):
    F = freesets.IncoherentFreeSet(4)
    B = quantum.random_density_matrix(4, rng)
    A = stein.TestOperator(B / linalg.eigvalsh(B)[-1], 1)
    best = max(float(np.real(np.trace(quantum.random_diagonal_state(4, rng) @ A.A))) for _ in range(2000))
    exact = stein.worst_case_type2(A, F)
    assert best <= exact + 1e-12, "sampled state beats the basis maximum"
    return f"exact {exact:.6f} >= sampled {best:.6f}"


@check("protocols.kraus_vs_closed_form")
def _kraus(tol, rng):
    worst = 0.0
    for step in (distillation.DistillStep.type2(1), distillation.DistillStep.type1(0.4)):
        worst = max(worst, distillation.kraus_residual(FlaggedIsotropicParams(2, 0.1, 0.05), step))
    assert worst <= 1e-10, f"residual {worst:.2e}"
    return f"residual {worst:.1e}"


@check("protocols.conservation")
def _conservation(tol, rng):
    p = FlaggedIsotropicParams(12, 0.2, 0.1)
    chain = [distillation.DistillStep.type2(1), distillation.DistillStep.type1(0.5)] * 3
    for row in distillation.invariant_track(chain, p)[1:]:
        assert abs(row.change) <= row.change_bound + 1e-15, f"step {row.index} drift {row.change:.2e}"
    return f"{len(chain)} steps within bounds"


@check("protocols.conversion_bounds")
def _arng(tol, rng):
    pipe = arng.ArngPipeline(quantum.plus_state(), quantum.plus_state(), chi=0.3, tol=tol)
    recs = [pipe.run(n, 0.9) for n in range(2, 7)]
    bad = [r.n for r in recs if not r.bounds_hold(tol.bound_slack)]
    assert not bad, f"bounds violated at n={bad}"
    return f"{len(recs)} records"


@check("protocols.probabilistic_monotonicity")
def _monotonicity(tol, rng):
    F = freesets.IncoherentFreeSet(2)
    worst = math.inf
    for _ in range(5):
        rho = quantum.random_density_matrix(2, rng)
        op = quantum.random_cptni(2, 2, rng)
        sigma = F.dmax(rho, tol=tol).sigma
        cert = freesets.certify_rng(op, F, extra_probes=[sigma], tol=tol, bound="upper")
        worst = min(worst, freesets.monotonicity_slack(rho, op, F, cert.delta_measured, tol=tol))
    assert worst >= -1e-6, f"slack {worst:.2e}"
    return f"min slack {worst:.3e}"


@check("rates.self_conversion")
def _rate(tol, rng):
    est = rates.estimate_probabilistic_rate(quantum.plus_state(), quantum.plus_state(), n_max=6, tol=tol)
    assert abs(est.achieved_rate - 1.0) <= 0.1, est.achieved_rate
    return f"rate {est.achieved_rate:.2f}"


def run(tol, seed=0, names=None):
    results = []
    for name, fn in CHECKS.items():
        if names and name not in names:
            continue
        rng = np.random.default_rng(seed)
        if name != "config.tolerances" and results and not results[0].ok and results[0].name == "config.tolerances":
            results.append(CheckResult(name, False, "skipped: invalid tolerances"))
            continue
        try:
            detail = fn(tol, rng)
            results.append(CheckResult(name, True, detail))
        except AssertionError as exc:
            results.append(CheckResult(name, False, str(exc) or "assertion failed"))
        except Exception as exc:  # report, never crash the matrix
            results.append(CheckResult(name, False, f"{type(exc).__name__}: {exc}"))
    return results
