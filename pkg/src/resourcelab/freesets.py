"""Free-state families and the resource measures built on them.

Two concrete families are provided:

* :class:`IncoherentFreeSet` -- diagonal states in the computational basis.
  Everything is computable: max-relative entropy via a structured convex
  program with certified duality gap, relative entropy in closed form.
* :class:`FlaggedIsotropicFreeSet` -- separable states restricted to the
  flagged isotropic family, where the max-relative entropy has a closed form
  with matching primal and dual certificates.

All entropic quantities are in bits.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels, linalg, quantum
from .config import DEFAULT
from .errors import FreeInput, SolverNotConverged, UnsupportedFreeSet, ZeroProbability

log = logging.getLogger(__name__)


class DmaxResult(NamedTuple):
    """Max-relative entropy with its certificate.

    ``lam`` is a feasible value (``rho <= lam * sigma``), ``lower`` a dual
    lower bound on the optimum; ``gap`` is ``log2(lam / lower)``.
    """

    dmax: float
    sigma: np.ndarray
    lam: float
    lower: float
    gap: float
    witness: np.ndarray = None
    converged: bool = True

    @property
    def robustness(self):
        return self.lam - 1.0

    @property
    def robustness_lower(self):
        return max(self.lower - 1.0, 0.0)


class RobustnessDecomposition(NamedTuple):
    lam: float
    sigma: np.ndarray
    pi: np.ndarray


class FreeSetFamily(ABC):
    """A family ``F_n`` of free states on ``n`` copies of a local system."""

    local_dim: int

    def dim(self, n=1):
        return self.local_dim**n

    @abstractmethod
    def is_free(self, rho, n=1):
        ...

    @abstractmethod
    def dephase(self, rho):
        """Canonical free-structure projection of ``rho``."""

    @abstractmethod
    def dmax(self, rho, strict=True, tol=None):
        """Solve ``min lambda s.t. rho <= lambda sigma, sigma free``."""

    def relent(self, rho):
        raise UnsupportedFreeSet(f"{type(self).__name__} has no closed-form relative entropy")

    def regularized_relent(self, rho):
        raise UnsupportedFreeSet(f"{type(self).__name__} has no closed-form regularised relative entropy")

    def free_vertices(self, n=1):
        raise UnsupportedFreeSet(f"{type(self).__name__} does not enumerate free vertices")

    def random_free_state(self, n, rng):
        raise UnsupportedFreeSet(f"{type(self).__name__} cannot sample free states")


def _simplex_projection(v):
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, len(v) + 1)
    cond = u - css / idx > 0
    k = idx[cond][-1]
    return np.maximum(v - css[k - 1] / k, 0.0)


def _lambda_for_weights(rho, p, tol):
    """Smallest ``lam`` with ``lam * diag(p) >= rho`` (``p > 0``)."""
    inv = 1.0 / np.sqrt(p)
    M = rho * np.outer(inv, inv)
    return float(linalg.hermitian_eig(M, tol=tol).eigenvalues[-1])


def _burer_monteiro_rank(d):
    return min(d, int(math.ceil(math.sqrt(2 * d))) + 1)


class IncoherentFreeSet(FreeSetFamily):
    """Diagonal (incoherent) states of a ``d``-level system and its copies."""

    def __init__(self, local_dim=2):
        if local_dim < 2:
            raise ValueError("local dimension must be at least 2")
        self.local_dim = int(local_dim)

    def __repr__(self):
        return f"IncoherentFreeSet(local_dim={self.local_dim})"

    def is_free(self, rho, n=1, tol=None):
        tol = DEFAULT.diagonal if tol is None else tol
        rho = np.asarray(rho)
        if rho.shape != (self.dim(n), self.dim(n)):
            return False
        off = rho - np.diag(np.diagonal(rho))
        return bool(np.max(np.abs(off)) <= tol) if off.size else True

    def dephase(self, rho):
        return quantum.dephase(rho)

    def free_vertices(self, n=1):
        d = self.dim(n)
        for i in range(d):
            v = np.zeros((d, d), dtype=np.complex128)
            v[i, i] = 1.0
            yield v

    def random_free_state(self, n, rng):
        return quantum.random_diagonal_state(self.dim(n), rng)

    # -- max-relative entropy ------------------------------------------------

    def dmax(self, rho, strict=True, tol=None, method="mixing", seed=0):
        """Max-relative entropy of coherence with a certified gap.

        Solves ``min sum(s) s.t. diag(s) >= rho``; the dual is
        ``max Tr(rho W) s.t. W >= 0, W_ii <= 1``.  Pure states are handled in
        closed form.  ``method="mixing"`` runs row-wise coordinate ascent on a
        low-rank factorisation of ``W``; ``method="bisection"`` bisects on
        ``sum(s)`` and tests feasibility by projected subgradient.
        """
        tol = DEFAULT if tol is None else tol
        rho = linalg.as_hermitian(rho, tol.hermitian)
        d = rho.shape[0]
        diag = np.real(np.diagonal(rho))
        support = np.flatnonzero(diag > 1e-15)
        sub = rho[np.ix_(support, support)]
        off = sub - np.diag(np.diagonal(sub))
        if off.size == 0 or np.max(np.abs(off)) <= tol.diagonal:
            sigma = np.diag(diag / diag.sum()).astype(np.complex128)
            return DmaxResult(0.0, sigma, 1.0, 1.0, 0.0, np.eye(d, dtype=np.complex128))
        if quantum.is_pure(rho):
            res = _dmax_pure(rho, support)
        elif method == "mixing":
            res = _dmax_mixing(sub, tol, seed)
        elif method == "bisection":
            res = _dmax_bisection(sub, tol)
        else:
            raise ValueError(f"unknown dmax method {method!r}")
        lam, lower, p, W, converged = res
        s_full = np.zeros(d)
        s_full[support] = p
        W_full = np.zeros((d, d), dtype=np.complex128)
        W_full[np.ix_(support, support)] = W
        lower = min(lower, lam)
        gap = math.log2(lam / lower) if lower > 0 else math.inf
        if strict and not converged:
            raise SolverNotConverged(
                f"dmax gap {gap:.3e} bits above tolerance {tol.solver_gap:.1e}", lower=lower, upper=lam
            )
        sigma = np.diag(s_full).astype(np.complex128)
        return DmaxResult(math.log2(lam), sigma, lam, lower, gap, W_full, converged)

    def relent(self, rho):
        """Relative entropy of coherence, ``S(dephase(rho)) - S(rho)``."""
        rho = np.asarray(rho)
        d = np.clip(np.real(np.diagonal(rho)), 0.0, None)
        d = d[d > 1e-300]
        s_diag = float(-np.sum(d * np.log2(d)))
        return max(s_diag - quantum.entropy(rho), 0.0)

    def regularized_relent(self, rho):
        # additive on tensor powers for this family
        return self.relent(rho)


def _dmax_pure(rho, support):
    psi = quantum.pure_vector(rho)[support]
    amp = np.abs(psi)
    total = float(amp.sum())
    lam = total * total
    p = amp / total
    phases = np.where(amp > 0, psi / np.where(amp > 0, amp, 1.0), 0.0)
    W = np.outer(phases, phases.conj())
    lower = float(np.real(np.vdot(phases, rho[np.ix_(support, support)] @ phases)))
    return lam, lower, p, W, True


def _dmax_mixing(rho, tol, seed):
    d = rho.shape[0]
    r = _burer_monteiro_rank(d)
    rng = np.random.default_rng(seed)
    V = rng.normal(size=(d, r)) + 1j * rng.normal(size=(d, r))
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    diag = np.real(np.diagonal(rho))
    best_upper, best_p = math.inf, None
    best_lower, best_W = 0.0, None
    done = 0
    batch = 25
    converged = False
    while done < tol.solver_max_iter:
        _, sweeps, fields = _kernels.mixing_ascent(rho, V, min(batch, tol.solver_max_iter - done), 0.0)
        done += sweeps
        V /= np.linalg.norm(V, axis=1, keepdims=True)
        W = V @ V.conj().T
        lower = float(np.real(np.sum(rho.T * W)))
        if lower > best_lower:
            best_lower, best_W = lower, W
        s = diag + fields
        p = s / s.sum()
        upper = _lambda_for_weights(rho, p, tol)
        if upper < best_upper:
            best_upper, best_p = upper, p
        if math.log2(best_upper / best_lower) <= tol.solver_gap:
            converged = True
            break
        batch = min(2 * batch, 400)
    return best_upper, best_lower, best_p, best_W, converged


def _dmax_bisection(rho, tol, inner_iter=300):
    """Bisection on ``sum(s)`` with a projected-subgradient feasibility test.

    Every minimum eigenvector met along the way yields a rank-one dual
    certificate ``x x^H / max|x_i|^2``; the certified lower bound is the best
    of these.  The bisection's own lower end is only heuristic (a failed
    inner search is not a proof of infeasibility), so convergence is judged
    on the certified gap.
    """
    d = rho.shape[0]
    hi_p = np.full(d, 1.0 / d)
    hi = _lambda_for_weights(rho, hi_p, tol)
    cert = {"lo": 0.0, "W": None}

    def certify(x):
        peak = float(np.max(np.abs(x) ** 2))
        if peak <= 0.0:
            return
        val = float(np.real(np.vdot(x, rho @ x))) / peak
        if val > cert["lo"]:
            cert["lo"], cert["W"] = val, np.outer(x, x.conj()) / peak

    certify(np.ones(d, dtype=np.complex128))
    _, U = linalg.hermitian_eig(rho / np.sqrt(np.outer(hi_p, hi_p)), tol=tol)
    certify(U[:, -1] / np.sqrt(hi_p))
    bis_lo = max(cert["lo"], 1.0)
    iters = 0
    while iters < tol.solver_max_iter and math.log2(hi / bis_lo) > tol.solver_gap:
        lam = 0.5 * (bis_lo + hi)
        q = hi_p.copy()
        feasible = False
        for j in range(inner_iter):
            w, U = linalg.hermitian_eig(lam * np.diag(q) - rho, tol=tol)
            x = U[:, 0]
            certify(x)
            if w[0] >= 0.0:
                feasible = True
                break
            q = _simplex_projection(q + lam * np.abs(x) ** 2 / (j + 1))
            q = np.maximum(q, 1e-15)
            q /= q.sum()
        iters += j + 1
        if feasible:
            hi, hi_p = _lambda_for_weights(rho, q, tol), q
        else:
            bis_lo = lam
    lo = cert["lo"]
    converged = lo > 0.0 and math.log2(hi / lo) <= tol.solver_gap
    return hi, lo, hi_p, cert["W"], converged


def dmax_to_freeset(rho, F, strict=True, tol=None, **kwargs):
    """Max-relative entropy of ``rho`` with respect to the free family ``F``."""
    if not isinstance(F, FreeSetFamily):
        raise UnsupportedFreeSet(f"{F!r} is not a FreeSetFamily")
    return F.dmax(rho, strict=strict, tol=tol, **kwargs)


def robustness_decomposition(rho, F, tol=None):
    """Return ``(lam, sigma, pi)`` with ``rho + (lam - 1) pi = lam sigma``.

    Raises :class:`FreeInput` when ``lam`` is 1 within tolerance.
    """
    tol = DEFAULT if tol is None else tol
    res = dmax_to_freeset(rho, F, tol=tol)
    lam = res.lam
    if lam <= 1.0 + tol.free_lambda:
        raise FreeInput("state is free; no resource component to split off")
    rho = np.asarray(rho, dtype=np.complex128)
    pi = (lam * res.sigma - rho) / (lam - 1.0)
    pi = 0.5 * (pi + pi.conj().T)
    return RobustnessDecomposition(lam, res.sigma, pi)


def tensor_decomposition(dec, n):
    """Feasible decomposition for ``rho^{(x)n}`` from a single-copy one.

    ``rho <= lam sigma`` implies ``rho^{(x)n} <= lam^n sigma^{(x)n}``; the
    value is exact whenever the single-copy robustness is multiplicative,
    e.g. for pure states of the incoherent family.
    """
    rho = dec.lam * dec.sigma - (dec.lam - 1.0) * dec.pi
    lam_n = dec.lam**n
    sigma_n = linalg.tensor_power(dec.sigma, n)
    rho_n = linalg.tensor_power(rho, n)
    pi_n = (lam_n * sigma_n - rho_n) / (lam_n - 1.0)
    return RobustnessDecomposition(lam_n, sigma_n, 0.5 * (pi_n + pi_n.conj().T))


# -- smoothing ---------------------------------------------------------------


class SmoothedBound(NamedTuple):
    value: float
    tag: str
    candidate: str
    candidates: dict


def smoothed_dmax_upper(rho, F, eps, n=1, strategy="all", tol=None):
    """Upper bound on the smoothed max-relative entropy of ``rho^{(x)n}``.

    Candidates within trace distance ``eps``: the segment towards the
    dephased state, eigenvalue truncation of the tensor power, and
    truncation followed by the remaining dephasing budget.  The minimum over
    the candidates is returned; this is a bound, not the exact value.
    """
    if not 0.0 <= eps < 1.0:
        raise ValueError("smoothing parameter must lie in [0, 1)")
    tol = DEFAULT if tol is None else tol
    rho_n = linalg.tensor_power(np.asarray(rho, dtype=np.complex128), n)
    cands = {"none": F.dmax(rho_n, strict=False, tol=tol).dmax}
    if eps > 0.0:
        if strategy in ("all", "dephase"):
            cands["dephase"] = _dephase_candidate(rho_n, F, eps, tol)
        if strategy in ("all", "truncate"):
            trunc = _truncation(rho_n, eps, tol)
            if trunc is not None:
                rho_t, used = trunc
                cands["truncate"] = F.dmax(rho_t, strict=False, tol=tol).dmax
                if strategy == "all" and eps - used > 0.0:
                    cands["truncate+dephase"] = _dephase_candidate(rho_t, F, eps - used, tol)
    name = min(cands, key=lambda k: (cands[k], k))
    return SmoothedBound(max(cands[name], 0.0), "bound-only", name, cands)


def _dephase_candidate(rho, F, budget, tol):
    target = F.dephase(rho)
    T = linalg.trace_distance(rho, target)
    if T <= budget:
        return F.dmax(target, strict=False, tol=tol).dmax
    t = budget / T
    return F.dmax((1.0 - t) * rho + t * target, strict=False, tol=tol).dmax


def _truncation(rho, eps, tol):
    w, U = linalg.hermitian_eig(rho, tol=tol)
    w = np.clip(w, 0.0, None)
    cum = np.cumsum(w)
    drop = int(np.searchsorted(cum, eps, side="right"))
    drop = min(drop, len(w) - 1)
    if drop == 0:
        return None
    used = float(cum[drop - 1])
    keep = U[:, drop:]
    rho_t = (keep * w[drop:]) @ keep.conj().T / (1.0 - used)
    return rho_t, used


def relent_to_freeset(rho, F):
    return F.relent(rho)


# -- resource non-generation -----------------------------------------------


@dataclass
class Witness:
    probe: str
    robustness: float
    state: np.ndarray = field(default=None, repr=False)


@dataclass
class RngCertificate:
    """Measured resource generation of an operation on free inputs.

    ``delta_measured`` is the maximum over probes of a certified lower bound
    on the generalised robustness of the normalised output, hence a lower
    bound on the supremum over all free inputs.  ``analytic_bound`` is an
    upper bound on that supremum when one is known.
    """

    delta_measured: float
    witnesses: list
    method: str
    analytic_bound: float = None
    skipped: list = field(default_factory=list)

    def to_dict(self):
        return {
            "delta": self.delta_measured,
            "method": self.method,
            "analytic_bound": self.analytic_bound,
            "witnesses": [{"probe": w.probe, "robustness": w.robustness} for w in self.witnesses],
            "skipped": list(self.skipped),
        }


def certify_rng(op, F, n_in=1, n_out=1, samples=0, seed=0, extra_probes=(), analytic_bound=None,
                tol=None, bound="lower", F_out=None, vertices=True):
    """Probe ``op`` on free states and record the robustness it generates.

    Probes are the computational free vertices of ``F`` at ``n_in`` copies
    (unless ``vertices`` is false), ``samples`` random free mixtures and any
    ``extra_probes`` supplied by the caller.  Outputs are measured against
    ``F_out`` (default ``F``) at ``n_out`` copies.  ``bound`` selects the
    certified lower (default) or upper value of each output robustness.
    """
    tol = DEFAULT if tol is None else tol
    F_out = F if F_out is None else F_out
    if op.in_dim != F.dim(n_in) or op.out_dim != F_out.dim(n_out):
        raise ValueError(f"operation dims {(op.in_dim, op.out_dim)} do not match free families at "
                         f"({n_in}, {n_out}) copies")
    rng = np.random.default_rng(seed)
    probes = [(f"vertex:{i}", v) for i, v in enumerate(F.free_vertices(n_in))] if vertices else []
    probes += [(f"sample:{j}", F.random_free_state(n_in, rng)) for j in range(samples)]
    probes += [(f"extra:{j}", np.asarray(s)) for j, s in enumerate(extra_probes)]
    cache = {}
    witnesses, skipped = [], []
    for label, sigma in probes:
        out = op.apply(sigma)
        if out.weight <= 1e-14:
            log.info("probe %s annihilated by operation; skipped", label)
            skipped.append(label)
            continue
        state = out.normalized()
        key = np.round(state, 12).tobytes()
        if key not in cache:
            res = F_out.dmax(state, strict=False, tol=tol)
            cache[key] = res.robustness_lower if bound == "lower" else res.robustness
        witnesses.append(Witness(label, cache[key], sigma))
    if not witnesses:
        raise ZeroProbability("operation annihilated every probe")
    delta = max(w.robustness for w in witnesses)
    method = "vertex-scan" if vertices and samples == 0 and not extra_probes else "sampled"
    return RngCertificate(delta, witnesses, method, analytic_bound, skipped)


# -- flagged isotropic family ------------------------------------------------


class FlaggedIsotropicFreeSet(FreeSetFamily):
    """Separable states, evaluated on the flagged isotropic family.

    For ``omega(m, eps, delta)`` with ``D = 2^m`` the optimum of
    ``min lam s.t. omega <= lam sigma, sigma separable`` is
    ``max(1, D (1 - eps - delta) + delta)``.  The primal point mixes the
    separable isotropic state of fidelity ``1/D`` with ``|ee><ee|``; the dual
    witness ``D Phi_D + |ee><ee|`` has expectation at most one on every
    product state.  Inputs outside the family are rejected.
    """

    def __init__(self, m):
        self.m = int(m)
        self.local_dim = (2**self.m + 1) ** 2

    def __repr__(self):
        return f"FlaggedIsotropicFreeSet(m={self.m})"

    def identify(self, rho, tol=1e-10):
        """Recover ``(m, eps, delta)`` from a state of the family."""
        rho = np.asarray(rho)
        if rho.shape != (self.local_dim, self.local_dim):
            raise UnsupportedFreeSet(f"expected dim {self.local_dim}, got {rho.shape}")
        delta = float(np.real(rho[-1, -1]))
        phi = quantum.embed_pair_block(quantum._phi_power(self.m), self.m)
        fid = float(np.real(np.sum(phi.T * rho)))
        eps = min(max(1.0 - delta - fid, 0.0), 1.0)
        params = quantum.FlaggedIsotropicParams(self.m, eps, min(max(delta, 0.0), 1.0 - eps))
        if np.max(np.abs(quantum.flagged_isotropic(params) - rho)) > tol:
            raise UnsupportedFreeSet("state is outside the flagged isotropic family")
        return params

    def lam_closed_form(self, params):
        return max(1.0, 2**params.m * params.success_weight + params.delta)

    def witness(self):
        D = 2**self.m
        W = quantum.flag_projector(self.m)
        if self.m:
            W = W + D * quantum.embed_pair_block(quantum.max_entangled(D), self.m)
        return W

    def is_free(self, rho, n=1):
        return self.lam_closed_form(self.identify(rho)) <= 1.0

    def dephase(self, rho):
        p = self.identify(rho)
        D = 2**p.m
        if p.delta >= 1.0 or p.success_weight <= (1.0 - p.delta) / D:
            return np.asarray(rho, dtype=np.complex128)
        eps = (1.0 - p.delta) * (1.0 - 1.0 / D)
        return quantum.flagged_isotropic(quantum.FlaggedIsotropicParams(p.m, eps, p.delta))

    def dmax(self, rho, strict=True, tol=None):
        p = self.identify(rho)
        lam = self.lam_closed_form(p)
        W = self.witness()
        if lam <= 1.0:
            return DmaxResult(0.0, np.asarray(rho, dtype=np.complex128), 1.0, 1.0, 0.0,
                              np.eye(self.local_dim, dtype=np.complex128))
        D = 2**p.m
        sep = quantum.embed_pair_block(quantum.isotropic(D, 1.0 / D), p.m)
        sigma = (D * p.success_weight * sep + p.delta * quantum.flag_projector(p.m)) / lam
        lower = float(np.real(np.sum(W.T * rho)))
        lower = min(lower, lam)
        return DmaxResult(math.log2(lam), sigma, lam, lower, math.log2(lam / lower), W)


def monotonicity_slack(rho, op, F, delta, F_out=None, tol=None):
    """Slack of probabilistic max-relative-entropy monotonicity at zero smoothing.

    Returns ``dmax(rho) - [dmax(E(rho)/Tr E(rho)) + log2 Tr E(rho) - log2(1 + delta)]``,
    which is non-negative whenever ``op`` generates at most ``delta``
    robustness from the optimal free state of ``rho``.  The input value uses
    the certified upper bound and the output value the certified lower
    bound, so a negative result cannot come from solver slack.
    """
    F_out = F if F_out is None else F_out
    out = op.apply(rho)
    if out.weight <= 0.0:
        raise ZeroProbability("operation annihilates the input")
    d_in = F.dmax(rho, tol=tol).dmax
    d_out = math.log2(max(F_out.dmax(out.normalized(), tol=tol).lower, 1.0))
    return d_in - (d_out + math.log2(out.weight) - math.log2(1.0 + delta))


__all__ = [
    "DmaxResult", "RobustnessDecomposition", "FreeSetFamily", "IncoherentFreeSet", "FlaggedIsotropicFreeSet",
    "dmax_to_freeset", "robustness_decomposition", "tensor_decomposition", "smoothed_dmax_upper",
    "SmoothedBound", "relent_to_freeset", "RngCertificate", "Witness", "certify_rng", "monotonicity_slack",
]
