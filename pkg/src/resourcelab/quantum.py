"""Quantum states, operations and instruments.

States are Hermitian ``numpy`` arrays; the bipartite families used by the
distillation protocols live here too.  Local error flags are always the last
basis vector of each local space.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import linalg
from .config import DEFAULT
from .errors import DimensionMismatch, InvalidParams, InvalidState


def basis(d, i):
    v = np.zeros(d, dtype=np.complex128)
    v[i] = 1.0
    return v


def ket_to_dm(psi):
    psi = np.asarray(psi, dtype=np.complex128).reshape(-1)
    return np.outer(psi, psi.conj())


def plus_state():
    return ket_to_dm(np.ones(2) / math.sqrt(2))


def max_coherent(d):
    return ket_to_dm(np.ones(d) / math.sqrt(d))


def maximally_mixed(d):
    return np.eye(d, dtype=np.complex128) / d


def validate_state(rho, tol=None):
    """Return a canonical copy of ``rho`` or raise :class:`InvalidState`."""
    tol = DEFAULT if tol is None else tol
    try:
        H = linalg.as_hermitian(rho, tol.hermitian)
    except Exception as exc:
        raise InvalidState(str(exc)) from exc
    tr = float(np.real(np.trace(H)))
    if abs(tr - 1.0) > tol.trace:
        raise InvalidState(f"trace {tr!r} differs from 1")
    ok, lam_min = linalg.psd_check(H, tol.psd)
    if not ok:
        raise InvalidState(f"state is not PSD (min eigenvalue {lam_min:.3e})")
    return H


def dephase(rho):
    """Completely dephasing map in the computational basis."""
    rho = np.asarray(rho)
    return np.diag(np.diagonal(rho)).astype(np.complex128)


def is_pure(rho, tol=1e-10):
    rho = np.asarray(rho)
    return abs(float(np.real(np.vdot(rho, rho))) - float(np.real(np.trace(rho))) ** 2) <= tol


def pure_vector(rho):
    """State vector of a pure density matrix, read off its largest column.

    The global phase is fixed so that the largest component is real positive.
    """
    rho = np.asarray(rho)
    j = int(np.argmax(np.real(np.diagonal(rho))))
    return rho[:, j] / math.sqrt(float(np.real(rho[j, j])))


def entropy(rho, tol=None):
    """Von Neumann entropy in bits."""
    w = np.clip(linalg.hermitian_eig(rho, tol=tol).eigenvalues, 0.0, None)
    w = w[w > 1e-300]
    return float(-np.sum(w * np.log2(w)))


def fidelity(rho, sigma):
    """Squared fidelity ``||sqrt(rho) sqrt(sigma)||_1^2``."""
    rho = np.asarray(rho, dtype=np.complex128)
    sigma = np.asarray(sigma, dtype=np.complex128)
    if rho.shape != sigma.shape:
        raise DimensionMismatch(f"fidelity of shapes {rho.shape} and {sigma.shape}")
    if is_pure(sigma):
        psi = pure_vector(sigma)
        return float(np.real(np.vdot(psi, rho @ psi)))
    if is_pure(rho):
        psi = pure_vector(rho)
        return float(np.real(np.vdot(psi, sigma @ psi)))
    s = linalg.sqrtm_psd(rho)
    inner = s @ sigma @ s
    w = np.clip(linalg.hermitian_eig(inner).eigenvalues, 0.0, None)
    return float(np.sum(np.sqrt(w)) ** 2)


class SubnormalizedState(NamedTuple):
    mat: np.ndarray
    weight: float

    def normalized(self):
        if self.weight <= 0.0:
            raise InvalidState("cannot normalise a zero-weight output")
        return self.mat / self.weight


class QuantumOperation:
    """CP trace-non-increasing map in Kraus form ``X -> sum_k K X K^H``."""

    def __init__(self, kraus, in_dim=None, out_dim=None, tol=None):
        ops = [np.asarray(K, dtype=np.complex128) for K in kraus]
        if not ops:
            raise DimensionMismatch("a quantum operation needs at least one Kraus operator")
        shapes = {K.shape for K in ops}
        if len(shapes) != 1:
            raise DimensionMismatch(f"Kraus operators have mixed shapes {sorted(shapes)}")
        (out_d, in_d), = shapes
        if in_dim is not None and in_dim != in_d or out_dim is not None and out_dim != out_d:
            raise DimensionMismatch(f"Kraus shape {(out_d, in_d)} disagrees with declared dims")
        self.kraus = ops
        self.in_dim = in_d
        self.out_dim = out_d
        tol = DEFAULT if tol is None else tol
        top = linalg.eigvalsh(self.effect())[-1]
        if top > 1.0 + tol.kraus_completeness:
            raise InvalidParams(f"sum of K^H K has eigenvalue {top:.12f} > 1")

    def effect(self):
        """Heisenberg-picture image of the identity, ``sum K^H K``."""
        return sum(K.conj().T @ K for K in self.kraus)

    def apply(self, rho):
        rho = np.asarray(rho)
        if rho.shape != (self.in_dim, self.in_dim):
            raise DimensionMismatch(f"operation expects dim {self.in_dim}, got {rho.shape}")
        out = sum(K @ rho @ K.conj().T for K in self.kraus)
        return SubnormalizedState(out, float(np.real(np.trace(out))))

    def then(self, other):
        """Composition: apply ``self`` first, then ``other``."""
        return QuantumOperation([B @ A for A in self.kraus for B in other.kraus])

    def is_trace_preserving(self, tol=None):
        tol = DEFAULT.kraus_completeness if tol is None else tol
        return np.max(np.abs(self.effect() - np.eye(self.in_dim))) <= tol


class MeasurePrepare:
    """``X -> Tr(E X) * state``: measure effect ``E``, prepare ``state``.

    Completely positive for ``E >= 0``; Kraus operators are available via
    :meth:`kraus_operators` but the map is applied directly.
    """

    def __init__(self, effect, state):
        self.E = np.asarray(effect, dtype=np.complex128)
        self.state = np.asarray(state, dtype=np.complex128)
        self.in_dim = self.E.shape[0]
        self.out_dim = self.state.shape[0]

    def effect(self):
        return self.E * float(np.real(np.trace(self.state)))

    def apply(self, rho):
        rho = np.asarray(rho)
        if rho.shape != (self.in_dim, self.in_dim):
            raise DimensionMismatch(f"operation expects dim {self.in_dim}, got {rho.shape}")
        w = float(np.real(np.sum(self.E.T * rho)))
        out = w * self.state
        return SubnormalizedState(out, float(np.real(np.trace(out))))

    def kraus_operators(self):
        ew, eU = np.linalg.eigh(self.E)
        sw, sU = np.linalg.eigh(self.state)
        ops = []
        for a, u in zip(ew, eU.T):
            for b, v in zip(sw, sU.T):
                if a > 1e-14 and b > 1e-14:
                    ops.append(math.sqrt(a * b) * np.outer(v, u.conj()))
        return ops


class OperationSum:
    """Pointwise sum of CP maps with common input/output dimensions."""

    def __init__(self, parts):
        self.parts = list(parts)
        self.in_dim = self.parts[0].in_dim
        self.out_dim = self.parts[0].out_dim
        for p in self.parts:
            if (p.in_dim, p.out_dim) != (self.in_dim, self.out_dim):
                raise DimensionMismatch("summed operations must share dimensions")

    def effect(self):
        return sum(p.effect() for p in self.parts)

    def apply(self, rho):
        outs = [p.apply(rho) for p in self.parts]
        mat = sum(o.mat for o in outs)
        return SubnormalizedState(mat, float(np.real(np.trace(mat))))


def apply(op, rho):
    return op.apply(rho)


class Instrument:
    """Finite collection of CP maps whose sum is trace preserving."""

    def __init__(self, branches, tol=None):
        self.branches = list(branches)
        if not self.branches:
            raise DimensionMismatch("an instrument needs at least one branch")
        self.in_dim = self.branches[0].in_dim
        tol = DEFAULT if tol is None else tol
        total = sum(b.effect() for b in self.branches)
        dev = float(np.max(np.abs(total - np.eye(self.in_dim))))
        if dev > tol.kraus_completeness:
            raise InvalidParams(f"instrument branches do not sum to a channel (deviation {dev:.3e})")

    def apply_all(self, rho):
        return [b.apply(rho) for b in self.branches]

    def coarse_grain(self, success):
        """Two-branch instrument ``(success, failure)`` from branch indices."""
        success = set(success)
        good = [b for i, b in enumerate(self.branches) if i in success]
        bad = [b for i, b in enumerate(self.branches) if i not in success]
        return Instrument([OperationSum(good), OperationSum(bad)])

    def channel(self):
        return OperationSum(self.branches)


def depolarizing_kraus(p):
    """Qubit depolarising channel ``rho -> (1-p) rho + p I/2``."""
    if not 0.0 <= p <= 4.0 / 3.0:
        raise InvalidParams("depolarising parameter out of range")
    I = np.eye(2)
    X = np.array([[0, 1], [1, 0]])
    Y = np.array([[0, -1j], [1j, 0]])
    Z = np.diag([1.0, -1.0])
    return [math.sqrt(1 - 3 * p / 4) * I] + [math.sqrt(p / 4) * P for P in (X, Y, Z)]


def local_operation(kraus_a, dim_b):
    """Kraus operators acting on the first factor of ``A (x) B``."""
    return QuantumOperation([np.kron(K, np.eye(dim_b)) for K in kraus_a])


# --- bipartite families -------------------------------------------------


def max_entangled(d):
    """Projector onto ``(1/sqrt d) sum_i |ii>``."""
    if d < 2:
        raise InvalidParams("maximally entangled state needs local dimension >= 2")
    psi = np.zeros(d * d, dtype=np.complex128)
    psi[[i * d + i for i in range(d)]] = 1.0 / math.sqrt(d)
    return ket_to_dm(psi)


def tau_state(d):
    """``(I - Phi_d) / (d^2 - 1)``, the normalised complement of ``Phi_d``."""
    return (np.eye(d * d) - max_entangled(d)) / (d * d - 1)


def isotropic(d, fid):
    return fid * max_entangled(d) + (1.0 - fid) * tau_state(d)


def pair_regroup_permutation(m):
    """Index map from pairwise order ``A1 B1 A2 B2 ...`` to ``A1..Am B1..Bm``.

    ``perm[j]`` is the position in the grouped ordering of pairwise basis
    index ``j`` (qubit 1 most significant in both).
    """
    n = 2 * m
    perm = np.empty(4**m, dtype=int)
    for j in range(4**m):
        bits = [(j >> (n - 1 - b)) & 1 for b in range(n)]
        a_bits = bits[0::2]
        b_bits = bits[1::2]
        a = int("".join(map(str, a_bits)) or "0", 2)
        b = int("".join(map(str, b_bits)) or "0", 2)
        perm[j] = a * 2**m + b
    return perm


def regroup_pairs(rho, m):
    """Reorder an operator on ``(A1 B1)...(Am Bm)`` into ``(A1..Am)(B1..Bm)``."""
    perm = pair_regroup_permutation(m)
    out = np.zeros_like(rho)
    out[np.ix_(perm, perm)] = rho
    return out


def isotropic_twirl(rho, d):
    """Project a bipartite ``d x d`` state onto the isotropic family.

    Equals the ``U (x) U*`` twirl: fidelity with ``Phi_d`` is preserved.
    """
    rho = np.asarray(rho)
    if rho.shape != (d * d, d * d):
        raise DimensionMismatch(f"twirl needs a {d}x{d} bipartite operator, got {rho.shape}")
    phi = max_entangled(d)
    fid = float(np.real(np.sum(phi.T * rho)))
    tr = float(np.real(np.trace(rho)))
    return fid * phi + (tr - fid) * tau_state(d)


@dataclass(frozen=True)
class FlaggedIsotropicParams:
    """Parameters ``(m, eps, delta)`` of the flagged isotropic state."""

    m: int
    eps: float
    delta: float

    def __post_init__(self):
        if not isinstance(self.m, (int, np.integer)) or self.m < 0:
            raise InvalidParams(f"m must be a non-negative integer, got {self.m!r}")
        for name in ("eps", "delta"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise InvalidParams(f"{name} must lie in [0, 1], got {v!r}")
        if self.eps + self.delta > 1.0 + 1e-12:
            raise InvalidParams(f"eps + delta = {self.eps + self.delta!r} exceeds 1")
        if self.m == 0 and self.eps > 0.0:
            raise InvalidParams("eps must vanish when m = 0")

    @property
    def local_dim(self):
        return 2**self.m + 1

    @property
    def success_weight(self):
        return 1.0 - self.eps - self.delta

    def to_dict(self):
        return {"m": int(self.m), "eps": float(self.eps), "delta": float(self.delta)}

    @classmethod
    def from_dict(cls, obj):
        unknown = set(obj) - {"m", "eps", "delta"}
        if unknown:
            raise InvalidParams(f"unknown keys {sorted(unknown)}")
        return cls(int(obj["m"]), float(obj["eps"]), float(obj["delta"]))


def embed_pair_block(X, m):
    """Embed an operator on ``C^{2^m} (x) C^{2^m}`` into the flagged space."""
    D = 2**m
    L = D + 1
    idx = np.array([a * L + b for a in range(D) for b in range(D)])
    out = np.zeros((L * L, L * L), dtype=np.complex128)
    out[np.ix_(idx, idx)] = X
    return out


def flag_projector(m):
    L = 2**m + 1
    out = np.zeros((L * L, L * L), dtype=np.complex128)
    e = L * L - 1
    out[e, e] = 1.0
    return out


def _phi_power(m):
    return np.ones((1, 1), dtype=np.complex128) if m == 0 else max_entangled(2**m)


def flagged_isotropic(p):
    """``(1-eps-delta) Phi_2^{(x)m} + eps tau_{2^m} + delta |ee><ee|``."""
    out = p.success_weight * embed_pair_block(_phi_power(p.m), p.m)
    if p.eps > 0.0:
        out = out + p.eps * embed_pair_block(tau_state(2**p.m), p.m)
    return out + p.delta * flag_projector(p.m)


def flagged_isotropic_white(p):
    """Same state expanded over ``Phi`` and the white-noise ``(I/4)^{(x)m}``."""
    D2 = 4**p.m
    w = p.eps / (1.0 - 4.0 ** (-p.m)) if p.m > 0 else 0.0
    out = (1.0 - w - p.delta) * embed_pair_block(_phi_power(p.m), p.m)
    out = out + w * embed_pair_block(np.eye(D2) / D2, p.m)
    return out + p.delta * flag_projector(p.m)


def isotropic_noisy(m, eps):
    """``(1-eps) Phi_2^{(x)m} + eps tau_{2^m}`` on the unflagged space."""
    return (1.0 - eps) * max_entangled(2**m) + eps * tau_state(2**m)


# --- random sampling (tests, selftest, experiments) -----------------------


def random_unitary(d, rng):
    Z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / math.sqrt(2)
    Q, R = np.linalg.qr(Z)
    return Q * (np.diagonal(R) / np.abs(np.diagonal(R)))


def random_pure(d, rng):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return ket_to_dm(v / np.linalg.norm(v))


def random_density_matrix(d, rng, rank=None):
    rank = d if rank is None else rank
    G = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = G @ G.conj().T
    return rho / np.real(np.trace(rho))


def random_diagonal_state(d, rng):
    p = rng.dirichlet(np.ones(d))
    return np.diag(p).astype(np.complex128)


def random_cptni(d_in, d_out, rng, n_kraus=3, scale=None):
    """Random Kraus map with ``sum K^H K <= I``.

    ``scale`` in (0, 1] fixes the largest eigenvalue of ``sum K^H K``;
    by default it is drawn uniformly from [0.3, 1].
    """
    ops = [rng.normal(size=(d_out, d_in)) + 1j * rng.normal(size=(d_out, d_in)) for _ in range(n_kraus)]
    top = np.linalg.eigvalsh(sum(K.conj().T @ K for K in ops))[-1]
    s = rng.uniform(0.3, 1.0) if scale is None else scale
    factor = math.sqrt(s / top) * (1 - 1e-12)
    return QuantumOperation([factor * K for K in ops])

