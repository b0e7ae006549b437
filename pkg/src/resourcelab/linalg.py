"""Dense complex linear algebra for exact small-scale quantum simulation.

Matrices are plain ``numpy`` complex arrays.  Hermitian inputs are checked
and canonicalised (upper triangle authoritative) by :func:`as_hermitian`.
"""

import math
from typing import NamedTuple

import numpy as np

from . import _kernels
from .config import DEFAULT
from .errors import DimensionMismatch, DimensionOverflow, DomainError, NonHermitianInput


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self):
        U = self.eigenvectors
        return (U * self.eigenvalues) @ U.conj().T


def as_hermitian(M, tol=None):
    """Validate Hermiticity and return a canonical copy.

    The upper triangle (including the real part of the diagonal) is kept and
    mirrored into the lower triangle.
    """
    tol = DEFAULT.hermitian if tol is None else tol
    M = np.asarray(M, dtype=np.complex128)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NonHermitianInput("matrix has non-finite entries")
    dev = np.max(np.abs(M - M.conj().T)) if M.size else 0.0
    if dev > tol:
        raise NonHermitianInput(f"matrix is not Hermitian (max |M - M^H| = {dev:.3e} > {tol:.1e})")
    upper = np.triu(M, 1)
    return upper + upper.conj().T + np.diag(np.real(np.diagonal(M))).astype(np.complex128)


def hermitian_eig(M, method="auto", tol=None):
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    ``method`` is ``"jacobi"`` (cyclic complex Jacobi kernel), ``"lapack"``
    (``numpy.linalg.eigh``) or ``"auto"``, which uses Jacobi up to
    ``tol.jacobi_max_dim`` and LAPACK beyond.
    """
    tol = DEFAULT if tol is None else tol
    H = as_hermitian(M, tol.hermitian)
    n = H.shape[0]
    if method == "auto":
        method = "jacobi" if n <= tol.jacobi_max_dim else "lapack"
    if method == "jacobi":
        w, U, _ = _kernels.jacobi_eigh(H, tol.jacobi_rel_offdiag, tol.jacobi_max_sweeps)
        order = np.argsort(w, kind="stable")
        return EigenDecomposition(w[order], np.ascontiguousarray(U[:, order]))
    if method == "lapack":
        w, U = np.linalg.eigh(H)
        return EigenDecomposition(w, U)
    raise ValueError(f"unknown eigensolver method {method!r}")


def eigvalsh(M, tol=None):
    return hermitian_eig(M, tol=tol).eigenvalues


def matrix_function(M, f, support_only=False, support_tol=1e-12, tol=None):
    """Apply a scalar function through the spectral decomposition.

    With ``support_only`` eigenvalues with ``|lambda| <= support_tol`` are
    mapped to zero instead of being passed to ``f``; this is the usual
    convention for ``log`` on rank-deficient states.  Otherwise a
    non-finite ``f(lambda)`` raises :class:`DomainError`.
    """
    w, U = hermitian_eig(M, tol=tol)
    fw = np.zeros_like(w)
    with np.errstate(all="ignore"):
        for i, lam in enumerate(w):
            if support_only and abs(lam) <= support_tol:
                continue
            val = f(lam)
            if not np.isfinite(val):
                raise DomainError(f"function undefined at eigenvalue {lam!r}")
            fw[i] = val
    return (U * fw) @ U.conj().T


def sqrtm_psd(M, tol=None):
    """Square root of a PSD matrix; tiny negative eigenvalues clipped to zero."""
    w, U = hermitian_eig(M, tol=tol)
    return (U * np.sqrt(np.clip(w, 0.0, None))) @ U.conj().T


def tensor(A, B, cap=None):
    cap = DEFAULT.dimension_cap if cap is None else cap
    A = np.asarray(A)
    B = np.asarray(B)
    rows = A.shape[0] * B.shape[0]
    cols = A.shape[1] * B.shape[1]
    if max(rows, cols) > cap:
        raise DimensionOverflow(f"tensor product dimension {max(rows, cols)} exceeds cap {cap}")
    return np.kron(A, B)


def tensor_all(mats, cap=None):
    out = np.ones((1, 1), dtype=np.complex128)
    for M in mats:
        out = tensor(out, M, cap=cap)
    return out


def tensor_power(A, n, cap=None):
    if n < 0:
        raise ValueError("tensor power must be non-negative")
    return tensor_all([A] * n, cap=cap)


def partial_trace(M, dims, keep):
    """Trace out every subsystem not listed in ``keep``.

    ``dims`` gives the local dimensions in tensor order.  Kept subsystems stay
    in their original order.  Keeping nothing returns a 1x1 matrix holding
    the trace.
    """
    M = np.asarray(M)
    dims = [int(d) for d in dims]
    if any(d < 1 for d in dims):
        raise DimensionMismatch("subsystem dimensions must be positive")
    total = math.prod(dims)
    if M.shape != (total, total):
        raise DimensionMismatch(f"dims {dims} imply size {total}, matrix has shape {M.shape}")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise DimensionMismatch(f"keep indices {keep} out of range for {len(dims)} subsystems")
    nsys = len(dims)
    T = M.reshape(dims + dims)
    traced = [k for k in range(nsys) if k not in keep]
    # trace highest index first so remaining axis numbers stay valid
    for k in sorted(traced, reverse=True):
        cur = T.ndim // 2
        T = np.trace(T, axis1=k, axis2=k + cur)
    kd = math.prod(dims[k] for k in keep) if keep else 1
    return T.reshape(kd, kd)


def psd_check(M, tol=None):
    """Return ``(is_psd, min_eigenvalue)`` with ``is_psd = lambda_min >= -tol``."""
    tol = DEFAULT.psd if tol is None else tol
    w = hermitian_eig(M).eigenvalues
    lam_min = float(w[0]) if w.size else 0.0
    return lam_min >= -tol, lam_min


def trace_norm(M):
    return float(np.sum(np.abs(hermitian_eig(M).eigenvalues)))


def trace_distance(A, B):
    return 0.5 * trace_norm(np.asarray(A) - np.asarray(B))


def to_json(M):
    """Serialise a square matrix as ``{"dim", "re", "im"}`` (row-major)."""
    M = np.asarray(M, dtype=np.complex128)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {M.shape}")
    flat = M.reshape(-1)
    return {"dim": int(M.shape[0]), "re": [float(x) for x in flat.real], "im": [float(x) for x in flat.imag]}


def from_json(obj):
    try:
        n = int(obj["dim"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", [0.0] * (n * n)), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise DimensionMismatch(f"malformed matrix JSON: {exc}") from exc
    if n < 1 or re.size != n * n or im.size != n * n:
        raise DimensionMismatch(f"matrix JSON has {re.size}/{im.size} entries for dim {n}")
    M = (re + 1j * im).reshape(n, n)
    if not np.all(np.isfinite(M)):
        raise DimensionMismatch("matrix JSON contains non-finite entries")
    return M
