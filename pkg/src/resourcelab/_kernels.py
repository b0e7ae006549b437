"""Hot numerical kernels.

Each kernel exists twice: a numba ``@njit`` loop version and a pure-numpy
version with identical arithmetic order.  The public names ``jacobi_eigh``
and ``mixing_ascent`` point at the numba variants unless numba is missing
or ``RESOURCELAB_DISABLE_NUMBA`` is set.
"""

import math

import numpy as np

from .config import numba_enabled

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

HAVE_NUMBA = numba is not None


def _offdiag_norm_np(A):
    off = A[~np.eye(A.shape[0], dtype=bool)]
    return math.sqrt(np.sum(off.real ** 2 + off.imag ** 2))


def _rotation(app, aqq, apq):
    g = abs(apq)
    e = apq / g
    theta = (aqq - app) / (2.0 * g)
    if abs(theta) > 1e150:
        t = 0.5 / theta  # theta^2 would overflow
    elif theta >= 0.0:
        t = 1.0 / (theta + math.sqrt(theta * theta + 1.0))
    else:
        t = -1.0 / (-theta + math.sqrt(theta * theta + 1.0))
    c = 1.0 / math.sqrt(t * t + 1.0)
    return g, e, t, c, t * c


def jacobi_eigh_numpy(A, rel_tol, max_sweeps):
    """Cyclic complex Jacobi.  Returns (eigenvalues, eigenvectors, sweeps).

    ``A`` is overwritten.  Eigenvalues are unsorted (diagonal order).
    """
    n = A.shape[0]
    V = np.eye(n, dtype=np.complex128)
    scale = math.sqrt(np.sum(np.abs(A) ** 2))
    sweeps = 0
    if scale == 0.0:
        return np.zeros(n), V, 0
    target = rel_tol * scale
    while sweeps < max_sweeps and _offdiag_norm_np(A) >= target:
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                app = A[p, p].real
                aqq = A[q, q].real
                g, e, t, c, s = _rotation(app, aqq, apq)
                ec = e.conjugate()
                colp = A[:, p].copy()
                colq = A[:, q]
                A[:, p] = c * colp - s * ec * colq
                A[:, q] = s * colp + c * ec * colq
                rowp = A[p, :].copy()
                rowq = A[q, :]
                A[p, :] = c * rowp - s * e * rowq
                A[q, :] = s * rowp + c * e * rowq
                A[p, q] = 0.0
                A[q, p] = 0.0
                A[p, p] = app - t * g
                A[q, q] = aqq + t * g
                vp = V[:, p].copy()
                vq = V[:, q]
                V[:, p] = c * vp - s * ec * vq
                V[:, q] = s * vp + c * ec * vq
        sweeps += 1
    return np.real(np.diagonal(A)).copy(), V, sweeps


def mixing_ascent_numpy(rho, V, max_sweeps, tol):
    """Row-wise coordinate ascent of Re Tr(rho V V^H) over unit-norm rows.

    ``V`` is updated in place.  Returns (objective, sweeps, row_norms) where
    ``row_norms[i]`` is the norm of the last local field for row i.
    """
    d = V.shape[0]
    fields = np.zeros(d)
    obj_old = -np.inf
    obj = 0.0
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        for i in range(d):
            g = rho[i, :] @ V - rho[i, i] * V[i, :]
            nrm = math.sqrt(np.sum(g.real ** 2 + g.imag ** 2))
            fields[i] = nrm
            if nrm > 0.0:
                V[i, :] = g / nrm
        obj = float(np.real(np.sum(np.conj(V) * (rho @ V))))
        if abs(obj - obj_old) <= tol * max(1.0, abs(obj)):
            break
        obj_old = obj
    return obj, sweeps, fields


if HAVE_NUMBA:

    @numba.njit(cache=True)
    def _offdiag_norm_nb(A):
        n = A.shape[0]
        total = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    total += A[i, j].real ** 2 + A[i, j].imag ** 2
        return math.sqrt(total)

    @numba.njit(cache=True)
    def jacobi_eigh_numba(A, rel_tol, max_sweeps):
        n = A.shape[0]
        V = np.eye(n, dtype=np.complex128)
        scale = 0.0
        for i in range(n):
            for j in range(n):
                scale += A[i, j].real ** 2 + A[i, j].imag ** 2
        scale = math.sqrt(scale)
        evals = np.zeros(n)
        if scale == 0.0:
            return evals, V, 0
        target = rel_tol * scale
        sweeps = 0
        while sweeps < max_sweeps and _offdiag_norm_nb(A) >= target:
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = A[p, q]
                    g = abs(apq)
                    if g <= 1e-300:
                        continue
                    app = A[p, p].real
                    aqq = A[q, q].real
                    e = apq / g
                    ec = e.conjugate()
                    theta = (aqq - app) / (2.0 * g)
                    if abs(theta) > 1e150:
                        t = 0.5 / theta
                    elif theta >= 0.0:
                        t = 1.0 / (theta + math.sqrt(theta * theta + 1.0))
                    else:
                        t = -1.0 / (-theta + math.sqrt(theta * theta + 1.0))
                    c = 1.0 / math.sqrt(t * t + 1.0)
                    s = t * c
                    for k in range(n):
                        akp = A[k, p]
                        akq = A[k, q]
                        A[k, p] = c * akp - s * ec * akq
                        A[k, q] = s * akp + c * ec * akq
                    for k in range(n):
                        apk = A[p, k]
                        aqk = A[q, k]
                        A[p, k] = c * apk - s * e * aqk
                        A[q, k] = s * apk + c * e * aqk
                    A[p, q] = 0.0
                    A[q, p] = 0.0
                    A[p, p] = app - t * g
                    A[q, q] = aqq + t * g
                    for k in range(n):
                        vkp = V[k, p]
                        vkq = V[k, q]
                        V[k, p] = c * vkp - s * ec * vkq
                        V[k, q] = s * vkp + c * ec * vkq
            sweeps += 1
        for i in range(n):
            evals[i] = A[i, i].real
        return evals, V, sweeps

    @numba.njit(cache=True)
    def mixing_ascent_numba(rho, V, max_sweeps, tol):
        d, r = V.shape
        fields = np.zeros(d)
        g = np.zeros(r, dtype=np.complex128)
        obj_old = -np.inf
        obj = 0.0
        sweeps = 0
        for it in range(1, max_sweeps + 1):
            sweeps = it
            for i in range(d):
                for c in range(r):
                    g[c] = 0.0
                for j in range(d):
                    if j == i:
                        continue
                    rij = rho[i, j]
                    if rij == 0.0:
                        continue
                    for c in range(r):
                        g[c] += rij * V[j, c]
                nrm = 0.0
                for c in range(r):
                    nrm += g[c].real ** 2 + g[c].imag ** 2
                nrm = math.sqrt(nrm)
                fields[i] = nrm
                if nrm > 0.0:
                    for c in range(r):
                        V[i, c] = g[c] / nrm
            obj = 0.0
            for i in range(d):
                for j in range(d):
                    rij = rho[i, j]
                    if rij == 0.0:
                        continue
                    acc = 0.0 + 0.0j
                    for c in range(r):
                        acc += V[j, c] * V[i, c].conjugate()
                    obj += (rij * acc).real
            if abs(obj - obj_old) <= tol * max(1.0, abs(obj)):
                break
            obj_old = obj
        return obj, sweeps, fields


def _select(name):
    if HAVE_NUMBA and numba_enabled():
        return globals()[name + "_numba"]
    return globals()[name + "_numpy"]


def backend():
    return "numba" if HAVE_NUMBA and numba_enabled() else "numpy"


def jacobi_eigh(A, rel_tol, max_sweeps):
    A = np.array(A, dtype=np.complex128, order="C", copy=True)
    return _select("jacobi_eigh")(A, float(rel_tol), int(max_sweeps))


def mixing_ascent(rho, V, max_sweeps, tol):
    rho = np.ascontiguousarray(rho, dtype=np.complex128)
    return _select("mixing_ascent")(rho, V, int(max_sweeps), float(tol))
