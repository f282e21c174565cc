"""Dense complex linear algebra for two-qubit (4x4) problems.

Matrices are plain ``numpy`` complex128 arrays. Every function accepts a
single matrix or a stack with arbitrary leading batch dimensions.

Products and traces are written out as fixed-order elementwise sums rather
than delegated to BLAS, so that a matrix gives bit-identical results whether
it is processed alone or inside a batch of any size. The ensemble layer
relies on this for worker-count independent output.
"""

from __future__ import annotations

import numba
import numpy as np

from .errors import DimMismatch, NotHermitian, NotPSD

HERMITIAN_TOL = 1e-10
PSD_CLAMP = 1e-8
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
# basis (|g>, |e>): sigma_z|e> = +|e>
SIGMA_Z = np.array([[-1, 0], [0, 1]], dtype=complex)
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
I2 = np.eye(2, dtype=complex)
I4 = np.eye(4, dtype=complex)


def as_cmatrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise DimMismatch(f"expected square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def dag(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def mm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with a fixed summation order (batch-size independent)."""
    n = a.shape[-1]
    if b.shape[-2] != n:
        raise DimMismatch(f"cannot multiply {a.shape} by {b.shape}")
    out = a[..., :, 0, None] * b[..., None, 0, :]
    for k in range(1, n):
        out = out + a[..., :, k, None] * b[..., None, k, :]
    return out


def mv(a: np.ndarray, v: np.ndarray) -> np.ndarray:
    n = a.shape[-1]
    if v.shape[-1] != n:
        raise DimMismatch(f"cannot apply {a.shape} to {v.shape}")
    out = a[..., :, 0] * v[..., None, 0]
    for k in range(1, n):
        out = out + a[..., :, k] * v[..., None, k]
    return out


def trace(a: np.ndarray) -> np.ndarray:
    out = a[..., 0, 0]
    for k in range(1, a.shape[-1]):
        out = out + a[..., k, k]
    return out


def hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + dag(a))


def kron(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    n, m = a.shape[-1], b.shape[-1]
    out = a[..., :, None, :, None] * b[..., None, :, None, :]
    return out.reshape(out.shape[:-4] + (n * m, n * m))


def outer(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.complex128)
    return psi[..., :, None] * np.conj(psi[..., None, :])


def normalize(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.complex128)
    norm = np.sqrt(np.sum(np.abs(psi) ** 2, axis=-1, keepdims=True))
    return psi / norm


def hermitian_deviation(m: np.ndarray) -> np.ndarray:
    """Max elementwise |m - m^dagger| per matrix."""
    return np.max(np.abs(m - dag(m)), axis=(-1, -2))


def expect(op, rho) -> complex | np.ndarray:
    """Tr(op . rho)."""
    op = np.asarray(op, dtype=np.complex128)
    rho = np.asarray(rho, dtype=np.complex128)
    if op.shape[-2:] != rho.shape[-2:]:
        raise DimMismatch(f"operator {op.shape} vs state {rho.shape}")
    # Tr(AB) = sum_ij A_ij B_ji
    prod = op * np.swapaxes(rho, -1, -2)
    out = prod.reshape(prod.shape[:-2] + (-1,))
    total = out[..., 0]
    for k in range(1, out.shape[-1]):
        total = total + out[..., k]
    return total[()] if np.ndim(total) == 0 else total


@numba.njit(cache=True)
def _jacobi_one(a, v, tol, max_sweeps):
    n = a.shape[0]
    for _ in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    off += a[i, j].real ** 2 + a[i, j].imag ** 2
        if np.sqrt(off) < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag == 0.0:
                    continue
                phase = apq / mag
                theta = (a[q, q].real - a[p, p].real) / (2.0 * mag)
                if theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # G = diag(1, conj(phase)) @ [[c, s], [-s, c]] on the (p, q) plane
                g_pp = c + 0j
                g_pq = s + 0j
                g_qp = -s * np.conj(phase)
                g_qq = c * np.conj(phase)
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = akp * g_pp + akq * g_qp
                    a[k, q] = akp * g_pq + akq * g_qq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = np.conj(g_pp) * apk + np.conj(g_qp) * aqk
                    a[q, k] = np.conj(g_pq) * apk + np.conj(g_qq) * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = vkp * g_pp + vkq * g_qp
                    v[k, q] = vkp * g_pq + vkq * g_qq


@numba.njit(cache=True)
def _jacobi_batch(mats, tol, max_sweeps):
    b, n, _ = mats.shape
    evals = np.empty((b, n))
    evecs = np.empty((b, n, n), dtype=np.complex128)
    for i in range(b):
        a = mats[i].copy()
        v = np.eye(n, dtype=np.complex128)
        _jacobi_one(a, v, tol, max_sweeps)
        d = np.empty(n)
        for k in range(n):
            d[k] = a[k, k].real
        order = np.argsort(-d, kind="mergesort")
        for k in range(n):
            evals[i, k] = d[order[k]]
            for r in range(n):
                evecs[i, r, k] = v[r, order[k]]
    return evals, evecs


def eigh_unchecked(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Jacobi eigendecomposition without the Hermiticity check (hot paths)."""
    m = np.asarray(m, dtype=np.complex128)
    lead = m.shape[:-2]
    n = m.shape[-1]
    flat = np.ascontiguousarray(m.reshape((-1, n, n)))
    evals, evecs = _jacobi_batch(flat, JACOBI_TOL, JACOBI_MAX_SWEEPS)
    return evals.reshape(lead + (n,)), evecs.reshape(lead + (n, n))


def herm_eig(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Returns eigenvalues in descending order and the matching orthonormal
    eigenvectors as the columns of the second array.

    Raises:
        NotHermitian: if any entry of ``m - m^dagger`` exceeds 1e-10.
    """
    m = as_cmatrix(m)
    dev = hermitian_deviation(m)
    if np.any(dev > HERMITIAN_TOL):
        raise NotHermitian(f"max |m - m^dagger| = {np.max(dev):.3e}")
    return eigh_unchecked(m)


def sqrt_psd(m) -> np.ndarray:
    """Principal square root of a positive semidefinite Hermitian matrix.

    Eigenvalues in [-1e-8, 0) are clamped to zero; anything more negative
    raises NotPSD.
    """
    w, v = herm_eig(m)
    if np.any(w[..., -1] < -PSD_CLAMP):
        raise NotPSD(f"min eigenvalue {np.min(w[..., -1]):.3e}")
    root = np.sqrt(np.clip(w, 0.0, None))
    return mm(v * root[..., None, :], dag(v))


@numba.njit(cache=True)
def _hestenes_batch(mats, max_sweeps):
    b, n, m = mats.shape
    out = np.empty((b, m))
    for i in range(b):
        a = mats[i].copy()
        for _ in range(max_sweeps):
            rotated = False
            for p in range(m - 1):
                for q in range(p + 1, m):
                    alpha = 0.0
                    beta = 0.0
                    gamma = 0j
                    for k in range(n):
                        alpha += a[k, p].real ** 2 + a[k, p].imag ** 2
                        beta += a[k, q].real ** 2 + a[k, q].imag ** 2
                        gamma += np.conj(a[k, p]) * a[k, q]
                    mag = abs(gamma)
                    if mag == 0.0 or mag <= 1e-15 * np.sqrt(alpha * beta):
                        continue
                    rotated = True
                    phase = gamma / mag
                    zeta = (beta - alpha) / (2.0 * mag)
                    if zeta >= 0.0:
                        t = 1.0 / (zeta + np.sqrt(zeta * zeta + 1.0))
                    else:
                        t = -1.0 / (-zeta + np.sqrt(zeta * zeta + 1.0))
                    c = 1.0 / np.sqrt(t * t + 1.0)
                    s = t * c
                    g_qp = -s * np.conj(phase)
                    g_qq = c * np.conj(phase)
                    for k in range(n):
                        x = a[k, p]
                        y = a[k, q]
                        a[k, p] = x * c + y * g_qp
                        a[k, q] = x * s + y * g_qq
            if not rotated:
                break
        for p in range(m):
            acc = 0.0
            for k in range(n):
                acc += a[k, p].real ** 2 + a[k, p].imag ** 2
            out[i, p] = np.sqrt(acc)
        out[i] = -np.sort(-out[i])
    return out


def singular_values(m) -> np.ndarray:
    """Singular values in descending order by one-sided Jacobi rotations.

    Column orthogonalisation keeps small singular values accurate in absolute
    terms (no square root of a near-zero eigenvalue is ever taken).
    """
    m = np.asarray(m, dtype=np.complex128)
    lead = m.shape[:-2]
    flat = np.ascontiguousarray(m.reshape((-1,) + m.shape[-2:]))
    sv = _hestenes_batch(flat, JACOBI_MAX_SWEEPS)
    return sv.reshape(lead + (m.shape[-1],))
