"""Dense Hermitian linear algebra kernels shared by the numerical modules.

Everything here works on complex Hermitian matrices represented as numpy
arrays.  The vectorization convention (``hermitian_vec``) maps an order-n
Hermitian matrix to n^2 reals isometrically, so Euclidean geometry on the
vectorized side matches Frobenius geometry on the matrix side.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

__all__ = [
    "check_hermitian",
    "hermitianize",
    "eigh",
    "psd_project",
    "trailing_schur_complement",
    "schur_complement_info",
    "hermitian_vec",
    "hermitian_unvec",
    "hvec_dim",
    "real_embedding",
    "embedding_to_hermitian",
]

_SQRT2 = np.sqrt(2.0)


def check_hermitian(a, tol: float = 1e-10, name: str = "matrix") -> np.ndarray:
    """Validate that ``a`` is square, finite and Hermitian; return it as complex128."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    a = a.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    scale = max(1.0, float(np.abs(a).max()) if a.size else 0.0)
    if a.size and float(np.abs(a - a.conj().T).max()) > tol * scale:
        raise ValueError(f"{name} is not Hermitian to tolerance {tol:g}")
    return a


def hermitianize(a) -> np.ndarray:
    """Average ``a`` with its conjugate transpose, removing tiny asymmetries."""
    a = np.asarray(a, dtype=np.complex128)
    return (a + a.conj().T) / 2.0


def eigh(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.

    Returns ``(w, u)`` with ``a ≈ u @ diag(w) @ u.conj().T`` and orthonormal
    columns in ``u``.
    """
    a = check_hermitian(a)
    w, u = np.linalg.eigh(a)
    return np.ascontiguousarray(w[::-1]), np.ascontiguousarray(u[:, ::-1])


def psd_project(a) -> np.ndarray:
    """Frobenius-nearest positive semidefinite matrix (eigenvalues clipped at zero)."""
    a = check_hermitian(a)
    w, u = np.linalg.eigh(a)
    if a.size == 0 or w[0] >= 0.0:
        return a
    w = np.maximum(w, 0.0)
    return hermitianize((u * w) @ u.conj().T)


class SchurComplement(NamedTuple):
    value: float
    regularized: bool


def schur_complement_info(q, m: int) -> SchurComplement:
    """Schur complement of the trailing block ``q[m+1:, m+1:]`` inside ``q[m:, m:]``.

    ``m`` is a 0-based index; ``m == n-1`` returns the last diagonal entry.
    A numerically singular trailing block gets a diagonal jitter of
    ``1e-12 * tr(q) / n`` and the result is flagged ``regularized``.
    Intended for (near) positive semidefinite ``q``.
    """
    q = check_hermitian(q, name="q")
    n = q.shape[0]
    if not 0 <= m < n:
        raise ValueError(f"block index {m} out of range for order {n}")
    head = float(q[m, m].real)
    if m == n - 1:
        return SchurComplement(head, False)
    col = q[m + 1 :, m]
    block = q[m + 1 :, m + 1 :]
    w, u = np.linalg.eigh(block)
    floor = max(w[-1], 0.0) * block.shape[0] * np.finfo(float).eps
    regularized = bool(w[0] <= floor)
    if regularized:
        jitter = 1e-12 * max(float(np.trace(q).real), 0.0) / n
        w = np.maximum(w, 0.0) + max(jitter, np.finfo(float).tiny)
    proj = u.conj().T @ col
    value = head - float(np.real(proj.conj() @ (proj / w)))
    return SchurComplement(value, regularized)


def trailing_schur_complement(q, m: int) -> float:
    """Value-only variant of :func:`schur_complement_info`."""
    return schur_complement_info(q, m).value


def hvec_dim(n: int) -> int:
    """Length of the real vectorization of an order-n Hermitian matrix."""
    return n * n


_TRIU_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _triu_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    got = _TRIU_CACHE.get(n)
    if got is None:
        got = np.triu_indices(n, k=1)
        _TRIU_CACHE[n] = got
    return got


def hermitian_vec(a) -> np.ndarray:
    """Isometric real vectorization of a Hermitian matrix.

    Layout for order n: the n real diagonal entries, then sqrt(2) * real part
    of the strict upper triangle (row-major), then sqrt(2) * imaginary part in
    the same order.  Satisfies ``norm(hermitian_vec(a)) == norm(a, 'fro')``.
    """
    a = check_hermitian(a)
    n = a.shape[0]
    iu, ju = _triu_indices(n)
    off = a[iu, ju]
    return np.concatenate([np.diag(a).real, _SQRT2 * off.real, _SQRT2 * off.imag])


def hermitian_unvec(x, n: int) -> np.ndarray:
    """Inverse of :func:`hermitian_vec` for order ``n``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (n * n,):
        raise ValueError(f"expected vector of length {n * n}, got shape {x.shape}")
    a = np.zeros((n, n), dtype=np.complex128)
    iu, ju = _triu_indices(n)
    k = n + iu.size
    off = (x[n:k] + 1j * x[k:]) / _SQRT2
    a[iu, ju] = off
    a[ju, iu] = off.conj()
    a[np.arange(n), np.arange(n)] = x[:n]
    return a


def real_embedding(a) -> np.ndarray:
    """Real symmetric embedding [[Re a, -Im a], [Im a, Re a]] of a Hermitian matrix.

    The embedding is positive semidefinite iff ``a`` is, and each eigenvalue
    of ``a`` appears twice.
    """
    a = check_hermitian(a)
    re, im = a.real, a.imag
    return np.block([[re, -im], [im, re]])


def embedding_to_hermitian(e) -> np.ndarray:
    """Recover the Hermitian matrix from (a perturbation of) its real embedding."""
    e = np.asarray(e, dtype=np.float64)
    if e.ndim != 2 or e.shape[0] != e.shape[1] or e.shape[0] % 2:
        raise ValueError(f"expected an even-order square matrix, got shape {e.shape}")
    n = e.shape[0] // 2
    re = (e[:n, :n] + e[n:, n:]) / 2.0
    im = (e[n:, :n] - e[:n, n:]) / 2.0
    return hermitianize(re + 1j * im)
