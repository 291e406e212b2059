"""Dense linear-algebra helpers shared by the analysis modules."""

import numpy as np


class EigenError(np.linalg.LinAlgError):
    """Raised when the eigensolver fails; carries the offending matrix."""

    def __init__(self, message, matrix=None, residual=None):
        super().__init__(message)
        self.matrix = matrix
        self.residual = residual


def _square(a, what="matrix"):
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{what} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{what} has non-finite entries")
    return a


def sort_spectrum(values, vectors=None):
    """Order eigenpairs by real part, then imaginary part."""
    order = np.lexsort((values.imag, values.real))
    if vectors is None:
        return values[order]
    return values[order], vectors[:, order]


def eig(a):
    """Eigenvalues and unit eigenvectors of a square matrix.

    Returns
    -------
    values : (n,) complex ndarray
        Sorted by real part, then imaginary part.
    vectors : (n, n) complex ndarray
        Column ``i`` is the unit-norm eigenvector of ``values[i]``.
    """
    a = _square(a)
    try:
        values, vectors = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise EigenError(f"eigensolver failed: {exc}", matrix=a) from exc
    values = values.astype(complex)
    vectors = vectors.astype(complex)
    vectors /= np.linalg.norm(vectors, axis=0)
    return sort_spectrum(values, vectors)


def eig_residual(a, values, vectors):
    """Largest relative residual ``|a v - lambda v| / |a|`` over all pairs."""
    scale = max(np.linalg.norm(a), np.finfo(float).tiny)
    return float(np.max(np.linalg.norm(a @ vectors - vectors * values, axis=0)) / scale)


def symplectic_form(half_dim):
    """The block matrix ``[[0, I], [-I, 0]]`` of size ``2 * half_dim``."""
    n = int(half_dim)
    j = np.zeros((2 * n, 2 * n))
    j[:n, n:] = np.eye(n)
    j[n:, :n] = -np.eye(n)
    return j


def symplectic_deviation(m, j=None):
    """Frobenius norm of ``m^H J m - J``.

    For real ``m`` this is the usual symplectic condition; for the complex
    matrices of a Bloch-reduced cell the conjugate transpose is the relevant
    one.
    """
    m = _square(m)
    if m.shape[0] % 2:
        raise ValueError("symplectic check needs an even dimension")
    if j is None:
        j = symplectic_form(m.shape[0] // 2)
    elif j.shape != m.shape:
        raise ValueError(f"form of shape {j.shape} does not match matrix {m.shape}")
    return float(np.linalg.norm(m.conj().T @ j @ m - j))


def det(a):
    """Determinant by pivoted LU."""
    a = _square(a)
    return np.linalg.det(a)
