"""Dense algebra on the tiny matrices that appear in slab and stage systems.

Everything here operates on numpy arrays of size at most a few dozen rows.
Eigen-decompositions come back sorted and normalized in a fixed way so
that reports and expansions are reproducible from run to run.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import Defective, SingularMatrix

PIVOT_RTOL = 1e-14
DEFECTIVE_TOL = 1e-10


@dataclass(frozen=True)
class EigenDecomposition:
    """``G = W @ diag(eigenvalues) @ Winv`` with columns of ``W`` normalized."""

    eigenvalues: np.ndarray
    W: np.ndarray
    Winv: np.ndarray

    @property
    def D(self) -> np.ndarray:
        return np.diag(self.eigenvalues)

    def reconstruct(self) -> np.ndarray:
        return self.W @ self.D @ self.Winv


def _as_square(A) -> np.ndarray:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    return A


def solve(A, b) -> np.ndarray:
    """Solve ``A x = b`` by LU with partial pivoting.

    Raises
    ------
    SingularMatrix
        If a pivot is smaller than ``1e-14 * ||A||``.
    """
    A = _as_square(A)
    b = np.asarray(b)
    if b.shape[0] != A.shape[0]:
        raise ValueError(f"right-hand side has length {b.shape[0]}, matrix is {A.shape}")
    scale = np.linalg.norm(A, 2)
    with warnings.catch_warnings():
        # exact singularity is reported below as SingularMatrix
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=True)
    if scale == 0.0 or np.min(np.abs(np.diag(lu))) < PIVOT_RTOL * scale:
        raise SingularMatrix("pivot below 1e-14*||A||")
    return scipy.linalg.lu_solve((lu, piv), b)


def inverse(A) -> np.ndarray:
    A = _as_square(A)
    return solve(A, np.eye(A.shape[0], dtype=np.result_type(A, float)))


def kron(A, B) -> np.ndarray:
    """Kronecker product; block ``(i, j)`` of the result is ``A[i, j] * B``."""
    return np.kron(np.atleast_2d(A), np.atleast_2d(B))


def _sort_key(z: complex, ndigits: int = 9):
    # rounding keeps conjugate pairs and repeated moduli in a stable order
    return (-round(abs(z), ndigits), -round(z.real, ndigits), -round(z.imag, ndigits))


def _normalize_columns(V: np.ndarray, mode: str) -> np.ndarray:
    V = V.astype(complex, copy=True)
    for j in range(V.shape[1]):
        v = V[:, j]
        big = np.max(np.abs(v))
        if mode == "first":
            idx = 0 if abs(v[0]) > 1e-8 * big else int(np.argmax(np.abs(v)))
        elif mode == "last":
            idx = -1 if abs(v[-1]) > 1e-8 * big else int(np.argmax(np.abs(v)))
        else:
            raise ValueError(f"unknown normalization {mode!r}")
        V[:, j] = v / v[idx]
    return V


def _rref_rows(N: np.ndarray, tol: float) -> np.ndarray:
    """Reduced row echelon form of the rows of ``N``; unique for the row space."""
    R = N.copy()
    k, n = R.shape
    row = 0
    for col in range(n):
        if row == k:
            break
        piv = row + int(np.argmax(np.abs(R[row:, col])))
        if abs(R[piv, col]) <= tol:
            continue
        R[[row, piv]] = R[[piv, row]]
        R[row] /= R[row, col]
        for i in range(k):
            if i != row:
                R[i] -= R[i, col] * R[row]
        row += 1
    return R


def _canonical_repeated(G: np.ndarray, vals: np.ndarray, vecs: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    # a repeated eigenvalue with a multi-dimensional eigenspace has no
    # preferred basis; use the RREF basis so results do not depend on LAPACK
    scale = max(np.linalg.norm(G, 2), 1.0)
    out = vecs.copy()
    i = 0
    n = len(vals)
    while i < n:
        j = i + 1
        while j < n and abs(vals[j] - vals[i]) <= tol * scale:
            j += 1
        k = j - i
        if k > 1:
            lam = complex(np.mean(vals[i:j]))
            _, sv, vh = np.linalg.svd(G - lam * np.eye(n))
            null = vh[n - k :].conj()
            if sv[n - k] <= 1e-6 * scale:
                out[:, i:j] = _rref_rows(null, 1e-8).T
                vals[i:j] = lam
        i = j
    return out


def eig(G, normalize: str = "first") -> EigenDecomposition:
    """Eigen-decomposition ``G = W D W^{-1}`` of a small real matrix.

    Eigenvalues are sorted by descending modulus, then descending real part,
    then descending imaginary part. Each eigenvector is scaled so its first
    entry is one (``normalize="last"`` uses the last entry instead); when that
    entry is negligible the largest-magnitude entry is used.

    Raises
    ------
    Defective
        If the eigenvectors do not form a basis (smallest singular value of
        the column-normalized eigenvector matrix below 1e-10).
    """
    G = _as_square(G)
    if G.shape[0] > 8:
        raise ValueError("eig is intended for matrices of size <= 8")
    vals, vecs = np.linalg.eig(G)
    order = sorted(range(len(vals)), key=lambda k: _sort_key(complex(vals[k])))
    vals = vals[order].astype(complex)
    vecs = vecs[:, order].astype(complex)
    vecs = _canonical_repeated(G, vals, vecs)

    unit = vecs / np.linalg.norm(vecs, axis=0)
    if np.linalg.svd(unit, compute_uv=False)[-1] < DEFECTIVE_TOL:
        raise Defective("eigenvectors are numerically dependent")

    W = _normalize_columns(vecs, normalize)
    Winv = inverse(W)
    return EigenDecomposition(eigenvalues=vals, W=W, Winv=Winv)


def spectral_radius(G) -> float:
    G = _as_square(G)
    return float(np.max(np.abs(np.linalg.eigvals(G))))


def cond2(A) -> float:
    """Two-norm condition number ``sigma_max / sigma_min``."""
    A = _as_square(A)
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] < 1e-300:
        raise SingularMatrix("smallest singular value is zero")
    return float(sv[0] / sv[-1])
