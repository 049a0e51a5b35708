"""Dense symmetric eigensolvers, spectral embedding and Procrustes alignment."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidMatrix, RankDeficient

SYMMETRY_TOL = 1e-8


@dataclass(frozen=True)
class SymEigen:
    """Eigenpairs of a symmetric matrix, eigenvalues non-increasing."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self):
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


def _check_symmetric(M):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidMatrix(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidMatrix("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    if M.size and np.max(np.abs(M - M.T)) > SYMMETRY_TOL * scale:
        raise InvalidMatrix("matrix is not symmetric")
    return (M + M.T) / 2


def _fix_signs(vecs):
    # Largest-magnitude entry of each column made non-negative; argmax breaks
    # ties toward the lowest index.
    if vecs.size == 0:
        return vecs
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def sym_eigendecomp(M):
    """Full eigendecomposition of a symmetric matrix.

    Eigenvalues are returned in descending order and every eigenvector has its
    largest-magnitude entry non-negative, so repeated calls are reproducible.
    """
    M = _check_symmetric(M)
    w, v = scipy.linalg.eigh(M)
    order = np.argsort(-w, kind="stable")
    return SymEigen(w[order], _fix_signs(v[:, order]))


def _positive_threshold(M, lam_max):
    return M.shape[0] * np.finfo(float).eps * max(abs(lam_max), 1.0)


def ase(M, d):
    """Adjacency spectral embedding ``U diag(lambda)^{1/2}`` of the top ``d`` eigenpairs.

    Raises
    ------
    RankDeficient
        If fewer than ``d`` eigenvalues are (numerically) positive.
    """
    emb, _ = ase_with_eigvals(M, d)
    return emb


def ase_with_eigvals(M, d):
    """Like :func:`ase` but also returns the retained eigenvalues."""
    M = _check_symmetric(M)
    k = M.shape[0]
    d = int(d)
    if d < 1:
        raise InvalidMatrix("embedding dimension must be >= 1")
    if d > k:
        raise RankDeficient(d, _count_positive(M))
    w, v = scipy.linalg.eigh(M, subset_by_index=[k - d, k - 1])
    w, v = w[::-1], v[:, ::-1]
    tol = _positive_threshold(M, w[0])
    if w[-1] <= tol:
        raise RankDeficient(d, int(np.sum(w > tol)))
    v = _fix_signs(v)
    return v * np.sqrt(w), w


def _count_positive(M):
    w = scipy.linalg.eigvalsh(M)
    return int(np.sum(w > _positive_threshold(M, w[-1])))


@dataclass(frozen=True)
class Alignment:
    rotation: np.ndarray
    degenerate: bool


def procrustes(A, B, rank_tol=1e-12):
    """Orthogonal ``W`` minimising ``||A W - B||_F`` along with a degeneracy flag.

    When ``A^T B`` is rank deficient the minimiser is not unique; the rotation
    on the null directions is then chosen as close to the identity as possible.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape or A.ndim != 2:
        raise InvalidMatrix(f"shape mismatch {A.shape} vs {B.shape}")
    if A.shape[0] < A.shape[1]:
        raise InvalidMatrix("need at least as many rows as columns")
    U, s, Vt = np.linalg.svd(A.T @ B)
    smax = s[0] if s.size else 0.0
    r = int(np.sum(s > rank_tol * smax)) if smax > 0 else 0
    d = A.shape[1]
    if r == d:
        return Alignment(U @ Vt, False)
    Ur, Vr = U[:, :r], Vt[:r].T
    Uc, Vc = U[:, r:], Vt[r:].T
    # map span(Uc) onto span(Vc) maximising trace, i.e. closest to identity
    P, _, Rt = np.linalg.svd(Vc.T @ Uc)
    Q = Rt.T @ P.T
    return Alignment(Ur @ Vr.T + Uc @ Q @ Vc.T, True)


def procrustes_align(A, B):
    """Orthogonal ``W`` minimising ``||A W - B||_F``."""
    return procrustes(A, B).rotation


def two_inf_norm(M):
    """Maximum Euclidean row norm."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    if M.ndim == 1:
        M = M[:, None]
    return float(np.max(np.linalg.norm(M, axis=1)))
