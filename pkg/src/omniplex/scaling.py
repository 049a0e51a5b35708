"""Scaling matrices that describe where the omnibus embedding concentrates.

For each latent dimension ``i`` the weights ``v_i = (C^(1)_ii, ..., C^(m)_ii)``
define the pairwise-mean matrix ``H(v_i)``; the Perron vector of ``H(v_i)``
scaled by the root of its top eigenvalue gives the per-graph scalings
``S^(g)_ii``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateWeights, InvalidArgument
from .spectral import sym_eigendecomp


@dataclass(frozen=True, eq=False)
class ScalingSet:
    """Per-graph scaling diagonals, shape ``(m, d)``."""

    s_diag: np.ndarray

    @property
    def m(self):
        return self.s_diag.shape[0]

    @property
    def d(self):
        return self.s_diag.shape[1]

    @property
    def s(self):
        return [np.diag(row) for row in self.s_diag]

    @property
    def alphas(self):
        """``(d, m)``: row ``i`` is the vector alpha^(i)."""
        return self.s_diag.T

    @property
    def s_squared_diag(self):
        return np.sum(self.s_diag**2, axis=0)

    @property
    def s_bar_diag(self):
        return np.mean(self.s_diag, axis=0)

    @property
    def s_squared(self):
        return np.diag(self.s_squared_diag)

    @property
    def s_bar(self):
        return np.diag(self.s_bar_diag)


def _weights_vector(x):
    x = np.asarray(x, dtype=float).ravel()
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise InvalidArgument("weights must be finite and non-negative")
    if x.size == 0 or x.max() <= 0:
        raise DegenerateWeights("at least one weight must be positive")
    return x


def pairwise_mean_matrix(x):
    """``H(x)_ij = (x_i + x_j) / 2``."""
    x = _weights_vector(x)
    return (x[:, None] + x[None, :]) / 2


def h_eigenvalues_closed_form(x):
    """Extreme eigenvalues ``(lambda_min, lambda_max)`` of ``H(x)`` in closed form.

    ``H(x)`` has rank at most two, so its trace and squared Frobenius norm pin
    down both nonzero eigenvalues: ``(||x||_1 -+ sqrt(m) ||x||_2) / 2``.
    """
    x = _weights_vector(x)
    l1 = np.sum(x)
    root = np.sqrt(x.size) * np.linalg.norm(x)
    return 0.5 * (l1 - root), 0.5 * (l1 + root)


def alpha_vector(v):
    """Rank-one positive factor ``alpha`` of ``H(v)``: ``sqrt(lambda_max) * u``."""
    H = pairwise_mean_matrix(v)
    v = np.asarray(v, dtype=float).ravel()
    if np.all(v == v[0]):
        # H = c J has Perron pair (m c, 1 / sqrt(m)); return it exactly
        return np.full(v.size, np.sqrt(v[0]))
    eig = sym_eigendecomp(H)
    u = eig.eigenvectors[:, 0]
    if u.sum() < 0:
        u = -u
    # Perron-Frobenius: H(v) is irreducible whenever some v_j > 0
    assert np.all(u > 1e-12), f"leading eigenvector of H({v}) is not positive: {u}"
    return np.sqrt(eig.eigenvalues[0]) * u


def scaling_matrices(c_diag):
    """Scaling diagonals for weights ``c_diag`` of shape ``(m, d)``."""
    c = np.atleast_2d(np.asarray(c_diag, dtype=float))
    alphas = np.stack([alpha_vector(c[:, i]) for i in range(c.shape[1])])
    return ScalingSet(alphas.T.copy())


def scaled_blocks(x, c_diag, scalings):
    """Stacked ``X sqrt(C^(g))`` (``L``) and ``X S^(g)`` (``L_S``), each ``nm x d``."""
    x = np.asarray(x, dtype=float)
    c = np.atleast_2d(np.asarray(c_diag, dtype=float))
    s = scalings.s_diag if isinstance(scalings, ScalingSet) else np.atleast_2d(scalings)
    L = np.concatenate([x * np.sqrt(cg) for cg in c])
    L_S = np.concatenate([x * sg for sg in s])
    return L, L_S


def bias_matrix(x, c_diag, scalings=None):
    """Row ``n*g + i`` is ``(S^(g) - sqrt(C^(g))) X_i``."""
    if scalings is None:
        scalings = scaling_matrices(c_diag)
    L, L_S = scaled_blocks(x, c_diag, scalings)
    return L_S - L
