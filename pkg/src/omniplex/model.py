"""ESRDPG parameters, sampling, and omnibus matrix assembly."""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InvalidInput,
    NotPSD,
    ProbabilityOutOfRange,
    ValidationError,
)
from .spectral import _fix_signs, sym_eigendecomp

PROB_TOL = 1e-12
DELTA_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class LatentDistribution:
    """Discrete inner-product distribution over ``K`` atoms in R^d."""

    atoms: np.ndarray
    probs: np.ndarray
    delta: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        probs = np.atleast_1d(np.asarray(self.probs, dtype=float))
        if probs.ndim != 1 or atoms.shape[0] != probs.shape[0]:
            raise ValidationError("need one probability per atom")
        if np.any(probs <= 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValidationError("atom probabilities must be positive and sum to 1")
        gram = atoms @ atoms.T
        if gram.min() < -PROB_TOL or gram.max() > 1 + PROB_TOL:
            raise ValidationError("atom inner products must lie in [0, 1]")
        delta = (atoms * probs[:, None]).T @ atoms
        off = delta - np.diag(np.diag(delta))
        if np.max(np.abs(off), initial=0.0) > DELTA_TOL:
            raise ValidationError("second moment matrix is not diagonal")
        if np.min(np.diag(delta)) <= 1e-12:
            raise ValidationError("second moment matrix is rank deficient")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "delta", np.diag(np.diag(delta)))

    @property
    def K(self):
        return self.atoms.shape[0]

    @property
    def d(self):
        return self.atoms.shape[1]


@dataclass(frozen=True, eq=False)
class EsrdpgParams:
    """Latent distribution, per-graph diagonal weights and vertex count.

    ``c_diag`` has shape ``(m, d)``; row ``g`` is the diagonal of ``C^(g)``.
    """

    f: LatentDistribution
    c_diag: np.ndarray
    n: int = 100

    def __post_init__(self):
        c = np.asarray(self.c_diag, dtype=float)
        if c.ndim == 3:
            diag = np.einsum("gii->gi", c)
            if np.any(c != diag[:, :, None] * np.eye(c.shape[1])):
                raise ValidationError("weighting matrices must be diagonal")
            c = diag
        c = np.atleast_2d(c)
        if c.shape[1] != self.f.d:
            raise ValidationError(f"weights have dimension {c.shape[1]}, atoms {self.f.d}")
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise ValidationError("weights must be finite and non-negative")
        if np.min(np.max(c, axis=0)) <= 0:
            raise ValidationError("every latent dimension needs a positive weight in some graph")
        x = self.f.atoms
        for g, cg in enumerate(c):
            probs = (x * cg) @ x.T
            if probs.min() < -PROB_TOL or probs.max() > 1 + PROB_TOL:
                raise ValidationError(f"graph {g}: weighted inner products leave [0, 1]")
        if int(self.n) < 1:
            raise ValidationError("n must be positive")
        object.__setattr__(self, "c_diag", c)
        object.__setattr__(self, "n", int(self.n))

    @property
    def m(self):
        return self.c_diag.shape[0]

    @property
    def d(self):
        return self.f.d

    @property
    def weights(self):
        return [np.diag(cg) for cg in self.c_diag]

    def with_n(self, n):
        return EsrdpgParams(self.f, self.c_diag, n)


@dataclass(frozen=True, eq=False)
class MultiplexSample:
    x: np.ndarray
    labels: np.ndarray
    p: np.ndarray
    a: np.ndarray

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def m(self):
        return self.a.shape[0]


def sbm_latent_atoms(B, probs=None):
    """Factor a PSD block matrix ``B`` into atoms with diagonal second moment.

    Returns a ``(K, d)`` array with ``d`` the number of positive eigenvalues of
    ``B``. The atoms are rotated so that ``sum_k probs_k x_k x_k^T`` is
    diagonal with descending entries.
    """
    B = np.atleast_2d(np.asarray(B, dtype=float))
    K = B.shape[0]
    if B.shape != (K, K) or not np.allclose(B, B.T, atol=1e-12):
        raise InvalidInput("block matrix must be square and symmetric")
    if B.min() < 0 or B.max() > 1:
        raise InvalidInput("block probabilities must lie in [0, 1]")
    probs = np.full(K, 1.0 / K) if probs is None else np.asarray(probs, dtype=float)
    eig = sym_eigendecomp(B)
    if eig.eigenvalues[-1] < -1e-10:
        raise NotPSD(f"block matrix has eigenvalue {eig.eigenvalues[-1]:.3g}")
    keep = eig.eigenvalues > 1e-10 * max(1.0, eig.eigenvalues[0])
    atoms = eig.eigenvectors[:, keep] * np.sqrt(eig.eigenvalues[keep])
    delta = (atoms * probs[:, None]).T @ atoms
    rot = sym_eigendecomp(delta).eigenvectors
    return _fix_signs(atoms @ rot)


def sbm_distribution(B, probs=None):
    K = np.asarray(B).shape[0]
    probs = np.full(K, 1.0 / K) if probs is None else np.asarray(probs, dtype=float)
    return LatentDistribution(sbm_latent_atoms(B, probs), probs)


def sample_latent(f, n, rng):
    """Draw ``n`` i.i.d. latent positions; returns ``(x, labels)``."""
    labels = rng.choice(f.K, size=int(n), p=f.probs)
    return f.atoms[labels], labels


def balanced_labels(probs, n):
    """Deterministic labels whose class counts round ``n * probs`` (largest remainder)."""
    probs = np.asarray(probs, dtype=float)
    raw = probs * n
    counts = np.floor(raw).astype(int)
    short = n - counts.sum()
    counts[np.argsort(-(raw - counts), kind="stable")[:short]] += 1
    return np.repeat(np.arange(probs.size), counts)


def probability_matrices(x, c_diag):
    """``P^(g) = X C^(g) X^T`` stacked into an ``(m, n, n)`` array."""
    x = np.asarray(x, dtype=float)
    c = np.atleast_2d(np.asarray(c_diag, dtype=float))
    p = np.einsum("ik,gk,jk->gij", x, c, x)
    if p.min() < -PROB_TOL or p.max() > 1 + PROB_TOL:
        raise ProbabilityOutOfRange(f"probabilities span [{p.min():.3g}, {p.max():.3g}]")
    return np.clip(p, 0.0, 1.0)


def sample_adjacency(p, rng):
    """Hollow symmetric Bernoulli graph with edge probabilities ``p`` (i < j)."""
    p = np.asarray(p, dtype=float)
    n = p.shape[0]
    upper = np.triu(rng.random((n, n)) < p, 1)
    return (upper | upper.T).astype(float)


def sample_multiplex(params, rng, n=None, x=None, labels=None):
    """Sample latent positions (unless given) and one graph per weight matrix."""
    n = params.n if n is None else int(n)
    if x is None:
        x, labels = sample_latent(params.f, n, rng)
    p = probability_matrices(x, params.c_diag)
    a = np.stack([sample_adjacency(pg, rng) for pg in p])
    return MultiplexSample(x, labels, p, a)


def _as_stack(mats):
    a = np.asarray(mats, dtype=float)
    if a.ndim == 2:
        a = a[None]
    if a.ndim != 3 or a.shape[1] != a.shape[2]:
        raise InvalidInput("expected a list of equally sized square matrices")
    if not np.allclose(a, a.transpose(0, 2, 1)):
        raise InvalidInput("matrices must be symmetric")
    return a


def build_omnibus(a):
    """``nm x nm`` omnibus matrix with block ``(g, k) = (A_g + A_k) / 2``."""
    a = _as_stack(a)
    m, n, _ = a.shape
    blocks = (a[:, None] + a[None, :]) / 2
    return blocks.transpose(0, 2, 1, 3).reshape(m * n, m * n)


def expected_omnibus(p):
    return build_omnibus(p)
