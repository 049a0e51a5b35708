"""Asymptotic bias and covariance of the four estimators under the ESRDPG.

All expectations over the latent distribution are exact finite sums over its
atoms. Covariances returned here are the limits of ``n * Cov`` (the caller
divides by ``n``).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, InvalidProbability, SingularScaling, UnsupportedArity
from .scaling import ScalingSet, scaling_matrices

METHODS = ("ASE", "Abar", "Omni", "Omnibar")


def _diag(c):
    c = np.asarray(c, dtype=float)
    return np.diag(c) if c.ndim == 2 else c


def sigma_tilde(y, c, f):
    """``E[(y^T C X - (y^T C X)^2) X X^T]`` over the atoms of ``f``."""
    y = np.asarray(y, dtype=float)
    w = f.atoms @ (_diag(c) * y)
    var = w - w**2
    if var.min() < -1e-12:
        raise InvalidProbability(f"edge probability outside [0, 1]: {w[var.argmin()]:.6g}")
    var = np.clip(var, 0.0, None)
    return np.einsum("k,ki,kj->ij", f.probs * var, f.atoms, f.atoms)


@dataclass(frozen=True, eq=False)
class CovarianceRequest:
    """Model parameters plus the derived quantities every formula needs."""

    params: object
    scalings: ScalingSet = None
    delta_diag: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.scalings is None:
            object.__setattr__(self, "scalings", scaling_matrices(self.params.c_diag))
        object.__setattr__(self, "delta_diag", np.diag(self.params.f.delta).copy())

    @classmethod
    def from_params(cls, params):
        return cls(params)

    @property
    def m(self):
        return self.params.m

    def atom(self, k):
        if not 0 <= k < self.params.f.K:
            raise InvalidArgument(f"atom index {k} out of range")
        return self.params.f.atoms[k]

    def stilde(self, g, y):
        return sigma_tilde(y, self.params.c_diag[g], self.params.f)

    def _outer_inv(self):
        # (S^2 Delta)^{-1}, diagonal
        return 1.0 / (self.scalings.s_squared_diag * self.delta_diag)

    def _sandwich(self, M):
        q = self._outer_inv()
        return q[:, None] * M * q[None, :]


def _check_graph(req, g):
    if not 0 <= g < req.m:
        raise InvalidArgument(f"graph index {g} out of range")


def sigma_omni(g, y, req):
    """Limiting covariance of ``sqrt(n)`` times the omnibus residual of graph ``g``."""
    _check_graph(req, g)
    s = req.scalings.s_diag
    lead = s[g] + req.m * req.scalings.s_bar_diag
    inner = lead[:, None] * req.stilde(g, y) * lead[None, :]
    for k in range(req.m):
        if k != g:
            inner = inner + s[k][:, None] * req.stilde(k, y) * s[k][None, :]
    return req._sandwich(inner) / 4


def sigma_cross(g, k, y, req, same_vertex=True):
    """Limiting cross-covariance between rows of graphs ``g`` and ``k``.

    Rows of different vertices are asymptotically uncorrelated. Each graph
    ``l`` other than ``g`` and ``k`` enters once through ``S^(l)``.
    """
    _check_graph(req, g)
    _check_graph(req, k)
    d = req.params.d
    if not same_vertex:
        return np.zeros((d, d))
    if g == k:
        return sigma_omni(g, y, req)
    s = req.scalings.s_diag
    msbar = req.m * req.scalings.s_bar_diag
    inner = (s[g] + msbar)[:, None] * req.stilde(g, y) * s[g][None, :]
    inner = inner + s[k][:, None] * req.stilde(k, y) * (s[k] + msbar)[None, :]
    for l in range(req.m):
        if l not in (g, k):
            inner = inner + s[l][:, None] * req.stilde(l, y) * s[l][None, :]
    return req._sandwich(inner) / 4


def sigma_omnibar(y, req):
    """Limiting covariance of ``sqrt(n)`` times the Omnibar residual."""
    s = req.scalings.s_diag
    sbar = req.scalings.s_bar_diag
    inner = 0.0
    for g in range(req.m):
        w = sbar + s[g]
        inner = inner + w[:, None] * req.stilde(g, y) * w[None, :]
    return req._sandwich(inner) / 4


def sigma_diff(y, req):
    """Limiting covariance of ``sqrt(n)`` times a row of ``X1_omni - X2_omni``."""
    if req.m != 2:
        raise UnsupportedArity(f"difference covariance needs m = 2, got {req.m}")
    sbar = req.scalings.s_bar_diag
    inner = sbar[:, None] * (req.stilde(0, y) + req.stilde(1, y)) * sbar[None, :]
    return req._sandwich(inner)


def table1_bias_variance(method, g, k, req):
    """Asymptotic ``(bias, n * covariance)`` of ``method`` for atom ``k`` in graph ``g``."""
    _check_graph(req, g)
    x = req.atom(k)
    c = req.params.c_diag
    delta = req.delta_diag
    root_cg = np.sqrt(c[g])
    if method == "ASE":
        if np.any(c[g] <= 0):
            raise SingularScaling(f"graph {g} has a zero weight; ASE variance undefined")
        q = 1.0 / (root_cg * delta)
        cov = q[:, None] * req.stilde(g, x) * q[None, :]
        return np.zeros_like(x), cov
    if method == "Abar":
        cbar = c.mean(axis=0)
        q = 1.0 / (np.sqrt(cbar) * delta)
        total = sum(req.stilde(l, x) for l in range(req.m))
        cov = q[:, None] * total * q[None, :] / req.m**2
        return (np.sqrt(cbar) - root_cg) * x, cov
    if method == "Omni":
        return (req.scalings.s_diag[g] - root_cg) * x, sigma_omni(g, x, req)
    if method == "Omnibar":
        return (req.scalings.s_bar_diag - root_cg) * x, sigma_omnibar(x, req)
    raise InvalidArgument(f"unknown method {method!r}; expected one of {METHODS}")


def theoretical_mse(method, g, k, req, n):
    """Per-vertex MSE ``||bias||^2 + trace(cov) / n``."""
    bias, cov = table1_bias_variance(method, g, k, req)
    return float(bias @ bias + np.trace(cov) / n)


def separation_margins(req, n, g=None):
    """k-means exact-recovery check for every pair of communities.

    Returns ``{(i, j): ||S (x_i - x_j)|| - beta}`` with
    ``beta = m^{3/2} log(nm) / sqrt(n)`` and ``S = S^(g)`` (or ``S_bar`` when
    ``g`` is None, i.e. for Omnibar rows). All margins positive is the
    sufficient condition for exact recovery.
    """
    m = req.m
    beta = m**1.5 * np.log(n * m) / np.sqrt(n)
    s = req.scalings.s_bar_diag if g is None else req.scalings.s_diag[g]
    atoms = req.params.f.atoms
    out = {}
    for i in range(len(atoms)):
        for j in range(i + 1, len(atoms)):
            out[(i, j)] = float(np.linalg.norm(s * (atoms[i] - atoms[j])) - beta)
    return out


def noncentrality(y, req, n):
    """``n D(y)^T Sigma_D(y)^{-1} D(y)`` with ``D(y) = (S^(1) - S^(2)) y``.

    Diagnostic only; no distributional claim is attached to it.
    """
    s = req.scalings.s_diag
    dy = (s[0] - s[1]) * np.asarray(y, dtype=float)
    return float(n * dy @ np.linalg.solve(sigma_diff(y, req), dy))
