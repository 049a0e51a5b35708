"""Two-graph tests of ``H0: C^(1) = C^(2)`` built on the omnibus embedding.

Statistic kinds
---------------
``T``
    Squared Frobenius norm of the block difference, referenced to a Monte
    Carlo null simulated from known (oracle) parameters.
``W``
    Oracle Wald statistic using the true difference covariance; chi-square
    reference with ``n d`` degrees of freedom.
``What``
    Fully data-driven Wald statistic using a plug-in covariance estimate.
``Wtilde``
    ``What`` with a chi-square reference of ``n d + c_n`` degrees of freedom,
    ``c_n`` calibrated by simulation under the null.
"""

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from . import rng as rng_mod
from .chi2 import chi2
from .embed import omni_embed, omnibar
from .errors import (
    CalibrationFailed,
    InvalidArgument,
    SingularCovariance,
    SingularMoment,
    UnsupportedArity,
)
from .model import sample_multiplex
from .scaling import scaled_blocks, scaling_matrices
from .spectral import procrustes_align
from .theory import CovarianceRequest, sigma_diff

log = logging.getLogger(__name__)

KINDS = ("T", "W", "What", "Wtilde")
PINV_RTOL = 1e-10
PINV_ATOL = 1e-14
# stream key that separates calibration / null-reference draws from evaluation replicates
CALIBRATION_KEY = 0x0CA1
T_NULL_KEY = 0x7E11


@dataclass
class TestReport:
    """Outcome of one two-graph test."""

    __test__ = False  # keep pytest from collecting this class

    kind: str
    statistic: float
    df: int
    critical_value: float
    p_value: float
    reject: bool
    alpha: float
    n: int
    per_vertex: np.ndarray = None
    c_n: int = None
    note: str = ""

    CSV_FIELDS = ("kind", "statistic", "df", "critical_value", "p_value", "reject", "alpha", "n", "c_n", "note")

    def to_dict(self):
        out = asdict(self)
        out["per_vertex"] = None if self.per_vertex is None else [float(v) for v in self.per_vertex]
        out["reject"] = bool(self.reject)
        return out

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    def csv_row(self):
        return {k: getattr(self, k) for k in self.CSV_FIELDS}

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=self.CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        writer.writerow(self.csv_row())
        return buf.getvalue()

    def summary(self):
        lines = [
            f"statistic {self.kind} = {self.statistic:.6g} (n = {self.n})",
            f"reference df = {self.df}" + (f" (c_n = {self.c_n})" if self.c_n is not None else ""),
            f"critical value at alpha = {self.alpha:g}: {self.critical_value:.6g}",
        ]
        if self.p_value is not None:
            lines.append(f"p-value = {self.p_value:.4g}")
        lines.append("decision: " + ("reject H0" if self.reject else "do not reject H0"))
        if self.note:
            lines.append(self.note)
        return "\n".join(lines)


@lru_cache(maxsize=4096)
def _chi2_quantile(df, p):
    return chi2(df).quantile(p)


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise InvalidArgument("alpha must lie in (0, 1)")


def _chi2_report(kind, per_vertex, df, alpha, n, c_n=None, note=""):
    stat = float(np.sum(per_vertex))
    crit = _chi2_quantile(int(df), 1.0 - alpha)
    p = min(max(chi2(int(df)).sf(stat), 0.0), 1.0)
    return TestReport(kind, stat, int(df), crit, p, stat > crit, alpha, n, per_vertex, c_n, note)


def diff_matrix(omni_result):
    """Row-wise difference of the two omnibus blocks."""
    if omni_result.m != 2:
        raise UnsupportedArity(f"difference needs m = 2 graphs, got {omni_result.m}")
    blocks = omni_result.blocks()
    return blocks[0] - blocks[1]


def t_statistic(dhat):
    """Squared Frobenius norm of ``dhat``."""
    dhat = np.asarray(dhat, dtype=float)
    return float(np.sum(dhat**2))


def _null_replicate_omni(params, n, d, seed, key, r):
    sample = sample_multiplex(params, rng_mod.stream(seed, key, n, r), n=n)
    return omni_embed(sample.a, d)


def _check_h0(params):
    if params.m != 2:
        raise UnsupportedArity(f"two-graph test needs m = 2, got {params.m}")
    if not np.allclose(params.c_diag[0], params.c_diag[1], rtol=0, atol=1e-12):
        raise InvalidArgument("null parameters must satisfy C^(1) = C^(2)")


def _t_null_one(args):
    params, n, d, seed, r = args
    return t_statistic(diff_matrix(_null_replicate_omni(params, n, d, seed, T_NULL_KEY, r)))


def t_null_reference(params_h0, n, seed, draws=2000, d=None, map_fn=map):
    """Sorted Monte Carlo draws of ``T`` under the null (oracle parameters).

    Each draw resamples the latent positions, so the reference is marginal
    over the latent distribution.
    """
    _check_h0(params_h0)
    d = params_h0.d if d is None else d
    jobs = [(params_h0, n, d, seed, r) for r in range(draws)]
    return np.sort(np.fromiter(map_fn(_t_null_one, jobs), dtype=float, count=draws))


def t_test(dhat, null_draws, alpha=0.05):
    """Monte Carlo test with ``T``; p-value ``(1 + #{T_null >= T}) / (1 + B)``."""
    _check_alpha(alpha)
    null = np.sort(np.asarray(null_draws, dtype=float))
    if null.size == 0:
        raise InvalidArgument("empty null reference")
    stat = t_statistic(dhat)
    crit = float(np.quantile(null, 1.0 - alpha, method="higher"))
    exceed = null.size - np.searchsorted(null, stat, side="left")
    p = (1.0 + exceed) / (1.0 + null.size)
    n = np.asarray(dhat).shape[0]
    return TestReport("T", stat, None, crit, p, stat > crit, alpha, n,
                      note="oracle Monte Carlo null reference")


def align_to_concentration(omni_result, x, c_diag, scalings=None):
    """Rotate an omnibus embedding onto its concentration point ``L_S``."""
    scalings = scaling_matrices(c_diag) if scalings is None else scalings
    _, l_s = scaled_blocks(x, c_diag, scalings)
    return omni_result.rotated(procrustes_align(omni_result.coords, l_s))


def _quadratic_forms(dhat, inverses):
    return np.einsum("ni,nij,nj->n", dhat, inverses, dhat)


def wald_oracle(dhat, params, labels, alpha=0.05, req=None):
    """Oracle Wald test using the true difference covariance at each vertex.

    ``dhat`` must be expressed in the basis of the true latent positions
    (see :func:`align_to_concentration`).
    """
    _check_alpha(alpha)
    dhat = np.asarray(dhat, dtype=float)
    labels = np.asarray(labels)
    n, d = dhat.shape
    if labels.shape != (n,):
        raise InvalidArgument("need one label per row of dhat")
    req = CovarianceRequest(params) if req is None else req
    inverses = []
    for k in range(params.f.K):
        cov = sigma_diff(params.f.atoms[k], req)
        try:
            inverses.append(np.linalg.inv(np.linalg.cholesky(cov)))
        except np.linalg.LinAlgError:
            raise SingularCovariance(f"difference covariance singular at atom {k}") from None
    inverses = np.array([li.T @ li for li in inverses])
    per_vertex = n * _quadratic_forms(dhat, inverses[labels])
    return _chi2_report("W", per_vertex, n * d, alpha, n)


def psd_project(mats):
    """Nearest PSD matrices (Frobenius) by clipping negative eigenvalues."""
    mats = np.asarray(mats, dtype=float)
    sym = (mats + np.swapaxes(mats, -1, -2)) / 2
    w, v = np.linalg.eigh(sym)
    w = np.clip(w, 0.0, None)
    return (v * w[..., None, :]) @ np.swapaxes(v, -1, -2)


def estimate_sigma_d(omni_result):
    """Plug-in estimate of the difference covariance at every vertex, ``(n, d, d)``.

    The second-moment matrix comes from the full omnibus embedding and the
    Bernoulli-variance kernel from the Omnibar rows; each estimate is
    projected onto the PSD cone.
    """
    if omni_result.m != 2:
        raise UnsupportedArity(f"difference covariance needs m = 2, got {omni_result.m}")
    n, m = omni_result.n, omni_result.m
    lhat = omni_result.coords
    d = lhat.shape[1]
    if n < d + 1:
        raise InvalidArgument("need n >= d + 1")
    moment = lhat.T @ lhat / (n * m)
    ev = np.linalg.eigvalsh(moment)
    if not ev[0] > 1e-12 * max(ev[-1], 0.0):
        raise SingularMoment("embedding second-moment matrix is singular")
    dinv = np.linalg.inv(moment)
    xbar = omnibar(omni_result)
    gram = xbar @ xbar.T
    weights = gram - gram**2
    np.fill_diagonal(weights, 0.0)
    outer = np.einsum("jk,jl->jkl", xbar, xbar).reshape(n, d * d)
    kernel = (weights @ outer / (n - 1)).reshape(n, d, d)
    return psd_project(0.5 * dinv @ kernel @ dinv)


def _pinv_psd(mats):
    w, v = np.linalg.eigh(mats)
    cutoff = np.maximum(PINV_RTOL * w.max(axis=-1, keepdims=True), PINV_ATOL)
    keep = w > cutoff
    inv_w = np.where(keep, 1.0 / np.where(keep, w, 1.0), 0.0)
    zero = ~keep.any(axis=-1)
    if zero.any():
        log.info("%d vertices have an all-zero covariance estimate; they contribute 0", int(zero.sum()))
    return (v * inv_w[..., None, :]) @ np.swapaxes(v, -1, -2)


def w_hat_per_vertex(omni_result, scale="n"):
    """Per-vertex plug-in Wald terms.

    ``scale="n"`` multiplies each quadratic form by ``n`` so that every term is
    approximately chi-square with ``d`` degrees of freedom under the null;
    ``scale="inverse_n"`` divides by ``n`` instead.
    """
    n = omni_result.n
    if scale == "n":
        factor = float(n)
    elif scale == "inverse_n":
        factor = 1.0 / n
    else:
        raise InvalidArgument("scale must be 'n' or 'inverse_n'")
    dhat = diff_matrix(omni_result)
    return factor * _quadratic_forms(dhat, _pinv_psd(estimate_sigma_d(omni_result)))


def w_hat(omni_result, alpha=0.05, c_n=None, scale="n"):
    """Plug-in Wald test; with ``c_n`` given this is the level-corrected variant."""
    _check_alpha(alpha)
    per_vertex = w_hat_per_vertex(omni_result, scale)
    df = omni_result.n * omni_result.coords.shape[1]
    if c_n is None:
        return _chi2_report("What", per_vertex, df, alpha, omni_result.n)
    c_n = int(c_n)
    if c_n < 0:
        raise InvalidArgument("c_n must be a nonnegative integer")
    return _chi2_report("Wtilde", per_vertex, df + c_n, alpha, omni_result.n, c_n=c_n)


def dof_correction_from_null(null_stats, df, alpha=0.05, c_max=None):
    """Smallest ``c >= 0`` whose chi-square ``(df + c)`` critical value keeps the
    empirical null rejection rate at or below ``alpha``."""
    _check_alpha(alpha)
    stats = np.sort(np.asarray(null_stats, dtype=float))
    if stats.size == 0:
        raise InvalidArgument("no null statistics supplied")
    c_max = 10 * df if c_max is None else int(c_max)

    def level_ok(c):
        crit = _chi2_quantile(df + c, 1.0 - alpha)
        return (stats.size - np.searchsorted(stats, crit, side="right")) / stats.size <= alpha

    if not level_ok(c_max):
        raise CalibrationFailed(f"no correction up to {c_max} reaches level {alpha}")
    # rejection is nonincreasing in c, so bisect on the first c that reaches level
    lo, hi = -1, c_max
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if level_ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _what_null_one(args):
    params, n, d, seed, r = args
    return float(np.sum(w_hat_per_vertex(_null_replicate_omni(params, n, d, seed, CALIBRATION_KEY, r))))


def simulate_w_hat_null(params_h0, n, reps, seed, d=None, map_fn=map):
    """Null draws of the plug-in Wald statistic (independent calibration streams)."""
    _check_h0(params_h0)
    d = params_h0.d if d is None else d
    jobs = [(params_h0, n, d, seed, r) for r in range(reps)]
    return np.fromiter(map_fn(_what_null_one, jobs), dtype=float, count=reps)


def calibrate_dof_correction(params_h0, n, alpha=0.05, reps=1000, seed=0, d=None, map_fn=map):
    """Calibrate the degrees-of-freedom correction ``c_n`` by null simulation."""
    if reps < 1:
        raise InvalidArgument("reps must be positive")
    d = params_h0.d if d is None else d
    stats = simulate_w_hat_null(params_h0, n, reps, seed, d, map_fn)
    return dof_correction_from_null(stats, n * d, alpha)
