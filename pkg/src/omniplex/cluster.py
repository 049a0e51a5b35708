"""Community detection on embedded points."""

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateComponent, InvalidArgument, SingularCovariance, Unsupported

log = logging.getLogger(__name__)

MAX_PERMUTATION_K = 8


@dataclass(eq=False)
class ClusterModel:
    k: int
    means: np.ndarray
    weights: np.ndarray
    assignments: np.ndarray
    covariances: np.ndarray = None
    log_likelihood: float = None
    wcss: float = None
    n_iter: int = 0
    converged: bool = False
    history: list = field(default_factory=list)


def _check_points(points, k):
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if not 1 <= k <= x.shape[0]:
        raise InvalidArgument(f"need 1 <= k <= n, got k={k}, n={x.shape[0]}")
    return x


def _sq_dists(x, centers):
    return np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)


def _kmeanspp(x, k, rng):
    n = x.shape[0]
    centers = [x[rng.integers(n)]]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        idx = rng.integers(n) if total <= 0 else rng.choice(n, p=d2 / total)
        centers.append(x[idx])
        d2 = np.minimum(d2, np.sum((x - x[idx]) ** 2, axis=1))
    return np.array(centers)


def _lloyd(x, centers, max_iter):
    history = []
    converged = False
    labels = None
    for it in range(max_iter):
        d2 = _sq_dists(x, centers)
        new_labels = np.argmin(d2, axis=1)
        wcss = float(d2[np.arange(len(x)), new_labels].sum())
        if history:
            assert wcss <= history[-1] + 1e-9 * max(1.0, history[-1]), "WCSS increased"
        history.append(wcss)
        if labels is not None and np.array_equal(labels, new_labels):
            converged = True
            break
        labels = new_labels
        centers = centers.copy()
        for j in range(len(centers)):
            members = labels == j
            if members.any():
                centers[j] = x[members].mean(axis=0)
            else:
                # empty cluster: reseed at the point farthest from its centroid
                far = int(np.argmax(d2[np.arange(len(x)), labels]))
                centers[j] = x[far]
                labels[far] = j
                d2[far] = 0.0
    return labels, centers, history[-1], history, it + 1, converged


def kmeans(points, k, rng, restarts=10, max_iter=300):
    """Lloyd's algorithm from k-means++ seeds; best of ``restarts`` by WCSS."""
    x = _check_points(points, k)
    best = None
    for _ in range(max(1, int(restarts))):
        labels, centers, wcss, history, n_iter, conv = _lloyd(x, _kmeanspp(x, k, rng), max_iter)
        if best is None or wcss < best.wcss:
            weights = np.bincount(labels, minlength=k) / len(x)
            best = ClusterModel(k, centers, weights, labels, wcss=wcss, n_iter=n_iter,
                                converged=conv, history=history)
    return best


def _log_gauss(x, mean, cov):
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise DegenerateComponent("component covariance is not positive definite") from None
    z = np.linalg.solve(chol, (x - mean).T)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return -0.5 * (np.sum(z**2, axis=0) + logdet + x.shape[1] * np.log(2 * np.pi))


def _ridge(cov, reg):
    d = cov.shape[0]
    return cov + reg * np.trace(cov) / d * np.eye(d)


def _e_step(x, weights, means, covs):
    logp = np.stack([np.log(w) + _log_gauss(x, mu, c) for w, mu, c in zip(weights, means, covs)], axis=1)
    top = logp.max(axis=1, keepdims=True)
    lse = top[:, 0] + np.log(np.exp(logp - top).sum(axis=1))
    return float(lse.sum()), np.exp(logp - lse[:, None])


def _em_run(x, k, rng, tol, max_iter, reg, kmeans_restarts):
    n, d = x.shape
    global_cov = _ridge(np.cov(x.T, bias=True).reshape(d, d), reg)
    km = kmeans(x, k, rng, restarts=kmeans_restarts)
    means = km.means.copy()
    weights = np.maximum(np.bincount(km.assignments, minlength=k) / n, 1.0 / n)
    weights /= weights.sum()
    covs = []
    for j in range(k):
        pts = x[km.assignments == j]
        covs.append(_ridge(np.cov(pts.T, bias=True).reshape(d, d), reg) if len(pts) > d else global_cov)
    covs = np.array(covs)

    failures = 0
    history = []
    converged = False
    ll = -np.inf
    for it in range(max_iter):
        ll, resp = _e_step(x, weights, means, covs)
        history.append(ll)
        if len(history) > 1 and abs(ll - history[-2]) < tol * abs(ll):
            converged = True
            break
        nk = resp.sum(axis=0)
        weights = nk / n
        means = (resp.T @ x) / np.maximum(nk, 1e-300)[:, None]
        reset = False
        for j in range(k):
            diff = x - means[j]
            cov = (resp[:, j, None] * diff).T @ diff / max(nk[j], 1e-300)
            cov = _ridge(cov, reg)
            if nk[j] < 1e-8 or not np.all(np.isfinite(cov)) or np.linalg.det(cov) < 1e-300:
                failures += 1
                if failures > 3:
                    raise DegenerateComponent(f"component {j} collapsed {failures} times")
                log.debug("reinitialising collapsed component %d", j)
                means[j] = x[rng.integers(n)]
                cov = global_cov
                weights[j] = 1.0 / k
                reset = True
            covs[j] = cov
        if reset:
            weights /= weights.sum()
            history = []
    labels = np.argmax(resp, axis=1)
    return ClusterModel(k, means, weights, labels, covariances=covs, log_likelihood=ll,
                        n_iter=it + 1, converged=converged, history=history)


def gmm_em(points, k, rng, restarts=1, tol=1e-8, max_iter=500, reg=1e-8, kmeans_restarts=10):
    """Full-covariance Gaussian mixture fit by EM, initialised from k-means.

    Covariances get a ridge of ``reg * trace / d``. The run with the highest
    log-likelihood among ``restarts`` is returned.
    """
    x = _check_points(points, k)
    if x.shape[0] < k * (x.shape[1] + 1):
        raise InvalidArgument("too few points for a full-covariance mixture")
    best = None
    for _ in range(max(1, int(restarts))):
        model = _em_run(x, k, rng, tol, max_iter, reg, kmeans_restarts)
        if best is None or model.log_likelihood > best.log_likelihood:
            best = model
    return best


def misclassification_rate(pred, truth):
    """Fraction of mismatches under the best relabelling of ``pred``."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise InvalidArgument("label vectors differ in length")
    if pred.size == 0:
        return 0.0
    pu, pi = np.unique(pred, return_inverse=True)
    tu, ti = np.unique(truth, return_inverse=True)
    k = max(len(pu), len(tu))
    if k > MAX_PERMUTATION_K:
        raise Unsupported(f"permutation search supports at most {MAX_PERMUTATION_K} labels")
    conf = np.zeros((k, k), dtype=int)
    np.add.at(conf, (pi.ravel(), ti.ravel()), 1)
    rows = np.arange(k)
    best = max(conf[rows, list(perm)].sum() for perm in itertools.permutations(range(k)))
    return 1.0 - best / pred.size


def mahalanobis_separation(points, assignments):
    """Squared Mahalanobis distances between cluster centroids (pooled covariance).

    Returns a symmetric ``K x K`` array whose rows follow the sorted distinct
    labels of ``assignments``.
    """
    x = _check_points(points, 1)
    labels = np.asarray(assignments)
    uniq = np.unique(labels)
    if len(x) <= len(uniq):
        raise SingularCovariance("need more points than clusters for a pooled covariance")
    centroids = np.array([x[labels == u].mean(axis=0) for u in uniq])
    resid = x - centroids[np.searchsorted(uniq, labels)]
    pooled = resid.T @ resid / (len(x) - len(uniq))
    d = pooled.shape[0]
    try:
        chol = np.linalg.cholesky(pooled)
    except np.linalg.LinAlgError:
        tr = np.trace(pooled)
        if not tr > 0:
            raise SingularCovariance("pooled covariance is zero") from None
        try:
            chol = np.linalg.cholesky(pooled + 1e-10 * tr / d * np.eye(d))
        except np.linalg.LinAlgError:
            raise SingularCovariance("pooled covariance singular after ridge") from None
    z = np.linalg.solve(chol, centroids.T).T
    diff = z[:, None, :] - z[None, :, :]
    return np.sum(diff**2, axis=2)
