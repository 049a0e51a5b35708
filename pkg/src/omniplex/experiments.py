"""Configuration-driven Monte Carlo studies.

Every experiment expands a grid of (model parameter, n) points, runs
independent replicates on per-replicate random streams and writes one CSV row
per (grid point, method, graph, community, metric).

CSV conventions
---------------
* header ``experiment,grid,n,method,graph,community,metric,value,reps,se``;
* ``graph`` and ``community`` are 1-based; ``0`` means "shared by all graphs"
  or "all vertices / between communities" respectively;
* ``value`` is the mean of the per-replicate metric, ``se`` its sample standard
  deviation over ``sqrt(reps)``; ``reps`` counts successful replicates;
* rows computed once per grid point (theoretical values, pooled statistics)
  report ``reps`` as the number of replicates pooled (0 for pure theory) and an
  empty ``se``;
* floats are written with 9 significant digits.

Replicate ``r`` always draws from the stream keyed by ``(seed, r)``, so grid
points share common random numbers and the output does not depend on the
number of worker processes.
"""

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from threadpoolctl import threadpool_limits

from . import cluster, hyptest, presets
from . import rng as rng_mod
from .embed import abar_embed, ase_embed_each, omni_embed, omnibar
from .errors import InvalidArgument, OmniplexError
from .model import (
    EsrdpgParams,
    balanced_labels,
    probability_matrices,
    sample_multiplex,
    sbm_distribution,
)
from .scaling import scaled_blocks, scaling_matrices
from .spectral import procrustes_align
from .theory import CovarianceRequest, sigma_omni, theoretical_mse

log = logging.getLogger(__name__)

KINDS = ("mse_er", "mse_sbm", "concentration", "mahalanobis", "clustering_vs_n",
         "multiplex_clustering", "power")
CSV_HEADER = ("experiment", "grid", "n", "method", "graph", "community", "metric", "value", "reps", "se")
METHOD_ORDER = {name: i for i, name in enumerate(("ASE", "Abar", "Omni", "Omnibar", "T", "W", "What", "Wtilde"))}
GRID_RANGES = {"t": (0.0, 1.0), "c": (0.0, math.sqrt(2.0))}


def _linspace(a, b, k):
    return [round(float(v), 10) for v in np.linspace(a, b, k)]


# per-kind defaults: preset, grid, n values, CI-scale reps, paper-scale reps
DEFAULTS = {
    "mse_er": dict(preset="example1", grid=_linspace(0.1, 1.4, 14), n=[100], reps=200, paper_reps=1000),
    "mse_sbm": dict(preset="example2", grid=_linspace(0.0, 1.0, 11), n=[100], reps=200, paper_reps=500),
    "concentration": dict(preset="eq4", grid=[None], n=[250, 500, 1000], reps=50, paper_reps=100),
    "mahalanobis": dict(preset="example2", grid=_linspace(0.0, 1.0, 11), n=[100], reps=100, paper_reps=200),
    "clustering_vs_n": dict(preset="example2", grid=[0.5], n=list(range(25, 251, 25)), reps=100,
                            paper_reps=200),
    "multiplex_clustering": dict(preset="fourlayer", grid=_linspace(0.0, 1.0, 11), n=[100], reps=100,
                                 paper_reps=500),
    "power": dict(preset="example2", grid=_linspace(0.0, 1.0, 6), n=[50, 100, 200], reps=200,
                  paper_reps=1000, null_draws=500, paper_null_draws=2000, calib_reps=500,
                  paper_calib_reps=1000),
}


@dataclass
class ExperimentConfig:
    """Settings of one Monte Carlo study (JSON-serialisable).

    ``model`` may replace ``preset`` with an inline definition
    ``{"B": [[...]], "probs": [...], "C": [[...], ...]}`` (rows of ``C`` are
    the diagonals of the weighting matrices); inline models take no grid.
    """

    kind: str
    preset: str = None
    model: dict = None
    grid: list = None
    n: list = None
    reps: int = None
    seed: int = 0
    alpha: float = 0.05
    d: int = None
    noise_free: bool = False
    squared: bool = False
    methods: list = None
    clusterer: str = "gmm"
    gmm_restarts: int = 1
    kmeans_restarts: int = 10
    gmm_tol: float = 1e-8
    gmm_max_iter: int = 500
    null_draws: int = None
    calib_reps: int = None
    paper_scale: bool = False
    out: str = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgument(f"unknown experiment kind {self.kind!r}; choose from {KINDS}")
        dflt = DEFAULTS[self.kind]
        if self.preset is None and self.model is None:
            self.preset = dflt["preset"]
        if self.preset is not None and self.model is not None:
            raise InvalidArgument("give either a preset or an inline model, not both")
        if self.model is not None and self.grid is None:
            self.grid = [None]
        if self.grid is None:
            self.grid = list(dflt["grid"]) if self.preset == dflt["preset"] else self._preset_grid()
        if self.n is None:
            self.n = list(dflt["n"])
        if isinstance(self.n, (int, float)):
            self.n = [self.n]
        self.n = [int(v) for v in self.n]
        if self.reps is None:
            self.reps = dflt["paper_reps"] if self.paper_scale else dflt["reps"]
        if self.kind == "power":
            if self.null_draws is None:
                self.null_draws = dflt["paper_null_draws"] if self.paper_scale else dflt["null_draws"]
            if self.calib_reps is None:
                self.calib_reps = dflt["paper_calib_reps"] if self.paper_scale else dflt["calib_reps"]
        self.validate()

    def _preset_grid(self):
        grid_arg = presets.PRESETS[self.preset][1] if self.preset in presets.PRESETS else None
        return [None] if grid_arg is None else [1.0 if grid_arg == "c" else 0.0]

    def validate(self):
        if int(self.reps) < 1:
            raise InvalidArgument("reps must be at least 1")
        self.reps = int(self.reps)
        if any(v < 2 for v in self.n):
            raise InvalidArgument("every n must be at least 2")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidArgument("alpha must lie in (0, 1)")
        if self.clusterer not in ("gmm", "kmeans"):
            raise InvalidArgument("clusterer must be 'gmm' or 'kmeans'")
        if self.preset is not None:
            if self.preset not in presets.PRESETS:
                raise InvalidArgument(f"unknown preset {self.preset!r}; choose from {sorted(presets.PRESETS)}")
            grid_arg = presets.PRESETS[self.preset][1]
            if grid_arg is None:
                if any(v is not None for v in self.grid):
                    raise InvalidArgument(f"preset {self.preset!r} takes no grid")
            else:
                lo, hi = GRID_RANGES[grid_arg]
                for v in self.grid:
                    if v is None or not lo <= float(v) <= hi + 1e-12:
                        raise InvalidArgument(f"grid value {v!r} outside [{lo}, {hi:.4g}] for {grid_arg}")
        elif any(v is not None for v in self.grid):
            raise InvalidArgument("inline models take no grid")
        # fail early on malformed models
        self.params_at(self.grid[0], self.n[0])

    def params_at(self, value, n):
        if self.model is not None:
            f = sbm_distribution(self.model["B"], self.model.get("probs"))
            return EsrdpgParams(f, self.model["C"], n)
        kwargs = {"squared": self.squared} if self.preset == "example1" else {}
        return presets.get_preset(self.preset, value, n, **kwargs)

    def null_params(self, n):
        """Parameters with the second graph's weights replaced by the first's."""
        p = self.params_at(self.grid[0], n)
        c = p.c_diag.copy()
        c[1] = c[0]
        return EsrdpgParams(p.f, c, n)

    @classmethod
    def from_dict(cls, data):
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise InvalidArgument(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InvalidArgument(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(data)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    grid: float
    n: int
    method: str
    graph: int
    community: int
    metric: str
    value: float
    reps: int
    se: float = None


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.9g" % float(v)


def rows_to_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow([_fmt(getattr(row, k)) if k not in ("experiment", "method", "metric")
                         else getattr(row, k) for k in CSV_HEADER])
    return buf.getvalue()


def write_csv(rows, path=None):
    text = rows_to_csv(rows)
    if path is None:
        return text
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return text


def resolve_threads(threads=None):
    if threads is None:
        env = os.environ.get("OMNIPLEX_THREADS")
        threads = int(env) if env else 1
    threads = int(threads)
    if threads < 1:
        raise InvalidArgument("threads must be at least 1")
    return threads


def _init_worker():
    # single-threaded BLAS in every worker keeps floating-point results identical
    threadpool_limits(1)


@contextmanager
def _mapper(threads):
    if threads == 1:
        with threadpool_limits(1):
            yield map
        return
    with ProcessPoolExecutor(max_workers=threads, initializer=_init_worker) as pool:
        yield lambda fn, jobs: pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * threads)))


# ---------------------------------------------------------------- replicates

def _safe(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except OmniplexError as exc:
        log.debug("replicate step failed: %s", exc)
        return None


def _community_means(values, labels, K):
    out = {0: float(np.mean(values))}
    for k in range(K):
        sel = labels == k
        if sel.any():
            out[k + 1] = float(np.mean(values[sel]))
    return out


def _rep_mse(cfg, params, d, r):
    sample = sample_multiplex(params, rng_mod.stream(cfg.seed, r))
    x, labels = sample.x, sample.labels
    c = params.c_diag
    scal = scaling_matrices(c)
    L, L_S = scaled_blocks(x, c, scal)
    n, m, K = sample.n, params.m, params.f.K
    targets = L.reshape(m, n, -1)
    out = {}

    def record(method, g, est):
        sq = np.sum((est - targets[g]) ** 2, axis=1)
        for k, v in _community_means(sq, labels, K).items():
            out[(method, g + 1, k, "mse")] = v

    ase = _safe(ase_embed_each, sample.a, d)
    if ase is not None:
        for g, res in enumerate(ase):
            target = targets[g]
            record("ASE", g, res.coords @ procrustes_align(res.coords, target))
    abar = _safe(abar_embed, sample.a, d)
    if abar is not None:
        target = x * np.sqrt(c.mean(axis=0))
        aligned = abar.coords @ procrustes_align(abar.coords, target)
        for g in range(m):
            record("Abar", g, aligned)
    omni = _safe(omni_embed, sample.a, d)
    if omni is not None:
        aligned = omni.rotated(procrustes_align(omni.coords, L_S))
        blocks = aligned.blocks()
        bar = omnibar(aligned)
        for g in range(m):
            record("Omni", g, blocks[g])
            record("Omnibar", g, bar)
    return out, None


def _theory_mse_rows(cfg, params, value, n):
    req = CovarianceRequest(params)
    f = params.f
    rows = []
    for method in ("ASE", "Abar", "Omni", "Omnibar"):
        for g in range(params.m):
            try:
                per = [theoretical_mse(method, g, k, req, n) for k in range(f.K)]
            except OmniplexError:
                continue
            rows.append((method, g + 1, 0, float(np.dot(f.probs, per))))
            for k, v in enumerate(per):
                rows.append((method, g + 1, k + 1, v))
    return [ResultRow(cfg.kind, value, n, meth, g, k, "mse_theory", v, 0, None) for meth, g, k, v in rows]


def _rep_concentration(cfg, params, d, r):
    rng = rng_mod.stream(cfg.seed, r)
    n, m, K = params.n, params.m, params.f.K
    if cfg.noise_free:
        labels = balanced_labels(params.f.probs, n)
        x = params.f.atoms[labels]
        a = probability_matrices(x, params.c_diag)
    else:
        sample = sample_multiplex(params, rng)
        x, labels, a = sample.x, sample.labels, sample.a
    omni = _safe(omni_embed, a, d)
    if omni is None:
        return {}, None
    _, L_S = scaled_blocks(x, params.c_diag, scaling_matrices(params.c_diag))
    resid = omni.coords @ procrustes_align(omni.coords, L_S) - L_S
    norms = np.linalg.norm(resid, axis=1)
    radius = math.log(n * m) / math.sqrt(n)
    exceed = float(np.mean(norms > radius))
    out = {
        ("Omni", 0, 0, "exceed_frac"): exceed,
        ("Omni", 0, 0, "exceed_le_5pct"): float(exceed <= 0.05),
        ("Omni", 0, 0, "two_inf"): float(norms.max()),
    }
    blocks = resid.reshape(m, n, -1) * math.sqrt(n)
    moments = {}
    for g in range(m):
        out[("Omni", g + 1, 0, "exceed_frac")] = float(np.mean(norms[g * n:(g + 1) * n] > radius))
        out[("Omni", g + 1, 0, "two_inf")] = float(norms[g * n:(g + 1) * n].max())
        for k in range(K):
            z = blocks[g][labels == k]
            moments[(g, k)] = (len(z), z.sum(axis=0), z.T @ z)
    return out, moments


def _pooled_concentration_rows(cfg, params, value, n, results):
    rows = []
    two_inf = [res[("Omni", 0, 0, "two_inf")] for res, _ in results if ("Omni", 0, 0, "two_inf") in res]
    if two_inf:
        rows.append(ResultRow(cfg.kind, value, n, "Omni", 0, 0, "two_inf_median",
                              float(np.median(two_inf)), len(two_inf), None))
    moments = [mom for _, mom in results if mom is not None]
    if cfg.noise_free or not moments:
        return rows
    req = CovarianceRequest(params)
    for g in range(params.m):
        for k in range(params.f.K):
            cnt = sum(mom[(g, k)][0] for mom in moments)
            if cnt < 2:
                continue
            s1 = _fsum_array([mom[(g, k)][1] for mom in moments])
            s2 = _fsum_array([mom[(g, k)][2] for mom in moments])
            emp = (s2 - np.outer(s1, s1) / cnt) / (cnt - 1)
            theory = sigma_omni(g, params.f.atoms[k], req)
            rel = float(np.linalg.norm(emp - theory) / np.linalg.norm(theory))
            rows.append(ResultRow(cfg.kind, value, n, "Omni", g + 1, k + 1, "cov_rel_err", rel,
                                  len(moments), None))
    return rows


def _clustering_methods(cfg, m):
    if cfg.methods is not None:
        return list(cfg.methods)
    if cfg.kind == "multiplex_clustering":
        return ["ASE", "Omnibar"]
    return ["ASE", "Abar", "Omni", "Omnibar"]


def _fit_labels(cfg, points, K, rng):
    if cfg.clusterer == "kmeans":
        return cluster.kmeans(points, K, rng, restarts=cfg.kmeans_restarts).assignments
    model = cluster.gmm_em(points, K, rng, restarts=cfg.gmm_restarts, tol=cfg.gmm_tol,
                           max_iter=cfg.gmm_max_iter, kmeans_restarts=cfg.kmeans_restarts)
    return model.assignments


def _rep_clustering(cfg, params, d, r):
    sample = sample_multiplex(params, rng_mod.stream(cfg.seed, r))
    K, m = params.f.K, params.m
    methods = _clustering_methods(cfg, m)
    inputs = []
    if "ASE" in methods:
        ase = _safe(ase_embed_each, sample.a, d)
        if ase is not None:
            inputs += [("ASE", g + 1, res.coords) for g, res in enumerate(ase)]
    if "Abar" in methods:
        abar = _safe(abar_embed, sample.a, d)
        if abar is not None:
            inputs.append(("Abar", 0, abar.coords))
    if "Omni" in methods or "Omnibar" in methods:
        omni = _safe(omni_embed, sample.a, d)
        if omni is not None:
            if "Omni" in methods:
                inputs += [("Omni", g + 1, blk) for g, blk in enumerate(omni.blocks())]
            if "Omnibar" in methods:
                inputs.append(("Omnibar", 0, omnibar(omni)))
    out = {}
    for idx, (method, g, points) in enumerate(inputs):
        rng = rng_mod.stream(cfg.seed, r, 1, idx)
        labels = _safe(_fit_labels, cfg, points, K, rng)
        if labels is None:
            continue
        out[(method, g, 0, "misclassification")] = cluster.misclassification_rate(labels, sample.labels)
        if len(np.unique(labels)) == K:
            table = _safe(cluster.mahalanobis_separation, points, labels)
            if table is not None:
                out[(method, g, 0, "mahalanobis")] = float(np.min(table[np.triu_indices(K, 1)]))
    return out, None


def _rep_power(cfg, params, d, r, null_ref, c_n):
    sample = sample_multiplex(params, rng_mod.stream(cfg.seed, r))
    omni = _safe(omni_embed, sample.a, d)
    if omni is None:
        return {}, None
    alpha = cfg.alpha
    out = {}
    dhat = hyptest.diff_matrix(omni)
    out[("T", 0, 0, "reject")] = float(hyptest.t_test(dhat, null_ref, alpha).reject)
    aligned = hyptest.align_to_concentration(omni, sample.x, params.c_diag)
    w = _safe(hyptest.wald_oracle, hyptest.diff_matrix(aligned), params, sample.labels, alpha)
    if w is not None:
        out[("W", 0, 0, "reject")] = float(w.reject)
    per_vertex = _safe(hyptest.w_hat_per_vertex, omni)
    if per_vertex is not None:
        stat = float(np.sum(per_vertex))
        df = omni.n * d
        out[("What", 0, 0, "reject")] = float(stat > hyptest._chi2_quantile(df, 1 - alpha))
        if c_n is not None:
            out[("Wtilde", 0, 0, "reject")] = float(stat > hyptest._chi2_quantile(df + c_n, 1 - alpha))
    return out, None


REPLICATE = {
    "mse_er": _rep_mse,
    "mse_sbm": _rep_mse,
    "concentration": _rep_concentration,
    "mahalanobis": _rep_clustering,
    "clustering_vs_n": _rep_clustering,
    "multiplex_clustering": _rep_clustering,
    "power": _rep_power,
}


def _run_job(job):
    cfg, value, n, r, extra = job
    params = cfg.params_at(value, n)
    d = params.d if cfg.d is None else cfg.d
    return REPLICATE[cfg.kind](cfg, params, d, r, *extra)


# ---------------------------------------------------------------- aggregation

def _fsum_array(arrays):
    stacked = np.stack([np.asarray(a, dtype=float) for a in arrays])
    flat = stacked.reshape(len(arrays), -1)
    return np.array([math.fsum(col) for col in flat.T]).reshape(stacked.shape[1:])


def _key_order(key):
    method, g, k, metric = key
    return (METHOD_ORDER.get(method, len(METHOD_ORDER)), method, g, k, metric)


def aggregate(kind, value, n, results):
    """Mean and standard error of every per-replicate metric."""
    keys = sorted({key for res, _ in results for key in res}, key=_key_order)
    rows = []
    for key in keys:
        vals = [res[key] for res, _ in results if key in res]
        reps = len(vals)
        mean = math.fsum(vals) / reps
        se = math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / (reps - 1) / reps) if reps > 1 else None
        method, g, k, metric = key
        rows.append(ResultRow(kind, value, n, method, g, k, metric, mean, reps, se))
    return rows


def run_experiment(cfg, threads=None):
    """Run ``cfg`` and return the list of :class:`ResultRow`."""
    threads = resolve_threads(threads)
    rows = []
    with _mapper(threads) as map_fn:
        for n in cfg.n:
            extras = {}
            if cfg.kind == "power":
                extras = _power_calibration(cfg, n, map_fn, rows)
            for value in cfg.grid:
                params = cfg.params_at(value, n)
                jobs = [(cfg, value, n, r, extras.get("args", ())) for r in range(cfg.reps)]
                results = list(map_fn(_run_job, jobs))
                rows.extend(aggregate(cfg.kind, value, n, results))
                if cfg.kind in ("mse_er", "mse_sbm"):
                    rows.extend(_theory_mse_rows(cfg, params, value, n))
                elif cfg.kind == "concentration":
                    rows.extend(_pooled_concentration_rows(cfg, params, value, n, results))
    return rows


def _power_calibration(cfg, n, map_fn, rows):
    h0 = cfg.null_params(n)
    null_ref = hyptest.t_null_reference(h0, n, cfg.seed, draws=cfg.null_draws, d=cfg.d, map_fn=map_fn)
    c_n = None
    try:
        c_n = hyptest.calibrate_dof_correction(h0, n, cfg.alpha, cfg.calib_reps, cfg.seed, cfg.d, map_fn)
        rows.append(ResultRow(cfg.kind, None, n, "Wtilde", 0, 0, "c_n", c_n, cfg.calib_reps, None))
    except OmniplexError as exc:
        log.warning("calibration failed at n=%d: %s", n, exc)
    return {"args": (null_ref, c_n)}


def run_mse_experiment(cfg, threads=None):
    if cfg.kind not in ("mse_er", "mse_sbm"):
        raise InvalidArgument("MSE experiment needs kind mse_er or mse_sbm")
    return run_experiment(cfg, threads)


def run_concentration_experiment(cfg, threads=None):
    if cfg.kind != "concentration":
        raise InvalidArgument("concentration experiment needs kind concentration")
    return run_experiment(cfg, threads)


def run_clustering_experiment(cfg, threads=None):
    if cfg.kind not in ("mahalanobis", "clustering_vs_n", "multiplex_clustering"):
        raise InvalidArgument("clustering experiment needs a clustering kind")
    return run_experiment(cfg, threads)


def run_power_experiment(cfg, threads=None):
    if cfg.kind != "power":
        raise InvalidArgument("power experiment needs kind power")
    return run_experiment(cfg, threads)


def run_two_graph_test(files, d, alpha=0.05, kind="What", c_n=None):
    """Plug-in test of equal weighting on two vertex-aligned graph files."""
    from .graphio import read_graph_pair

    if kind not in ("What", "Wtilde"):
        raise InvalidArgument("only What and Wtilde are available without model parameters")
    if kind == "Wtilde" and c_n is None:
        raise InvalidArgument("Wtilde needs a user-supplied c_n")
    a = read_graph_pair(*files)
    omni = omni_embed(a, d)
    return hyptest.w_hat(omni, alpha, c_n=c_n if kind == "Wtilde" else None)
