"""Named model configurations used by the simulation studies."""

import numpy as np

from .errors import InvalidArgument
from .model import EsrdpgParams, LatentDistribution, sbm_distribution

TWO_BLOCK_B = [[0.25, 0.05], [0.05, 0.25]]
THREE_BLOCK_B = [[0.3, 0.1, 0.1], [0.1, 0.25, 0.15], [0.1, 0.15, 0.25]]


def example1(c=1.0, n=100, p=0.5, squared=False):
    """Two Erdos-Renyi graphs with edge probabilities ``p`` and ``c p``.

    ``squared=True`` uses weight ``c**2`` for the second graph instead of ``c``.
    """
    c = float(c)
    w = c**2 if squared else c
    f = LatentDistribution([[np.sqrt(p)]], [1.0])
    return EsrdpgParams(f, [[1.0], [w]], n)


def example2(t=0.0, n=100):
    """Two-group SBM; graph 2 weighted by ``diag(1 + t, 1 - t)``."""
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise InvalidArgument("t must lie in [0, 1]")
    f = sbm_distribution(TWO_BLOCK_B, [0.5, 0.5])
    return EsrdpgParams(f, [[1.0, 1.0], [1.0 + t, 1.0 - t]], n)


def eq4(n=250):
    """Three-layer two-group SBM: down-weighted, disconnected-ish and Erdos-Renyi layers."""
    f = sbm_distribution(TWO_BLOCK_B, [0.5, 0.5])
    return EsrdpgParams(f, [[0.75, 0.5], [0.5, 0.75], [1.0, 0.0]], n)


def fourlayer(t=0.0, n=100):
    """Four-layer three-group SBM moving away from homogeneity as ``t`` grows."""
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise InvalidArgument("t must lie in [0, 1]")
    f = sbm_distribution(THREE_BLOCK_B)
    s = 1.0 - t
    return EsrdpgParams(f, [[1, 1, 1], [1, 1, s], [1, s, 1], [1, s, s]], n)


PRESETS = {
    "example1": (example1, "c", "two ER graphs, p=1/2 and c*p (grid over c)"),
    "example2": (example2, "t", "two-group SBM vs C(t)=diag(1+t,1-t) (grid over t)"),
    "eq4": (eq4, None, "three-layer two-group SBM with fixed weights"),
    "fourlayer": (fourlayer, "t", "four-layer three-group SBM (grid over t)"),
}


def get_preset(name, value=None, n=100, **kwargs):
    if name not in PRESETS:
        raise InvalidArgument(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    factory, grid_arg, _ = PRESETS[name]
    if grid_arg is None:
        return factory(n=n, **kwargs)
    if value is None:
        value = 1.0 if grid_arg == "c" else 0.0
    return factory(value, n=n, **kwargs)
