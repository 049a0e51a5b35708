"""Per-graph ASE, mean-adjacency (Abar), omnibus and Omnibar embeddings."""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput
from .model import _as_stack, build_omnibus
from .spectral import ase_with_eigvals


@dataclass(frozen=True, eq=False)
class EmbeddingResult:
    coords: np.ndarray
    eigvals: np.ndarray
    method: str
    n: int
    m: int = 1

    def blocks(self):
        """Coordinates reshaped to ``(m, n, d)``; one block per graph."""
        return self.coords.reshape(self.m, self.n, -1)

    def rotated(self, W):
        return EmbeddingResult(self.coords @ W, self.eigvals, self.method, self.n, self.m)


def omni_embed(a, d):
    """Omnibus embedding of ``m`` vertex-aligned graphs; ``nm x d`` coordinates."""
    a = _as_stack(a)
    coords, w = ase_with_eigvals(build_omnibus(a), d)
    return EmbeddingResult(coords, w, "omni", a.shape[1], a.shape[0])


def ase_embed_each(a, d):
    """Separate spectral embedding of every graph."""
    a = _as_stack(a)
    out = []
    for ag in a:
        coords, w = ase_with_eigvals(ag, d)
        out.append(EmbeddingResult(coords, w, "ase", ag.shape[0]))
    return out


def abar_embed(a, d):
    """Spectral embedding of the entrywise mean adjacency matrix."""
    a = _as_stack(a)
    coords, w = ase_with_eigvals(a.mean(axis=0), d)
    return EmbeddingResult(coords, w, "abar", a.shape[1])


def omnibar(omni_result):
    """Average of the ``m`` omnibus blocks, ``n x d``."""
    if omni_result.m < 1 or omni_result.coords.shape[0] != omni_result.n * omni_result.m:
        raise InvalidInput("omnibus block metadata inconsistent with coordinates")
    return omni_result.blocks().mean(axis=0)
