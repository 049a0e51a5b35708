import numpy as np
import pytest

from omniplex import presets
from omniplex.embed import abar_embed, ase_embed_each, omni_embed, omnibar
from omniplex.errors import RankDeficient
from omniplex.model import balanced_labels, probability_matrices, sample_multiplex
from omniplex.rng import stream
from omniplex.scaling import scaled_blocks, scaling_matrices
from omniplex.spectral import ase, procrustes_align, two_inf_norm


def _noise_free(params, n):
    labels = balanced_labels(params.f.probs, n)
    x = params.f.atoms[labels]
    return x, probability_matrices(x, params.c_diag)


def _aligned_residual(est, target):
    return two_inf_norm(est @ procrustes_align(est, target) - target)


@pytest.mark.parametrize("params", [presets.eq4(), presets.example2(0.6), presets.example1(0.7)])
def test_omni_noise_free_equals_scaled_positions(params):
    x, p = _noise_free(params, 200)
    _, L_S = scaled_blocks(x, params.c_diag, scaling_matrices(params.c_diag))
    res = omni_embed(p, params.d)
    assert res.coords.shape == (200 * params.m, params.d)
    assert _aligned_residual(res.coords, L_S) <= 1e-7


def test_omni_single_graph_is_ase():
    a = sample_multiplex(presets.example2(0.0, n=40), stream(1)).a[0]
    np.testing.assert_allclose(omni_embed([a], 2).coords, ase(a, 2), atol=1e-12)


def test_omni_rank_deficient():
    with pytest.raises(RankDeficient):
        omni_embed([np.zeros((5, 5)), np.zeros((5, 5))], 1)


def test_ase_each_noise_free():
    params = presets.eq4()
    x, p = _noise_free(params, 100)
    res = ase_embed_each(p[:2], 2)
    for g in range(2):
        assert _aligned_residual(res[g].coords, x * np.sqrt(params.c_diag[g])) <= 1e-8


def test_ase_each_er():
    p = 0.3 * np.ones((10, 10))
    np.testing.assert_allclose(ase_embed_each([p], 1)[0].coords[:, 0], np.sqrt(0.3))


def test_abar_identical_inputs():
    a = sample_multiplex(presets.example2(0.0, n=40), stream(2)).a[0]
    np.testing.assert_allclose(abar_embed([a, a, a], 2).coords, ase(a, 2), atol=1e-12)


def test_abar_noise_free():
    params = presets.example2(0.4)
    x, p = _noise_free(params, 500)
    res = abar_embed(p, 2)
    assert _aligned_residual(res.coords, x * np.sqrt(params.c_diag.mean(axis=0))) <= 1e-8


def test_omnibar_cases():
    a = sample_multiplex(presets.example2(0.0, n=30), stream(3)).a
    single = omni_embed(a[:1], 2)
    np.testing.assert_array_equal(omnibar(single), single.coords)
    b = stream(4).standard_normal((6, 2))
    from omniplex.embed import EmbeddingResult

    res = EmbeddingResult(np.vstack([b, -b]), np.ones(2), "omni", 6, 2)
    np.testing.assert_array_equal(omnibar(res), 0)


def test_omnibar_noise_free():
    params = presets.eq4()
    x, p = _noise_free(params, 200)
    s = scaling_matrices(params.c_diag)
    bar = omnibar(omni_embed(p, 2))
    assert _aligned_residual(bar, x * s.s_bar_diag) <= 1e-7


def test_omnibar_commutes_with_right_multiplication():
    res = omni_embed(sample_multiplex(presets.eq4(n=30), stream(5)).a, 2)
    m = stream(6).standard_normal((2, 2))
    np.testing.assert_allclose(omnibar(res.rotated(m)), omnibar(res) @ m, atol=1e-14)


def test_eigvals_positive_descending():
    res = omni_embed(sample_multiplex(presets.eq4(n=50), stream(7)).a, 2)
    assert np.all(res.eigvals > 0) and res.eigvals[0] >= res.eigvals[1]
    assert np.all(np.isfinite(res.coords))
