import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from omniplex import presets
from omniplex.errors import DegenerateWeights
from omniplex.rng import stream
from omniplex.scaling import (
    alpha_vector,
    bias_matrix,
    h_eigenvalues_closed_form,
    pairwise_mean_matrix,
    scaled_blocks,
    scaling_matrices,
)
from omniplex.spectral import sym_eigendecomp

weights = st.lists(st.floats(0, 10, allow_nan=False), min_size=2, max_size=8).filter(lambda v: max(v) > 1e-3)


def test_pairwise_mean_matrix():
    np.testing.assert_array_equal(pairwise_mean_matrix([1, 3]), [[1, 2], [2, 3]])
    np.testing.assert_array_equal(pairwise_mean_matrix(np.ones(4)), np.ones((4, 4)))
    np.testing.assert_array_equal(pairwise_mean_matrix([1, 0]), [[1, 0.5], [0.5, 0]])
    with pytest.raises(DegenerateWeights):
        pairwise_mean_matrix([0, 0])


def test_closed_form_examples():
    np.testing.assert_allclose(h_eigenvalues_closed_form(np.ones(3)), (0, 3), atol=1e-12)
    np.testing.assert_allclose(h_eigenvalues_closed_form([1, 0]), ((1 - np.sqrt(2)) / 2, (1 + np.sqrt(2)) / 2))
    for c in (0.3, 1.0, 1.4):
        lmax = (1 + c + np.sqrt(2) * np.sqrt(1 + c**2)) / 2
        assert h_eigenvalues_closed_form([1, c])[1] == pytest.approx(lmax, abs=1e-12)
    assert h_eigenvalues_closed_form([1, 1])[1] == pytest.approx(2.0)


@settings(max_examples=200, deadline=None)
@given(weights)
def test_closed_form_matches_eigensolver(v):
    lo, hi = h_eigenvalues_closed_form(v)
    ev = sym_eigendecomp(pairwise_mean_matrix(v)).eigenvalues
    assert abs(hi - ev[0]) <= 1e-10 * max(1.0, hi)
    assert abs(lo - ev[-1]) <= 1e-10 * max(1.0, hi)
    assert lo <= 1e-12 and hi > 0


def test_alpha_vector_examples():
    np.testing.assert_allclose(alpha_vector([1, 1]), [1, 1], atol=1e-12)
    np.testing.assert_allclose(alpha_vector([1, 1, 1]), [1, 1, 1], atol=1e-12)
    v = np.array([0.75, 0.5, 1.0])
    alpha = alpha_vector(v)
    assert alpha @ alpha == pytest.approx((2.25 + np.sqrt(3) * np.sqrt(0.5625 + 0.25 + 1)) / 2, abs=1e-12)
    w, vec = np.linalg.eigh(pairwise_mean_matrix(v))
    top = vec[:, -1] * np.sign(vec[:, -1].sum())
    np.testing.assert_allclose(alpha, np.sqrt(w[-1]) * top, atol=1e-10)


@settings(max_examples=100, deadline=None)
@given(weights)
def test_alpha_positive_and_rank_one_reconstruction(v):
    alpha = alpha_vector(v)
    assert np.all(alpha > 0)
    resid = pairwise_mean_matrix(v) - np.outer(alpha, alpha)
    # what remains of H(v) is lambda_min times a unit outer product: negative semidefinite
    ev = np.linalg.eigvalsh(resid)
    scale = max(1.0, max(v))
    assert ev.max() <= 1e-9 * scale
    assert ev.min() == pytest.approx(h_eigenvalues_closed_form(v)[0], abs=1e-9 * scale)


def test_identity_weights_give_identity_scalings():
    for m, d in [(2, 1), (3, 2), (5, 4)]:
        s = scaling_matrices(np.ones((m, d)))
        np.testing.assert_allclose(s.s_diag, 1.0, atol=1e-12)


def test_example1_taylor_expansion():
    cs = np.linspace(0.8, 1.2, 21)
    gaps = np.array([scaling_matrices([[1.0], [c]]).s_diag[1, 0] - (1 + c) / 2 for c in cs])
    quad = (cs - 1) ** 2
    k = np.max(np.abs(gaps)[quad > 0] / quad[quad > 0])
    assert k < 1.0
    assert np.all(np.abs(gaps) <= k * quad + 1e-12)


def test_eq4_scalings_match_per_dimension_eigensolve():
    c = presets.eq4().c_diag
    s = scaling_matrices(c)
    for i in range(2):
        w, vec = np.linalg.eigh(pairwise_mean_matrix(c[:, i]))
        top = np.abs(vec[:, -1]) * np.sqrt(w[-1])
        np.testing.assert_allclose(s.s_diag[:, i], top, atol=1e-12)
    np.testing.assert_allclose(s.s_diag, [[0.866, 0.707], [0.724, 0.881], [1.008, 0.361]], atol=2e-3)


def test_scaling_set_derived_quantities():
    s = scaling_matrices(presets.eq4().c_diag)
    np.testing.assert_allclose(s.s_squared, sum(sg @ sg for sg in s.s))
    np.testing.assert_allclose(s.s_bar, sum(s.s) / 3)
    np.testing.assert_array_equal(s.alphas[0], s.s_diag[:, 0])


def test_scaled_blocks_identity_and_single_graph():
    x = stream(0).uniform(0, 0.5, (6, 2))
    L, L_S = scaled_blocks(x, np.ones((3, 2)), scaling_matrices(np.ones((3, 2))))
    np.testing.assert_allclose(L, np.tile(x, (3, 1)))
    np.testing.assert_allclose(L_S, L, atol=1e-12)
    c = [[0.4, 0.9]]
    L, L_S = scaled_blocks(x, c, scaling_matrices(c))
    np.testing.assert_allclose(L, x * np.sqrt(c[0]))
    np.testing.assert_allclose(L_S, L, atol=1e-12)


def test_scaled_blocks_example1():
    p, c, n = 0.5, 0.6, 5
    x = np.full((n, 1), np.sqrt(p))
    s = scaling_matrices([[1.0], [c]])
    L, L_S = scaled_blocks(x, [[1.0], [c]], s)
    np.testing.assert_allclose(L[:n], np.sqrt(p))
    np.testing.assert_allclose(L[n:], np.sqrt(c) * np.sqrt(p))
    np.testing.assert_allclose(L_S[n:], s.s_diag[1, 0] * np.sqrt(p))


def test_bias_matrix():
    x = stream(1).uniform(0, 0.5, (4, 2))
    assert np.all(bias_matrix(x, np.ones((2, 2))) == 0)
    np.testing.assert_allclose(bias_matrix(x, [[0.3, 0.8]]), 0, atol=1e-15)
    p, c = 0.5, 0.5
    xe = np.full((3, 1), np.sqrt(p))
    b = bias_matrix(xe, [[1.0], [c]])
    s2 = alpha_vector([1.0, c])[1]
    np.testing.assert_allclose(b[3:], (s2 - np.sqrt(c)) * np.sqrt(p))


def test_scaling_injective_on_random_weight_sets():
    rng = stream(3)
    for _ in range(100):
        c1 = rng.uniform(0, 2, (3, 2))
        c2 = rng.uniform(0, 2, (3, 2))
        gap = np.abs(scaling_matrices(c1).s_diag - scaling_matrices(c2).s_diag).max()
        assert gap > 1e-10
