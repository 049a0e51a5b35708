import numpy as np
import pytest

from omniplex import presets
from omniplex.errors import InvalidInput, NotPSD, ProbabilityOutOfRange, ValidationError
from omniplex.model import (
    EsrdpgParams,
    LatentDistribution,
    balanced_labels,
    build_omnibus,
    expected_omnibus,
    probability_matrices,
    sample_adjacency,
    sample_latent,
    sample_multiplex,
    sbm_distribution,
    sbm_latent_atoms,
)
from omniplex.rng import stream
from omniplex.spectral import sym_eigendecomp


def _match_up_to_column_sign(atoms, expected, atol):
    signs = np.sign(np.sum(atoms * expected, axis=0))
    signs[signs == 0] = 1
    np.testing.assert_allclose(atoms * signs, expected, atol=atol)


def test_two_block_atoms():
    atoms = sbm_latent_atoms(presets.TWO_BLOCK_B, [0.5, 0.5])
    _match_up_to_column_sign(atoms, [[-0.39, 0.32], [-0.39, -0.32]], atol=0.01)
    np.testing.assert_allclose(atoms @ atoms.T, presets.TWO_BLOCK_B, atol=1e-10)


def test_three_block_atoms():
    atoms = sbm_latent_atoms(presets.THREE_BLOCK_B)
    np.testing.assert_allclose(atoms @ atoms.T, presets.THREE_BLOCK_B, atol=1e-10)
    # reference atoms, up to column signs and the order of the tied eigenvalues
    expected = np.array([[0.41, -0.37, 0.0], [0.41, 0.18, -0.23], [0.41, 0.18, 0.23]])
    _match_up_to_column_sign(atoms, expected, atol=0.01)


def test_er_atom():
    np.testing.assert_allclose(sbm_latent_atoms([[0.3]]), [[np.sqrt(0.3)]])


def test_atoms_diagonalise_second_moment():
    f = sbm_distribution([[0.5, 0.2, 0.1], [0.2, 0.4, 0.2], [0.1, 0.2, 0.6]], [0.2, 0.3, 0.5])
    delta = f.delta
    assert np.abs(delta - np.diag(np.diag(delta))).max() < 1e-10
    assert np.all(np.diff(np.diag(delta)) <= 0)


def test_not_psd():
    with pytest.raises(NotPSD):
        sbm_latent_atoms([[0.1, 0.5], [0.5, 0.1]])


def test_latent_distribution_validation():
    with pytest.raises(ValidationError):
        LatentDistribution([[0.5]], [0.9])
    with pytest.raises(ValidationError):
        LatentDistribution([[1.2]], [1.0])
    with pytest.raises(ValidationError):
        # non-diagonal second moment
        LatentDistribution([[0.5, 0.3], [0.3, 0.5]], [0.5, 0.5])


def test_params_validation():
    f = sbm_distribution(presets.TWO_BLOCK_B, [0.5, 0.5])
    with pytest.raises(ValidationError):
        EsrdpgParams(f, [[1.0, 0.0], [1.0, 0.0]])
    with pytest.raises(ValidationError):
        EsrdpgParams(f, [[1.0, -0.1]])
    with pytest.raises(ValidationError):
        EsrdpgParams(f, [[10.0, 1.0]])
    with pytest.raises(ValidationError):
        EsrdpgParams(f, [[[1.0, 0.1], [0.1, 1.0]]])
    p = EsrdpgParams(f, [np.eye(2), np.diag([2.0, 0.0])])
    np.testing.assert_allclose(p.c_diag, [[1, 1], [2, 0]])


@pytest.mark.parametrize("t", np.linspace(0, 1, 11))
def test_study_configurations_are_valid(t):
    presets.example2(t)
    presets.fourlayer(t)
    presets.example1(0.1 + 1.3 * t)
    presets.eq4()


def test_sample_latent_single_atom(rng):
    f = LatentDistribution([[0.5]], [1.0])
    x, labels = sample_latent(f, 20, rng)
    assert np.all(x == 0.5) and np.all(labels == 0)


def test_sample_latent_frequency(rng):
    f = sbm_distribution(presets.TWO_BLOCK_B, [0.5, 0.5])
    n = 100_000
    _, labels = sample_latent(f, n, rng)
    assert abs(labels.mean() - 0.5) <= 3 * 0.5 / np.sqrt(n)


def test_sampling_deterministic():
    p = presets.example2(0.3, n=50)
    s1 = sample_multiplex(p, stream(7, 3))
    s2 = sample_multiplex(p, stream(7, 3))
    np.testing.assert_array_equal(s1.x, s2.x)
    np.testing.assert_array_equal(s1.a, s2.a)


def test_balanced_labels_counts():
    labels = balanced_labels([0.5, 0.5], 7)
    assert np.bincount(labels).tolist() == [4, 3]
    assert np.bincount(balanced_labels([1 / 3] * 3, 9)).tolist() == [3, 3, 3]


def test_probability_matrices_er():
    p, c, n = 0.5, 0.7, 6
    x = np.full((n, 1), np.sqrt(p))
    pm = probability_matrices(x, [[1.0], [c**2]])
    np.testing.assert_allclose(pm[1], c**2 * p * np.ones((n, n)))


def test_probability_matrices_zero_weight_layer_is_er():
    params = presets.eq4()
    pm = probability_matrices(params.f.atoms, params.c_diag)
    np.testing.assert_allclose(pm[2], 3 / 20, atol=1e-12)


def test_probability_matrices_identity_weights():
    x = sbm_latent_atoms(presets.TWO_BLOCK_B, [0.5, 0.5])
    np.testing.assert_allclose(probability_matrices(x, [[1.0, 1.0]])[0], x @ x.T)


def test_probability_out_of_range():
    with pytest.raises(ProbabilityOutOfRange):
        probability_matrices([[1.0], [1.0]], [[1.5]])


def test_sample_adjacency_extremes(rng):
    assert np.all(sample_adjacency(np.zeros((5, 5)), rng) == 0)
    np.testing.assert_array_equal(sample_adjacency(np.ones((5, 5)), rng), np.ones((5, 5)) - np.eye(5))


def test_sample_adjacency_density(rng):
    n = 200
    a = sample_adjacency(np.full((n, n), 0.5), rng)
    assert np.array_equal(a, a.T) and np.all(np.diag(a) == 0)
    pairs = n * (n - 1) / 2
    density = np.triu(a, 1).sum() / pairs
    assert abs(density - 0.5) <= 3 * 0.5 / np.sqrt(pairs)


def test_build_omnibus_cases():
    a = np.array([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_array_equal(build_omnibus([a]), a)
    np.testing.assert_array_equal(build_omnibus([a, a]), np.block([[a, a], [a, a]]))
    j = np.ones((3, 3)) - np.eye(3)
    om = build_omnibus([np.zeros((3, 3)), j])
    np.testing.assert_array_equal(om[:3, 3:], j / 2)
    np.testing.assert_array_equal(om[3:, :3], j / 2)
    np.testing.assert_array_equal(om[3:, 3:], j)


def test_build_omnibus_shape_mismatch():
    with pytest.raises(InvalidInput):
        build_omnibus(np.ones((2, 3, 4)))


def test_expected_omnibus_iid_is_kronecker():
    x = sbm_latent_atoms(presets.TWO_BLOCK_B, [0.5, 0.5])[[0, 1, 1, 0]]
    p = probability_matrices(x, [[1, 1], [1, 1], [1, 1]])
    np.testing.assert_allclose(expected_omnibus(p), np.kron(np.ones((3, 3)), x @ x.T), atol=1e-14)
    np.testing.assert_allclose(expected_omnibus(p[:1]), p[0])


def test_expected_omnibus_rank_bounds():
    params = presets.eq4(n=50)
    s = sample_multiplex(params, stream(0))
    ev = sym_eigendecomp(expected_omnibus(s.p)).eigenvalues
    tol = 1e-8 * 50
    assert np.sum(ev > tol) == 2
    assert np.sum(np.abs(ev) > tol) <= 4


def test_omnibus_linearity():
    s = sample_multiplex(presets.example2(0.5, n=30), stream(4))
    np.testing.assert_allclose(build_omnibus(s.p), expected_omnibus(s.p), atol=1e-14)
    mean_a = build_omnibus(s.a * 0.5 + s.p * 0.5)
    np.testing.assert_allclose(mean_a, 0.5 * build_omnibus(s.a) + 0.5 * build_omnibus(s.p), atol=1e-14)
