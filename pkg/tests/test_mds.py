import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import orthogonal_procrustes
from scipy.spatial.distance import pdist, squareform

from catamva.errors import AsymmetricInput, NegativeDistance
from catamva.ingest import CoOccurrenceMatrix, co_occurrence
from catamva.mds import fit_mds, group_means
from catamva.synth import random_brick


def procrustes_error(scores, X):
    Xc = X - X.mean(axis=0)
    R, _ = orthogonal_procrustes(scores, Xc)
    return np.max(np.abs(scores @ R - Xc))


def test_collinear_three_points():
    m = fit_mds([[0, 1, 2], [1, 0, 1], [2, 1, 0]])
    assert m.n_dims == 1
    assert m.eigenvalues[0] == pytest.approx(2.0, abs=1e-12)
    x = m.scores[:, 0] * np.sign(m.scores[2, 0])
    np.testing.assert_allclose(x, [-1, 0, 1], atol=1e-12)


def test_equilateral_triangle():
    m = fit_mds(1 - np.eye(3))
    assert m.n_dims == 2
    assert m.eigenvalues[0] == pytest.approx(m.eigenvalues[1], rel=1e-12)


def test_identical_participants_coincide():
    v = np.zeros((3, 2, 3))
    v[0, :, 0] = v[1, :, 0] = 1
    v[2, :, 1] = 1
    from catamva.ingest import ResponseBrick

    b = ResponseBrick(["a", "b", "c"], ["e1", "e2"], [("A", "x"), ("A", "y"), ("A", "z")], v,
                      np.ones((3, 2), bool), ["g"] * 3)
    m = fit_mds(co_occurrence(b))
    np.testing.assert_allclose(m.scores[0], m.scores[1], atol=1e-12)


def test_planted_recovery(rng):
    for _ in range(100):
        X = rng.normal(size=(20, 2)) * [3, 1]
        m = fit_mds(squareform(pdist(X)))
        assert m.n_dims == 2
        assert procrustes_error(m.scores, X) <= 1e-8


def test_translation_invariance(rng):
    X = rng.normal(size=(12, 2))
    a = fit_mds(squareform(pdist(X)))
    b = fit_mds(squareform(pdist(X + [100.0, -7.0])))
    np.testing.assert_allclose(a.eigenvalues, b.eigenvalues, rtol=1e-9)
    assert procrustes_error(b.scores, a.scores) <= 1e-8


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_cooccurrence_model_properties(seed):
    b = random_brick(np.random.default_rng(seed), P=10, E=6, L=5, per=4, p=0.4)
    m = fit_mds(co_occurrence(b))
    np.testing.assert_allclose(m.scores.mean(axis=0), 0, atol=1e-10)
    if m.n_dims:
        assert abs(m.tau.sum() - 1) <= 1e-12
    assert m.negative_mass >= 0
    assert np.all(np.diff(m.eigenvalues) <= 0)


def test_gram_reconstruction(rng):
    X = rng.normal(size=(9, 3))
    C = X @ X.T
    cooc = CoOccurrenceMatrix([str(i) for i in range(9)], C, np.diag(C))
    m = fit_mds(cooc)
    Xc = X - X.mean(axis=0)
    np.testing.assert_allclose(m.scores @ m.scores.T, Xc @ Xc.T, atol=1e-10)


def test_negative_eigenvalues_reported():
    D = np.array([[0, 1, 1, 5], [1, 0, 1, 1], [1, 1, 0, 1], [5, 1, 1, 0]], float)
    m = fit_mds(D)
    assert m.negative_mass > 0
    assert np.all(m.eigenvalues > 0)


def test_errors():
    with pytest.raises(AsymmetricInput):
        fit_mds([[0, 1], [2, 0]])
    with pytest.raises(NegativeDistance):
        fit_mds([[0, -1], [-1, 0]])


def test_group_means():
    g = group_means([[0, 0], [2, 2], [10, 0]], ["a", "a", "b"])
    assert list(g) == ["a", "b"]
    np.testing.assert_allclose(g["a"], [1, 1])
