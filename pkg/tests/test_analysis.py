import numpy as np
import pytest
from hypothesis import given, strategies as st
from sklearn.metrics import silhouette_score

from rbm_music.analysis import (
    EmbeddingSet,
    conditional_affinities,
    cosine_similarity,
    energy_protocol,
    energy_trace,
    hidden_embedding,
    joint_affinities,
    scale_overlap,
    tsne,
)
from rbm_music.rbm import RbmParams, energy, make_rng


def test_scale_overlap_examples():
    assert scale_overlap(0) == 7
    assert scale_overlap(1) == scale_overlap(-1) == 2
    assert scale_overlap(2) == scale_overlap(-2) == 5
    assert scale_overlap(7) == 6
    assert [scale_overlap(s) for s in range(12)] == [7, 2, 5, 4, 3, 6, 2, 6, 3, 4, 5, 2]


@given(st.integers(-100, 100))
def test_scale_overlap_symmetric_and_periodic(s):
    assert scale_overlap(s) == scale_overlap(-s) == scale_overlap(s + 12)


def test_energy_protocol_zero_model():
    rep = energy_protocol(RbmParams.zeros(6, 4), np.ones(6), rng=make_rng(0), label="x")
    assert (rep.mean_energy, rep.stddev, rep.samples, rep.label) == (0.0, 0.0, 10, "x")


def test_energy_protocol_matches_sampling_oracle():
    p = RbmParams.random(6, 4, make_rng(1))
    v = np.array([1, 0, 1, 1, 0, 1])
    rep = energy_protocol(p, v, samples=20_000, rng=make_rng(2))
    # exact E_h[E(v,h)] = -b.v - sum_j p_j (c_j + (vW)_j)
    a = p.c + v @ p.W
    expected = -(p.b @ v) - np.sum(a / (1 + np.exp(-a)))
    assert rep.mean_energy == pytest.approx(expected, abs=5 * rep.stddev / np.sqrt(20_000))
    with pytest.raises(ValueError):
        energy_protocol(p, v, samples=1)
    with pytest.raises(ValueError):
        energy_protocol(p, np.ones(5))


def test_energy_trace_length_and_values():
    p = RbmParams.random(24, 5, make_rng(3))
    assert energy_trace(p, 0, make_rng(0), (4, 6)) == []
    assert len(energy_trace(p, 1, make_rng(0), (4, 6))) == 1
    tr = energy_trace(p, 10, make_rng(4), (4, 6))
    assert len(tr) == 10 and all(np.isfinite(tr))
    z = RbmParams.zeros(24, 5)
    assert energy_trace(z, 3, make_rng(0), (4, 6)) == [0.0, 0.0, 0.0]


def test_hidden_embedding():
    z = RbmParams.zeros(6, 3)
    np.testing.assert_array_equal(hidden_embedding(z, np.ones(6)), [0.5] * 3)
    s = hidden_embedding(z, np.ones(6), "sampled", make_rng(0))
    assert set(np.unique(s)) <= {0.0, 1.0}
    with pytest.raises(ValueError):
        hidden_embedding(z, np.ones(6), "sampled")
    with pytest.raises(ValueError):
        hidden_embedding(z, np.ones(6), "bogus")


def test_cosine_similarity():
    assert cosine_similarity([1, 0], [0, 1]) == 0.0
    assert cosine_similarity([1, 2], [2, 4]) == pytest.approx(1.0)


def test_embedding_set_tsv():
    es = EmbeddingSet()
    es.add("a", [0.1, 0.2])
    es.add("b", [0.3, 0.4])
    with pytest.raises(ValueError):
        es.add("c", [1.0])
    with pytest.raises(ValueError):
        es.to_tsv()
    assert es.to_tsv(projected=False).splitlines()[0] == "a\t0.1\t0.2"
    es.projections = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert es.to_tsv().splitlines() == ["label\tx\ty", "a\t1.0\t2.0", "b\t3.0\t4.0"]


def test_equidistant_points_share_affinity_equally():
    P, achieved = conditional_affinities(np.eye(3), perplexity=2.0)
    np.testing.assert_allclose(P, (1 - np.eye(3)) / 2, atol=1e-12)
    np.testing.assert_allclose(achieved, 2.0, atol=1e-9)


def test_affinity_invariants():
    X = make_rng(0).normal(size=(40, 5))
    P, achieved = conditional_affinities(X, perplexity=10.0)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(np.diag(P) == 0)
    assert np.all(np.abs(achieved - 10.0) < 1e-5)
    J = joint_affinities(X, 10.0)
    np.testing.assert_allclose(J, J.T)
    assert J.sum() == pytest.approx(1.0, abs=1e-12)
    # entropy recomputed independently
    for i in range(3):
        row = P[i][P[i] > 0]
        assert np.exp(-np.sum(row * np.log(row))) == pytest.approx(10.0, abs=1e-5)


def test_affinity_errors():
    with pytest.raises(ValueError):
        conditional_affinities(np.zeros((2, 3)), 1.0)
    with pytest.raises(ValueError):
        conditional_affinities(np.eye(4), 4.0)
    with pytest.raises(ValueError):
        conditional_affinities(np.zeros((5, 3)), 2.0)


def test_tsne_separates_clusters():
    rng = make_rng(1)
    centers = np.array([[0.0] * 10, [10.0] + [0.0] * 9, [0.0, 10.0] + [0.0] * 8])
    X = np.concatenate([c + rng.normal(size=(20, 10)) for c in centers])
    labels = np.repeat([0, 1, 2], 20)
    Y = tsne(X, perplexity=10.0, iterations=500, seed=0)
    assert Y.shape == (60, 2) and np.all(np.isfinite(Y))
    assert silhouette_score(Y, labels) > 0.5
    np.testing.assert_array_equal(Y, tsne(X, perplexity=10.0, iterations=500, seed=0))
