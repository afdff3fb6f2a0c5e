import numpy as np
import pytest

from retrotune import (
    EmbeddingSet,
    RelationGraph,
    RetrofitConfig,
    drift_report,
    neighbor_cohesion,
    retrieval_recall,
    retrofit,
)

import oracles
from conftest import random_embedding_set


# ------------------------------------------------------------------- cohesion


def test_cohesion_identical_vectors():
    es = EmbeddingSet(["a", "b", "c"], np.tile([[1.0, 2.0]], (3, 1)))
    g = RelationGraph.from_pairs(3, [(0, 1), (1, 2)])
    rep = neighbor_cohesion(es, g)
    assert rep.mean_edge_cosine == pytest.approx(1.0, abs=1e-12)
    assert rep.median_edge_cosine == pytest.approx(1.0, abs=1e-12)
    assert rep.edge_count == 2


def test_cohesion_orthogonal_pair():
    es = EmbeddingSet(["a", "b"], np.array([[1.0, 0.0], [0.0, 1.0]]))
    rep = neighbor_cohesion(es, RelationGraph.from_pairs(2, [(0, 1)]))
    assert rep.mean_edge_cosine == pytest.approx(0.0, abs=1e-12)


def test_cohesion_matches_manual_mean_median():
    rng = np.random.default_rng(31)
    es = random_embedding_set(rng, 10, 4)
    edges = oracles.random_unique_edges(rng, 10, 12)
    g = RelationGraph.from_pairs(10, [(i, j) for i, j, _ in edges])
    rep = neighbor_cohesion(es, g)
    lo, hi, _ = g.edge_arrays()
    cosines = []
    for i, j in zip(lo, hi):
        u, v = es.vectors[i], es.vectors[j]
        cosines.append(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)))
    assert rep.mean_edge_cosine == pytest.approx(np.mean(cosines), abs=1e-12)
    assert rep.median_edge_cosine == pytest.approx(np.median(cosines), abs=1e-12)


def test_cohesion_errors():
    es = EmbeddingSet(["a", "b"], np.array([[1.0], [1.0]]))
    with pytest.raises(ValueError):
        neighbor_cohesion(es, RelationGraph.from_pairs(2, []))
    with pytest.raises(ValueError):
        neighbor_cohesion(es, RelationGraph.from_pairs(3, [(0, 1)]))
    zero = EmbeddingSet(["a", "b"], np.array([[0.0], [1.0]]))
    with pytest.raises(ValueError):
        neighbor_cohesion(zero, RelationGraph.from_pairs(2, [(0, 1)]))


def test_cohesion_ignores_zero_norm_isolated_words():
    es = EmbeddingSet(["a", "b", "z"], np.array([[1.0], [2.0], [0.0]]))
    rep = neighbor_cohesion(es, RelationGraph.from_pairs(3, [(0, 1)]))
    assert rep.mean_edge_cosine == pytest.approx(1.0)


def test_retrofitting_improves_cohesion():
    rng = np.random.default_rng(32)
    es = random_embedding_set(rng, 30, 6)
    edges = oracles.random_unique_edges(rng, 30, 40)
    g = RelationGraph.from_pairs(30, [(i, j) for i, j, _ in edges])
    before = neighbor_cohesion(es, g).mean_edge_cosine
    fitted = retrofit(es, g, RetrofitConfig(iterations=10)).embeddings
    after = neighbor_cohesion(fitted, g).mean_edge_cosine
    assert after > before


# --------------------------------------------------------------------- recall


def test_recall_identical_stacks_is_perfect():
    rng = np.random.default_rng(33)
    vecs = rng.normal(size=(12, 5))
    rep = retrieval_recall(vecs, vecs, ks=(1, 5, 10))
    for direction in rep.recall.values():
        for v in direction.values():
            assert v == 1.0
    assert rep.mean_recall == 1.0


def test_recall_two_item_swap():
    text = np.array([[0.0, 0.0], [10.0, 10.0]])
    target = np.array([[10.0, 10.0], [0.0, 0.0]])
    rep = retrieval_recall(text, target, ks=(1, 2))
    assert rep.recall["text_to_target"][1] == 0.0
    assert rep.recall["text_to_target"][2] == 1.0
    assert rep.recall["target_to_text"][1] == 0.0
    assert rep.mean_recall == pytest.approx(0.5)


def test_recall_matches_exhaustive_oracle():
    rng = np.random.default_rng(34)
    for _ in range(5):
        m = int(rng.integers(5, 20))
        text = rng.normal(size=(m, 4))
        target = text + 0.3 * rng.normal(size=(m, 4))
        ks = (1, 2, min(5, m))
        rep = retrieval_recall(text, target, ks=ks)
        want_t2v = oracles.recall_direct(text, target, ks)
        want_v2t = oracles.recall_direct(target, text, ks)
        for k in ks:
            assert rep.recall["text_to_target"][k] == want_t2v[k]
            assert rep.recall["target_to_text"][k] == want_v2t[k]


def test_recall_tie_break_prefers_lower_gallery_index():
    # every gallery row identical: query i's true match sits at rank i
    m = 4
    text = np.arange(8, dtype=float).reshape(m, 2)
    target = np.ones((m, 2))
    rep = retrieval_recall(text, target, ks=(1, 2, 3, 4))
    assert rep.recall["text_to_target"] == {1: 0.25, 2: 0.5, 3: 0.75, 4: 1.0}


def test_recall_is_rigid_transform_invariant():
    rng = np.random.default_rng(35)
    m, d = 15, 6
    text = rng.normal(size=(m, d))
    target = rng.normal(size=(m, d))
    q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    shift = rng.normal(size=d)
    base = retrieval_recall(text, target, ks=(1, 5, 10))
    moved = retrieval_recall(text @ q + shift, target @ q + shift, ks=(1, 5, 10))
    assert base.recall == moved.recall


def test_recall_monotone_in_k():
    rng = np.random.default_rng(36)
    text = rng.normal(size=(20, 3))
    target = rng.normal(size=(20, 3))
    rep = retrieval_recall(text, target, ks=(1, 5, 10, 20))
    for direction in rep.recall.values():
        vals = [direction[k] for k in (1, 5, 10, 20)]
        assert vals == sorted(vals)
        assert direction[20] == 1.0


def test_recall_errors():
    vecs = np.zeros((3, 2))
    with pytest.raises(ValueError):
        retrieval_recall(vecs, np.zeros((4, 2)))
    with pytest.raises(ValueError):
        retrieval_recall(vecs, vecs, ks=(5,))
    with pytest.raises(ValueError):
        retrieval_recall(vecs, vecs, ks=())
    with pytest.raises(ValueError):
        retrieval_recall(vecs, vecs, ks=(0,))
    with pytest.raises(ValueError):
        retrieval_recall(np.zeros((0, 2)), np.zeros((0, 2)))


# ---------------------------------------------------------------------- drift


def test_drift_zero_when_unchanged():
    rng = np.random.default_rng(37)
    es = random_embedding_set(rng, 6, 3)
    rep = drift_report(es, es)
    assert rep.mean_displacement == 0.0
    assert rep.max_displacement == 0.0
    assert rep.moved_count == 0
    assert np.array_equal(rep.displacements, np.zeros(6))


def test_drift_single_moved_word():
    before = np.zeros((3, 2))
    after = before.copy()
    after[1] = [3.0, 4.0]
    rep = drift_report(before, after)
    assert rep.displacements.tolist() == [0.0, 5.0, 0.0]
    assert rep.mean_displacement == pytest.approx(5.0 / 3.0)
    assert rep.max_displacement == 5.0
    assert rep.moved_count == 1


def test_drift_accepts_embedding_sets_and_checks_vocab():
    a = EmbeddingSet(["x", "y"], np.zeros((2, 2)))
    b = EmbeddingSet(["x", "y"], np.ones((2, 2)))
    rep = drift_report(a, b)
    assert rep.moved_count == 2
    c = EmbeddingSet(["x", "z"], np.ones((2, 2)))
    with pytest.raises(ValueError):
        drift_report(a, c)
    with pytest.raises(ValueError):
        drift_report(np.zeros((2, 2)), np.zeros((3, 2)))
