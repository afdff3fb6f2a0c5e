import numpy as np
import pytest

from retrotune import EmbeddingSet


@pytest.fixture
def two_word_pair():
    """One-dimensional two-word set with a single connecting edge."""
    return EmbeddingSet(["a", "b"], np.array([[0.0], [3.0]]))


def random_embedding_set(rng, n_words, dim, prefix="w"):
    tokens = [f"{prefix}{k:03d}" for k in range(n_words)]
    return EmbeddingSet(tokens, rng.normal(size=(n_words, dim)))
