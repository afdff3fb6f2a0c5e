"""Intrinsic and retrieval metrics for embedding tables.

Three views: edge cohesion (are graph neighbors close in cosine), cross-modal
retrieval recall (does a phrase find its visual feature and vice versa), and
drift (how far each word moved between two tables).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingSet, cosine_similarity

DEFAULT_KS = (1, 5, 10)


@dataclass
class CohesionReport:
    mean_edge_cosine: float
    median_edge_cosine: float
    edge_count: int


def neighbor_cohesion(embeddings: EmbeddingSet, graph) -> CohesionReport:
    """Cosine similarity across graph edges, summarized."""
    if graph.n != len(embeddings):
        raise ValueError(f"graph over {graph.n} words but table has {len(embeddings)}")
    if graph.edge_count == 0:
        raise ValueError("graph has no edges")
    table = embeddings.vectors
    lo, hi, _ = graph.edge_arrays()
    norms = np.linalg.norm(table, axis=1)
    touched = np.union1d(lo, hi)
    if (norms[touched] == 0.0).any():
        bad = int(touched[np.flatnonzero(norms[touched] == 0.0)[0]])
        raise ValueError(f"zero-norm vector on edge endpoint {embeddings.vocab[bad]!r}")
    cosines = (table[lo] * table[hi]).sum(axis=1) / (norms[lo] * norms[hi])
    np.clip(cosines, -1.0, 1.0, out=cosines)
    return CohesionReport(
        mean_edge_cosine=float(cosines.mean()),
        median_edge_cosine=float(np.median(cosines)),
        edge_count=graph.edge_count,
    )


@dataclass
class RecallReport:
    """recall maps direction -> K -> fraction; mean_recall averages them all."""

    recall: dict[str, dict[int, float]]
    mean_recall: float
    ks: tuple[int, ...]


def _direction_recall(queries: np.ndarray, gallery: np.ndarray, ks) -> dict[int, float]:
    m = len(queries)
    diff = queries[:, None, :] - gallery[None, :, :]
    dists = np.sqrt((diff * diff).sum(axis=2))
    positions = np.empty(m, dtype=np.int64)
    idx = np.arange(m)
    for i in range(m):
        row = dists[i]
        true_d = row[i]
        # rank under (distance, gallery index) ordering; true match is index i
        positions[i] = int((row < true_d).sum() + ((row == true_d) & (idx < i)).sum())
    return {int(k): float((positions < k).mean()) for k in ks}


def retrieval_recall(text_vectors, target_vectors, ks=DEFAULT_KS) -> RecallReport:
    """Recall@K in both directions with the true match at the same index.

    Candidates are ranked by ascending Euclidean distance, ties broken by
    ascending gallery index. mean_recall is the plain mean of every
    direction/K value (six numbers at the default Ks).
    """
    text = np.asarray(text_vectors, dtype=np.float64)
    target = np.asarray(target_vectors, dtype=np.float64)
    if text.ndim != 2 or text.shape != target.shape:
        raise ValueError(f"vector stacks must match: {text.shape} vs {target.shape}")
    m = len(text)
    if m == 0:
        raise ValueError("no retrieval pairs")
    ks = tuple(int(k) for k in ks)
    if not ks or any(k < 1 for k in ks):
        raise ValueError(f"bad K list: {ks}")
    if max(ks) > m:
        raise ValueError(f"K={max(ks)} exceeds gallery size {m}")
    recall = {
        "text_to_target": _direction_recall(text, target, ks),
        "target_to_text": _direction_recall(target, text, ks),
    }
    values = [v for direction in recall.values() for v in direction.values()]
    return RecallReport(recall, float(np.mean(values)), ks)


@dataclass
class DriftReport:
    """Per-word Euclidean displacement between two tables over one vocab."""

    displacements: np.ndarray
    mean_displacement: float
    max_displacement: float
    moved_count: int


def drift_report(before, after) -> DriftReport:
    b = before.vectors if isinstance(before, EmbeddingSet) else np.asarray(before, float)
    a = after.vectors if isinstance(after, EmbeddingSet) else np.asarray(after, float)
    if isinstance(before, EmbeddingSet) and isinstance(after, EmbeddingSet):
        if before.vocab != after.vocab:
            raise ValueError("vocabularies differ")
    if a.shape != b.shape:
        raise ValueError(f"table shape mismatch: {b.shape} vs {a.shape}")
    gap = a - b
    disp = np.sqrt((gap * gap).sum(axis=1))
    return DriftReport(
        displacements=disp,
        mean_displacement=float(disp.mean()),
        max_displacement=float(disp.max()),
        moved_count=int((disp > 0.0).sum()),
    )
