"""Pull embeddings toward their graph neighbors with a quadratic penalty.

The objective over the working table Q given the observed table Qhat and an
undirected weighted graph is

    sum_i alpha_i ||q_i - qhat_i||^2  +  sum_{(i,j) in E} beta_ij ||q_i - q_j||^2

with each unordered edge counted once. One sweep visits words in ascending
vocabulary index and replaces each connected word's vector in place with the
exact coordinate minimizer

    q_i  <-  (sum_j beta_ij q_j + alpha_i qhat_i) / (sum_j beta_ij + alpha_i)

so the objective never increases. Words with no neighbors keep their input
vector bit-for-bit (with degree-weighted alpha their objective contribution
is zero either way).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingSet

ALPHA_MODES = ("degree", "unit")

# Edge terms of the objective are evaluated in chunks to bound peak memory.
_EDGE_CHUNK = 131072


@dataclass
class RetrofitConfig:
    """Knobs for the sweep loop.

    beta scales every edge weight; alpha_mode picks the data-term weight
    per word (its neighbor count, or 1 for every word); tolerance, when
    set, stops early once the largest per-word displacement in a sweep
    falls below it.
    """

    beta: float = 1.0
    alpha_mode: str = "degree"
    iterations: int = 10
    tolerance: float | None = None

    def __post_init__(self):
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ValueError(f"beta must be positive and finite, got {self.beta}")
        if self.alpha_mode not in ALPHA_MODES:
            raise ValueError(
                f"alpha_mode must be one of {ALPHA_MODES}, got {self.alpha_mode!r}"
            )
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.tolerance is not None and not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")


@dataclass
class RetrofitResult:
    embeddings: EmbeddingSet
    objective_trace: list[float]
    sweeps_run: int


def _as_table(q) -> np.ndarray:
    if isinstance(q, EmbeddingSet):
        return q.vectors
    return np.asarray(q, dtype=np.float64)


def _alphas(graph, cfg: RetrofitConfig) -> np.ndarray:
    if cfg.alpha_mode == "degree":
        return graph.degrees().astype(np.float64)
    return np.ones(graph.n, dtype=np.float64)


def _check_shapes(q: np.ndarray, qhat: np.ndarray, graph) -> None:
    if q.shape != qhat.shape or q.ndim != 2:
        raise ValueError(f"table shape mismatch: {q.shape} vs {qhat.shape}")
    if q.shape[0] != graph.n:
        raise ValueError(f"graph over {graph.n} words but tables have {q.shape[0]} rows")


def retrofit_objective(q, qhat, graph, cfg: RetrofitConfig) -> float:
    """Objective value with each unordered edge counted once."""
    q = _as_table(q)
    qhat = _as_table(qhat)
    _check_shapes(q, qhat, graph)
    alpha = _alphas(graph, cfg)
    diff = q - qhat
    total = float(alpha @ (diff * diff).sum(axis=1))
    lo, hi, w = graph.edge_arrays()
    for start in range(0, len(lo), _EDGE_CHUNK):
        sl = slice(start, start + _EDGE_CHUNK)
        gap = q[lo[sl]] - q[hi[sl]]
        total += float(cfg.beta * (w[sl] @ (gap * gap).sum(axis=1)))
    return total


def _segment_sums(values: np.ndarray, indptr: np.ndarray) -> np.ndarray:
    csum = np.concatenate([[0.0], np.cumsum(values)])
    return csum[indptr[1:]] - csum[indptr[:-1]]


def _sweep_inplace(
    q: np.ndarray,
    qhat: np.ndarray,
    indptr: np.ndarray,
    neighbors: np.ndarray,
    weights: np.ndarray,
    wsum: np.ndarray,
    alpha: np.ndarray,
) -> None:
    for i in range(len(q)):
        start, end = indptr[i], indptr[i + 1]
        if start == end:
            continue
        acc = weights[start:end] @ q[neighbors[start:end]]
        q[i] = (acc + alpha[i] * qhat[i]) / (wsum[i] + alpha[i])


def retrofit_sweep(q: np.ndarray, qhat, graph, cfg: RetrofitConfig) -> np.ndarray:
    """Run one in-place sweep over a writable working table and return it."""
    qhat = _as_table(qhat)
    _check_shapes(q, qhat, graph)
    indptr, neighbors, raw_w = graph.adjacency()
    weights = cfg.beta * raw_w
    wsum = _segment_sums(weights, indptr)
    _sweep_inplace(q, qhat, indptr, neighbors, weights, wsum, _alphas(graph, cfg))
    return q


def retrofit(embeddings: EmbeddingSet, graph, cfg: RetrofitConfig | None = None) -> RetrofitResult:
    """Retrofit a table onto a graph; the input set is never modified.

    Runs cfg.iterations sweeps (fewer if tolerance triggers), recording the
    objective after each one.
    """
    if cfg is None:
        cfg = RetrofitConfig()
    qhat = embeddings.vectors
    q = qhat.copy()
    _check_shapes(q, qhat, graph)
    indptr, neighbors, raw_w = graph.adjacency()
    weights = cfg.beta * raw_w
    wsum = _segment_sums(weights, indptr)
    alpha = _alphas(graph, cfg)
    trace: list[float] = []
    sweeps = 0
    for _ in range(cfg.iterations):
        prev = q.copy() if cfg.tolerance is not None else None
        _sweep_inplace(q, qhat, indptr, neighbors, weights, wsum, alpha)
        if not np.isfinite(q).all():
            raise RuntimeError("retrofit produced non-finite values")
        trace.append(retrofit_objective(q, qhat, graph, cfg))
        sweeps += 1
        if prev is not None:
            gap = q - prev
            moved = float(np.sqrt((gap * gap).sum(axis=1)).max()) if len(q) else 0.0
            if moved < cfg.tolerance:
                break
    return RetrofitResult(EmbeddingSet(embeddings.vocab, q), trace, sweeps)
