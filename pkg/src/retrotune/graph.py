"""Word-relation graphs from lexicons and from corpus co-occurrence PMI.

A graph is an undirected, positively weighted edge set over vocabulary
indices with no self-loops and each unordered pair stored once. Graphs come
from two places: neighbor lists in lexicon files, and pointwise mutual
information over once-per-sample co-occurrence counts.
"""

from __future__ import annotations

import itertools
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

# Maximal alphanumeric runs; \w minus underscore keeps unicode letters/digits.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class RelationGraph:
    """Undirected weighted graph over ``n`` vocabulary indices.

    Edges are held canonically (i < j, sorted lexicographically, weights
    positive). Construction is via :meth:`from_pairs`; instances are
    immutable afterward.
    """

    __slots__ = ("n", "_lo", "_hi", "_w", "_adj")

    def __init__(self, n: int, lo: np.ndarray, hi: np.ndarray, w: np.ndarray):
        self.n = n
        self._lo = lo
        self._hi = hi
        self._w = w
        self._adj: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    @classmethod
    def from_pairs(cls, n: int, pairs, default_weight: float = 1.0) -> "RelationGraph":
        """Build a graph from (i, j) or (i, j, weight) items or a pair->weight dict.

        Duplicate unordered pairs collapse to their maximum weight.
        """
        if n < 0:
            raise ValueError(f"vocabulary size must be >= 0, got {n}")
        if isinstance(pairs, dict):
            items = [(i, j, w) for (i, j), w in pairs.items()]
        else:
            items = [
                (p[0], p[1], p[2] if len(p) > 2 else default_weight) for p in pairs
            ]
        if not items:
            empty = np.empty(0, dtype=np.int64)
            return cls(n, empty, empty.copy(), np.empty(0, dtype=np.float64))
        a = np.array([it[0] for it in items], dtype=np.int64)
        b = np.array([it[1] for it in items], dtype=np.int64)
        w = np.array([it[2] for it in items], dtype=np.float64)
        if (a == b).any():
            raise ValueError("self-loops are not allowed")
        if a.min() < 0 or b.min() < 0 or a.max() >= n or b.max() >= n:
            raise ValueError(f"edge index out of range for vocabulary size {n}")
        if not np.isfinite(w).all() or (w <= 0).any():
            raise ValueError("edge weights must be positive and finite")
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        order = np.lexsort((hi, lo))
        lo, hi, w = lo[order], hi[order], w[order]
        first = np.empty(len(lo), dtype=bool)
        first[0] = True
        first[1:] = (lo[1:] != lo[:-1]) | (hi[1:] != hi[:-1])
        starts = np.flatnonzero(first)
        return cls(n, lo[starts], hi[starts], np.maximum.reduceat(w, starts))

    @property
    def edge_count(self) -> int:
        return len(self._lo)

    def iter_edges(self) -> Iterator[tuple[int, int, float]]:
        for i, j, w in zip(self._lo, self._hi, self._w):
            yield int(i), int(j), float(w)

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(i), int(j)) for i, j in zip(self._lo, self._hi)}

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Canonical (lo, hi, weight) arrays, each edge once, sorted by (lo, hi)."""
        return self._lo, self._hi, self._w

    def weight(self, i: int, j: int) -> float:
        lo, hi = (i, j) if i < j else (j, i)
        pos = np.searchsorted(self._lo, lo)
        while pos < len(self._lo) and self._lo[pos] == lo:
            if self._hi[pos] == hi:
                return float(self._w[pos])
            pos += 1
        raise KeyError(f"no edge ({i}, {j})")

    def has_edge(self, i: int, j: int) -> bool:
        try:
            self.weight(i, j)
            return True
        except KeyError:
            return False

    def adjacency(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """CSR view with both directions: (indptr, neighbors, weights)."""
        if self._adj is None:
            src = np.concatenate([self._lo, self._hi])
            dst = np.concatenate([self._hi, self._lo])
            ww = np.concatenate([self._w, self._w])
            order = np.argsort(src, kind="stable")
            counts = np.bincount(src, minlength=self.n)
            indptr = np.zeros(self.n + 1, dtype=np.int64)
            np.cumsum(counts, out=indptr[1:])
            self._adj = (indptr, dst[order], ww[order])
        return self._adj

    def degrees(self) -> np.ndarray:
        """Neighbor counts per vocabulary index."""
        indptr, _, _ = self.adjacency()
        return np.diff(indptr)


def load_lexicon_graph(path: str, vocab: list[str]) -> RelationGraph:
    """Read a lexicon file of ``head neighbor1 neighbor2 ...`` lines.

    Lines whose head is out of vocabulary are skipped, as are neighbors
    that are out of vocabulary or equal to the head; surviving links become
    weight-1 edges.
    """
    if not vocab:
        raise ValueError("vocabulary must be non-empty")
    index = {t: i for i, t in enumerate(vocab)}
    pairs: set[tuple[int, int]] = set()
    with open(path, "r", encoding="utf-8", errors="surrogateescape") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            head = index.get(parts[0])
            if head is None:
                continue
            for nb_token in parts[1:]:
                nb = index.get(nb_token)
                if nb is None or nb == head:
                    continue
                pairs.add((head, nb) if head < nb else (nb, head))
    return RelationGraph.from_pairs(len(vocab), pairs)


@dataclass(frozen=True)
class TokenizerConfig:
    """Lowercase (default on), strip non-alphanumeric runs, drop stopwords."""

    stopwords: frozenset[str] = frozenset()
    lowercase: bool = True

    def __post_init__(self):
        for word in self.stopwords:
            if not word or any(ch.isspace() for ch in word):
                raise ValueError(f"bad stopword entry: {word!r}")


def load_stopwords(path: str) -> frozenset[str]:
    """One stopword per line; blank lines ignored."""
    with open(path, "r", encoding="utf-8", errors="surrogateescape") as fh:
        return frozenset(line.strip() for line in fh if line.strip())


def tokenize_sample(text: str, config: TokenizerConfig) -> set[str]:
    """Deduplicated token set of one sample; word co-occurrence is per sample."""
    if config.lowercase:
        text = text.lower()
    return set(_TOKEN_RE.findall(text)) - config.stopwords


@dataclass
class CooccurrenceStats:
    """Once-per-sample pair counts plus the marginals PMI needs.

    ``pair_count`` keys are token pairs in canonical (sorted) order;
    ``participation`` maps a token to the sum of pair counts it appears in;
    ``total_pairs`` is the sum of all pair counts.
    """

    pair_count: dict[tuple[str, str], int] = field(default_factory=dict)
    participation: dict[str, int] = field(default_factory=dict)
    total_pairs: int = 0

    @classmethod
    def from_pair_counts(cls, counts: dict[tuple[str, str], int]) -> "CooccurrenceStats":
        participation: Counter[str] = Counter()
        total = 0
        for (a, b), c in counts.items():
            if a >= b:
                raise ValueError(f"pair key not in canonical order: {(a, b)!r}")
            if c < 1:
                raise ValueError(f"pair count must be positive, got {c} for {(a, b)!r}")
            participation[a] += c
            participation[b] += c
            total += c
        return cls(dict(counts), dict(participation), total)


def accumulate_cooccurrence(
    samples: Iterable[str], config: TokenizerConfig, min_count: int = 50
) -> CooccurrenceStats:
    """Count unordered token pairs once per sample, then drop rare pairs.

    Pairs with count < min_count are removed before the marginals are
    computed, so participation and total_pairs reflect surviving pairs only.
    """
    if min_count < 0:
        raise ValueError(f"min_count must be >= 0, got {min_count}")
    counts: Counter[tuple[str, str]] = Counter()
    for text in samples:
        tokens = sorted(tokenize_sample(text, config))
        counts.update(itertools.combinations(tokens, 2))
    kept = {pair: c for pair, c in counts.items() if c >= min_count}
    return CooccurrenceStats.from_pair_counts(kept)


def pmi_score(stats: CooccurrenceStats, pair: tuple[str, str]) -> float:
    """ln(count(a,b) * total_pairs / (participation(a) * participation(b)))."""
    a, b = pair
    key = (a, b) if a < b else (b, a)
    if key not in stats.pair_count:
        raise KeyError(f"pair not present: {key!r}")
    c = stats.pair_count[key]
    return math.log(
        (c * stats.total_pairs) / (stats.participation[key[0]] * stats.participation[key[1]])
    )


def build_pmi_graph(
    stats: CooccurrenceStats, top_k: int, vocab: list[str]
) -> RelationGraph:
    """Keep each word's top_k partners by PMI and take the union as edges.

    Ranking ties break toward the lower partner vocabulary index. A pair
    survives if either endpoint ranks it, so degrees can exceed top_k.
    """
    if not vocab:
        raise ValueError("vocabulary must be non-empty")
    if top_k < 1:
        raise ValueError(f"top_k must be >= 1, got {top_k}")
    if not stats.pair_count:
        raise ValueError("empty co-occurrence statistics")
    index = {t: i for i, t in enumerate(vocab)}
    partners: dict[str, list[tuple[float, int]]] = {}
    for (a, b), _ in stats.pair_count.items():
        ia = index.get(a)
        ib = index.get(b)
        if ia is None or ib is None:
            continue
        score = pmi_score(stats, (a, b))
        partners.setdefault(a, []).append((score, ib))
        partners.setdefault(b, []).append((score, ia))
    pairs: set[tuple[int, int]] = set()
    for token, cands in partners.items():
        own = index[token]
        cands.sort(key=lambda sc: (-sc[0], sc[1]))
        for _, other in cands[:top_k]:
            pairs.add((own, other) if own < other else (other, own))
    return RelationGraph.from_pairs(len(vocab), pairs)


def merge_graphs(first: RelationGraph, second: RelationGraph) -> RelationGraph:
    """Union of edge sets; a pair present in both keeps the larger weight."""
    if first.n != second.n:
        raise ValueError(
            f"vocabulary size mismatch: {first.n} vs {second.n}"
        )
    lo1, hi1, w1 = first.edge_arrays()
    lo2, hi2, w2 = second.edge_arrays()
    return RelationGraph.from_pairs(
        first.n,
        zip(
            np.concatenate([lo1, lo2]),
            np.concatenate([hi1, hi2]),
            np.concatenate([w1, w2]),
        ),
    )


def save_edge_list(graph: RelationGraph, vocab: list[str], path: str) -> None:
    """Write ``token_i token_j weight`` lines in canonical edge order."""
    if graph.n != len(vocab):
        raise ValueError(f"graph over {graph.n} indices but vocab has {len(vocab)}")
    with open(path, "w", encoding="utf-8", errors="surrogateescape", newline="\n") as fh:
        for i, j, w in graph.iter_edges():
            fh.write(f"{vocab[i]} {vocab[j]} {w}\n")


def load_edge_list(path: str, vocab: list[str]) -> RelationGraph:
    """Read ``token_i token_j weight`` lines; pairs with OOV tokens are skipped."""
    if not vocab:
        raise ValueError("vocabulary must be non-empty")
    index = {t: i for i, t in enumerate(vocab)}
    items: list[tuple[int, int, float]] = []
    with open(path, "r", encoding="utf-8", errors="surrogateescape") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'token token weight'")
            try:
                w = float(parts[2])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad weight {parts[2]!r}") from None
            i = index.get(parts[0])
            j = index.get(parts[1])
            if i is None or j is None:
                continue
            items.append((i, j, w))
    return RelationGraph.from_pairs(len(vocab), items)
