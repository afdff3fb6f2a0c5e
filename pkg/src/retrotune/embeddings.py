"""Dense word-embedding tables: loading, saving, and similarity queries.

Two on-disk layouts are supported. The text layout starts with a
``vocab_size dim`` header line followed by one ``token v1 ... vD`` line per
word, floats written as shortest round-trip float32 decimals. The binary
layout is the classic word2vec format: the same ASCII header, then for each
word the raw token bytes, a single 0x20 separator, and D little-endian
float32 values. An optional 0x0A byte before a token is tolerated on read
and never written.

Vectors live in float64 in memory; both formats store float32, and a
save/load round trip in either format is exact at float32 precision.
Tokens are treated as opaque byte strings (no Unicode normalization), so
files read and write with utf-8 + surrogateescape.
"""

from __future__ import annotations

import numpy as np

_ENCODING = "utf-8"
_ERRORS = "surrogateescape"

FORMATS = ("text", "binary")


def _check_token(token: str) -> str:
    if not token:
        raise ValueError("empty token")
    if any(ch.isspace() for ch in token):
        raise ValueError(f"token contains whitespace: {token!r}")
    return token


class EmbeddingSet:
    """Immutable vocabulary plus row-major float64 vector table.

    The table is locked against writes after construction; numeric
    pipelines (retrofitting, fine-tuning) operate on copies and build a
    fresh set from the result.
    """

    __slots__ = ("vocab", "vectors", "_index")

    def __init__(self, vocab, vectors):
        vocab = [_check_token(t) for t in vocab]
        table = np.array(vectors, dtype=np.float64)
        if table.ndim != 2:
            raise ValueError(f"vector table must be 2-D, got shape {table.shape}")
        if table.shape[0] != len(vocab):
            raise ValueError(
                f"vocab has {len(vocab)} tokens but table has {table.shape[0]} rows"
            )
        if len(vocab) == 0 or table.shape[1] < 1:
            raise ValueError("embedding set must be non-empty with dim >= 1")
        if not np.isfinite(table).all():
            raise ValueError("vector table contains non-finite values")
        index: dict[str, int] = {}
        for pos, token in enumerate(vocab):
            if token in index:
                raise ValueError(f"duplicate token: {token!r}")
            index[token] = pos
        table.setflags(write=False)
        self.vocab = vocab
        self.vectors = table
        self._index = index

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.vocab)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def index(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise KeyError(f"token not in vocabulary: {token!r}") from None

    def row(self, token: str) -> np.ndarray:
        return self.vectors[self.index(token)]

    def indices(self, tokens) -> list[int]:
        return [self.index(t) for t in tokens]


def load_embeddings(path: str, fmt: str = "text") -> EmbeddingSet:
    """Read an embedding file in the given format ("text" or "binary")."""
    if fmt == "text":
        return _load_text(path)
    if fmt == "binary":
        return _load_binary(path)
    raise ValueError(f"unknown format {fmt!r}, expected one of {FORMATS}")


def save_embeddings(embeddings: EmbeddingSet, path: str, fmt: str = "text") -> None:
    """Write an embedding file in the given format ("text" or "binary")."""
    if fmt == "text":
        _save_text(embeddings, path)
    elif fmt == "binary":
        _save_binary(embeddings, path)
    else:
        raise ValueError(f"unknown format {fmt!r}, expected one of {FORMATS}")


def _parse_header(line: str, where: str) -> tuple[int, int]:
    parts = line.split()
    if len(parts) != 2:
        raise ValueError(f"malformed header in {where}: {line!r}")
    try:
        count, dim = int(parts[0]), int(parts[1])
    except ValueError:
        raise ValueError(f"malformed header in {where}: {line!r}") from None
    if count < 1 or dim < 1:
        raise ValueError(f"header must declare positive counts, got {line!r}")
    return count, dim


def _load_text(path: str) -> EmbeddingSet:
    with open(path, "r", encoding=_ENCODING, errors=_ERRORS, newline="\n") as fh:
        header = fh.readline()
        if not header:
            raise ValueError(f"empty embedding file: {path}")
        count, dim = _parse_header(header, path)
        vocab: list[str] = []
        table = np.empty((count, dim), dtype=np.float64)
        for row in range(count):
            line = fh.readline()
            if not line:
                raise ValueError(
                    f"{path}: header declared {count} rows but file ends at row {row}"
                )
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise ValueError(
                    f"{path}: row {row} has {len(parts) - 1} values, expected {dim}"
                )
            vocab.append(parts[0])
            try:
                table[row] = [float(v) for v in parts[1:]]
            except ValueError:
                raise ValueError(f"{path}: row {row} has a non-numeric value") from None
        if fh.read().strip():
            raise ValueError(f"{path}: trailing data after {count} declared rows")
    if not np.isfinite(table).all():
        raise ValueError(f"{path}: non-finite value in vectors")
    return EmbeddingSet(vocab, table)


def _load_binary(path: str) -> EmbeddingSet:
    with open(path, "rb") as fh:
        blob = fh.read()
    newline = blob.find(b"\n")
    if newline < 0:
        raise ValueError(f"malformed header in {path}: no newline found")
    count, dim = _parse_header(blob[:newline].decode("ascii", "replace"), path)
    vec_bytes = 4 * dim
    vocab: list[str] = []
    table = np.empty((count, dim), dtype=np.float64)
    pos = newline + 1
    for row in range(count):
        # Some producers put a newline between records; skip it.
        while pos < len(blob) and blob[pos : pos + 1] == b"\n":
            pos += 1
        sep = blob.find(b" ", pos)
        if sep < 0:
            raise ValueError(f"{path}: truncated record {row} (no token separator)")
        vocab.append(blob[pos:sep].decode(_ENCODING, _ERRORS))
        start = sep + 1
        end = start + vec_bytes
        if end > len(blob):
            raise ValueError(f"{path}: truncated record {row} (short vector)")
        table[row] = np.frombuffer(blob[start:end], dtype="<f4")
        pos = end
    if blob[pos:].strip(b"\n"):
        raise ValueError(f"{path}: trailing data after {count} declared records")
    if not np.isfinite(table).all():
        raise ValueError(f"{path}: non-finite value in vectors")
    return EmbeddingSet(vocab, table)


def _save_text(embeddings: EmbeddingSet, path: str) -> None:
    f32 = embeddings.vectors.astype(np.float32)
    with open(path, "w", encoding=_ENCODING, errors=_ERRORS, newline="\n") as fh:
        fh.write(f"{len(embeddings)} {embeddings.dim}\n")
        for token, row in zip(embeddings.vocab, f32):
            fh.write(token)
            for value in row:
                fh.write(" ")
                fh.write(str(value))
            fh.write("\n")


def _save_binary(embeddings: EmbeddingSet, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(f"{len(embeddings)} {embeddings.dim}\n".encode("ascii"))
        for token, row in zip(embeddings.vocab, embeddings.vectors):
            fh.write(token.encode(_ENCODING, _ERRORS))
            fh.write(b" ")
            fh.write(row.astype("<f4").tobytes())


def cosine_similarity(u, v) -> float:
    """Cosine of the angle between two vectors; zero-norm input is an error."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError(f"shape mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine similarity undefined for zero-norm vector")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def nearest_neighbors(
    embeddings: EmbeddingSet, word: str, k: int
) -> list[tuple[str, float]]:
    """Top-k neighbors of `word` by cosine, excluding the word itself.

    Ties are broken by ascending vocabulary index so results are
    deterministic across runs.
    """
    query_idx = embeddings.index(word)
    n = len(embeddings)
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must be in [1, {n - 1}], got {k}")
    table = embeddings.vectors
    norms = np.linalg.norm(table, axis=1)
    if norms[query_idx] == 0.0:
        raise ValueError(f"query word {word!r} has a zero-norm vector")
    if (norms == 0.0).any():
        bad = int(np.flatnonzero(norms == 0.0)[0])
        raise ValueError(
            f"zero-norm vector in table at index {bad} ({embeddings.vocab[bad]!r})"
        )
    sims = table @ table[query_idx] / (norms * norms[query_idx])
    np.clip(sims, -1.0, 1.0, out=sims)
    order = np.lexsort((np.arange(n), -sims))
    out: list[tuple[str, float]] = []
    for j in order:
        if j == query_idx:
            continue
        out.append((embeddings.vocab[j], float(sims[j])))
        if len(out) == k:
            break
    return out
