"""Variance-ranked feature freezing across a sequence of tasks.

Each task in a sequence gets an equal integer share K = floor(D / T) of the
embedding dimensions. Within a task the share is split evenly across its
datasets (earlier datasets absorb the remainder). After training on a
dataset, the free features are ranked by how much the training moved them
(population variance of the per-word deltas for that column) and the top
share is frozen. Frozen columns receive zero gradient from then on; the
frozen set only grows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingSet

VARIANCE_SOURCES = ("delta", "value")


@dataclass
class FreezePlan:
    """Resolved budgets: K per task, and K split across each task's datasets."""

    tasks: list[tuple[str, int]]
    per_task_budget: int
    per_dataset_budgets: dict[str, list[int]]


def freeze_budget(dim: int, tasks: list[tuple[str, int]]) -> FreezePlan:
    """Compute K = floor(dim / len(tasks)) and split it across datasets.

    ``tasks`` is a list of (task_id, dataset_count) in training order.
    """
    if not tasks:
        raise ValueError("task list must be non-empty")
    if dim < len(tasks):
        raise ValueError(f"dim {dim} smaller than number of tasks {len(tasks)}")
    seen: set[str] = set()
    for task_id, ds_count in tasks:
        if not task_id or any(ch.isspace() for ch in task_id):
            raise ValueError(f"bad task id: {task_id!r}")
        if task_id in seen:
            raise ValueError(f"duplicate task id: {task_id!r}")
        seen.add(task_id)
        if ds_count < 1:
            raise ValueError(f"task {task_id!r} must have >= 1 dataset, got {ds_count}")
    k = dim // len(tasks)
    budgets: dict[str, list[int]] = {}
    for task_id, ds_count in tasks:
        base, rem = divmod(k, ds_count)
        budgets[task_id] = [base + (1 if d < rem else 0) for d in range(ds_count)]
    return FreezePlan(list(tasks), k, budgets)


class FreezeState:
    """Which features are frozen, by which task, in what order."""

    __slots__ = ("dim", "_frozen", "history")

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.dim = dim
        self._frozen: dict[int, str] = {}
        self.history: list[tuple[str, tuple[int, ...]]] = []

    @property
    def frozen_count(self) -> int:
        return len(self._frozen)

    def is_frozen(self, feature: int) -> bool:
        return feature in self._frozen

    def task_of(self, feature: int) -> str:
        return self._frozen[feature]

    def frozen_features(self) -> list[int]:
        return sorted(self._frozen)

    def free_features(self) -> list[int]:
        return [f for f in range(self.dim) if f not in self._frozen]

    def column_mask(self) -> np.ndarray:
        """Boolean vector over features, True where frozen."""
        mask = np.zeros(self.dim, dtype=bool)
        if self._frozen:
            mask[list(self._frozen)] = True
        return mask


def rank_by_variance(
    before, after, candidate_features: list[int], source: str = "delta"
) -> list[int]:
    """Candidate features sorted by descending column variance.

    Variance is the population variance over words of the per-word delta
    (``after - before``) in that column, or of the raw after-values when
    source="value". Ties break toward the lower feature index.
    """
    if source not in VARIANCE_SOURCES:
        raise ValueError(f"source must be one of {VARIANCE_SOURCES}, got {source!r}")
    b = before.vectors if isinstance(before, EmbeddingSet) else np.asarray(before, float)
    a = after.vectors if isinstance(after, EmbeddingSet) else np.asarray(after, float)
    if a.shape != b.shape or a.ndim != 2:
        raise ValueError(f"table shape mismatch: {b.shape} vs {a.shape}")
    if not candidate_features:
        raise ValueError("candidate feature set must be non-empty")
    cand = np.asarray(candidate_features, dtype=np.int64)
    if len(np.unique(cand)) != len(cand):
        raise ValueError("duplicate candidate features")
    if cand.min() < 0 or cand.max() >= a.shape[1]:
        raise ValueError(f"candidate feature out of range for dim {a.shape[1]}")
    basis = a - b if source == "delta" else a
    variances = basis[:, cand].var(axis=0)
    order = np.lexsort((cand, -variances))
    return [int(f) for f in cand[order]]


def freeze_top(
    state: FreezeState, ranking: list[int], count: int, task_id: str
) -> FreezeState:
    """Freeze the first ``count`` features of a ranking under task_id."""
    if not task_id or any(ch.isspace() for ch in task_id):
        raise ValueError(f"bad task id: {task_id!r}")
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    free_in_ranking = [f for f in ranking if not state.is_frozen(f)]
    if len(free_in_ranking) != len(ranking):
        raise ValueError("ranking contains already-frozen features")
    if len(set(ranking)) != len(ranking):
        raise ValueError("ranking contains duplicate features")
    if count > len(ranking):
        raise ValueError(
            f"cannot freeze {count} features, only {len(ranking)} free in ranking"
        )
    chosen = tuple(int(f) for f in ranking[:count])
    for f in chosen:
        if not 0 <= f < state.dim:
            raise ValueError(f"feature {f} out of range for dim {state.dim}")
    for f in chosen:
        state._frozen[f] = task_id
    if chosen:
        state.history.append((task_id, chosen))
    return state


def mask_gradient(grad: np.ndarray, state: FreezeState) -> np.ndarray:
    """Copy of the gradient with frozen feature columns zeroed."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.ndim != 2 or grad.shape[1] != state.dim:
        raise ValueError(f"gradient shape {grad.shape} does not match dim {state.dim}")
    out = grad.copy()
    frozen = state.frozen_features()
    if frozen:
        out[:, frozen] = 0.0
    return out


def save_freeze_state(state: FreezeState, path: str) -> None:
    """Write ``dim=D`` then one ``feature_index task_id`` line per frozen feature."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"dim={state.dim}\n")
        for task_id, features in state.history:
            for f in features:
                fh.write(f"{f} {task_id}\n")


def load_freeze_state(path: str) -> FreezeState:
    """Inverse of :func:`save_freeze_state`.

    Consecutive lines with the same task id reconstruct one history entry.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("dim="):
            raise ValueError(f"{path}: missing dim= header")
        try:
            dim = int(header[len("dim="):].strip())
        except ValueError:
            raise ValueError(f"{path}: bad dim header {header!r}") from None
        state = FreezeState(dim)
        run_task: str | None = None
        run: list[int] = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.strip().split(maxsplit=1)
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'feature task_id'")
            try:
                feature = int(parts[0])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad feature index") from None
            if not 0 <= feature < dim:
                raise ValueError(f"{path}:{lineno}: feature {feature} out of range")
            if feature in state._frozen:
                raise ValueError(f"{path}:{lineno}: feature {feature} listed twice")
            if parts[1] != run_task:
                if run:
                    state.history.append((run_task, tuple(run)))
                run_task, run = parts[1], []
            run.append(feature)
            state._frozen[feature] = parts[1]
        if run:
            state.history.append((run_task, tuple(run)))
    return state
