"""Desk-scale multi-task fine-tuning of an embedding table.

Two toy text models map a phrase (a list of token ids) into a shared space
with a visual feature projection, trained with a Euclidean triplet loss:

* average: mean-pool the phrase rows, then fc1 (D x H), ReLU, fc2 (H x J).
* self_attention: score each word by an inner product of [w_t; C] with a
  learned 2D-vector (C is the mean of the phrase rows), softmax the scores,
  pool the original rows by those weights, then the same fc head.

The visual side is a single affine map (V_in x J). Training is plain
minibatch gradient descent, negatives drawn by rotating the batch. An L2
anchor alpha * sum_i ||e_i - e0_i||^2 pulls the whole table back toward its
starting point; frozen feature columns receive zero gradient and stay
bit-identical. All gradients are closed-form and validated against central
differences by :func:`gradient_check`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .embeddings import EmbeddingSet
from .freezing import FreezeState, FreezePlan, freeze_budget, freeze_top, mask_gradient, rank_by_variance

MODEL_KINDS = ("average", "self_attention")

# Distances below this are treated as zero direction in triplet gradients.
_DIST_GUARD = 1e-12


@dataclass
class TrainConfig:
    """Training knobs shared by both toy models.

    hidden_size defaults to the embedding dim when None; proj_size is the
    shared output space width. seed drives batch shuffling only; parameter
    init takes its own seed at the train_task call.
    """

    model_kind: str = "average"
    margin: float = 0.1
    learning_rate: float = 0.01
    epochs: int = 20
    batch_size: int = 16
    seed: int = 0
    alpha_anchor: float = 1e-4
    hidden_size: int | None = None
    proj_size: int = 64

    def __post_init__(self):
        if self.model_kind not in MODEL_KINDS:
            raise ValueError(f"model_kind must be one of {MODEL_KINDS}, got {self.model_kind!r}")
        if not (np.isfinite(self.margin) and self.margin >= 0):
            raise ValueError(f"margin must be >= 0, got {self.margin}")
        if not (np.isfinite(self.learning_rate) and self.learning_rate >= 0):
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not (np.isfinite(self.alpha_anchor) and self.alpha_anchor >= 0):
            raise ValueError(f"alpha_anchor must be >= 0, got {self.alpha_anchor}")
        if self.hidden_size is not None and self.hidden_size < 1:
            raise ValueError(f"hidden_size must be >= 1, got {self.hidden_size}")
        if self.proj_size < 1:
            raise ValueError(f"proj_size must be >= 1, got {self.proj_size}")


@dataclass
class TaskModelParams:
    """Weights of one toy model; attn_* present only for self_attention."""

    kind: str
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    vis_w: np.ndarray
    vis_b: np.ndarray
    attn_w: np.ndarray | None = None
    attn_b: np.ndarray | None = None

    def arrays(self) -> dict[str, np.ndarray]:
        out = {
            "w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2,
            "vis_w": self.vis_w, "vis_b": self.vis_b,
        }
        if self.kind == "self_attention":
            out["attn_w"] = self.attn_w
            out["attn_b"] = self.attn_b
        return out

    def copy(self) -> "TaskModelParams":
        return TaskModelParams(
            self.kind, self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy(),
            self.vis_w.copy(), self.vis_b.copy(),
            None if self.attn_w is None else self.attn_w.copy(),
            None if self.attn_b is None else self.attn_b.copy(),
        )


def init_params(
    kind: str, dim: int, hidden: int, proj: int, visual_dim: int, seed: int
) -> TaskModelParams:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases, seeded."""
    if kind not in MODEL_KINDS:
        raise ValueError(f"kind must be one of {MODEL_KINDS}, got {kind!r}")
    rng = np.random.default_rng(seed)

    def u(fan_in: int, shape) -> np.ndarray:
        bound = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-bound, bound, shape)

    params = TaskModelParams(
        kind=kind,
        w1=u(dim, (dim, hidden)),
        b1=np.zeros(hidden),
        w2=u(hidden, (hidden, proj)),
        b2=np.zeros(proj),
        vis_w=u(visual_dim, (visual_dim, proj)),
        vis_b=np.zeros(proj),
    )
    if kind == "self_attention":
        params.attn_w = u(2 * dim, (2 * dim,))
        params.attn_b = np.zeros(1)
    return params


@dataclass
class ToyTask:
    """Phrase/visual-feature pairs for one task.

    phrases hold token ids into the embedding table; targets is the matching
    (n_samples, visual_dim) array of positive visual features.
    """

    task_id: str
    phrases: list[list[int]]
    targets: np.ndarray

    def __post_init__(self):
        if not self.task_id or any(ch.isspace() for ch in self.task_id):
            raise ValueError(f"bad task id: {self.task_id!r}")
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.targets.ndim != 2 or self.targets.shape[1] < 1:
            raise ValueError(f"targets must be 2-D, got shape {self.targets.shape}")
        if len(self.phrases) != self.targets.shape[0]:
            raise ValueError(
                f"{len(self.phrases)} phrases but {self.targets.shape[0]} targets"
            )
        if len(self.phrases) == 0:
            raise ValueError("task must have at least one sample")
        if any(len(p) == 0 for p in self.phrases):
            raise ValueError("phrases must be non-empty")
        if not np.isfinite(self.targets).all():
            raise ValueError("targets contain non-finite values")

    @property
    def visual_dim(self) -> int:
        return self.targets.shape[1]

    def validate_against(self, vocab_size: int) -> None:
        for phrase in self.phrases:
            for t in phrase:
                if not 0 <= t < vocab_size:
                    raise ValueError(f"token id {t} out of range for vocab {vocab_size}")


def save_task(task: ToyTask, vocab: list[str], path: str) -> None:
    """One sample per line: space-joined tokens, a tab, space-joined floats."""
    task.validate_against(len(vocab))
    f32 = task.targets.astype(np.float32)
    with open(path, "w", encoding="utf-8", errors="surrogateescape", newline="\n") as fh:
        for phrase, target in zip(task.phrases, f32):
            fh.write(" ".join(vocab[t] for t in phrase))
            fh.write("\t")
            fh.write(" ".join(str(v) for v in target))
            fh.write("\n")


def load_task(path: str, vocab: list[str], task_id: str) -> ToyTask:
    """Inverse of :func:`save_task`; tokens must all be in vocabulary."""
    index = {t: i for i, t in enumerate(vocab)}
    phrases: list[list[int]] = []
    rows: list[list[float]] = []
    with open(path, "r", encoding="utf-8", errors="surrogateescape") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            if "\t" not in line:
                raise ValueError(f"{path}:{lineno}: missing tab separator")
            left, right = line.rstrip("\n").split("\t", 1)
            tokens = left.split()
            if not tokens:
                raise ValueError(f"{path}:{lineno}: empty phrase")
            ids = []
            for tok in tokens:
                if tok not in index:
                    raise ValueError(f"{path}:{lineno}: token {tok!r} not in vocabulary")
                ids.append(index[tok])
            try:
                values = [float(v) for v in right.split()]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad feature value") from None
            if not values:
                raise ValueError(f"{path}:{lineno}: empty feature vector")
            if rows and len(values) != len(rows[0]):
                raise ValueError(f"{path}:{lineno}: inconsistent feature width")
            phrases.append(ids)
            rows.append(values)
    if not phrases:
        raise ValueError(f"{path}: no samples")
    return ToyTask(task_id, phrases, np.array(rows))


def make_synthetic_task(
    task_id: str,
    table,
    n_samples: int,
    visual_dim: int,
    seed: int,
    phrase_len: tuple[int, int] = (2, 5),
    noise: float = 0.05,
) -> ToyTask:
    """Targets are a fixed random projection of each phrase's mean, plus noise.

    This makes phrase and target geometry agree, so triplet training has
    signal and retrieval metrics are meaningful on tiny data.
    """
    table = table.vectors if isinstance(table, EmbeddingSet) else np.asarray(table, float)
    n, dim = table.shape
    lo, hi = phrase_len
    if not 1 <= lo <= hi <= n:
        raise ValueError(f"bad phrase_len {phrase_len} for vocab of {n}")
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    rng = np.random.default_rng(seed)
    proj = rng.normal(size=(dim, visual_dim)) / math.sqrt(dim)
    phrases: list[list[int]] = []
    targets = np.empty((n_samples, visual_dim))
    for s in range(n_samples):
        length = int(rng.integers(lo, hi + 1))
        ids = rng.choice(n, size=length, replace=False)
        phrases.append([int(i) for i in ids])
        mean = table[ids].mean(axis=0)
        targets[s] = mean @ proj + noise * rng.normal(size=visual_dim)
    return ToyTask(task_id, phrases, targets)


def _split_attn(attn_w: np.ndarray, dim: int) -> tuple[np.ndarray, np.ndarray]:
    return attn_w[:dim], attn_w[dim:]


def _text_forward(ids, table: np.ndarray, params: TaskModelParams):
    """Forward pass returning (output, cache) for backprop."""
    rows = table[ids]
    if params.kind == "average":
        pooled = rows.mean(axis=0)
        scores = None
        logits = None
    else:
        dim = table.shape[1]
        u_w, u_c = _split_attn(params.attn_w, dim)
        context = rows.mean(axis=0)
        logits = rows @ u_w + float(context @ u_c) + params.attn_b[0]
        shifted = np.exp(logits - logits.max())
        scores = shifted / shifted.sum()
        pooled = scores @ rows
    z1 = pooled @ params.w1 + params.b1
    hidden = np.maximum(z1, 0.0)
    out = hidden @ params.w2 + params.b2
    return out, (ids, rows, pooled, scores, logits, z1, hidden)


def _text_backward(g_out, cache, table, params, g_table, grads) -> None:
    """Accumulate d(loss)/d(params) and d(loss)/d(table rows) from g_out."""
    ids, rows, pooled, scores, _, z1, hidden = cache
    grads["b2"] += g_out
    grads["w2"] += np.outer(hidden, g_out)
    g_hidden = params.w2 @ g_out
    g_z1 = g_hidden * (z1 > 0)
    grads["b1"] += g_z1
    grads["w1"] += np.outer(pooled, g_z1)
    g_pooled = params.w1 @ g_z1
    m = len(rows)
    if params.kind == "average":
        g_rows = np.tile(g_pooled / m, (m, 1))
    else:
        dim = table.shape[1]
        u_w, u_c = _split_attn(params.attn_w, dim)
        context = rows.mean(axis=0)
        g_scores = rows @ g_pooled
        # softmax jacobian: s * (g - s.g)
        g_logits = scores * (g_scores - float(scores @ g_scores))
        g_rows = np.outer(scores, g_pooled) + np.outer(g_logits, u_w)
        g_context = g_logits.sum() * u_c
        g_rows += g_context / m
        grads["attn_w"][:dim] += g_logits @ rows
        grads["attn_w"][dim:] += g_logits.sum() * context
        grads["attn_b"][0] += g_logits.sum()
    np.add.at(g_table, ids, g_rows)


def average_embedding_forward(phrase, table, params: TaskModelParams) -> np.ndarray:
    """Phrase vector from the mean-pool model."""
    if params.kind != "average":
        raise ValueError(f"params are for kind {params.kind!r}")
    out, _ = _text_forward(list(phrase), _as_table(table), params)
    return out


def self_attention_forward(phrase, table, params: TaskModelParams):
    """Phrase vector and attention scores from the self-attention model."""
    if params.kind != "self_attention":
        raise ValueError(f"params are for kind {params.kind!r}")
    table = _as_table(table)
    out, cache = _text_forward(list(phrase), table, params)
    return out, cache[3].copy()


def visual_forward(features, params: TaskModelParams) -> np.ndarray:
    """Affine projection of a visual feature vector into the shared space."""
    return np.asarray(features, dtype=np.float64) @ params.vis_w + params.vis_b


def triplet_loss(anchor, positive, negative, margin: float = 0.1) -> float:
    """max(0, margin + ||a - p|| - ||a - n||) on Euclidean distances."""
    a = np.asarray(anchor, dtype=np.float64)
    d_pos = float(np.linalg.norm(a - positive))
    d_neg = float(np.linalg.norm(a - negative))
    return max(0.0, margin + d_pos - d_neg)


def embedding_anchor_penalty(table, reference, alpha: float) -> float:
    """alpha * sum of squared per-entry drift from the reference table."""
    t = _as_table(table)
    r = _as_table(reference)
    if t.shape != r.shape:
        raise ValueError(f"table shape mismatch: {t.shape} vs {r.shape}")
    diff = t - r
    return float(alpha * (diff * diff).sum())


def _as_table(x) -> np.ndarray:
    if isinstance(x, EmbeddingSet):
        return x.vectors
    return np.asarray(x, dtype=np.float64)


def _zero_grads(params: TaskModelParams) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(arr) for name, arr in params.arrays().items()}


def _sample_grads(
    ids, v_pos, v_neg, table, params, margin, g_table, grads
) -> float:
    """Triplet loss for one sample; accumulates unscaled gradients in place."""
    a, cache = _text_forward(ids, table, params)
    p = visual_forward(v_pos, params)
    n = visual_forward(v_neg, params)
    da = a - p
    dn = a - n
    d_pos = float(np.linalg.norm(da))
    d_neg = float(np.linalg.norm(dn))
    loss = margin + d_pos - d_neg
    if loss <= 0.0:
        return 0.0
    unit_pos = da / d_pos if d_pos >= _DIST_GUARD else np.zeros_like(da)
    unit_neg = dn / d_neg if d_neg >= _DIST_GUARD else np.zeros_like(dn)
    _text_backward(unit_pos - unit_neg, cache, table, params, g_table, grads)
    g_p = -unit_pos
    g_n = unit_neg
    grads["vis_w"] += np.outer(v_pos, g_p) + np.outer(v_neg, g_n)
    grads["vis_b"] += g_p + g_n
    return loss


def train_task(
    embeddings,
    task: ToyTask,
    init_seed: int,
    cfg: TrainConfig,
    freeze: FreezeState | None = None,
):
    """Train one toy model on one task with minibatch gradient descent.

    Returns (updated embeddings, trained params, per-epoch mean loss trace).
    The embeddings argument (table or EmbeddingSet) is never modified; the
    same kind is returned. Negatives rotate within the batch: sample i's
    negative is the positive of batch neighbor i+1 (wrapping). The sample
    order is drawn once from cfg.seed and reused every epoch, so a zero
    learning rate yields a constant loss trace. Frozen columns of the table
    gradient are zeroed before each update, so those features come back
    bit-identical.
    """
    was_set = isinstance(embeddings, EmbeddingSet)
    table = _as_table(embeddings).copy()
    n_vocab, dim = table.shape
    task.validate_against(n_vocab)
    if freeze is not None and freeze.dim != dim:
        raise ValueError(f"freeze state dim {freeze.dim} does not match table dim {dim}")
    anchor_ref = table.copy()
    params = init_params(
        cfg.model_kind, dim, cfg.hidden_size or dim, cfg.proj_size,
        task.visual_dim, init_seed,
    )
    n_samples = len(task.phrases)
    order = np.random.default_rng(cfg.seed).permutation(n_samples)
    trace: list[float] = []
    for epoch in range(cfg.epochs):
        batch_losses: list[float] = []
        for start in range(0, n_samples, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            g_table = np.zeros_like(table)
            grads = _zero_grads(params)
            total = 0.0
            for pos, sample in enumerate(batch):
                neg = batch[(pos + 1) % len(batch)]
                total += _sample_grads(
                    task.phrases[sample],
                    task.targets[sample],
                    task.targets[neg],
                    table, params, cfg.margin, g_table, grads,
                )
            scale = 1.0 / len(batch)
            g_table *= scale
            for g in grads.values():
                g *= scale
            anchor = embedding_anchor_penalty(table, anchor_ref, cfg.alpha_anchor)
            g_table += 2.0 * cfg.alpha_anchor * (table - anchor_ref)
            if freeze is not None:
                g_table = mask_gradient(g_table, freeze)
            table -= cfg.learning_rate * g_table
            arrays = params.arrays()
            for name, g in grads.items():
                arrays[name] -= cfg.learning_rate * g
            batch_losses.append(total * scale + anchor)
        mean_loss = float(np.mean(batch_losses))
        if not (math.isfinite(mean_loss) and np.isfinite(table).all()):
            raise RuntimeError(f"training diverged at epoch {epoch}")
        trace.append(mean_loss)
    result = EmbeddingSet(embeddings.vocab, table) if was_set else table
    return result, params, trace


def encode_phrases(phrases, table, params: TaskModelParams) -> np.ndarray:
    """Stack of text-model outputs, one row per phrase."""
    table = _as_table(table)
    return np.array([_text_forward(list(p), table, params)[0] for p in phrases])


def project_targets(targets, params: TaskModelParams) -> np.ndarray:
    """Stack of visual-model outputs, one row per target feature vector."""
    t = np.asarray(targets, dtype=np.float64)
    return t @ params.vis_w + params.vis_b


def gradient_check(
    model_kind: str = "average",
    phrase=None,
    table=None,
    params: TaskModelParams | None = None,
    *,
    epsilon: float = 1e-5,
    margin: float = 0.1,
    alpha_anchor: float = 1e-4,
    anchor_ref=None,
    v_pos=None,
    v_neg=None,
    dim: int = 7,
    proj: int = 5,
    visual_dim: int = 6,
    phrase_len: int = 3,
    vocab_size: int = 11,
    seed: int = 0,
    max_retries: int = 40,
    hinge: str = "any",
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Any of phrase, table, params, anchor_ref, v_pos, v_neg may be supplied;
    missing pieces are drawn at random. A draw that lands near a ReLU or
    hinge boundary or has degenerate distances (central differences straddle
    kinks there) is rejected and the random pieces are resampled, up to
    max_retries; if everything was pinned by the caller there is nothing to
    resample and the boundary hit is an error. Both smooth regions of the
    hinge qualify; pass hinge="active" to demand a live triplet gradient or
    hinge="inactive" for the flat region where only the anchor term moves.
    The comparison covers the gradient of the full loss (triplet plus
    anchor) with respect to every embedding entry of the phrase's words and
    every model parameter. Relative error uses max(|a| + |n|, 1e-6) as the
    denominator.
    """
    if hinge not in ("any", "active", "inactive"):
        raise ValueError(f"hinge must be any/active/inactive, got {hinge!r}")
    if table is not None:
        table = _as_table(table)
        vocab_size, dim = table.shape
    if params is not None:
        if params.kind != model_kind:
            raise ValueError(f"params are for kind {params.kind!r}, not {model_kind!r}")
        dim = params.w1.shape[0]
        proj = params.w2.shape[1]
        visual_dim = params.vis_w.shape[0]
    resamplable = any(x is None for x in (phrase, table, params, anchor_ref, v_pos, v_neg))
    for attempt in range(max_retries):
        rng = np.random.default_rng(seed + 7919 * attempt)
        t = table if table is not None else rng.normal(size=(vocab_size, dim))
        ref = anchor_ref if anchor_ref is not None else t + 0.1 * rng.normal(size=t.shape)
        ref = _as_table(ref)
        if phrase is not None:
            ids = [int(i) for i in phrase]
        else:
            ids = [int(i) for i in rng.choice(vocab_size, size=phrase_len, replace=False)]
        pr = (params if params is not None else init_params(
            model_kind, dim, dim, proj, visual_dim, seed + 104729 * attempt + 1
        )).copy()
        vp = np.asarray(v_pos, float) if v_pos is not None else rng.normal(size=visual_dim)
        vn = np.asarray(v_neg, float) if v_neg is not None else rng.normal(size=visual_dim)

        a, cache = _text_forward(ids, t, pr)
        z1 = cache[5]
        d_pos = float(np.linalg.norm(a - visual_forward(vp, pr)))
        d_neg = float(np.linalg.norm(a - visual_forward(vn, pr)))
        hinge_gap = margin + d_pos - d_neg
        # Stay clear of every non-smooth point by more than the probe step.
        bad = abs(hinge_gap) < 1e-3 or d_pos < 1e-4 or d_neg < 1e-4
        bad = bad or np.abs(z1).min() < 1e-4
        if hinge == "active":
            bad = bad or hinge_gap <= 0.0
        elif hinge == "inactive":
            bad = bad or hinge_gap >= 0.0
        if bad:
            if not resamplable:
                break
            continue

        g_table = np.zeros_like(t)
        grads = _zero_grads(pr)
        _sample_grads(ids, vp, vn, t, pr, margin, g_table, grads)
        g_table += 2.0 * alpha_anchor * (t - ref)

        def loss_at(at_table, at_params):
            out, _ = _text_forward(ids, at_table, at_params)
            lp = triplet_loss(out, visual_forward(vp, at_params),
                              visual_forward(vn, at_params), margin)
            return lp + embedding_anchor_penalty(at_table, ref, alpha_anchor)

        worst = 0.0

        def compare(analytic: float, plus: float, minus: float) -> float:
            numeric = (plus - minus) / (2.0 * epsilon)
            return abs(analytic - numeric) / max(abs(analytic) + abs(numeric), 1e-6)

        for word in sorted(set(ids)):
            for col in range(dim):
                bumped = t.copy()
                bumped[word, col] += epsilon
                up = loss_at(bumped, pr)
                bumped[word, col] -= 2 * epsilon
                down = loss_at(bumped, pr)
                worst = max(worst, compare(g_table[word, col], up, down))
        for name, arr in pr.arrays().items():
            flat = arr.reshape(-1)
            g_flat = grads[name].reshape(-1)
            for k in range(flat.size):
                keep = flat[k]
                flat[k] = keep + epsilon
                up = loss_at(t, pr)
                flat[k] = keep - epsilon
                down = loss_at(t, pr)
                flat[k] = keep
                worst = max(worst, compare(g_flat[k], up, down))
        return worst
    raise RuntimeError(
        f"no boundary-safe configuration found in {max_retries} attempts"
    )


@dataclass
class SequenceResult:
    """Outcome of training a task sequence with progressive freezing."""

    embeddings: EmbeddingSet
    freeze_state: FreezeState
    plan: FreezePlan | None
    params: dict[str, TaskModelParams]
    traces: dict[str, list[float]] = field(default_factory=dict)


def run_task_sequence(
    embeddings: EmbeddingSet,
    tasks,
    cfg: TrainConfig,
    init_seed: int = 0,
    freeze_enabled: bool = True,
    variance_source: str = "delta",
) -> SequenceResult:
    """Train tasks in order, freezing each task's feature share as it finishes.

    ``tasks`` entries are a ToyTask or a list of ToyTasks (the datasets of
    one task, sharing its task_id). After each dataset the free features are
    ranked by movement variance and that dataset's slice of the task budget
    is frozen under the dataset label (bare task id when there is only one
    dataset, ``task:k`` otherwise).
    """
    normalized: list[tuple[str, list[ToyTask]]] = []
    for entry in tasks:
        datasets = entry if isinstance(entry, list) else [entry]
        if not datasets:
            raise ValueError("task entry with no datasets")
        tid = datasets[0].task_id
        if any(d.task_id != tid for d in datasets):
            raise ValueError(f"datasets of task {tid!r} have mismatched ids")
        normalized.append((tid, datasets))
    dim = embeddings.dim
    plan = freeze_budget(dim, [(tid, len(ds)) for tid, ds in normalized]) if freeze_enabled else None
    state = FreezeState(dim)
    table = embeddings.vectors.copy()
    params_map: dict[str, TaskModelParams] = {}
    traces: dict[str, list[float]] = {}
    run_index = 0
    for tid, datasets in normalized:
        for d_i, dataset in enumerate(datasets):
            label = tid if len(datasets) == 1 else f"{tid}:{d_i}"
            before = table.copy()
            table, params, trace = train_task(
                table, dataset, init_seed + run_index, cfg,
                state if freeze_enabled else None,
            )
            run_index += 1
            params_map[label] = params
            traces[label] = trace
            if freeze_enabled:
                share = plan.per_dataset_budgets[tid][d_i]
                if share > 0:
                    ranking = rank_by_variance(before, table, state.free_features(), variance_source)
                    freeze_top(state, ranking, share, label)
    return SequenceResult(
        EmbeddingSet(embeddings.vocab, table), state, plan, params_map, traces
    )


_PARAM_SHAPES = {
    "w1": 2, "b1": 1, "w2": 2, "b2": 1, "vis_w": 2, "vis_b": 1,
    "attn_w": 1, "attn_b": 1,
}


def save_params(params: TaskModelParams, path: str) -> None:
    """Text blocks: a ``model kind`` line, then ``name rows cols`` + row lines."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"model {params.kind}\n")
        for name, arr in params.arrays().items():
            block = np.atleast_2d(arr.astype(np.float32))
            fh.write(f"{name} {block.shape[0]} {block.shape[1]}\n")
            for row in block:
                fh.write(" ".join(str(v) for v in row))
                fh.write("\n")


def load_params(path: str) -> TaskModelParams:
    """Inverse of :func:`save_params` (float32 precision)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or not lines[0].startswith("model "):
        raise ValueError(f"{path}: missing model header")
    kind = lines[0][len("model "):]
    if kind not in MODEL_KINDS:
        raise ValueError(f"{path}: unknown model kind {kind!r}")
    arrays: dict[str, np.ndarray] = {}
    pos = 1
    while pos < len(lines):
        if not lines[pos].strip():
            pos += 1
            continue
        head = lines[pos].split()
        if len(head) != 3 or head[0] not in _PARAM_SHAPES:
            raise ValueError(f"{path}: bad block header {lines[pos]!r}")
        name, rows, cols = head[0], int(head[1]), int(head[2])
        block = np.empty((rows, cols))
        for r in range(rows):
            pos += 1
            if pos >= len(lines):
                raise ValueError(f"{path}: truncated block {name!r}")
            values = lines[pos].split()
            if len(values) != cols:
                raise ValueError(f"{path}: block {name!r} row {r} has {len(values)} values")
            block[r] = [float(v) for v in values]
        arrays[name] = block[0] if _PARAM_SHAPES[name] == 1 else block
        pos += 1
    required = {"w1", "b1", "w2", "b2", "vis_w", "vis_b"}
    if kind == "self_attention":
        required |= {"attn_w", "attn_b"}
    missing = required - arrays.keys()
    if missing:
        raise ValueError(f"{path}: missing parameter blocks {sorted(missing)}")
    return TaskModelParams(
        kind=kind,
        w1=arrays["w1"], b1=arrays["b1"], w2=arrays["w2"], b2=arrays["b2"],
        vis_w=arrays["vis_w"], vis_b=arrays["vis_b"],
        attn_w=arrays.get("attn_w"), attn_b=arrays.get("attn_b"),
    )
