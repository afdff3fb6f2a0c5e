"""Embedding retrofitting, PMI relation graphs, and freeze-aware fine-tuning."""

from .embeddings import (
    EmbeddingSet,
    cosine_similarity,
    load_embeddings,
    nearest_neighbors,
    save_embeddings,
)
from .graph import (
    CooccurrenceStats,
    RelationGraph,
    TokenizerConfig,
    accumulate_cooccurrence,
    build_pmi_graph,
    load_edge_list,
    load_lexicon_graph,
    load_stopwords,
    merge_graphs,
    pmi_score,
    save_edge_list,
    tokenize_sample,
)
from .retrofit import (
    RetrofitConfig,
    RetrofitResult,
    retrofit,
    retrofit_objective,
    retrofit_sweep,
)
from .freezing import (
    FreezePlan,
    FreezeState,
    freeze_budget,
    freeze_top,
    load_freeze_state,
    mask_gradient,
    rank_by_variance,
    save_freeze_state,
)
from .finetune import (
    SequenceResult,
    TaskModelParams,
    ToyTask,
    TrainConfig,
    average_embedding_forward,
    embedding_anchor_penalty,
    encode_phrases,
    gradient_check,
    init_params,
    load_params,
    load_task,
    make_synthetic_task,
    project_targets,
    run_task_sequence,
    save_params,
    save_task,
    self_attention_forward,
    train_task,
    triplet_loss,
    visual_forward,
)
from .evaluation import (
    CohesionReport,
    DriftReport,
    RecallReport,
    drift_report,
    neighbor_cohesion,
    retrieval_recall,
)

__version__ = "0.1.0"

__all__ = [
    "EmbeddingSet", "cosine_similarity", "load_embeddings", "nearest_neighbors",
    "save_embeddings",
    "CooccurrenceStats", "RelationGraph", "TokenizerConfig",
    "accumulate_cooccurrence", "build_pmi_graph", "load_edge_list",
    "load_lexicon_graph", "load_stopwords", "merge_graphs", "pmi_score",
    "save_edge_list", "tokenize_sample",
    "RetrofitConfig", "RetrofitResult", "retrofit", "retrofit_objective",
    "retrofit_sweep",
    "FreezePlan", "FreezeState", "freeze_budget", "freeze_top",
    "load_freeze_state", "mask_gradient", "rank_by_variance", "save_freeze_state",
    "SequenceResult", "TaskModelParams", "ToyTask", "TrainConfig",
    "average_embedding_forward", "embedding_anchor_penalty", "encode_phrases",
    "gradient_check", "init_params", "load_params", "load_task",
    "make_synthetic_task", "project_targets", "run_task_sequence",
    "save_params", "save_task", "self_attention_forward", "train_task",
    "triplet_loss", "visual_forward",
    "CohesionReport", "DriftReport", "RecallReport", "drift_report",
    "neighbor_cohesion", "retrieval_recall",
    "__version__",
]
