"""rankforge: a deterministic neural retrieval pipeline engine.

Fine-tunes, indexes, searches, re-ranks, and evaluates three bi-encoder
families (single-vector dense, multi-vector late-interaction, learned
sparse) and cross-encoders, over reproducible hash-based text encoders.
"""

__version__ = "0.1.0"

from .backbone import backbone_features, tokenize
from .errors import (
    BadCutoffError,
    ConfigConflictError,
    ConfigValidationError,
    CorruptIndexError,
    CorruptModelError,
    DimMismatchError,
    DivergedError,
    DuplicateDocError,
    DuplicateQueryError,
    EmptyCorpusError,
    EmptyTextError,
    InsufficientDocsError,
    MissingTextError,
    NoPreferenceError,
    ParseError,
    RankForgeError,
)
from .encoders import (
    BiEncoderConfig,
    CrossEncoderConfig,
    OutputKind,
    PoolingStrategy,
    ProjectionParams,
    ScoringMode,
    SimilarityFunction,
    Sparsification,
    encode_bi,
    encode_cross,
    pool,
)
from .indexes import (
    DenseFlatIndex,
    MultiVectorIndex,
    SparseInvertedIndex,
    build_index,
    load_index,
    save_index,
)
from .metrics import evaluate, mrr_at_k, ndcg_at_k, recall_at_k
from .models import BiEncoder, CrossEncoder, new_bi_encoder, new_cross_encoder
from .modelstore import load_model, save_model
from .reranking import re_rank
from .searchers import (
    BatchSearchResult,
    SearchConfig,
    batch_search,
    search_dense,
    search_multi,
    search_sparse,
)
from .similarity import cosine, dot, max_sim, score_pairs, sparse_dot
from .training import FitResult, LossKind, TrainConfig, fit, loss_gradient, loss_value
from .types import (
    DenseEmbedding,
    DocRecord,
    MultiEmbedding,
    Qrels,
    QueryRecord,
    Run,
    ScoredDoc,
    SparseEmbedding,
    TrainSample,
    rank_documents,
)

__all__ = [
    "BadCutoffError",
    "BatchSearchResult",
    "BiEncoder",
    "BiEncoderConfig",
    "ConfigConflictError",
    "ConfigValidationError",
    "CorruptIndexError",
    "CorruptModelError",
    "CrossEncoder",
    "CrossEncoderConfig",
    "DenseEmbedding",
    "DenseFlatIndex",
    "DimMismatchError",
    "DivergedError",
    "DocRecord",
    "DuplicateDocError",
    "DuplicateQueryError",
    "EmptyCorpusError",
    "EmptyTextError",
    "FitResult",
    "InsufficientDocsError",
    "LossKind",
    "MissingTextError",
    "MultiEmbedding",
    "MultiVectorIndex",
    "NoPreferenceError",
    "OutputKind",
    "ParseError",
    "PoolingStrategy",
    "ProjectionParams",
    "Qrels",
    "QueryRecord",
    "RankForgeError",
    "Run",
    "ScoredDoc",
    "ScoringMode",
    "SearchConfig",
    "SimilarityFunction",
    "SparseEmbedding",
    "SparseInvertedIndex",
    "Sparsification",
    "TrainConfig",
    "TrainSample",
    "backbone_features",
    "batch_search",
    "build_index",
    "cosine",
    "dot",
    "encode_bi",
    "encode_cross",
    "evaluate",
    "fit",
    "load_index",
    "load_model",
    "loss_gradient",
    "loss_value",
    "max_sim",
    "mrr_at_k",
    "ndcg_at_k",
    "new_bi_encoder",
    "new_cross_encoder",
    "pool",
    "rank_documents",
    "re_rank",
    "recall_at_k",
    "save_index",
    "save_model",
    "score_pairs",
    "search_dense",
    "search_multi",
    "search_sparse",
    "sparse_dot",
    "tokenize",
]
