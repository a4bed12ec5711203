"""Decompose-and-interpret retrieval engine and benchmark harness."""

from .analysis import AnalyzerConfig, PorterStemmer, TokenSeq, analyze
from .corpus import CorpusStore, Document, corpus_stats, ingest_corpus
from .dense import (
    DenseIndex,
    DenseParams,
    EmbeddingFile,
    build_dense_index,
    dense_retrieve_topk,
    dense_score,
    fuse_query_embedding,
    load_embeddings,
    write_embeddings,
)
from .errors import InputError, ReasonerError, RediError
from .evaluation import (
    MetricReport,
    RunFile,
    ndcg_at_k,
    read_qrels,
    read_run,
    recall_at_k,
    write_run,
)
from .fusion import FusionConfig, concat_units, fuse_max, fuse_rrf, fuse_sum
from .runner import BenchmarkResult, ExperimentConfig, run_benchmark, run_retrieval, sweep
from .sparse import (
    SparseIndex,
    SparseParams,
    bm25_score,
    build_inverted_index,
    idf,
    query_saturation,
    sparse_retrieve_topk,
)
from .understanding import (
    ReasonerConfig,
    RetrievalUnit,
    UnitSet,
    build_unit_set,
    decompose,
    interpret,
    load_unit_cache,
    parse_reasoner_output,
    save_unit_cache,
)

__version__ = "0.1.0"
