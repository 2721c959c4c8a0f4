//! Retrieval kernels and experiment plumbing for cross-language retrieval
//! runs built from precomputed model outputs.
//!
//! - [`io`]: TREC runs and qrels, sparse-vector, token-count and
//!   token-embedding files.
//! - [`sparse`]: impact index with exact top-k, BM25 weighting, Rocchio PRF.
//! - [`late`]: exhaustive MaxSim scoring over token embeddings.
//! - [`fusion`]: min-max normalized run fusion and reranker score merging.
//! - [`eval`]: nDCG / AP / recall, report tables, dev-set filtering.
//! - [`pipeline`]: JSON-configured stage graphs with a digest manifest.

pub mod error;
pub mod eval;
pub mod fusion;
pub mod io;
pub mod late;
pub mod pipeline;
pub mod sparse;
pub mod synth;

pub use error::{Error, Result};
pub use eval::{
    evaluate, filter_devset, format_report, FilterReport, MetricKind, MetricReport, MetricSpec,
};
pub use fusion::{
    apply_rerank_scores, fuse, minmax_normalize, FusionSpec, MissingPolicy, RerankScores,
};
pub use io::{EmbeddingSet, Qrels, Run, RunRecord, ScoredDoc, SparseVectorSet, TokenMatrix};
pub use late::{late_retrieve, maxsim_score};
pub use pipeline::{run_pipeline, validate_config, PipelineConfig};
pub use sparse::{
    bm25_weigh_corpus, retrieve_with_prf, rocchio_expand, Bm25Model, Bm25Params, ImpactIndex,
    RocchioParams, SparseVector,
};
