//! Readers and writers for every on-disk artifact.

pub mod embeddings;
pub mod ids;
pub mod qrels;
pub mod run;
pub mod sparse;

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use crate::error::{Error, Result};

pub use embeddings::{
    load_embedding_set, write_embedding_set, write_embedding_text, EmbeddingSet, TokenMatrix,
};
pub use ids::{load_id_list, load_rerank_scores, write_id_list, write_rerank_scores, ScoreTable};
pub use qrels::{parse_qrels, write_qrels, Qrels};
pub use run::{parse_trec_run, run_to_string, write_trec_run, Run, RunRecord, ScoredDoc};
pub use sparse::{
    load_sparse_vectors, load_token_counts, write_sparse_vectors, write_token_counts,
    SparseVectorSet, TokenCounts,
};

/// Open `path` for buffered reading and hand it to `parse`, tagging I/O and
/// parse failures with the path.
pub fn read_file<T>(path: &Path, parse: impl FnOnce(BufReader<File>) -> Result<T>) -> Result<T> {
    let file = File::open(path).map_err(Error::with_path(path))?;
    parse(BufReader::new(file)).map_err(|e| match e {
        Error::Io(source) => Error::File {
            path: path.to_owned(),
            source,
        },
        Error::Parse { line, reason } => Error::Parse {
            line,
            reason: format!("{}: {reason}", path.display()),
        },
        e => e,
    })
}
