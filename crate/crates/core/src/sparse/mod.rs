//! Learned-sparse and BM25 retrieval over an impact index, plus Rocchio PRF.

mod bm25;
mod index;
mod rocchio;
mod vector;

pub use bm25::{bm25_weigh_corpus, idf, Bm25Model, Bm25Params};
pub(crate) use index::collect_run;
pub use index::ImpactIndex;
pub use rocchio::{retrieve_with_prf, rocchio_expand, RocchioParams};
pub use vector::SparseVector;

use rayon::prelude::*;

use crate::error::Result;
use crate::io::{Run, SparseVectorSet};

/// [`retrieve_with_prf`] for every query, in parallel.
pub fn retrieve_run_with_prf(
    index: &ImpactIndex,
    vectors: &SparseVectorSet,
    queries: &SparseVectorSet,
    k: usize,
    params: &RocchioParams,
    tag: &str,
) -> Result<Run> {
    let lists = queries
        .iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(qid, q)| {
            Ok((
                qid.to_owned(),
                retrieve_with_prf(index, vectors, q, k, params)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(collect_run(lists, tag))
}
