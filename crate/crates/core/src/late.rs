//! Exhaustive late-interaction (MaxSim) scoring.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{EmbeddingSet, Run, ScoredDoc, TokenMatrix};
use crate::sparse::collect_run;

/// Sum over query tokens of the best inner product with any document token.
///
/// Entries are widened to `f64` before multiplying; inner products and the
/// outer sum accumulate in row order.
pub fn maxsim_score(query: &TokenMatrix, doc: &TokenMatrix) -> Result<f64> {
    if query.dim() != doc.dim() {
        return Err(Error::Shape(format!(
            "query dim {} vs document dim {}",
            query.dim(),
            doc.dim()
        )));
    }
    Ok(maxsim_unchecked(query, doc))
}

fn maxsim_unchecked(query: &TokenMatrix, doc: &TokenMatrix) -> f64 {
    let mut total = 0.0f64;
    for q in query.rows() {
        let mut best = f64::NEG_INFINITY;
        for d in doc.rows() {
            let mut dot = 0.0f64;
            for (&a, &b) in q.iter().zip(d) {
                dot += f64::from(a) * f64::from(b);
            }
            if dot > best {
                best = dot;
            }
        }
        total += best;
    }
    total
}

/// Score every document and keep the top `k` by (score desc, doc id asc).
pub fn late_retrieve(set: &EmbeddingSet, query: &TokenMatrix, k: usize) -> Result<Vec<ScoredDoc>> {
    if query.dim() != set.dim() {
        return Err(Error::Shape(format!(
            "query dim {} vs collection dim {}",
            query.dim(),
            set.dim()
        )));
    }
    let docs: Vec<(&str, &TokenMatrix)> = set.iter().collect();
    let mut scored: Vec<ScoredDoc> = docs
        .par_iter()
        .map(|&(id, m)| ScoredDoc::new(id, maxsim_unchecked(query, m)))
        .collect();
    scored.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.doc_id.cmp(&b.doc_id))
    });
    scored.truncate(k);
    Ok(scored)
}

/// [`late_retrieve`] for every query matrix in `queries`.
pub fn late_retrieve_run(
    set: &EmbeddingSet,
    queries: &EmbeddingSet,
    k: usize,
    tag: &str,
) -> Result<Run> {
    let lists = queries
        .iter()
        .map(|(qid, q)| Ok((qid.to_owned(), late_retrieve(set, q, k)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(collect_run(lists, tag))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f32]]) -> TokenMatrix {
        TokenMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn orthonormal_identity() {
        assert_eq!(
            maxsim_score(&m(&[&[1.0, 0.0]]), &m(&[&[1.0, 0.0], &[0.0, 1.0]])).unwrap(),
            1.0
        );
    }

    #[test]
    fn two_query_tokens_one_doc_token() {
        let q = m(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(maxsim_score(&q, &m(&[&[0.0, 1.0]])).unwrap(), 1.0);
    }

    #[test]
    fn linear_in_query_rows() {
        let d = m(&[&[1.0, 0.0]]);
        assert_eq!(maxsim_score(&m(&[&[2.0, 0.0]]), &d).unwrap(), 2.0);
        assert_eq!(maxsim_score(&m(&[&[4.0, 0.0]]), &d).unwrap(), 4.0);
    }

    #[test]
    fn negative_similarities_are_kept() {
        let q = m(&[&[1.0, 0.0]]);
        assert_eq!(
            maxsim_score(&q, &m(&[&[-2.0, 0.0], &[-1.0, 0.0]])).unwrap(),
            -1.0
        );
    }

    #[test]
    fn dim_mismatch() {
        let r = maxsim_score(&m(&[&[1.0, 0.0]]), &m(&[&[1.0, 0.0, 0.0]]));
        assert!(matches!(r, Err(Error::Shape(_))));
    }

    fn two_docs() -> EmbeddingSet {
        let mut s = EmbeddingSet::new(2).unwrap();
        s.insert("d1", m(&[&[1.0, 0.0]])).unwrap();
        s.insert("d2", m(&[&[0.0, 1.0]])).unwrap();
        s
    }

    #[test]
    fn two_doc_retrieval() {
        let got = late_retrieve(&two_docs(), &m(&[&[1.0, 0.0]]), 2).unwrap();
        assert_eq!(got, [ScoredDoc::new("d1", 1.0), ScoredDoc::new("d2", 0.0)]);
    }

    #[test]
    fn k_saturates_and_empty_set() {
        assert_eq!(
            late_retrieve(&two_docs(), &m(&[&[1.0, 0.0]]), 50)
                .unwrap()
                .len(),
            2
        );
        let empty = EmbeddingSet::new(2).unwrap();
        assert!(late_retrieve(&empty, &m(&[&[1.0, 0.0]]), 5)
            .unwrap()
            .is_empty());
    }
}
