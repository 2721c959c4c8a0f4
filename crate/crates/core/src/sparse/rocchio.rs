//! Rocchio pseudo-relevance feedback (positive feedback only).

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::io::{ScoredDoc, SparseVectorSet};
use crate::sparse::{ImpactIndex, SparseVector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocchioParams {
    pub alpha: f64,
    pub beta: f64,
    pub fb_docs: usize,
    /// Keep only this many highest-weight terms; `None` keeps all.
    pub term_cap: Option<usize>,
}

impl Default for RocchioParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.75,
            fb_docs: 10,
            term_cap: None,
        }
    }
}

impl RocchioParams {
    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(self.alpha) || !ok(self.beta) || self.alpha + self.beta <= 0.0 {
            return Err(Error::Domain(format!(
                "need alpha, beta >= 0 with alpha + beta > 0 (alpha={}, beta={})",
                self.alpha, self.beta
            )));
        }
        if self.fb_docs == 0 {
            return Err(Error::Domain("fb_docs must be at least 1".into()));
        }
        if self.term_cap == Some(0) {
            return Err(Error::Domain("term_cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// `alpha * q + beta * mean(top feedback docs)`, optionally truncated to the
/// `term_cap` heaviest terms (ties: ascending term).
pub fn rocchio_expand(
    query: &SparseVector,
    first_pass: &[ScoredDoc],
    vectors: &SparseVectorSet,
    params: &RocchioParams,
) -> Result<SparseVector> {
    params.validate()?;
    if first_pass.is_empty() {
        return Err(Error::Domain(
            "Rocchio expansion needs a non-empty first pass".into(),
        ));
    }
    let feedback = &first_pass[..params.fb_docs.min(first_pass.len())];
    let m = feedback.len() as f64;

    let mut sums: BTreeMap<&str, f64> = BTreeMap::new();
    for d in feedback {
        let v = vectors
            .get(&d.doc_id)
            .ok_or_else(|| Error::MissingDocument(d.doc_id.clone()))?;
        for (t, w) in v.iter() {
            *sums.entry(t).or_insert(0.0) += w;
        }
    }
    for (t, _) in query.iter() {
        sums.entry(t).or_insert(0.0);
    }

    let mut weights: Vec<(&str, f64)> = sums
        .into_iter()
        .map(|(t, sum)| (t, params.alpha * query.get(t) + params.beta * (sum / m)))
        .filter(|&(_, w)| w > 0.0)
        .collect();
    if let Some(cap) = params.term_cap {
        if weights.len() > cap {
            weights.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
            weights.truncate(cap);
        }
    }
    SparseVector::from_pairs(weights)
}

/// Two-pass retrieval: top-`k`, Rocchio expansion, top-`k` again.
pub fn retrieve_with_prf(
    index: &ImpactIndex,
    vectors: &SparseVectorSet,
    query: &SparseVector,
    k: usize,
    params: &RocchioParams,
) -> Result<Vec<ScoredDoc>> {
    params.validate()?;
    let first = index.retrieve_topk(query, k);
    if first.is_empty() {
        return Ok(first);
    }
    let expanded = rocchio_expand(query, &first, vectors, params)?;
    Ok(index.retrieve_topk(&expanded, k))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(pairs: &[(&str, f64)]) -> SparseVector {
        SparseVector::from_pairs(pairs.iter().copied()).unwrap()
    }

    fn docs() -> SparseVectorSet {
        let mut s = SparseVectorSet::new();
        s.insert("d1", v(&[("t1", 2.0)])).unwrap();
        s.insert("d2", v(&[("t2", 4.0)])).unwrap();
        s
    }

    fn pass(ids: &[&str]) -> Vec<ScoredDoc> {
        ids.iter().map(|d| ScoredDoc::new(*d, 1.0)).collect()
    }

    #[test]
    fn centroid_example() {
        let p = RocchioParams {
            alpha: 1.0,
            beta: 0.5,
            fb_docs: 2,
            term_cap: None,
        };
        let out = rocchio_expand(&v(&[("t1", 1.0)]), &pass(&["d1", "d2"]), &docs(), &p).unwrap();
        assert_eq!(out, v(&[("t1", 1.5), ("t2", 1.0)]));
    }

    #[test]
    fn identities() {
        let q = v(&[("t1", 0.3), ("t9", 7.0)]);
        let keep = RocchioParams {
            alpha: 1.0,
            beta: 0.0,
            ..Default::default()
        };
        assert_eq!(
            rocchio_expand(&q, &pass(&["d1", "d2"]), &docs(), &keep).unwrap(),
            q
        );

        let top = RocchioParams {
            alpha: 0.0,
            beta: 1.0,
            fb_docs: 1,
            term_cap: None,
        };
        let out = rocchio_expand(&q, &pass(&["d2", "d1"]), &docs(), &top).unwrap();
        assert_eq!(&out, docs().get("d2").unwrap());
    }

    #[test]
    fn term_cap_keeps_heaviest_with_term_tiebreak() {
        let p = RocchioParams {
            alpha: 1.0,
            beta: 0.0,
            fb_docs: 1,
            term_cap: Some(2),
        };
        let q = v(&[("c", 1.0), ("a", 1.0), ("b", 1.0), ("z", 5.0)]);
        let out = rocchio_expand(&q, &pass(&["d1"]), &docs(), &p).unwrap();
        assert_eq!(out, v(&[("z", 5.0), ("a", 1.0)]));
    }

    #[test]
    fn missing_feedback_doc_is_named() {
        let err = rocchio_expand(
            &v(&[("t1", 1.0)]),
            &pass(&["nope"]),
            &docs(),
            &RocchioParams::default(),
        );
        assert!(matches!(err, Err(Error::MissingDocument(d)) if d == "nope"));
    }

    #[test]
    fn invalid_params() {
        let q = v(&[("t1", 1.0)]);
        for p in [
            RocchioParams {
                alpha: 0.0,
                beta: 0.0,
                ..Default::default()
            },
            RocchioParams {
                alpha: -1.0,
                ..Default::default()
            },
            RocchioParams {
                fb_docs: 0,
                ..Default::default()
            },
            RocchioParams {
                term_cap: Some(0),
                ..Default::default()
            },
        ] {
            assert!(rocchio_expand(&q, &pass(&["d1"]), &docs(), &p).is_err());
        }
    }

    #[test]
    fn prf_disabled_matches_plain_retrieval() {
        let idx = ImpactIndex::build(&docs());
        let q = v(&[("t1", 1.0), ("t2", 0.1)]);
        let p = RocchioParams {
            alpha: 1.0,
            beta: 0.0,
            ..Default::default()
        };
        assert_eq!(
            retrieve_with_prf(&idx, &docs(), &q, 10, &p).unwrap(),
            idx.retrieve_topk(&q, 10)
        );
    }

    #[test]
    fn empty_first_pass_short_circuits() {
        let idx = ImpactIndex::build(&docs());
        // feedback vectors are empty; expansion would fail if it ran
        let out = retrieve_with_prf(
            &idx,
            &SparseVectorSet::new(),
            &v(&[("zz", 1.0)]),
            10,
            &RocchioParams::default(),
        );
        assert!(out.unwrap().is_empty());
    }
}
