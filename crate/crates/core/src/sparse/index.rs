use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{Run, ScoredDoc, SparseVectorSet};
use crate::sparse::SparseVector;

/// Immutable inverted index of precomputed term impacts.
///
/// Documents are numbered by ascending doc id, so posting lists sorted by
/// document number are also sorted by doc id.
#[derive(Clone, Debug, PartialEq)]
pub struct ImpactIndex {
    doc_ids: Vec<String>,
    terms: Vec<String>,
    postings: Vec<Vec<(u32, f64)>>,
    lookup: HashMap<String, usize>,
}

impl ImpactIndex {
    pub fn build(vectors: &SparseVectorSet) -> Self {
        let doc_ids: Vec<String> = vectors.ids().map(str::to_owned).collect();
        let mut by_term: BTreeMap<&str, Vec<(u32, f64)>> = BTreeMap::new();
        // Set iteration is in id order, so every list is appended in
        // ascending document number.
        for (docno, (_, v)) in vectors.iter().enumerate() {
            for (t, w) in v.iter() {
                by_term.entry(t).or_default().push((docno as u32, w));
            }
        }
        let (terms, postings): (Vec<String>, Vec<_>) =
            by_term.into_iter().map(|(t, p)| (t.to_owned(), p)).unzip();
        Self::assemble(doc_ids, terms, postings)
    }

    fn assemble(doc_ids: Vec<String>, terms: Vec<String>, postings: Vec<Vec<(u32, f64)>>) -> Self {
        let lookup = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            doc_ids,
            terms,
            postings,
            lookup,
        }
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn num_postings(&self) -> usize {
        self.postings.iter().map(Vec::len).sum()
    }

    /// Posting list of `term` as (doc id, weight), in ascending doc id order.
    pub fn postings(&self, term: &str) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.lookup
            .get(term)
            .map(|&i| self.postings[i].as_slice())
            .unwrap_or_default()
            .iter()
            .map(|&(d, w)| (self.doc_ids[d as usize].as_str(), w))
    }

    /// Rebuild every document vector from the postings.
    pub fn reconstruct(&self) -> SparseVectorSet {
        let mut docs: Vec<Vec<(&str, f64)>> = vec![Vec::new(); self.doc_ids.len()];
        for (t, list) in self.terms.iter().zip(&self.postings) {
            for &(d, w) in list {
                docs[d as usize].push((t, w));
            }
        }
        self.doc_ids
            .iter()
            .zip(docs)
            .map(|(id, pairs)| {
                let v = SparseVector::from_pairs(pairs).expect("index weights are valid");
                (id.clone(), v)
            })
            .collect()
    }

    /// Exact top-`k` by dot product, ordered by (score desc, doc id asc).
    /// Only documents with a positive score are returned.
    ///
    /// Scores are accumulated term-at-a-time in ascending query-term order,
    /// which is the same summation order as [`SparseVector::dot`].
    pub fn retrieve_topk(&self, query: &SparseVector, k: usize) -> Vec<ScoredDoc> {
        if k == 0 || query.is_empty() || self.doc_ids.is_empty() {
            return Vec::new();
        }
        let mut acc = vec![0.0f64; self.doc_ids.len()];
        let mut touched = vec![false; self.doc_ids.len()];
        let mut hits: Vec<u32> = Vec::new();
        for (t, qw) in query.iter() {
            let Some(&ti) = self.lookup.get(t) else {
                continue;
            };
            for &(d, w) in &self.postings[ti] {
                let slot = d as usize;
                if !touched[slot] {
                    touched[slot] = true;
                    hits.push(d);
                }
                acc[slot] += qw * w;
            }
        }

        let mut heap: BinaryHeap<Reverse<Candidate>> = BinaryHeap::with_capacity(k + 1);
        for d in hits {
            let score = acc[d as usize];
            if score <= 0.0 {
                continue;
            }
            let cand = Candidate { score, doc: d };
            if heap.len() < k {
                heap.push(Reverse(cand));
            } else if heap.peek().is_some_and(|Reverse(worst)| cand > *worst) {
                heap.pop();
                heap.push(Reverse(cand));
            }
        }
        let mut best: Vec<Candidate> = heap.into_iter().map(|Reverse(c)| c).collect();
        best.sort_by(|a, b| b.cmp(a));
        best.into_iter()
            .map(|c| ScoredDoc::new(self.doc_ids[c.doc as usize].clone(), c.score))
            .collect()
    }

    /// Retrieve every query of `queries`, in parallel, into a run.
    pub fn retrieve_run(&self, queries: &SparseVectorSet, k: usize, tag: &str) -> Run {
        let lists: Vec<(String, Vec<ScoredDoc>)> = queries
            .iter()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(qid, q)| (qid.to_owned(), self.retrieve_topk(q, k)))
            .collect();
        collect_run(lists, tag)
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        let wire = IndexFile {
            doc_ids: self.doc_ids.clone(),
            postings: self
                .terms
                .iter()
                .cloned()
                .zip(self.postings.iter().cloned())
                .collect(),
        };
        serde_json::to_writer(&mut out, &wire)?;
        out.flush()?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self> {
        let wire: IndexFile = serde_json::from_reader(input)?;
        if wire.doc_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain(
                "index doc ids are not strictly ascending".into(),
            ));
        }
        let n = wire.doc_ids.len() as u32;
        for (t, list) in &wire.postings {
            let sorted = list.windows(2).all(|w| w[0].0 < w[1].0);
            let valid = list.iter().all(|&(d, w)| d < n && w.is_finite() && w > 0.0);
            if !sorted || !valid {
                return Err(Error::Domain(format!(
                    "corrupt posting list for term `{t}`"
                )));
            }
        }
        let (terms, postings) = wire.postings.into_iter().unzip();
        Ok(Self::assemble(wire.doc_ids, terms, postings))
    }
}

pub(crate) fn collect_run(lists: Vec<(String, Vec<ScoredDoc>)>, tag: &str) -> Run {
    let mut run = Run::new(tag);
    for (qid, list) in lists {
        if !list.is_empty() {
            run.insert(qid, list)
                .expect("retrieved lists hold unique docs with finite scores");
        }
    }
    run
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    doc_ids: Vec<String>,
    postings: BTreeMap<String, Vec<(u32, f64)>>,
}

/// Heap entry; greater means better (higher score, then lower doc number).
#[derive(Clone, Copy, Debug)]
struct Candidate {
    score: f64,
    doc: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.doc.cmp(&self.doc))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(records: &[(&str, &[(&str, f64)])]) -> SparseVectorSet {
        let mut s = SparseVectorSet::new();
        for (id, pairs) in records {
            s.insert(
                *id,
                SparseVector::from_pairs(pairs.iter().copied()).unwrap(),
            )
            .unwrap();
        }
        s
    }

    fn q(pairs: &[(&str, f64)]) -> SparseVector {
        SparseVector::from_pairs(pairs.iter().copied()).unwrap()
    }

    #[test]
    fn single_posting() {
        let idx = ImpactIndex::build(&set(&[("d1", &[("t1", 2.0)])]));
        assert_eq!(idx.doc_count(), 1);
        assert_eq!(idx.postings("t1").collect::<Vec<_>>(), [("d1", 2.0)]);
    }

    #[test]
    fn empty_index() {
        let idx = ImpactIndex::build(&SparseVectorSet::new());
        assert_eq!(idx.doc_count(), 0);
        assert!(idx.retrieve_topk(&q(&[("t", 1.0)]), 10).is_empty());
    }

    #[test]
    fn two_doc_ranking() {
        let idx = ImpactIndex::build(&set(&[("d1", &[("t1", 1.0)]), ("d2", &[("t1", 3.0)])]));
        let got = idx.retrieve_topk(&q(&[("t1", 2.0)]), 10);
        assert_eq!(got, [ScoredDoc::new("d2", 6.0), ScoredDoc::new("d1", 2.0)]);
    }

    #[test]
    fn absent_terms_and_empty_query() {
        let idx = ImpactIndex::build(&set(&[("d1", &[("t1", 1.0)])]));
        assert!(idx.retrieve_topk(&q(&[("zz", 1.0)]), 5).is_empty());
        assert!(idx.retrieve_topk(&SparseVector::new(), 5).is_empty());
    }

    #[test]
    fn ties_prefer_smaller_doc_id_and_k_truncates() {
        let idx = ImpactIndex::build(&set(&[
            ("c", &[("t", 1.0)]),
            ("a", &[("t", 1.0)]),
            ("b", &[("t", 1.0)]),
        ]));
        let got: Vec<_> = idx
            .retrieve_topk(&q(&[("t", 1.0)]), 2)
            .into_iter()
            .map(|d| d.doc_id)
            .collect();
        assert_eq!(got, ["a", "b"]);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let idx = ImpactIndex::build(&set(&[
            ("d1", &[("a", 0.5), ("b", 2.0)]),
            ("d2", &[("a", 1.0)]),
        ]));
        let mut buf = Vec::new();
        idx.write_json(&mut buf).unwrap();
        assert_eq!(ImpactIndex::read_json(&buf[..]).unwrap(), idx);

        let bad = r#"{"doc_ids":["a","b"],"postings":{"t":[[1,1.0],[0,1.0]]}}"#;
        assert!(ImpactIndex::read_json(bad.as_bytes()).is_err());
    }
}
