//! BM25 expressed as sparse vectors, so the impact index computes BM25
//! scores with a plain dot product.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::io::{SparseVectorSet, TokenCounts};
use crate::sparse::SparseVector;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 0.9, b: 0.4 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1.is_finite() && self.k1 > 0.0) {
            return Err(Error::Domain(format!("k1 must be > 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::Domain(format!(
                "b must lie in [0, 1], got {}",
                self.b
            )));
        }
        Ok(())
    }
}

/// Corpus statistics needed to weigh queries against a weighted corpus.
#[derive(Clone, Debug)]
pub struct Bm25Model {
    params: Bm25Params,
    num_docs: usize,
    avgdl: f64,
    df: HashMap<String, usize>,
}

impl Bm25Model {
    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn df(&self, term: &str) -> usize {
        self.df.get(term).copied().unwrap_or(0)
    }

    /// `ln(1 + (N - df + 0.5) / (df + 0.5))`, never negative.
    pub fn idf(&self, term: &str) -> f64 {
        idf(self.num_docs, self.df(term))
    }

    /// Query weight of each distinct term is its idf.
    pub fn query_vector(&self, terms: &BTreeMap<String, u32>) -> SparseVector {
        SparseVector::from_pairs(
            terms
                .iter()
                .filter(|&(_, &tf)| tf > 0)
                .map(|(t, _)| (t.as_str(), self.idf(t))),
        )
        .expect("idf is finite and non-negative")
    }

    pub fn weigh_queries(&self, queries: &TokenCounts) -> SparseVectorSet {
        queries
            .iter()
            .map(|(qid, terms)| (qid.clone(), self.query_vector(terms)))
            .collect()
    }
}

pub fn idf(num_docs: usize, df: usize) -> f64 {
    let (n, df) = (num_docs as f64, df as f64);
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

/// Document-side BM25 weights:
/// `tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))`.
///
/// Terms with a zero count are ignored.
pub fn bm25_weigh_corpus(
    counts: &TokenCounts,
    params: Bm25Params,
) -> Result<(SparseVectorSet, Bm25Model)> {
    params.validate()?;
    if counts.is_empty() {
        return Err(Error::Domain("BM25 needs a non-empty corpus".into()));
    }
    let lengths: Vec<f64> = counts
        .values()
        .map(|terms| terms.values().map(|&tf| tf as f64).sum())
        .collect();
    let avgdl = lengths.iter().sum::<f64>() / counts.len() as f64;

    let mut df: HashMap<String, usize> = HashMap::new();
    let mut docs = SparseVectorSet::new();
    let Bm25Params { k1, b } = params;
    for ((id, terms), dl) in counts.iter().zip(lengths) {
        let norm = k1 * (1.0 - b + b * dl / avgdl);
        let mut pairs = Vec::with_capacity(terms.len());
        for (t, &tf) in terms {
            if tf == 0 {
                continue;
            }
            *df.entry(t.clone()).or_default() += 1;
            let tf = tf as f64;
            pairs.push((t.as_str(), tf * (k1 + 1.0) / (tf + norm)));
        }
        docs.insert(id.clone(), SparseVector::from_pairs(pairs)?)?;
    }
    let model = Bm25Model {
        params,
        num_docs: counts.len(),
        avgdl,
        df,
    };
    Ok((docs, model))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(docs: &[(&str, &[(&str, u32)])]) -> TokenCounts {
        docs.iter()
            .map(|(id, terms)| {
                let t = terms.iter().map(|(t, c)| (t.to_string(), *c)).collect();
                (id.to_string(), t)
            })
            .collect()
    }

    #[test]
    fn idf_two_docs_one_match() {
        assert!((idf(2, 1) - std::f64::consts::LN_2).abs() < 1e-15);
        let (_, m) = bm25_weigh_corpus(
            &corpus(&[("d1", &[("t", 1)]), ("d2", &[("u", 1)])]),
            Bm25Params::default(),
        )
        .unwrap();
        assert_eq!(m.idf("t"), idf(2, 1));
    }

    #[test]
    fn average_length_doc_with_unit_tf() {
        // every doc has dl = avgdl = 1
        let c = corpus(&[("d1", &[("t", 1)]), ("d2", &[("u", 1)])]);
        let (docs, _) = bm25_weigh_corpus(&c, Bm25Params { k1: 0.9, b: 0.4 }).unwrap();
        assert_eq!(docs.get("d1").unwrap().get("t"), 1.0);
    }

    #[test]
    fn b_zero_ignores_length() {
        let c = corpus(&[("short", &[("t", 2)]), ("long", &[("t", 2), ("x", 40)])]);
        let (docs, _) = bm25_weigh_corpus(&c, Bm25Params { k1: 1.2, b: 0.0 }).unwrap();
        assert_eq!(
            docs.get("short").unwrap().get("t"),
            docs.get("long").unwrap().get("t")
        );

        let (docs, _) = bm25_weigh_corpus(&c, Bm25Params { k1: 1.2, b: 0.75 }).unwrap();
        assert!(docs.get("short").unwrap().get("t") > docs.get("long").unwrap().get("t"));
    }

    #[test]
    fn empty_corpus_and_bad_params() {
        assert!(matches!(
            bm25_weigh_corpus(&TokenCounts::new(), Bm25Params::default()),
            Err(Error::Domain(_))
        ));
        let c = corpus(&[("d", &[("t", 1)])]);
        assert!(bm25_weigh_corpus(&c, Bm25Params { k1: 0.0, b: 0.5 }).is_err());
        assert!(bm25_weigh_corpus(&c, Bm25Params { k1: 1.0, b: 1.5 }).is_err());
    }

    #[test]
    fn idf_non_negative_for_ubiquitous_terms() {
        for n in 1..50 {
            for df in 0..=n {
                assert!(idf(n, df) >= 0.0);
            }
        }
    }

    #[test]
    fn dot_product_equals_textbook_bm25() {
        let c = corpus(&[
            ("d1", &[("a", 3), ("b", 1)]),
            ("d2", &[("a", 1), ("c", 5)]),
            ("d3", &[("b", 2), ("c", 1), ("d", 1)]),
        ]);
        let p = Bm25Params { k1: 1.2, b: 0.75 };
        let (docs, model) = bm25_weigh_corpus(&c, p).unwrap();
        let query: BTreeMap<String, u32> = [("a".to_string(), 1), ("c".to_string(), 1)].into();
        let qv = model.query_vector(&query);

        let avgdl = (4.0 + 6.0 + 4.0) / 3.0;
        let textbook = |tf: f64, dl: f64, df: f64| {
            let idf = (1.0 + (3.0 - df + 0.5) / (df + 0.5)).ln();
            idf * tf * (p.k1 + 1.0) / (tf + p.k1 * (1.0 - p.b + p.b * dl / avgdl))
        };
        let d2 = textbook(1.0, 6.0, 2.0) + textbook(5.0, 6.0, 2.0);
        assert!((qv.dot(docs.get("d2").unwrap()) - d2).abs() < 1e-12);
    }
}
