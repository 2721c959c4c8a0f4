//! Per-query min-max normalization, averaged run fusion, and merging of
//! externally computed reranker scores.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::io::{Run, ScoreTable, ScoredDoc};

/// How a document missing from a member run is treated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MissingPolicy {
    /// Counts as normalized score 0; the denominator is the total weight.
    #[default]
    Zero,
    /// The run is left out of both numerator and denominator.
    Renorm,
}

impl FromStr for MissingPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Self::Zero),
            "renorm" => Ok(Self::Renorm),
            _ => Err(Error::Domain(format!(
                "unknown missing-doc policy `{s}` (zero|renorm)"
            ))),
        }
    }
}

impl MissingPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::Renorm => "renorm",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusionSpec {
    pub member_tags: Vec<String>,
    /// One positive weight per member; `None` weighs all members equally.
    pub weights: Option<Vec<f64>>,
    pub output_tag: String,
    pub missing: MissingPolicy,
}

impl FusionSpec {
    pub fn new(member_tags: Vec<String>, output_tag: impl Into<String>) -> Self {
        Self {
            member_tags,
            weights: None,
            output_tag: output_tag.into(),
            missing: MissingPolicy::Zero,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.member_tags.is_empty() {
            return Err(Error::Domain("fusion needs at least one member".into()));
        }
        if self.output_tag.is_empty() {
            return Err(Error::Domain("fusion output tag is empty".into()));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.member_tags.len() {
                return Err(Error::Domain(format!(
                    "{} weights for {} members",
                    w.len(),
                    self.member_tags.len()
                )));
            }
            if let Some(bad) = w.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
                return Err(Error::Domain(format!(
                    "fusion weight {bad} is not positive"
                )));
            }
        }
        Ok(())
    }

    fn weight(&self, member: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[member])
    }
}

/// Rescale each query's scores to `(s - min) / (max - min)`. A query whose
/// scores are all equal maps every score to 0.
pub fn minmax_normalize(run: &Run) -> Run {
    let mut out = Run::new(run.tag());
    for (qid, list) in run.lists() {
        let docs = normalized(list)
            .map(|(d, s)| ScoredDoc::new(d, s))
            .collect();
        out.insert(qid, docs)
            .expect("normalization keeps ids unique and scores finite");
    }
    out
}

fn normalized(list: &[ScoredDoc]) -> impl Iterator<Item = (&str, f64)> {
    let (min, max) = list
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
            (lo.min(d.score), hi.max(d.score))
        });
    let range = max - min;
    list.iter().map(move |d| {
        let s = if range > 0.0 {
            (d.score - min) / range
        } else {
            0.0
        };
        (d.doc_id.as_str(), s)
    })
}

/// Weighted average of min-max normalized member scores, per query.
///
/// Members are matched to `spec.member_tags` by position and must carry
/// those tags. A query contained in no member is absent from the output.
pub fn fuse(runs: &[Run], spec: &FusionSpec) -> Result<Run> {
    spec.validate()?;
    if runs.len() != spec.member_tags.len() {
        return Err(Error::Domain(format!(
            "{} runs for {} fusion members",
            runs.len(),
            spec.member_tags.len()
        )));
    }
    for (run, tag) in runs.iter().zip(&spec.member_tags) {
        if run.tag() != tag {
            return Err(Error::Domain(format!(
                "member run tagged `{}` where `{tag}` was expected",
                run.tag()
            )));
        }
    }

    let total_weight: f64 = (0..runs.len()).map(|i| spec.weight(i)).sum();
    let queries: BTreeSet<&str> = runs.iter().flat_map(Run::query_ids).collect();
    let mut out = Run::new(&spec.output_tag);
    for qid in queries {
        // (weighted sum, weight of runs containing the doc)
        let mut acc: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
        for (i, run) in runs.iter().enumerate() {
            let Some(list) = run.get(qid) else { continue };
            let w = spec.weight(i);
            for (doc, s) in normalized(list) {
                let e = acc.entry(doc).or_insert((0.0, 0.0));
                e.0 += w * s;
                e.1 += w;
            }
        }
        let docs = acc
            .into_iter()
            .map(|(doc, (sum, present))| {
                let denom = match spec.missing {
                    MissingPolicy::Zero => total_weight,
                    MissingPolicy::Renorm => present,
                };
                ScoredDoc::new(doc, sum / denom)
            })
            .collect();
        out.insert(qid, docs)?;
    }
    Ok(out)
}

/// Reranker output to merge into a candidate run.
#[derive(Clone, Debug, PartialEq)]
pub struct RerankScores {
    pub scores: ScoreTable,
    /// Only the top `depth` candidates of each query may be reranked.
    pub depth: usize,
}

impl RerankScores {
    pub const DEFAULT_DEPTH: usize = 1000;

    pub fn new(scores: ScoreTable) -> Self {
        Self {
            scores,
            depth: Self::DEFAULT_DEPTH,
        }
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }
}

/// Reorder each query's top-`depth` candidates by reranker score (desc,
/// doc id desc). Candidates within the depth that carry no reranker score
/// follow the scored ones, and candidates below the depth come last; both
/// keep their original relative order. Output scores encode rank as
/// `n - rank + 1`, and every query keeps exactly its candidate doc set.
pub fn apply_rerank_scores(candidate: &Run, rr: &RerankScores) -> Result<Run> {
    if rr.depth == 0 {
        return Err(Error::Domain("rerank depth must be at least 1".into()));
    }
    for (qid, scored) in &rr.scores {
        let list = candidate.get(qid).unwrap_or_default();
        let head: BTreeSet<&str> = list
            .iter()
            .take(rr.depth)
            .map(|d| d.doc_id.as_str())
            .collect();
        if let Some(doc) = scored.keys().find(|d| !head.contains(d.as_str())) {
            return Err(Error::RerankDocument {
                query: qid.clone(),
                doc: doc.clone(),
                depth: rr.depth,
            });
        }
    }

    let mut out = Run::new(candidate.tag());
    for (qid, list) in candidate.lists() {
        let empty = BTreeMap::new();
        let scored = rr.scores.get(qid).unwrap_or(&empty);
        let depth = rr.depth.min(list.len());
        let (head, tail) = list.split_at(depth);

        let mut reranked: Vec<(&str, f64)> = head
            .iter()
            .filter_map(|d| scored.get(&d.doc_id).map(|&s| (d.doc_id.as_str(), s)))
            .collect();
        reranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| b.0.cmp(a.0)));
        let unscored = head.iter().filter(|d| !scored.contains_key(&d.doc_id));

        let order = reranked
            .into_iter()
            .map(|(d, _)| d)
            .chain(unscored.chain(tail).map(|d| d.doc_id.as_str()));
        let n = list.len();
        let docs = order
            .enumerate()
            .map(|(i, d)| ScoredDoc::new(d, (n - i) as f64))
            .collect();
        out.insert(qid, docs)?;
    }
    Ok(out)
}

/// Per-query document sets, for checking that a transformation kept them.
pub fn doc_sets(run: &Run) -> HashMap<&str, BTreeSet<&str>> {
    run.lists()
        .map(|(q, l)| (q, l.iter().map(|d| d.doc_id.as_str()).collect()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(tag: &str, lists: &[(&str, &[(&str, f64)])]) -> Run {
        let mut r = Run::new(tag);
        for (q, docs) in lists {
            r.insert(
                *q,
                docs.iter().map(|(d, s)| ScoredDoc::new(*d, *s)).collect(),
            )
            .unwrap();
        }
        r
    }

    fn scores(r: &Run, q: &str) -> Vec<(String, f64)> {
        r.get(q)
            .unwrap()
            .iter()
            .map(|d| (d.doc_id.clone(), d.score))
            .collect()
    }

    fn pairs(p: &[(&str, f64)]) -> Vec<(String, f64)> {
        p.iter().map(|(d, s)| (d.to_string(), *s)).collect()
    }

    #[test]
    fn two_point_normalization() {
        let n = minmax_normalize(&run("r", &[("q", &[("d1", 5.0), ("d2", 1.0)])]));
        assert_eq!(scores(&n, "q"), pairs(&[("d1", 1.0), ("d2", 0.0)]));
    }

    #[test]
    fn three_point_normalization() {
        let n = minmax_normalize(&run(
            "r",
            &[("q", &[("d1", 1.0), ("d2", 3.0), ("d3", 5.0)])],
        ));
        assert_eq!(
            scores(&n, "q"),
            pairs(&[("d3", 1.0), ("d2", 0.5), ("d1", 0.0)])
        );
    }

    #[test]
    fn flat_query_normalizes_to_zero() {
        let n = minmax_normalize(&run("r", &[("q", &[("a", 2.0), ("c", 2.0), ("b", 2.0)])]));
        assert_eq!(
            scores(&n, "q"),
            pairs(&[("c", 0.0), ("b", 0.0), ("a", 0.0)])
        );
    }

    #[test]
    fn symmetric_runs_tie() {
        let r1 = run("a", &[("q", &[("d1", 2.0), ("d2", 1.0)])]);
        let r2 = run("b", &[("q", &[("d1", 1.0), ("d2", 2.0)])]);
        let f = fuse(
            &[r1, r2],
            &FusionSpec::new(vec!["a".into(), "b".into()], "f"),
        )
        .unwrap();
        assert_eq!(scores(&f, "q"), pairs(&[("d2", 0.5), ("d1", 0.5)]));
        assert_eq!(f.tag(), "f");
    }

    #[test]
    fn absent_docs_count_zero() {
        let r1 = run("a", &[("q", &[("d1", 10.0), ("d2", 0.0)])]);
        let r2 = run("b", &[("q", &[("d2", 7.0), ("d3", 3.0)])]);
        let spec = FusionSpec::new(vec!["a".into(), "b".into()], "f");
        let f = fuse(&[r1.clone(), r2.clone()], &spec).unwrap();
        assert_eq!(
            scores(&f, "q"),
            pairs(&[("d2", 0.5), ("d1", 0.5), ("d3", 0.0)])
        );

        let renorm = FusionSpec {
            missing: MissingPolicy::Renorm,
            ..spec
        };
        let f = fuse(&[r1, r2], &renorm).unwrap();
        assert_eq!(
            scores(&f, "q"),
            pairs(&[("d1", 1.0), ("d2", 0.5), ("d3", 0.0)])
        );
    }

    #[test]
    fn weights() {
        let r1 = run("a", &[("q", &[("x", 1.0), ("y", 0.0)])]);
        let r2 = run("b", &[("q", &[("x", 0.0), ("y", 1.0)])]);
        let spec = FusionSpec {
            weights: Some(vec![3.0, 1.0]),
            ..FusionSpec::new(vec!["a".into(), "b".into()], "f")
        };
        let f = fuse(&[r1, r2], &spec).unwrap();
        assert_eq!(scores(&f, "q"), pairs(&[("x", 0.75), ("y", 0.25)]));
    }

    #[test]
    fn query_in_one_member_only() {
        let r1 = run("a", &[("q1", &[("d", 1.0)])]);
        let r2 = run("b", &[("q2", &[("e", 1.0), ("f", 3.0)])]);
        let f = fuse(
            &[r1, r2],
            &FusionSpec::new(vec!["a".into(), "b".into()], "f"),
        )
        .unwrap();
        assert_eq!(f.query_ids().collect::<Vec<_>>(), ["q1", "q2"]);
        assert_eq!(scores(&f, "q2"), pairs(&[("f", 0.5), ("e", 0.0)]));
    }

    #[test]
    fn spec_checks() {
        let r = run("a", &[("q", &[("d", 1.0)])]);
        assert!(fuse(std::slice::from_ref(&r), &FusionSpec::new(vec![], "f")).is_err());
        assert!(fuse(
            std::slice::from_ref(&r),
            &FusionSpec::new(vec!["other".into()], "f")
        )
        .is_err());
        let bad_w = FusionSpec {
            weights: Some(vec![1.0, 2.0]),
            ..FusionSpec::new(vec!["a".into()], "f")
        };
        assert!(fuse(std::slice::from_ref(&r), &bad_w).is_err());
        let neg_w = FusionSpec {
            weights: Some(vec![-1.0]),
            ..FusionSpec::new(vec!["a".into()], "f")
        };
        assert!(fuse(&[r], &neg_w).is_err());
        assert_eq!(
            "renorm".parse::<MissingPolicy>().unwrap(),
            MissingPolicy::Renorm
        );
        assert!("skip".parse::<MissingPolicy>().is_err());
    }

    fn table(entries: &[(&str, &str, f64)]) -> ScoreTable {
        let mut t = ScoreTable::new();
        for (q, d, s) in entries {
            t.entry(q.to_string())
                .or_default()
                .insert(d.to_string(), *s);
        }
        t
    }

    fn order(r: &Run, q: &str) -> Vec<String> {
        r.get(q).unwrap().iter().map(|d| d.doc_id.clone()).collect()
    }

    #[test]
    fn rerank_head_only() {
        let cand = run("c", &[("q", &[("d1", 3.0), ("d2", 2.0), ("d3", 1.0)])]);
        let rr = RerankScores::new(table(&[("q", "d2", 9.0), ("q", "d1", 3.0)])).with_depth(2);
        let out = apply_rerank_scores(&cand, &rr).unwrap();
        assert_eq!(order(&out, "q"), ["d2", "d1", "d3"]);
        assert_eq!(
            scores(&out, "q").iter().map(|p| p.1).collect::<Vec<_>>(),
            [3.0, 2.0, 1.0]
        );
    }

    #[test]
    fn rerank_fixed_point() {
        let cand = run("c", &[("q", &[("a", 0.9), ("b", 0.4), ("c", 0.1)])]);
        let rr = RerankScores::new(table(&[("q", "a", 0.9), ("q", "b", 0.4), ("q", "c", 0.1)]));
        assert_eq!(
            order(&apply_rerank_scores(&cand, &rr).unwrap(), "q"),
            ["a", "b", "c"]
        );
    }

    #[test]
    fn unscored_head_docs_follow_scored_ones() {
        let cand = run(
            "c",
            &[("q", &[("a", 4.0), ("b", 3.0), ("c", 2.0), ("d", 1.0)])],
        );
        let rr = RerankScores::new(table(&[("q", "c", 1.0)])).with_depth(3);
        assert_eq!(
            order(&apply_rerank_scores(&cand, &rr).unwrap(), "q"),
            ["c", "a", "b", "d"]
        );
    }

    #[test]
    fn rerank_errors_name_query_and_doc() {
        let cand = run("c", &[("q", &[("a", 2.0), ("b", 1.0)])]);
        let stranger = RerankScores::new(table(&[("q", "zz", 1.0)]));
        match apply_rerank_scores(&cand, &stranger) {
            Err(Error::RerankDocument { query, doc, .. }) => {
                assert_eq!((query.as_str(), doc.as_str()), ("q", "zz"))
            }
            other => panic!("unexpected {other:?}"),
        }
        let below = RerankScores::new(table(&[("q", "b", 1.0)])).with_depth(1);
        assert!(apply_rerank_scores(&cand, &below).is_err());
        let unknown_query = RerankScores::new(table(&[("q9", "a", 1.0)]));
        assert!(apply_rerank_scores(&cand, &unknown_query).is_err());
    }
}
