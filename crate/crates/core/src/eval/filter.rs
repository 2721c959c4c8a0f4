use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::io::Qrels;

/// Counts of what [`filter_devset`] kept and removed. Dropped judgments
/// include those lost with a dropped query.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct FilterReport {
    pub kept_judgments: usize,
    pub dropped_judgments: usize,
    pub kept_queries: usize,
    pub dropped_queries: usize,
}

/// Restrict `qrels` to documents in `collection_ids` (and, when given, to
/// `queries`), then drop queries left without any relevant judgment.
pub fn filter_devset(
    qrels: &Qrels,
    collection_ids: &BTreeSet<String>,
    queries: Option<&BTreeSet<String>>,
) -> Result<(Qrels, FilterReport)> {
    if collection_ids.is_empty() {
        return Err(Error::Domain("collection id list is empty".into()));
    }
    let mut out = qrels.clone();
    out.retain_queries(|q, _| queries.is_none_or(|keep| keep.contains(q)));
    for (_, judged) in out.judgments_mut() {
        judged.retain(|doc, _| collection_ids.contains(doc));
    }
    out.retain_queries(|_, judged| judged.values().any(|&g| g >= 1));

    let kept_judgments = out.num_judgments();
    let report = FilterReport {
        kept_judgments,
        dropped_judgments: qrels.num_judgments() - kept_judgments,
        kept_queries: out.num_queries(),
        dropped_queries: qrels.num_queries() - out.num_queries(),
    };
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::parse_qrels;

    fn ids(v: &[&str]) -> BTreeSet<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn identity_when_everything_present() {
        let q = parse_qrels("q1 0 d1 1\nq1 0 d2 0\n".as_bytes()).unwrap();
        let (out, rep) = filter_devset(&q, &ids(&["d1", "d2", "d3"]), None).unwrap();
        assert_eq!(out, q);
        assert_eq!((rep.dropped_judgments, rep.dropped_queries), (0, 0));
    }

    #[test]
    fn drops_missing_docs() {
        let q = parse_qrels("q1 0 d1 1\nq1 0 d2 1\n".as_bytes()).unwrap();
        let (out, rep) = filter_devset(&q, &ids(&["d1"]), None).unwrap();
        assert_eq!(out, parse_qrels("q1 0 d1 1".as_bytes()).unwrap());
        assert_eq!(rep.dropped_judgments, 1);
        assert_eq!(rep.kept_judgments, 1);
    }

    #[test]
    fn emptied_query_dropped() {
        let q = parse_qrels("q1 0 d2 1\n".as_bytes()).unwrap();
        let (out, rep) = filter_devset(&q, &ids(&["d1"]), None).unwrap();
        assert_eq!(out.num_queries(), 0);
        assert_eq!(rep.dropped_queries, 1);
        assert_eq!(rep.dropped_judgments, 1);
    }

    #[test]
    fn query_restriction_and_nonrelevant_leftovers() {
        let q = parse_qrels("q1 0 d1 1\nq2 0 d1 1\nq3 0 d1 0\nq3 0 d9 2\n".as_bytes()).unwrap();
        let (out, rep) = filter_devset(&q, &ids(&["d1"]), Some(&ids(&["q1", "q3"]))).unwrap();
        // q2 outside the query set, q3 keeps only a grade-0 judgment
        assert_eq!(out.query_ids().collect::<Vec<_>>(), ["q1"]);
        assert_eq!(
            rep,
            FilterReport {
                kept_judgments: 1,
                dropped_judgments: 3,
                kept_queries: 1,
                dropped_queries: 2
            }
        );
    }

    #[test]
    fn empty_collection_is_an_error() {
        let q = parse_qrels("q1 0 d1 1\n".as_bytes()).unwrap();
        assert!(matches!(
            filter_devset(&q, &BTreeSet::new(), None),
            Err(Error::Domain(_))
        ));
    }
}
