//! Evaluation against graded judgments, report formatting, and dev-set
//! filtering.

mod filter;
mod metrics;

pub use filter::{filter_devset, FilterReport};
pub use metrics::{ap_at_k, ndcg_at_k, recall_at_k};

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::io::{Qrels, Run};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MetricKind {
    Ndcg,
    Map,
    Recall,
}

/// A measure and its rank cutoff, written `ndcg@20`, `map@1000`,
/// `recall@1000`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MetricSpec {
    pub kind: MetricKind,
    pub cutoff: usize,
}

impl MetricSpec {
    pub const fn new(kind: MetricKind, cutoff: usize) -> Self {
        Self { kind, cutoff }
    }

    /// nDCG@20, mAP@1k and Recall@1k.
    pub fn defaults() -> Vec<MetricSpec> {
        vec![
            Self::new(MetricKind::Ndcg, 20),
            Self::new(MetricKind::Map, 1000),
            Self::new(MetricKind::Recall, 1000),
        ]
    }

    pub fn compute<S: AsRef<str>>(&self, ranked: &[S], qrels: &BTreeMap<String, u32>) -> f64 {
        match self.kind {
            MetricKind::Ndcg => ndcg_at_k(ranked, qrels, self.cutoff),
            MetricKind::Map => ap_at_k(ranked, qrels, self.cutoff),
            MetricKind::Recall => recall_at_k(ranked, qrels, self.cutoff),
        }
    }

    /// Table cell: nDCG and mAP scaled by 100 with one decimal, recall as a
    /// percentage with one decimal.
    pub fn format_value(&self, value: f64) -> String {
        match self.kind {
            MetricKind::Ndcg | MetricKind::Map => format!("{:.1}", value * 100.0),
            MetricKind::Recall => format!("{:.1}%", value * 100.0),
        }
    }
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.kind {
            MetricKind::Ndcg => "ndcg",
            MetricKind::Map => "map",
            MetricKind::Recall => "recall",
        };
        write!(f, "{name}@{}", self.cutoff)
    }
}

impl FromStr for MetricSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Domain(format!(
                "bad metric `{s}` (expected e.g. ndcg@20, map@1000, recall@1000)"
            ))
        };
        let (name, cutoff) = s.trim().split_once('@').ok_or_else(bad)?;
        let kind = match name.to_ascii_lowercase().as_str() {
            "ndcg" => MetricKind::Ndcg,
            "map" | "ap" => MetricKind::Map,
            "recall" => MetricKind::Recall,
            _ => return Err(bad()),
        };
        let cutoff = match cutoff.to_ascii_lowercase().strip_suffix('k') {
            Some(thousands) => thousands.parse::<usize>().ok().map(|n| n * 1000),
            None => cutoff.parse().ok(),
        }
        .filter(|&c| c >= 1)
        .ok_or_else(bad)?;
        Ok(Self { kind, cutoff })
    }
}

/// Parse a comma-separated metric list.
pub fn parse_metric_list(s: &str) -> Result<Vec<MetricSpec>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect()
}

/// Per-query and mean values, columns in the order of `metrics`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub metrics: Vec<MetricSpec>,
    pub per_query: BTreeMap<String, Vec<f64>>,
    pub means: Vec<f64>,
    pub evaluated_queries: usize,
    /// Run queries that have no judgments at all.
    pub unjudged_queries: usize,
    /// Run queries whose judgments contain no relevant document.
    pub no_relevant_queries: usize,
    /// Judged queries with relevant documents that the run does not cover.
    pub missing_queries: usize,
}

impl MetricReport {
    pub fn mean(&self, metric: &MetricSpec) -> Option<f64> {
        let i = self.metrics.iter().position(|m| m == metric)?;
        Some(self.means[i])
    }

    pub fn value(&self, query_id: &str, metric: &MetricSpec) -> Option<f64> {
        let i = self.metrics.iter().position(|m| m == metric)?;
        self.per_query.get(query_id).map(|v| v[i])
    }
}

/// Score `run` against `qrels`.
///
/// Only queries present in the run with at least one relevant judgment are
/// evaluated; means are unweighted averages over those queries.
pub fn evaluate(run: &Run, qrels: &Qrels, metrics: &[MetricSpec]) -> MetricReport {
    let mut per_query = BTreeMap::new();
    let (mut unjudged, mut no_relevant) = (0, 0);
    for (qid, list) in run.lists() {
        let Some(judged) = qrels.get(qid) else {
            unjudged += 1;
            continue;
        };
        if !judged.values().any(|&g| g >= 1) {
            no_relevant += 1;
            continue;
        }
        // Run lists are stored in canonical trec_eval order.
        let ranked: Vec<&str> = list.iter().map(|d| d.doc_id.as_str()).collect();
        let values = metrics.iter().map(|m| m.compute(&ranked, judged)).collect();
        per_query.insert(qid.to_owned(), values);
    }
    let missing = qrels
        .iter()
        .filter(|(q, j)| run.get(q).is_none() && j.values().any(|&g| g >= 1))
        .count();

    let n = per_query.len();
    let means = (0..metrics.len())
        .map(|i| {
            if n == 0 {
                0.0
            } else {
                per_query.values().map(|v: &Vec<f64>| v[i]).sum::<f64>() / n as f64
            }
        })
        .collect();
    MetricReport {
        metrics: metrics.to_vec(),
        per_query,
        means,
        evaluated_queries: n,
        unjudged_queries: unjudged,
        no_relevant_queries: no_relevant,
        missing_queries: missing,
    }
}

/// Aligned text table. The last row, `all`, holds the means; per-query rows
/// precede it when `per_query` is set.
pub fn format_report(report: &MetricReport, per_query: bool) -> String {
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut header = vec!["query".to_string()];
    header.extend(report.metrics.iter().map(ToString::to_string));
    rows.push(header);
    let cells = |values: &[f64]| -> Vec<String> {
        report
            .metrics
            .iter()
            .zip(values)
            .map(|(m, &v)| m.format_value(v))
            .collect()
    };
    if per_query {
        for (qid, values) in &report.per_query {
            let mut row = vec![qid.clone()];
            row.extend(cells(values));
            rows.push(row);
        }
    }
    let mut all = vec!["all".to_string()];
    all.extend(cells(&report.means));
    rows.push(all);

    let ncols = rows[0].len();
    let widths: Vec<usize> = (0..ncols)
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                if c == 0 {
                    format!("{cell:<w$}", w = widths[c])
                } else {
                    format!("{cell:>w$}", w = widths[c])
                }
            })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    let _ = writeln!(
        out,
        "# evaluated {} queries ({} unjudged, {} without relevant docs, {} judged but not retrieved)",
        report.evaluated_queries, report.unjudged_queries, report.no_relevant_queries, report.missing_queries
    );
    out
}

/// Machine-readable `qid<TAB>metric<TAB>value` lines; means use qid `all`.
pub fn format_report_tsv(report: &MetricReport) -> String {
    let mut out = String::new();
    for (qid, values) in &report.per_query {
        for (m, v) in report.metrics.iter().zip(values) {
            let _ = writeln!(out, "{qid}\t{m}\t{v}");
        }
    }
    for (m, v) in report.metrics.iter().zip(&report.means) {
        let _ = writeln!(out, "all\t{m}\t{v}");
    }
    out
}
