//! TREC run files: `qid Q0 docid rank score tag`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// A document and its score inside one ranked list.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
}

impl ScoredDoc {
    pub fn new(doc_id: impl Into<String>, score: f64) -> Self {
        Self {
            doc_id: doc_id.into(),
            score,
        }
    }
}

/// One line of a run, as seen by readers of the exchange format.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunRecord<'a> {
    pub query_id: &'a str,
    pub doc_id: &'a str,
    pub rank: usize,
    pub score: f64,
    pub tag: &'a str,
}

/// Ordering used for every stored list: score descending, then doc id
/// descending. This is the order trec_eval imposes before scoring.
pub fn canonical_order(a: &ScoredDoc, b: &ScoredDoc) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| b.doc_id.cmp(&a.doc_id))
}

/// Per-query ranked lists under a single run tag.
///
/// Lists are always held in canonical order, so the rank of a record is its
/// position plus one.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Run {
    tag: String,
    lists: BTreeMap<String, Vec<ScoredDoc>>,
}

impl Run {
    pub fn new(tag: impl Into<String>) -> Self {
        Self {
            tag: tag.into(),
            lists: BTreeMap::new(),
        }
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn set_tag(&mut self, tag: impl Into<String>) {
        self.tag = tag.into();
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.set_tag(tag);
        self
    }

    /// Insert (or replace) the list for `query_id`. Doc ids must be unique
    /// and scores finite; the list is re-sorted into canonical order.
    pub fn insert(&mut self, query_id: impl Into<String>, mut docs: Vec<ScoredDoc>) -> Result<()> {
        let query_id = query_id.into();
        let mut seen = HashSet::with_capacity(docs.len());
        for d in &docs {
            if !d.score.is_finite() {
                return Err(Error::Domain(format!(
                    "non-finite score for query `{query_id}` doc `{}`",
                    d.doc_id
                )));
            }
            if !seen.insert(d.doc_id.as_str()) {
                return Err(Error::Duplicate(format!("({query_id}, {})", d.doc_id)));
            }
        }
        docs.sort_by(canonical_order);
        self.lists.insert(query_id, docs);
        Ok(())
    }

    pub fn get(&self, query_id: &str) -> Option<&[ScoredDoc]> {
        self.lists.get(query_id).map(Vec::as_slice)
    }

    /// Query ids in ascending order.
    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.lists.keys().map(String::as_str)
    }

    pub fn lists(&self) -> impl Iterator<Item = (&str, &[ScoredDoc])> {
        self.lists.iter().map(|(q, l)| (q.as_str(), l.as_slice()))
    }

    pub fn num_queries(&self) -> usize {
        self.lists.len()
    }

    pub fn num_records(&self) -> usize {
        self.lists.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = RunRecord<'_>> {
        self.lists.iter().flat_map(move |(q, list)| {
            list.iter().enumerate().map(move |(i, d)| RunRecord {
                query_id: q,
                doc_id: &d.doc_id,
                rank: i + 1,
                score: d.score,
                tag: &self.tag,
            })
        })
    }
}

/// Format a score so that parsing the text yields the same `f64` bits.
pub fn format_score(score: f64) -> String {
    let abs = score.abs();
    if abs != 0.0 && !(1e-5..1e16).contains(&abs) {
        format!("{score:e}")
    } else {
        format!("{score}")
    }
}

/// Parse a run. Lists are re-sorted by (score desc, doc id desc) and ranks
/// rewritten, regardless of the rank column. The run tag is taken from the
/// first record.
pub fn parse_trec_run<R: BufRead>(reader: R) -> Result<Run> {
    let mut tag: Option<String> = None;
    let mut lists: BTreeMap<String, Vec<ScoredDoc>> = BTreeMap::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();

    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 6 {
            return Err(Error::parse(
                lineno,
                format!("expected 6 columns, found {}", cols.len()),
            ));
        }
        let [qid, _q0, docid, rank, score, run_tag] = cols[..] else {
            unreachable!()
        };
        rank.parse::<u64>()
            .map_err(|_| Error::parse(lineno, format!("non-numeric rank `{rank}`")))?;
        let score: f64 = score
            .parse()
            .map_err(|_| Error::parse(lineno, format!("non-numeric score `{score}`")))?;
        if !score.is_finite() {
            return Err(Error::parse(lineno, "score is not finite"));
        }
        if !seen.insert((qid.to_owned(), docid.to_owned())) {
            return Err(Error::Duplicate(format!(
                "({qid}, {docid}) at line {lineno}"
            )));
        }
        tag.get_or_insert_with(|| run_tag.to_owned());
        lists
            .entry(qid.to_owned())
            .or_default()
            .push(ScoredDoc::new(docid, score));
    }

    for list in lists.values_mut() {
        list.sort_by(canonical_order);
    }
    Ok(Run {
        tag: tag.unwrap_or_default(),
        lists,
    })
}

/// Emit `run` with the given tag, queries ascending, records in rank order.
pub fn write_trec_run<W: Write>(run: &Run, tag: &str, mut out: W) -> std::io::Result<()> {
    for (qid, list) in &run.lists {
        for (i, d) in list.iter().enumerate() {
            writeln!(
                out,
                "{qid} Q0 {} {} {} {tag}",
                d.doc_id,
                i + 1,
                format_score(d.score)
            )?;
        }
    }
    out.flush()
}

pub fn run_to_string(run: &Run) -> String {
    let mut buf = Vec::new();
    write_trec_run(run, run.tag(), &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("run ids are valid UTF-8")
}
