//! Relevance judgments: `qid 0 docid grade`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Graded judgments per query.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query_id: &str, doc_id: &str, grade: u32) -> Result<()> {
        let per_query = self.judgments.entry(query_id.to_owned()).or_default();
        if per_query.insert(doc_id.to_owned(), grade).is_some() {
            return Err(Error::Duplicate(format!("judgment ({query_id}, {doc_id})")));
        }
        Ok(())
    }

    pub fn get(&self, query_id: &str) -> Option<&BTreeMap<String, u32>> {
        self.judgments.get(query_id)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BTreeMap<String, u32>)> {
        self.judgments.iter().map(|(q, j)| (q.as_str(), j))
    }

    pub fn num_queries(&self) -> usize {
        self.judgments.len()
    }

    pub fn num_judgments(&self) -> usize {
        self.judgments.values().map(BTreeMap::len).sum()
    }

    /// Number of docs judged with grade >= 1 for `query_id`.
    pub fn num_relevant(&self, query_id: &str) -> usize {
        self.get(query_id)
            .map_or(0, |j| j.values().filter(|&&g| g >= 1).count())
    }

    pub(crate) fn retain_queries(
        &mut self,
        mut keep: impl FnMut(&str, &BTreeMap<String, u32>) -> bool,
    ) {
        self.judgments.retain(|q, j| keep(q, j));
    }

    pub(crate) fn judgments_mut(
        &mut self,
    ) -> impl Iterator<Item = (&str, &mut BTreeMap<String, u32>)> {
        self.judgments.iter_mut().map(|(q, j)| (q.as_str(), j))
    }
}

pub fn parse_qrels<R: BufRead>(reader: R) -> Result<Qrels> {
    let mut qrels = Qrels::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        let [qid, _iter, docid, grade] = cols[..] else {
            return Err(Error::parse(
                lineno,
                format!("expected 4 columns, found {}", cols.len()),
            ));
        };
        let grade: i64 = grade
            .parse()
            .map_err(|_| Error::parse(lineno, format!("non-integer grade `{grade}`")))?;
        let grade = u32::try_from(grade)
            .map_err(|_| Error::Domain(format!("line {lineno}: grade {grade} out of range")))?;
        qrels.insert(qid, docid, grade).map_err(|e| match e {
            Error::Duplicate(m) => Error::Duplicate(format!("{m} at line {lineno}")),
            e => e,
        })?;
    }
    Ok(qrels)
}

pub fn write_qrels<W: Write>(qrels: &Qrels, mut out: W) -> std::io::Result<()> {
    for (qid, judged) in &qrels.judgments {
        for (doc, grade) in judged {
            writeln!(out, "{qid} 0 {doc} {grade}")?;
        }
    }
    out.flush()
}
