//! Plain id lists (one id per line) and reranker score files (`qid docid score`).

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub fn load_id_list<R: BufRead>(reader: R) -> Result<BTreeSet<String>> {
    let mut ids = BTreeSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let mut cols = line.split_whitespace();
        let Some(id) = cols.next() else { continue };
        if cols.next().is_some() {
            return Err(Error::parse(i + 1, "expected one id per line"));
        }
        ids.insert(id.to_owned());
    }
    Ok(ids)
}

pub fn write_id_list<'a, W: Write>(
    ids: impl IntoIterator<Item = &'a str>,
    mut out: W,
) -> Result<()> {
    for id in ids {
        writeln!(out, "{id}")?;
    }
    out.flush()?;
    Ok(())
}

/// Reranker scores per query and document.
pub type ScoreTable = BTreeMap<String, BTreeMap<String, f64>>;

pub fn load_rerank_scores<R: BufRead>(reader: R) -> Result<ScoreTable> {
    let mut table = ScoreTable::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        let [qid, docid, score] = cols[..] else {
            return Err(Error::parse(
                lineno,
                format!("expected 3 columns, found {}", cols.len()),
            ));
        };
        let score: f64 = score
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| Error::parse(lineno, format!("bad score `{score}`")))?;
        if table
            .entry(qid.to_owned())
            .or_default()
            .insert(docid.to_owned(), score)
            .is_some()
        {
            return Err(Error::Duplicate(format!(
                "({qid}, {docid}) at line {lineno}"
            )));
        }
    }
    Ok(table)
}

pub fn write_rerank_scores<W: Write>(table: &ScoreTable, mut out: W) -> Result<()> {
    for (qid, docs) in table {
        for (doc, score) in docs {
            writeln!(out, "{qid} {doc} {}", super::run::format_score(*score))?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids() {
        let ids = load_id_list("d2\n\nd1\n".as_bytes()).unwrap();
        assert_eq!(ids.into_iter().collect::<Vec<_>>(), ["d1", "d2"]);
        assert!(load_id_list("a b\n".as_bytes()).is_err());
    }

    #[test]
    fn rerank_file() {
        let t = load_rerank_scores("q1 d2 9\nq1 d1 -3.5\n".as_bytes()).unwrap();
        assert_eq!(t["q1"]["d1"], -3.5);
        assert!(load_rerank_scores("q1 d2 9\nq1 d2 1\n".as_bytes()).is_err());
        assert!(load_rerank_scores("q1 d2\n".as_bytes()).is_err());
        assert!(load_rerank_scores("q1 d2 nan\n".as_bytes()).is_err());
    }
}
