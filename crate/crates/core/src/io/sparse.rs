//! Sparse vector files: one record per line, `id<TAB>{"term": weight, ...}`.
//!
//! Token-count files use the same layout with integer values.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::marker::PhantomData;

use serde::de::{self, Deserialize, Deserializer, MapAccess, Visitor};

use crate::error::{Error, Result};
use crate::sparse::SparseVector;

/// Sparse vectors keyed by document or query id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseVectorSet {
    vectors: BTreeMap<String, SparseVector>,
}

impl SparseVectorSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: SparseVector) -> Result<()> {
        let id = id.into();
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return Err(Error::Domain(format!("invalid id `{id}`")));
        }
        if self.vectors.contains_key(&id) {
            return Err(Error::Duplicate(format!("vector id `{id}`")));
        }
        self.vectors.insert(id, vector);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&SparseVector> {
        self.vectors.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.vectors.contains_key(id)
    }

    /// Records in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &SparseVector)> {
        self.vectors.iter().map(|(id, v)| (id.as_str(), v))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Every term that occurs in at least one vector.
    pub fn vocabulary(&self) -> BTreeSet<&str> {
        self.vectors
            .values()
            .flat_map(|v| v.iter().map(|(t, _)| t))
            .collect()
    }

    /// Keep only the records whose id satisfies `keep`.
    pub fn retain(&mut self, mut keep: impl FnMut(&str) -> bool) {
        self.vectors.retain(|id, _| keep(id));
    }
}

impl FromIterator<(String, SparseVector)> for SparseVectorSet {
    /// Later records with a repeated id replace earlier ones.
    fn from_iter<T: IntoIterator<Item = (String, SparseVector)>>(iter: T) -> Self {
        Self {
            vectors: iter.into_iter().collect(),
        }
    }
}

/// Raw term counts per document (or query), input to BM25 weighting.
pub type TokenCounts = BTreeMap<String, BTreeMap<String, u32>>;

/// JSON object read as an ordered list of pairs so repeated keys are
/// visible to the caller.
struct Pairs<V>(Vec<(String, V)>);

impl<'de, V: Deserialize<'de>> Deserialize<'de> for Pairs<V> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct PairsVisitor<V>(PhantomData<V>);

        impl<'de, V: Deserialize<'de>> Visitor<'de> for PairsVisitor<V> {
            type Value = Pairs<V>;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a JSON object of term to value")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut out = Vec::with_capacity(map.size_hint().unwrap_or(0));
                while let Some((k, v)) = map.next_entry::<String, V>()? {
                    out.push((k, v));
                }
                Ok(Pairs(out))
            }
        }

        deserializer.deserialize_map(PairsVisitor(PhantomData))
    }
}

fn parse_records<R, V, F>(reader: R, mut on_record: F) -> Result<()>
where
    R: BufRead,
    V: de::DeserializeOwned,
    F: FnMut(usize, String, Vec<(String, V)>) -> Result<()>,
{
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (id, body) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(lineno, "expected `id<TAB>{...}`"))?;
        let Pairs(pairs) = serde_json::from_str::<Pairs<V>>(body)
            .map_err(|e| Error::parse(lineno, e.to_string()))?;
        on_record(lineno, id.to_owned(), pairs)?;
    }
    Ok(())
}

fn at_line(lineno: usize) -> impl FnOnce(Error) -> Error {
    move |e| match e {
        Error::Domain(m) => Error::Domain(format!("line {lineno}: {m}")),
        Error::Duplicate(m) => Error::Duplicate(format!("{m} at line {lineno}")),
        e => e,
    }
}

pub fn load_sparse_vectors<R: BufRead>(reader: R) -> Result<SparseVectorSet> {
    let mut set = SparseVectorSet::new();
    parse_records::<_, f64, _>(reader, |lineno, id, pairs| {
        let v = SparseVector::from_pairs(pairs).map_err(at_line(lineno))?;
        set.insert(id, v).map_err(at_line(lineno))
    })?;
    Ok(set)
}

pub fn write_sparse_vectors<W: Write>(set: &SparseVectorSet, mut out: W) -> Result<()> {
    for (id, v) in set.iter() {
        let body: serde_json::Map<String, serde_json::Value> = v
            .iter()
            .map(|(t, w)| (t.to_owned(), serde_json::Value::from(w)))
            .collect();
        writeln!(out, "{id}\t{}", serde_json::to_string(&body)?)?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_token_counts<R: BufRead>(reader: R) -> Result<TokenCounts> {
    let mut counts = TokenCounts::new();
    parse_records::<_, u32, _>(reader, |lineno, id, pairs| {
        let mut terms = BTreeMap::new();
        for (t, tf) in pairs {
            if terms.insert(t.clone(), tf).is_some() {
                return Err(Error::Duplicate(format!("term `{t}` at line {lineno}")));
            }
        }
        if counts.insert(id.clone(), terms).is_some() {
            return Err(Error::Duplicate(format!("id `{id}` at line {lineno}")));
        }
        Ok(())
    })?;
    Ok(counts)
}

pub fn write_token_counts<W: Write>(counts: &TokenCounts, mut out: W) -> Result<()> {
    for (id, terms) in counts {
        writeln!(out, "{id}\t{}", serde_json::to_string(terms)?)?;
    }
    out.flush()?;
    Ok(())
}
