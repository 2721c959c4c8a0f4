//! Token-embedding containers.
//!
//! Binary layout (little endian): magic `NCEM`, `u32` dim, then per record a
//! `u32` byte length and UTF-8 id, a `u32` token count and `count * dim`
//! `f32` values in row-major order, until end of stream.
//!
//! The text form mirrors the sparse-vector files: a `dim<TAB>{dim}` header line
//! followed by `id<TAB>[[...], ...]` records.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"NCEM";

/// Token vectors of one document or query, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenMatrix {
    dim: usize,
    data: Vec<f32>,
}

impl TokenMatrix {
    /// Build from row-major `data`; requires at least one full row and
    /// finite entries.
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("embedding dimension must be positive".into()));
        }
        if data.is_empty() {
            return Err(Error::Domain("token matrix has zero tokens".into()));
        }
        if data.len() % dim != 0 {
            return Err(Error::Shape(format!(
                "{} values do not form rows of length {dim}",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("non-finite embedding entry".into()));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(dim * rows.len());
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::Shape(format!(
                    "row {i} has {} entries, expected {dim}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_tokens(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }
}

/// Token matrices sharing one dimension, keyed by id.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    dim: usize,
    matrices: BTreeMap<String, TokenMatrix>,
}

impl EmbeddingSet {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("embedding dimension must be positive".into()));
        }
        Ok(Self {
            dim,
            matrices: BTreeMap::new(),
        })
    }

    pub fn insert(&mut self, id: impl Into<String>, m: TokenMatrix) -> Result<()> {
        let id = id.into();
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return Err(Error::Domain(format!("invalid id `{id}`")));
        }
        if m.dim() != self.dim {
            return Err(Error::Shape(format!(
                "`{id}` has dim {}, set has dim {}",
                m.dim(),
                self.dim
            )));
        }
        if self.matrices.contains_key(&id) {
            return Err(Error::Duplicate(format!("embedding id `{id}`")));
        }
        self.matrices.insert(id, m);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, id: &str) -> Option<&TokenMatrix> {
        self.matrices.get(id)
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&str, &TokenMatrix)> {
        self.matrices.iter().map(|(id, m)| (id.as_str(), m))
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn retain(&mut self, mut keep: impl FnMut(&str) -> bool) {
        self.matrices.retain(|id, _| keep(id));
    }
}

/// Load either the binary container or the text form, chosen by the
/// leading magic bytes.
pub fn load_embedding_set<R: BufRead>(mut reader: R) -> Result<EmbeddingSet> {
    let head = reader.fill_buf()?;
    if head.starts_with(MAGIC) {
        read_binary(reader)
    } else {
        read_text(reader)
    }
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn truncated(what: &str, record: usize) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Shape(format!("record {record}: truncated {what}"))
        } else {
            Error::Io(e)
        }
    }
}

fn read_binary<R: BufRead>(mut r: R) -> Result<EmbeddingSet> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    let dim = read_u32(&mut r).map_err(truncated("header", 0))? as usize;
    let mut set = EmbeddingSet::new(dim)?;
    let mut record = 0usize;
    while !r.fill_buf()?.is_empty() {
        record += 1;
        let id_len = read_u32(&mut r).map_err(truncated("id length", record))? as usize;
        let mut id = vec![0u8; id_len];
        r.read_exact(&mut id).map_err(truncated("id", record))?;
        let id = String::from_utf8(id)
            .map_err(|_| Error::Domain(format!("record {record}: id is not UTF-8")))?;
        let tokens = read_u32(&mut r).map_err(truncated("token count", record))? as usize;
        if tokens == 0 {
            return Err(Error::Domain(format!(
                "record {record} (`{id}`): zero tokens"
            )));
        }
        let mut raw = vec![0u8; tokens * dim * 4];
        r.read_exact(&mut raw)
            .map_err(truncated("matrix", record))?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        set.insert(id, TokenMatrix::new(dim, data)?)?;
    }
    Ok(set)
}

pub fn write_embedding_set<W: Write>(set: &EmbeddingSet, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&(set.dim as u32).to_le_bytes())?;
    for (id, m) in set.iter() {
        out.write_all(&(id.len() as u32).to_le_bytes())?;
        out.write_all(id.as_bytes())?;
        out.write_all(&(m.num_tokens() as u32).to_le_bytes())?;
        for x in m.as_slice() {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn read_text<R: BufRead>(reader: R) -> Result<EmbeddingSet> {
    let mut set: Option<EmbeddingSet> = None;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (key, body) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(lineno, "expected a tab-separated record"))?;
        let Some(set) = set.as_mut() else {
            if key != "dim" {
                return Err(Error::parse(lineno, "missing `dim<TAB>{dim}` header"));
            }
            let dim = body
                .trim()
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad dim `{body}`")))?;
            set = Some(EmbeddingSet::new(dim)?);
            continue;
        };
        let rows: Vec<Vec<f32>> =
            serde_json::from_str(body).map_err(|e| Error::parse(lineno, e.to_string()))?;
        if rows.is_empty() {
            return Err(Error::Domain(format!(
                "line {lineno}: `{key}` has zero tokens"
            )));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != set.dim()) {
            return Err(Error::Shape(format!(
                "line {lineno}: row of length {} under dim {}",
                bad.len(),
                set.dim()
            )));
        }
        set.insert(key, TokenMatrix::from_rows(&rows)?)?;
    }
    set.ok_or_else(|| Error::parse(1, "empty embedding file"))
}

pub fn write_embedding_text<W: Write>(set: &EmbeddingSet, mut out: W) -> Result<()> {
    writeln!(out, "dim\t{}", set.dim)?;
    for (id, m) in set.iter() {
        let rows: Vec<&[f32]> = m.rows().collect();
        writeln!(out, "{id}\t{}", serde_json::to_string(&rows)?)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bin(set: &EmbeddingSet) -> Vec<u8> {
        let mut buf = Vec::new();
        write_embedding_set(set, &mut buf).unwrap();
        buf
    }

    #[test]
    fn one_by_two() {
        let set = load_embedding_set("dim\t2\nd1\t[[1,0]]\n".as_bytes()).unwrap();
        let m = set.get("d1").unwrap();
        assert_eq!((m.num_tokens(), m.dim()), (1, 2));
    }

    #[test]
    fn row_too_long() {
        let r = load_embedding_set("dim\t2\nd1\t[[1,0,3]]\n".as_bytes());
        assert!(matches!(r, Err(Error::Shape(_))));
    }

    #[test]
    fn zero_tokens() {
        let r = load_embedding_set("dim\t2\nd1\t[]\n".as_bytes());
        assert!(matches!(r, Err(Error::Domain(_))));

        let mut raw = MAGIC.to_vec();
        raw.extend(2u32.to_le_bytes());
        raw.extend(2u32.to_le_bytes());
        raw.extend(b"d1");
        raw.extend(0u32.to_le_bytes());
        assert!(matches!(
            load_embedding_set(&raw[..]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn binary_layout() {
        let mut set = EmbeddingSet::new(2).unwrap();
        set.insert("d1", TokenMatrix::from_rows(&[[1.0, 0.5]]).unwrap())
            .unwrap();
        let raw = bin(&set);
        let mut expected = b"NCEM".to_vec();
        expected.extend(2u32.to_le_bytes());
        expected.extend(2u32.to_le_bytes());
        expected.extend(b"d1");
        expected.extend(1u32.to_le_bytes());
        expected.extend(1.0f32.to_le_bytes());
        expected.extend(0.5f32.to_le_bytes());
        assert_eq!(raw, expected);
        assert_eq!(load_embedding_set(&raw[..]).unwrap(), set);
    }

    #[test]
    fn truncated_binary() {
        let mut set = EmbeddingSet::new(3).unwrap();
        set.insert("d", TokenMatrix::from_rows(&[[1.0, 2.0, 3.0]]).unwrap())
            .unwrap();
        let raw = bin(&set);
        let r = load_embedding_set(&raw[..raw.len() - 2]);
        assert!(matches!(r, Err(Error::Shape(_))));
    }

    #[test]
    fn text_round_trip() {
        let mut set = EmbeddingSet::new(2).unwrap();
        set.insert(
            "a",
            TokenMatrix::from_rows(&[[0.1, -2.0], [3.25, 1e-8]]).unwrap(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_embedding_text(&set, &mut buf).unwrap();
        assert_eq!(load_embedding_set(&buf[..]).unwrap(), set);
    }

    #[test]
    fn dim_mismatch_on_insert() {
        let mut set = EmbeddingSet::new(2).unwrap();
        let m = TokenMatrix::from_rows(&[[1.0, 2.0, 3.0]]).unwrap();
        assert!(matches!(set.insert("x", m), Err(Error::Shape(_))));
    }
}
