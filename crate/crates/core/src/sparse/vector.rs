use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Bag of weighted vocabulary terms. Weights are finite and strictly
/// positive; zero weights are never stored.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseVector {
    entries: BTreeMap<String, f64>,
}

impl SparseVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build from (term, weight) pairs. Rejects negative or non-finite
    /// weights and repeated terms; zero weights are dropped.
    pub fn from_pairs<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut v = Self::new();
        for (term, weight) in pairs {
            let term = term.into();
            check_weight(&term, weight)?;
            if v.entries.contains_key(&term) {
                return Err(Error::Duplicate(format!("term `{term}`")));
            }
            if weight > 0.0 {
                v.entries.insert(term, weight);
            }
        }
        Ok(v)
    }

    /// Set the weight of `term`, replacing any previous value. A zero
    /// weight removes the term.
    pub fn set(&mut self, term: impl Into<String>, weight: f64) -> Result<()> {
        let term = term.into();
        check_weight(&term, weight)?;
        if weight > 0.0 {
            self.entries.insert(term, weight);
        } else {
            self.entries.remove(&term);
        }
        Ok(())
    }

    pub fn get(&self, term: &str) -> f64 {
        self.entries.get(term).copied().unwrap_or(0.0)
    }

    /// Entries in ascending term order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.entries.iter().map(|(t, &w)| (t.as_str(), w))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Dot product, accumulated in ascending term order of `self`.
    pub fn dot(&self, other: &SparseVector) -> f64 {
        let mut acc = 0.0;
        for (t, w) in &self.entries {
            if let Some(o) = other.entries.get(t) {
                acc += w * o;
            }
        }
        acc
    }

    /// Multiply every weight by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::from_pairs(self.iter().map(|(t, w)| (t, w * factor)))
    }
}

fn check_weight(term: &str, weight: f64) -> Result<()> {
    if !weight.is_finite() || weight < 0.0 {
        return Err(Error::Domain(format!(
            "weight {weight} for term `{term}` must be finite and non-negative"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeros_dropped_negatives_rejected() {
        let v = SparseVector::from_pairs([("a", 0.0), ("b", 1.0)]).unwrap();
        assert_eq!(v.len(), 1);
        assert!(SparseVector::from_pairs([("a", -0.1)]).is_err());
        assert!(SparseVector::from_pairs([("a", f64::NAN)]).is_err());
        assert!(SparseVector::from_pairs([("a", 1.0), ("a", 2.0)]).is_err());
    }

    #[test]
    fn dot_product() {
        let a = SparseVector::from_pairs([("x", 2.0), ("y", 1.0)]).unwrap();
        let b = SparseVector::from_pairs([("x", 3.0), ("z", 5.0)]).unwrap();
        assert_eq!(a.dot(&b), 6.0);
    }
}
