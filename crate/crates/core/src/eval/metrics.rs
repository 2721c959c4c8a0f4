//! trec_eval-compatible per-query measures.
//!
//! Callers pass the ranked doc ids already in canonical order. Unjudged
//! documents have grade 0; AP and recall treat grade >= 1 as relevant.

use std::collections::BTreeMap;

fn relevant_count(qrels: &BTreeMap<String, u32>) -> usize {
    qrels.values().filter(|&&g| g >= 1).count()
}

fn grade(qrels: &BTreeMap<String, u32>, doc: &str) -> u32 {
    qrels.get(doc).copied().unwrap_or(0)
}

/// nDCG with linear gain and `log2(rank + 1)` discount, cut at `k`.
pub fn ndcg_at_k<S: AsRef<str>>(ranked: &[S], qrels: &BTreeMap<String, u32>, k: usize) -> f64 {
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, d)| f64::from(grade(qrels, d.as_ref())) / ((i + 2) as f64).log2())
        .sum();
    let mut ideal: Vec<u32> = qrels.values().copied().filter(|&g| g > 0).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| f64::from(g) / ((i + 2) as f64).log2())
        .sum();
    if idcg > 0.0 {
        dcg / idcg
    } else {
        0.0
    }
}

/// Average precision over the top `k`, divided by the total number of
/// relevant documents.
pub fn ap_at_k<S: AsRef<str>>(ranked: &[S], qrels: &BTreeMap<String, u32>, k: usize) -> f64 {
    let total = relevant_count(qrels);
    if total == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, d) in ranked.iter().take(k).enumerate() {
        if grade(qrels, d.as_ref()) >= 1 {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / total as f64
}

pub fn recall_at_k<S: AsRef<str>>(ranked: &[S], qrels: &BTreeMap<String, u32>, k: usize) -> f64 {
    let total = relevant_count(qrels);
    if total == 0 {
        return 0.0;
    }
    let hits = ranked
        .iter()
        .take(k)
        .filter(|d| grade(qrels, d.as_ref()) >= 1)
        .count();
    hits as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn judged(pairs: &[(&str, u32)]) -> BTreeMap<String, u32> {
        pairs.iter().map(|(d, g)| (d.to_string(), *g)).collect()
    }

    #[test]
    fn ndcg_cases() {
        let q = judged(&[("r", 1)]);
        assert_eq!(ndcg_at_k(&["r", "x"], &q, 20), 1.0);
        let v = ndcg_at_k(&["x", "r"], &q, 20);
        assert!((v - 1.0 / 3f64.log2()).abs() < 1e-15);
        assert!((v - 0.6309).abs() < 1e-4);
        assert_eq!(ndcg_at_k(&["x", "y", "r"], &q, 2), 0.0);
    }

    #[test]
    fn ndcg_ideal_is_one_with_grades() {
        let q = judged(&[("a", 3), ("b", 1), ("c", 2), ("n", 0)]);
        assert_eq!(ndcg_at_k(&["a", "c", "b"], &q, 20), 1.0);
        assert_eq!(ndcg_at_k(&["a", "c"], &q, 2), 1.0);
        assert!(ndcg_at_k(&["b", "c", "a"], &q, 20) < 1.0);
    }

    #[test]
    fn ap_cases() {
        assert_eq!(ap_at_k(&["r"], &judged(&[("r", 1)]), 1000), 1.0);
        let q = judged(&[("a", 1), ("b", 2)]);
        let v = ap_at_k(&["a", "x", "b"], &q, 1000);
        assert!((v - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert!((v - 0.8333).abs() < 1e-4);
        assert_eq!(ap_at_k(&["x", "a"], &judged(&[("a", 1)]), 1), 0.0);
    }

    #[test]
    fn recall_cases() {
        let q = judged(&[("a", 1), ("b", 1), ("n", 0)]);
        assert_eq!(recall_at_k(&["b", "a"], &q, 1000), 1.0);
        assert_eq!(recall_at_k(&["a", "n"], &q, 1000), 0.5);
        assert_eq!(recall_at_k::<&str>(&[], &q, 1000), 0.0);
    }
}
