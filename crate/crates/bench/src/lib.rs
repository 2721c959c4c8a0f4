//! Seeded workload generators shared by the benchmarks.

use clirforge_core::io::{EmbeddingSet, Qrels, Run, ScoredDoc, SparseVectorSet, TokenMatrix};
use clirforge_core::sparse::SparseVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` vectors of `terms_per_vec` terms drawn from a skewed vocabulary.
pub fn sparse_set(
    r: &mut ChaCha8Rng,
    prefix: &str,
    n: usize,
    vocab: usize,
    terms_per_vec: usize,
) -> SparseVectorSet {
    (0..n)
        .map(|i| {
            let pairs: std::collections::BTreeMap<String, f64> = (0..terms_per_vec)
                .map(|_| {
                    let u: f64 = r.gen();
                    (
                        format!("t{}", (u * u * vocab as f64) as usize),
                        r.gen_range(0.05..3.0),
                    )
                })
                .collect();
            (
                format!("{prefix}{i:06}"),
                SparseVector::from_pairs(pairs).unwrap(),
            )
        })
        .collect()
}

pub fn embedding_set(
    r: &mut ChaCha8Rng,
    prefix: &str,
    n: usize,
    dim: usize,
    tokens: usize,
) -> EmbeddingSet {
    let mut set = EmbeddingSet::new(dim).unwrap();
    for i in 0..n {
        let data = (0..tokens * dim)
            .map(|_| r.gen_range(-1.0f32..1.0))
            .collect();
        set.insert(
            format!("{prefix}{i:06}"),
            TokenMatrix::new(dim, data).unwrap(),
        )
        .unwrap();
    }
    set
}

/// A run of `queries` lists with `depth` docs each out of `docs` candidates.
pub fn run(r: &mut ChaCha8Rng, tag: &str, queries: usize, docs: usize, depth: usize) -> Run {
    let mut run = Run::new(tag);
    for q in 0..queries {
        let mut list: Vec<ScoredDoc> = Vec::with_capacity(depth);
        let mut seen = std::collections::HashSet::new();
        while list.len() < depth.min(docs) {
            let d = r.gen_range(0..docs);
            if seen.insert(d) {
                list.push(ScoredDoc::new(format!("d{d:06}"), r.gen_range(0.0..50.0)));
            }
        }
        run.insert(format!("q{q:03}"), list).unwrap();
    }
    run
}

pub fn qrels(r: &mut ChaCha8Rng, queries: usize, docs: usize, per_query: usize) -> Qrels {
    let mut qrels = Qrels::new();
    for q in 0..queries {
        for _ in 0..per_query {
            let d = format!("d{:06}", r.gen_range(0..docs));
            let qid = format!("q{q:03}");
            if qrels.get(&qid).is_none_or(|j| !j.contains_key(&d)) {
                qrels.insert(&qid, &d, r.gen_range(0..=3)).unwrap();
            }
        }
    }
    qrels
}
