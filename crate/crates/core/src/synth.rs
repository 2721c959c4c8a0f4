//! Deterministic synthetic collections for exercising the full run recipe
//! set without real model outputs.
//!
//! [`generate`] writes token counts, sparse vectors, token embeddings,
//! reranker scores, qrels and a collection id list under `<dir>/data`, plus
//! a `pipeline.json` producing the seven submission runs of one language:
//! `splade_{language}_{ht,mt,dt}` and `NLE_{language}_{mono,adhoc}[_rr]`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::io::{self, EmbeddingSet, Qrels, ScoreTable, SparseVectorSet, TokenCounts, TokenMatrix};
use crate::pipeline::{run_pipeline_in, InputSpec, PipelineConfig, StageSpec};
use crate::sparse::SparseVector;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub language: String,
    pub seed: u64,
    pub num_docs: usize,
    pub num_queries: usize,
    pub vocab: usize,
    pub dim: usize,
    /// Candidates per query that receive reranker scores.
    pub rerank_depth: usize,
}

impl SynthSpec {
    pub fn new(language: impl Into<String>, seed: u64) -> Self {
        Self {
            language: language.into(),
            seed,
            num_docs: 300,
            num_queries: 12,
            vocab: 600,
            dim: 8,
            rerank_depth: 50,
        }
    }
}

/// The seven submission run tags of a language.
pub fn submission_runs(language: &str) -> [String; 7] {
    [
        format!("splade_{language}_ht"),
        format!("splade_{language}_mt"),
        format!("splade_{language}_dt"),
        format!("NLE_{language}_mono"),
        format!("NLE_{language}_mono_rr"),
        format!("NLE_{language}_adhoc"),
        format!("NLE_{language}_adhoc_rr"),
    ]
}

struct Doc {
    id: String,
    counts: BTreeMap<usize, u32>,
    topic: Option<(usize, u32)>,
}

struct Collection {
    docs: Vec<Doc>,
    topics: Vec<Vec<usize>>,
    query_ids: Vec<String>,
}

fn approx_normal(rng: &mut ChaCha8Rng) -> f64 {
    (0..4).map(|_| rng.gen::<f64>()).sum::<f64>() - 2.0
}

fn native(lang: &str, t: usize) -> String {
    format!("{lang}{t:04}")
}

fn english(t: usize) -> String {
    format!("en{t:04}")
}

/// Skewed towards low term ids, which play the role of frequent words.
fn background_term(rng: &mut ChaCha8Rng, vocab: usize) -> usize {
    let u: f64 = rng.gen();
    ((u * u) * vocab as f64) as usize % vocab
}

fn build_collection(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Collection {
    let content_terms: Vec<usize> = (spec.vocab / 10..spec.vocab).collect();
    let topics: Vec<Vec<usize>> = (0..spec.num_queries)
        .map(|_| content_terms.choose_multiple(rng, 6).copied().collect())
        .collect();
    let query_ids = (0..spec.num_queries)
        .map(|i| format!("{}", 100 + i))
        .collect();

    let docs = (0..spec.num_docs)
        .map(|i| {
            let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
            let len = rng.gen_range(30..80);
            for _ in 0..len {
                *counts.entry(background_term(rng, spec.vocab)).or_default() += 1;
            }
            let topic = (rng.gen::<f64>() < 0.35).then(|| {
                let q = rng.gen_range(0..spec.num_queries);
                let strength = rng.gen_range(1..=3u32);
                for &t in topics[q].choose_multiple(rng, strength as usize + 1) {
                    *counts.entry(t).or_default() += rng.gen_range(1..=strength + 1);
                }
                (q, strength)
            });
            Doc {
                id: format!("{}-doc-{i:05}", spec.language),
                counts,
                topic,
            }
        })
        .collect();
    Collection {
        docs,
        topics,
        query_ids,
    }
}

fn splade_doc(
    rng: &mut ChaCha8Rng,
    terms: impl Iterator<Item = (String, u32)>,
    neighbor: impl Fn(&str) -> String,
) -> SparseVector {
    let mut weights: BTreeMap<String, f64> = BTreeMap::new();
    for (t, tf) in terms {
        let w = (1.0 + f64::from(tf).ln()) * rng.gen_range(0.6..1.4);
        *weights.entry(t.clone()).or_default() += w;
        if rng.gen::<f64>() < 0.3 {
            *weights.entry(neighbor(&t)).or_default() += 0.2 * w;
        }
    }
    SparseVector::from_pairs(weights).expect("synthetic weights are positive")
}

fn splade_query(rng: &mut ChaCha8Rng, terms: &[String]) -> SparseVector {
    let mut weights: BTreeMap<&str, f64> = BTreeMap::new();
    for t in terms {
        *weights.entry(t).or_default() += rng.gen_range(0.8..1.6);
    }
    SparseVector::from_pairs(weights).expect("synthetic weights are positive")
}

fn matrix(
    rng: &mut ChaCha8Rng,
    term_vecs: &[Vec<f32>],
    terms: &[usize],
    noise: f64,
) -> TokenMatrix {
    let rows: Vec<Vec<f32>> = terms
        .iter()
        .map(|&t| {
            term_vecs[t]
                .iter()
                .map(|&x| x + (noise * approx_normal(rng)) as f32)
                .collect()
        })
        .collect();
    TokenMatrix::from_rows(&rows).expect("synthetic rows share one dimension")
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    fs::write(path, buf).map_err(Error::with_path(path))
}

fn stage(op: &str, tag: &str, params: Value) -> StageSpec {
    let Value::Object(params) = params else {
        unreachable!("stage params are JSON objects")
    };
    StageSpec {
        op: op.into(),
        output_tag: tag.into(),
        params,
    }
}

/// Stages up to and including the two first-stage ensembles.
fn first_stage_stages() -> Vec<StageSpec> {
    let prf = |queries: &str, docs: &str, index: &str| {
        json!({ "docs": docs, "queries": queries, "index": index, "topk": 1000,
                "alpha": 1.0, "beta": 0.75, "fb_docs": 10 })
    };
    vec![
        stage(
            "bm25-weigh",
            "bm25_{language}_weights",
            json!({ "docs": "bm25_docs", "queries": "bm25_queries_ht", "k1": 0.9, "b": 0.4 }),
        ),
        stage(
            "index",
            "splade_{language}_index",
            json!({ "vectors": "splade_docs" }),
        ),
        stage(
            "index",
            "splade_{language}_dt_index",
            json!({ "vectors": "splade_docs_dt" }),
        ),
        stage(
            "retrieve",
            "bm25_{language}",
            json!({ "docs": "bm25_{language}_weights", "queries": "bm25_{language}_weights.queries", "topk": 1000 }),
        ),
        stage(
            "retrieve",
            "splade_{language}_plain",
            json!({ "docs": "splade_docs", "queries": "splade_queries_ht", "index": "splade_{language}_index", "topk": 1000 }),
        ),
        stage(
            "prf-retrieve",
            "splade_{language}_ht",
            prf(
                "splade_queries_ht",
                "splade_docs",
                "splade_{language}_index",
            ),
        ),
        stage(
            "late-retrieve",
            "colbert_{language}_ht",
            json!({ "docs": "colbert_docs", "queries": "colbert_queries_ht", "topk": 1000 }),
        ),
        stage(
            "prf-retrieve",
            "splade_{language}_mt",
            prf(
                "splade_queries_mt",
                "splade_docs",
                "splade_{language}_index",
            ),
        ),
        stage(
            "prf-retrieve",
            "splade_{language}_dt",
            prf(
                "splade_queries_en",
                "splade_docs_dt",
                "splade_{language}_dt_index",
            ),
        ),
        stage(
            "late-retrieve",
            "colbert_{language}_mt",
            json!({ "docs": "colbert_docs", "queries": "colbert_queries_mt", "topk": 1000 }),
        ),
        stage(
            "fuse",
            "NLE_{language}_mono",
            json!({ "members": ["bm25_{language}", "splade_{language}_plain", "splade_{language}_ht", "colbert_{language}_ht"] }),
        ),
        stage(
            "fuse",
            "NLE_{language}_adhoc",
            json!({ "members": ["splade_{language}_mt", "splade_{language}_dt", "colbert_{language}_mt"] }),
        ),
    ]
}

/// (model, candidate ensemble, score input)
const RERANKERS: [(&str, &str, &str); 4] = [
    ("infoxlm", "mono", "rr_infoxlm_mono"),
    ("xlmr", "mono", "rr_xlmr_mono"),
    ("t5", "adhoc", "rr_t5_adhoc"),
    ("electra", "adhoc", "rr_electra_adhoc"),
];

fn later_stages(rerank_depth: usize) -> Vec<StageSpec> {
    let mut stages: Vec<StageSpec> = RERANKERS
        .iter()
        .map(|(model, mode, input)| {
            stage(
                "rerank-merge",
                &format!("{model}_{{language}}_{mode}"),
                json!({ "candidate": format!("NLE_{{language}}_{mode}"), "scores": input, "depth": rerank_depth }),
            )
        })
        .collect();
    stages.push(stage(
        "fuse",
        "NLE_{language}_mono_rr",
        json!({ "members": ["splade_{language}_ht", "colbert_{language}_ht", "infoxlm_{language}_mono", "xlmr_{language}_mono"] }),
    ));
    stages.push(stage(
        "fuse",
        "NLE_{language}_adhoc_rr",
        json!({ "members": ["splade_{language}_mt", "splade_{language}_dt", "colbert_{language}_mt", "t5_{language}_adhoc", "electra_{language}_adhoc"] }),
    ));
    stages.push(stage(
        "filter-dev",
        "hc4_filtered_{language}",
        json!({ "qrels": "hc4_dev_qrels", "collection_ids": "collection_ids" }),
    ));
    for run in submission_runs("{language}") {
        stages.push(stage(
            "eval",
            &format!("eval_{run}"),
            json!({ "run": run, "qrels": "hc4_filtered_{language}",
                    "metrics": "ndcg@20,map@1000,recall@1000", "per_query": true }),
        ));
    }
    stages
}

/// Write a synthetic collection and its seven-run pipeline config under
/// `dir`. Returns the config path.
pub fn generate(spec: &SynthSpec, dir: &Path) -> Result<PathBuf> {
    if spec.language.is_empty()
        || spec.num_docs == 0
        || spec.num_queries == 0
        || spec.vocab < 20
        || spec.dim == 0
    {
        return Err(Error::Domain(
            "synthetic collection needs a language, docs, queries, vocab >= 20 and dim >= 1".into(),
        ));
    }
    let lang = spec.language.as_str();
    let data = dir.join("data");
    fs::create_dir_all(&data).map_err(Error::with_path(&data))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let coll = build_collection(spec, &mut rng);

    // Queries: human translation keeps four topic terms, machine translation
    // swaps some for random terms, the English side mirrors the human one.
    let mut ht: Vec<Vec<usize>> = Vec::new();
    let mut mt: Vec<Vec<usize>> = Vec::new();
    for topic in &coll.topics {
        let q: Vec<usize> = topic[..4].to_vec();
        let noisy = q
            .iter()
            .map(|&t| {
                if rng.gen::<f64>() < 0.7 {
                    t
                } else {
                    rng.gen_range(0..spec.vocab)
                }
            })
            .collect();
        ht.push(q);
        mt.push(noisy);
    }

    // BM25 token counts.
    let doc_counts: TokenCounts = coll
        .docs
        .iter()
        .map(|d| {
            (
                d.id.clone(),
                d.counts
                    .iter()
                    .map(|(&t, &c)| (native(lang, t), c))
                    .collect(),
            )
        })
        .collect();
    let query_counts: TokenCounts = coll
        .query_ids
        .iter()
        .zip(&ht)
        .map(|(q, terms)| {
            (
                q.clone(),
                terms.iter().map(|&t| (native(lang, t), 1)).collect(),
            )
        })
        .collect();
    write_with(&data.join("bm25_docs.tsv"), |b| {
        io::write_token_counts(&doc_counts, b)
    })?;
    write_with(&data.join("bm25_queries_ht.tsv"), |b| {
        io::write_token_counts(&query_counts, b)
    })?;

    // Sparse vectors over native and document-translated text.
    let vocab = spec.vocab;
    let mut splade_docs = SparseVectorSet::new();
    let mut splade_dt = SparseVectorSet::new();
    for d in &coll.docs {
        let terms = d.counts.iter().map(|(&t, &c)| (native(lang, t), c));
        let v = splade_doc(&mut rng, terms, |t| {
            let i: usize = t[lang.len()..].parse().unwrap_or(0);
            native(lang, (i + 1) % vocab)
        });
        splade_docs.insert(d.id.clone(), v)?;

        let translated: BTreeMap<String, u32> =
            d.counts.iter().fold(BTreeMap::new(), |mut acc, (&t, &c)| {
                let out = if rng.gen::<f64>() < 0.85 {
                    t
                } else {
                    rng.gen_range(0..vocab)
                };
                *acc.entry(english(out)).or_default() += c;
                acc
            });
        let v = splade_doc(&mut rng, translated.into_iter(), |t| {
            let i: usize = t[2..].parse().unwrap_or(0);
            english((i + 1) % vocab)
        });
        splade_dt.insert(d.id.clone(), v)?;
    }
    let query_set = |rng: &mut ChaCha8Rng,
                     queries: &[Vec<usize>],
                     name: &dyn Fn(usize) -> String|
     -> Result<SparseVectorSet> {
        let mut set = SparseVectorSet::new();
        for (qid, terms) in coll.query_ids.iter().zip(queries) {
            let names: Vec<String> = terms.iter().map(|&t| name(t)).collect();
            set.insert(qid.clone(), splade_query(rng, &names))?;
        }
        Ok(set)
    };
    let native_name = |t| native(lang, t);
    let q_ht = query_set(&mut rng, &ht, &native_name)?;
    let q_mt = query_set(&mut rng, &mt, &native_name)?;
    let q_en = query_set(&mut rng, &ht, &english)?;
    for (name, set) in [
        ("splade_docs.tsv", &splade_docs),
        ("splade_docs_dt.tsv", &splade_dt),
        ("splade_queries_ht.tsv", &q_ht),
        ("splade_queries_mt.tsv", &q_mt),
        ("splade_queries_en.tsv", &q_en),
    ] {
        write_with(&data.join(name), |b| io::write_sparse_vectors(set, b))?;
    }

    // Token embeddings: one random direction per term plus noise.
    let term_vecs: Vec<Vec<f32>> = (0..vocab)
        .map(|_| {
            (0..spec.dim)
                .map(|_| approx_normal(&mut rng) as f32)
                .collect()
        })
        .collect();
    let mut colbert_docs = EmbeddingSet::new(spec.dim)?;
    for d in &coll.docs {
        let mut by_tf: Vec<(usize, u32)> = d.counts.iter().map(|(&t, &c)| (t, c)).collect();
        by_tf.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let terms: Vec<usize> = by_tf.iter().take(24).map(|p| p.0).collect();
        colbert_docs.insert(d.id.clone(), matrix(&mut rng, &term_vecs, &terms, 0.3))?;
    }
    let mut colbert_ht = EmbeddingSet::new(spec.dim)?;
    let mut colbert_mt = EmbeddingSet::new(spec.dim)?;
    for (i, qid) in coll.query_ids.iter().enumerate() {
        colbert_ht.insert(qid.clone(), matrix(&mut rng, &term_vecs, &ht[i], 0.1))?;
        colbert_mt.insert(qid.clone(), matrix(&mut rng, &term_vecs, &mt[i], 0.1))?;
    }
    for (name, set) in [
        ("colbert_docs.ncem", &colbert_docs),
        ("colbert_queries_ht.ncem", &colbert_ht),
        ("colbert_queries_mt.ncem", &colbert_mt),
    ] {
        write_with(&data.join(name), |b| io::write_embedding_set(set, b))?;
    }

    // Judgments: topical docs carry their strength as grade, a few random
    // docs are judged non-relevant, and some judged docs lie outside the
    // collection. The final query is judged only on outside documents.
    let mut qrels = Qrels::new();
    for (qi, qid) in coll.query_ids.iter().enumerate() {
        for d in &coll.docs {
            if let Some((q, strength)) = d.topic {
                if q == qi {
                    qrels.insert(qid, &d.id, strength)?;
                }
            }
        }
        for d in coll.docs.choose_multiple(&mut rng, 5) {
            if qrels.get(qid).is_none_or(|j| !j.contains_key(&d.id)) {
                qrels.insert(qid, &d.id, 0)?;
            }
        }
        for k in 0..2 {
            qrels.insert(qid, &format!("{lang}-ext-{qi:03}-{k}"), 1)?;
        }
    }
    let orphan = format!("{}", 100 + spec.num_queries);
    qrels.insert(&orphan, &format!("{lang}-ext-orphan-0"), 2)?;
    qrels.insert(&orphan, &format!("{lang}-ext-orphan-1"), 1)?;
    write_with(&data.join("hc4_dev.qrels"), |b| {
        Ok(io::write_qrels(&qrels, b)?)
    })?;
    let ids: BTreeSet<&str> = coll.docs.iter().map(|d| d.id.as_str()).collect();
    write_with(&data.join("collection_ids.txt"), |b| {
        io::write_id_list(ids.iter().copied(), b)
    })?;

    let kinds = [
        ("bm25_docs", "bm25_docs.tsv", "token-counts"),
        ("bm25_queries_ht", "bm25_queries_ht.tsv", "token-counts"),
        ("splade_docs", "splade_docs.tsv", "sparse-vectors"),
        ("splade_docs_dt", "splade_docs_dt.tsv", "sparse-vectors"),
        (
            "splade_queries_ht",
            "splade_queries_ht.tsv",
            "sparse-vectors",
        ),
        (
            "splade_queries_mt",
            "splade_queries_mt.tsv",
            "sparse-vectors",
        ),
        (
            "splade_queries_en",
            "splade_queries_en.tsv",
            "sparse-vectors",
        ),
        ("colbert_docs", "colbert_docs.ncem", "embeddings"),
        (
            "colbert_queries_ht",
            "colbert_queries_ht.ncem",
            "embeddings",
        ),
        (
            "colbert_queries_mt",
            "colbert_queries_mt.ncem",
            "embeddings",
        ),
        (
            "rr_infoxlm_mono",
            "rerank_infoxlm_mono.txt",
            "rerank-scores",
        ),
        ("rr_xlmr_mono", "rerank_xlmr_mono.txt", "rerank-scores"),
        ("rr_t5_adhoc", "rerank_t5_adhoc.txt", "rerank-scores"),
        (
            "rr_electra_adhoc",
            "rerank_electra_adhoc.txt",
            "rerank-scores",
        ),
        ("hc4_dev_qrels", "hc4_dev.qrels", "qrels"),
        ("collection_ids", "collection_ids.txt", "collection-ids"),
    ];
    let inputs = kinds
        .iter()
        .map(|(name, file, kind)| {
            let spec = InputSpec {
                path: PathBuf::from("data").join(file),
                kind: (*kind).into(),
            };
            (name.to_string(), spec)
        })
        .collect();
    let mut cfg = PipelineConfig {
        language: spec.language.clone(),
        inputs,
        stages: first_stage_stages(),
        output_dir: PathBuf::from("runs"),
        base_dir: dir.to_path_buf(),
    };

    // Reranker scores must name candidates of the ensembles they rerank, so
    // the first-stage part of the pipeline runs once here.
    let scratch = dir.join(".candidates");
    let first = run_pipeline_in(&cfg, &scratch);
    let candidates = first.and_then(|out| {
        let mut runs = BTreeMap::new();
        for mode in ["mono", "adhoc"] {
            let path = &out.outputs[&format!("NLE_{lang}_{mode}")];
            runs.insert(mode, io::read_file(path, io::parse_trec_run)?);
        }
        Ok(runs)
    });
    let _ = fs::remove_dir_all(&scratch);
    let candidates = candidates?;
    for (i, (_, mode, input)) in RERANKERS.iter().enumerate() {
        let mut rr_rng =
            ChaCha8Rng::seed_from_u64(spec.seed.wrapping_mul(31).wrapping_add(i as u64 + 1));
        let mut table = ScoreTable::new();
        for (qid, list) in candidates[mode].lists() {
            let judged = qrels.get(qid);
            for d in list.iter().take(spec.rerank_depth) {
                let grade = judged.and_then(|j| j.get(&d.doc_id)).copied().unwrap_or(0);
                let score = f64::from(grade) + 0.8 * approx_normal(&mut rr_rng);
                table
                    .entry(qid.to_owned())
                    .or_default()
                    .insert(d.doc_id.clone(), score);
            }
        }
        let file = kinds
            .iter()
            .find(|k| k.0 == *input)
            .expect("reranker input declared")
            .1;
        write_with(&data.join(file), |b| io::write_rerank_scores(&table, b))?;
    }

    cfg.stages.extend(later_stages(spec.rerank_depth));
    let path = dir.join("pipeline.json");
    let mut json = serde_json::to_value(&cfg)?;
    if let Value::Object(map) = &mut json {
        let ordered: Map<String, Value> = ["language", "output_dir", "inputs", "stages"]
            .iter()
            .filter_map(|k| map.remove(*k).map(|v| (k.to_string(), v)))
            .collect();
        *map = ordered;
    }
    fs::write(&path, serde_json::to_string_pretty(&json)? + "\n")
        .map_err(Error::with_path(&path))?;
    Ok(path)
}
