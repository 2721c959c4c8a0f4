use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{evaluate, filter_devset, format_report, format_report_tsv};
use crate::fusion::{apply_rerank_scores, fuse, FusionSpec, RerankScores};
use crate::io::{self, EmbeddingSet, Qrels, Run, ScoreTable, SparseVectorSet, TokenCounts};
use crate::late::late_retrieve_run;
use crate::pipeline::config::{ArtifactKind, PipelineConfig};
use crate::pipeline::plan::{build_graph, Diagnostic, Plan};
use crate::sparse::{bm25_weigh_corpus, retrieve_run_with_prf, ImpactIndex};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Check references, parameters and acyclicity. Empty means runnable.
pub fn validate_config(cfg: &PipelineConfig) -> Vec<Diagnostic> {
    build_graph(cfg).err().unwrap_or_default()
}

/// Files produced by a pipeline run.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOutput {
    /// Primary artifact file of every stage, keyed by output tag.
    pub outputs: BTreeMap<String, PathBuf>,
    pub manifest: PathBuf,
}

/// Execute every stage into the configured output directory.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput> {
    run_pipeline_in(cfg, &cfg.output_path())
}

/// Execute every stage, writing outputs under `out_dir`. On failure every
/// file written by this call is removed.
pub fn run_pipeline_in(cfg: &PipelineConfig, out_dir: &Path) -> Result<PipelineOutput> {
    let graph =
        build_graph(cfg).map_err(|d| Error::Config(d.iter().map(ToString::to_string).collect()))?;
    fs::create_dir_all(out_dir).map_err(Error::with_path(out_dir))?;

    let mut store = Store {
        cfg,
        kinds: graph
            .artifacts
            .iter()
            .map(|(k, (kind, _))| (k.clone(), *kind))
            .collect(),
        loaded: HashMap::new(),
    };
    let mut written: Vec<PathBuf> = Vec::new();
    let result = (|| {
        let mut stages_json = Vec::new();
        let mut outputs = BTreeMap::new();
        for &i in &graph.order {
            let stage = &graph.stages[i];
            let wrap = |e: Error| Error::Stage {
                stage: stage.tag.clone(),
                source: Box::new(e),
            };
            let mut inputs = serde_json::Map::new();
            for (_, name, _) in stage.plan.refs() {
                let digest = store.digest(name).map_err(wrap)?;
                inputs.insert(name.to_owned(), Value::String(digest));
            }
            let produced = execute(&stage.plan, &stage.tag, &mut store).map_err(wrap)?;

            let mut files = serde_json::Map::new();
            for (slot, (artifact, bytes)) in
                stage.plan.outputs(&stage.tag).into_iter().zip(produced)
            {
                let path = out_dir.join(&slot.file);
                fs::write(&path, &bytes).map_err(|e| wrap(Error::with_path(&path)(e)))?;
                written.push(path.clone());
                let digest = sha256(&bytes);
                files.insert(slot.file.clone(), Value::String(digest.clone()));
                if slot.artifact == stage.tag {
                    outputs.insert(stage.tag.clone(), path);
                }
                store.loaded.insert(slot.artifact, (artifact, digest));
            }
            stages_json.push(json!({
                "tag": stage.tag,
                "op": stage.plan.op().as_str(),
                "params": stage.plan.params_json(),
                "inputs": inputs,
                "outputs": files,
            }));
        }

        let manifest = json!({
            "language": cfg.language,
            "stages": stages_json,
            "outputs": outputs
                .iter()
                .map(|(tag, p)| (tag.clone(), Value::String(file_name(p))))
                .collect::<serde_json::Map<_, _>>(),
        });
        let path = out_dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        fs::write(&path, text).map_err(Error::with_path(&path))?;
        Ok(PipelineOutput {
            outputs,
            manifest: path,
        })
    })();

    if result.is_err() {
        for path in &written {
            let _ = fs::remove_file(path);
        }
    }
    result
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn sha256(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

#[derive(Clone)]
enum Artifact {
    Sparse(Arc<SparseVectorSet>),
    Embeddings(Arc<EmbeddingSet>),
    Tokens(Arc<TokenCounts>),
    Run(Arc<Run>),
    Rerank(Arc<ScoreTable>),
    Qrels(Arc<Qrels>),
    Ids(Arc<BTreeSet<String>>),
    Index(Arc<ImpactIndex>),
    Report,
}

/// Artifacts by name: declared inputs are read on first use, stage outputs
/// are inserted as they are produced.
struct Store<'a> {
    cfg: &'a PipelineConfig,
    kinds: HashMap<String, ArtifactKind>,
    loaded: HashMap<String, (Artifact, String)>,
}

macro_rules! getter {
    ($name:ident, $variant:ident, $ty:ty) => {
        fn $name(&mut self, artifact: &str) -> Result<Arc<$ty>> {
            match self.get(artifact)? {
                Artifact::$variant(v) => Ok(v),
                _ => Err(Error::Domain(format!(
                    "artifact `{artifact}` has the wrong kind"
                ))),
            }
        }
    };
}

impl Store<'_> {
    fn get(&mut self, name: &str) -> Result<Artifact> {
        if !self.loaded.contains_key(name) {
            self.load_input(name)?;
        }
        Ok(self.loaded[name].0.clone())
    }

    fn digest(&mut self, name: &str) -> Result<String> {
        self.get(name)?;
        Ok(self.loaded[name].1.clone())
    }

    fn load_input(&mut self, name: &str) -> Result<()> {
        let input = self
            .cfg
            .inputs
            .get(name)
            .ok_or_else(|| Error::Domain(format!("artifact `{name}` is not available")))?;
        let path = self.cfg.resolve(&input.path);
        let bytes = fs::read(&path).map_err(Error::with_path(&path))?;
        let tagged = |e: Error| match e {
            Error::Parse { line, reason } => Error::Parse {
                line,
                reason: format!("{}: {reason}", path.display()),
            },
            e => e,
        };
        let data = &bytes[..];
        let artifact = match self.kinds[name] {
            ArtifactKind::SparseVectors => {
                Artifact::Sparse(Arc::new(io::load_sparse_vectors(data).map_err(tagged)?))
            }
            ArtifactKind::Embeddings => {
                Artifact::Embeddings(Arc::new(io::load_embedding_set(data).map_err(tagged)?))
            }
            ArtifactKind::TokenCounts => {
                Artifact::Tokens(Arc::new(io::load_token_counts(data).map_err(tagged)?))
            }
            ArtifactKind::Run => Artifact::Run(Arc::new(io::parse_trec_run(data).map_err(tagged)?)),
            ArtifactKind::RerankScores => {
                Artifact::Rerank(Arc::new(io::load_rerank_scores(data).map_err(tagged)?))
            }
            ArtifactKind::Qrels => {
                Artifact::Qrels(Arc::new(io::parse_qrels(data).map_err(tagged)?))
            }
            ArtifactKind::CollectionIds => {
                Artifact::Ids(Arc::new(io::load_id_list(data).map_err(tagged)?))
            }
            ArtifactKind::Index | ArtifactKind::Report => {
                return Err(Error::Domain(format!(
                    "input `{name}` cannot be declared as a file"
                )))
            }
        };
        self.loaded
            .insert(name.to_owned(), (artifact, sha256(&bytes)));
        Ok(())
    }

    getter!(sparse, Sparse, SparseVectorSet);
    getter!(embeddings, Embeddings, EmbeddingSet);
    getter!(tokens, Tokens, TokenCounts);
    getter!(run, Run, Run);
    getter!(rerank, Rerank, ScoreTable);
    getter!(qrels, Qrels, Qrels);
    getter!(ids, Ids, BTreeSet<String>);
    getter!(index, Index, ImpactIndex);
}

fn run_bytes(run: &Run, tag: &str) -> Vec<u8> {
    let mut buf = Vec::new();
    io::write_trec_run(run, tag, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

fn sparse_bytes(set: &SparseVectorSet) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    io::write_sparse_vectors(set, &mut buf)?;
    Ok(buf)
}

fn index_for(
    store: &mut Store,
    index: &Option<String>,
    docs: &SparseVectorSet,
) -> Result<Arc<ImpactIndex>> {
    match index {
        Some(name) => store.index(name),
        None => Ok(Arc::new(ImpactIndex::build(docs))),
    }
}

/// Run one stage; returns one (artifact, file bytes) pair per output slot.
fn execute(plan: &Plan, tag: &str, store: &mut Store) -> Result<Vec<(Artifact, Vec<u8>)>> {
    let run_output = |run: Run| {
        let bytes = run_bytes(&run, tag);
        vec![(Artifact::Run(Arc::new(run)), bytes)]
    };
    Ok(match plan {
        Plan::Index { vectors } => {
            let index = ImpactIndex::build(&*store.sparse(vectors)?);
            let mut buf = Vec::new();
            index.write_json(&mut buf)?;
            vec![(Artifact::Index(Arc::new(index)), buf)]
        }
        Plan::Bm25Weigh {
            docs,
            queries,
            params,
        } => {
            let (doc_vectors, model) = bm25_weigh_corpus(&*store.tokens(docs)?, *params)?;
            let query_vectors = model.weigh_queries(&*store.tokens(queries)?);
            let doc_bytes = sparse_bytes(&doc_vectors)?;
            let query_bytes = sparse_bytes(&query_vectors)?;
            vec![
                (Artifact::Sparse(Arc::new(doc_vectors)), doc_bytes),
                (Artifact::Sparse(Arc::new(query_vectors)), query_bytes),
            ]
        }
        Plan::Retrieve {
            docs,
            queries,
            index,
            topk,
        } => {
            let docs = store.sparse(docs)?;
            let index = index_for(store, index, &docs)?;
            run_output(index.retrieve_run(&*store.sparse(queries)?, *topk, tag))
        }
        Plan::PrfRetrieve {
            docs,
            queries,
            index,
            topk,
            rocchio,
        } => {
            let docs = store.sparse(docs)?;
            let index = index_for(store, index, &docs)?;
            let queries = store.sparse(queries)?;
            run_output(retrieve_run_with_prf(
                &index, &docs, &queries, *topk, rocchio, tag,
            )?)
        }
        Plan::LateRetrieve {
            docs,
            queries,
            topk,
        } => {
            let docs = store.embeddings(docs)?;
            run_output(late_retrieve_run(
                &docs,
                &*store.embeddings(queries)?,
                *topk,
                tag,
            )?)
        }
        Plan::Fuse {
            members,
            weights,
            missing,
        } => {
            let runs: Vec<Run> = members
                .iter()
                .map(|m| store.run(m).map(|r| (*r).clone()))
                .collect::<Result<_>>()?;
            let spec = FusionSpec {
                member_tags: runs.iter().map(|r| r.tag().to_owned()).collect(),
                weights: weights.clone(),
                output_tag: tag.to_owned(),
                missing: *missing,
            };
            run_output(fuse(&runs, &spec)?)
        }
        Plan::RerankMerge {
            candidate,
            scores,
            depth,
        } => {
            let rr = RerankScores::new((*store.rerank(scores)?).clone()).with_depth(*depth);
            run_output(apply_rerank_scores(&*store.run(candidate)?, &rr)?.with_tag(tag))
        }
        Plan::Eval {
            run,
            qrels,
            metrics,
            per_query,
        } => {
            let report = evaluate(&*store.run(run)?, &*store.qrels(qrels)?, metrics);
            vec![
                (
                    Artifact::Report,
                    format_report(&report, *per_query).into_bytes(),
                ),
                (Artifact::Report, format_report_tsv(&report).into_bytes()),
            ]
        }
        Plan::FilterDev {
            qrels,
            collection_ids,
            queries,
        } => {
            let query_set = match queries {
                Some(q) => Some(store.ids(q)?),
                None => None,
            };
            let (filtered, report) = filter_devset(
                &*store.qrels(qrels)?,
                &*store.ids(collection_ids)?,
                query_set.as_deref(),
            )?;
            let mut buf = Vec::new();
            io::write_qrels(&filtered, &mut buf)?;
            let report_json = serde_json::to_string_pretty(&report)? + "\n";
            vec![
                (Artifact::Qrels(Arc::new(filtered)), buf),
                (Artifact::Report, report_json.into_bytes()),
            ]
        }
    })
}
