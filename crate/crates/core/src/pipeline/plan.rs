//! Typed stage plans: parameter checking, artifact references, and the
//! stage dependency graph.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde_json::{json, Map, Value};

use crate::eval::{parse_metric_list, MetricSpec};
use crate::fusion::{FusionSpec, MissingPolicy, RerankScores};
use crate::pipeline::config::{ArtifactKind, PipelineConfig};
use crate::sparse::{Bm25Params, RocchioParams};

pub const DEFAULT_TOPK: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Index,
    Bm25Weigh,
    Retrieve,
    PrfRetrieve,
    LateRetrieve,
    Fuse,
    RerankMerge,
    Eval,
    FilterDev,
}

impl Op {
    pub const ALL: [Op; 9] = [
        Op::Index,
        Op::Bm25Weigh,
        Op::Retrieve,
        Op::PrfRetrieve,
        Op::LateRetrieve,
        Op::Fuse,
        Op::RerankMerge,
        Op::Eval,
        Op::FilterDev,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Op::Index => "index",
            Op::Bm25Weigh => "bm25-weigh",
            Op::Retrieve => "retrieve",
            Op::PrfRetrieve => "prf-retrieve",
            Op::LateRetrieve => "late-retrieve",
            Op::Fuse => "fuse",
            Op::RerankMerge => "rerank-merge",
            Op::Eval => "eval",
            Op::FilterDev => "filter-dev",
        }
    }
}

impl FromStr for Op {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Op::ALL
            .into_iter()
            .find(|op| op.as_str() == s)
            .ok_or_else(|| format!("unknown op `{s}`"))
    }
}

/// A problem found by [`validate_config`](super::validate_config).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub stage: String,
    pub reason: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage `{}`: {}", self.stage, self.reason)
    }
}

/// Stage parameters after type checking, with defaults filled in.
#[derive(Clone, Debug, PartialEq)]
pub enum Plan {
    Index {
        vectors: String,
    },
    Bm25Weigh {
        docs: String,
        queries: String,
        params: Bm25Params,
    },
    Retrieve {
        docs: String,
        queries: String,
        index: Option<String>,
        topk: usize,
    },
    PrfRetrieve {
        docs: String,
        queries: String,
        index: Option<String>,
        topk: usize,
        rocchio: RocchioParams,
    },
    LateRetrieve {
        docs: String,
        queries: String,
        topk: usize,
    },
    Fuse {
        members: Vec<String>,
        weights: Option<Vec<f64>>,
        missing: MissingPolicy,
    },
    RerankMerge {
        candidate: String,
        scores: String,
        depth: usize,
    },
    Eval {
        run: String,
        qrels: String,
        metrics: Vec<MetricSpec>,
        per_query: bool,
    },
    FilterDev {
        qrels: String,
        collection_ids: String,
        queries: Option<String>,
    },
}

/// A file a stage writes, and the artifact name it is published under.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputSlot {
    pub artifact: String,
    pub kind: ArtifactKind,
    pub file: String,
}

impl Plan {
    pub fn op(&self) -> Op {
        match self {
            Plan::Index { .. } => Op::Index,
            Plan::Bm25Weigh { .. } => Op::Bm25Weigh,
            Plan::Retrieve { .. } => Op::Retrieve,
            Plan::PrfRetrieve { .. } => Op::PrfRetrieve,
            Plan::LateRetrieve { .. } => Op::LateRetrieve,
            Plan::Fuse { .. } => Op::Fuse,
            Plan::RerankMerge { .. } => Op::RerankMerge,
            Plan::Eval { .. } => Op::Eval,
            Plan::FilterDev { .. } => Op::FilterDev,
        }
    }

    /// Artifacts read by the stage: (param name, artifact, expected kind).
    pub fn refs(&self) -> Vec<(&'static str, &str, ArtifactKind)> {
        use ArtifactKind as K;
        let mut refs = Vec::new();
        match self {
            Plan::Index { vectors } => refs.push(("vectors", vectors.as_str(), K::SparseVectors)),
            Plan::Bm25Weigh { docs, queries, .. } => {
                refs.push(("docs", docs.as_str(), K::TokenCounts));
                refs.push(("queries", queries.as_str(), K::TokenCounts));
            }
            Plan::Retrieve {
                docs,
                queries,
                index,
                ..
            }
            | Plan::PrfRetrieve {
                docs,
                queries,
                index,
                ..
            } => {
                refs.push(("docs", docs.as_str(), K::SparseVectors));
                refs.push(("queries", queries.as_str(), K::SparseVectors));
                if let Some(index) = index {
                    refs.push(("index", index.as_str(), K::Index));
                }
            }
            Plan::LateRetrieve { docs, queries, .. } => {
                refs.push(("docs", docs.as_str(), K::Embeddings));
                refs.push(("queries", queries.as_str(), K::Embeddings));
            }
            Plan::Fuse { members, .. } => {
                refs.extend(members.iter().map(|m| ("members", m.as_str(), K::Run)));
            }
            Plan::RerankMerge {
                candidate, scores, ..
            } => {
                refs.push(("candidate", candidate.as_str(), K::Run));
                refs.push(("scores", scores.as_str(), K::RerankScores));
            }
            Plan::Eval { run, qrels, .. } => {
                refs.push(("run", run.as_str(), K::Run));
                refs.push(("qrels", qrels.as_str(), K::Qrels));
            }
            Plan::FilterDev {
                qrels,
                collection_ids,
                queries,
            } => {
                refs.push(("qrels", qrels.as_str(), K::Qrels));
                refs.push(("collection_ids", collection_ids.as_str(), K::CollectionIds));
                if let Some(q) = queries {
                    refs.push(("queries", q.as_str(), K::CollectionIds));
                }
            }
        }
        refs
    }

    /// Files written under the output directory. The first slot is the
    /// stage's primary artifact, published under the stage tag.
    pub fn outputs(&self, tag: &str) -> Vec<OutputSlot> {
        output_slots(self.op(), tag)
    }

    /// Parameters with defaults applied, as recorded in the manifest.
    pub fn params_json(&self) -> Value {
        match self {
            Plan::Index { vectors } => json!({ "vectors": vectors }),
            Plan::Bm25Weigh {
                docs,
                queries,
                params,
            } => {
                json!({ "docs": docs, "queries": queries, "k1": params.k1, "b": params.b })
            }
            Plan::Retrieve {
                docs,
                queries,
                index,
                topk,
            } => {
                json!({ "docs": docs, "queries": queries, "index": index, "topk": topk })
            }
            Plan::PrfRetrieve {
                docs,
                queries,
                index,
                topk,
                rocchio,
            } => json!({
                "docs": docs, "queries": queries, "index": index, "topk": topk,
                "alpha": rocchio.alpha, "beta": rocchio.beta,
                "fb_docs": rocchio.fb_docs, "term_cap": rocchio.term_cap,
            }),
            Plan::LateRetrieve {
                docs,
                queries,
                topk,
            } => {
                json!({ "docs": docs, "queries": queries, "topk": topk })
            }
            Plan::Fuse {
                members,
                weights,
                missing,
            } => {
                json!({ "members": members, "weights": weights, "missing": missing.as_str() })
            }
            Plan::RerankMerge {
                candidate,
                scores,
                depth,
            } => {
                json!({ "candidate": candidate, "scores": scores, "depth": depth })
            }
            Plan::Eval {
                run,
                qrels,
                metrics,
                per_query,
            } => {
                let metrics: Vec<String> = metrics.iter().map(ToString::to_string).collect();
                json!({ "run": run, "qrels": qrels, "metrics": metrics.join(","), "per_query": per_query })
            }
            Plan::FilterDev {
                qrels,
                collection_ids,
                queries,
            } => {
                json!({ "qrels": qrels, "collection_ids": collection_ids, "queries": queries })
            }
        }
    }

    pub fn parse(
        op: Op,
        params: &Map<String, Value>,
        cfg: &PipelineConfig,
    ) -> Result<Plan, Vec<String>> {
        let mut p = Params::new(params, cfg);
        let plan = plan_op(op, &mut p);
        p.finish(op, plan)
    }
}

/// Files written by a stage of kind `op`; the first slot is the primary
/// artifact, published under the stage tag.
pub fn output_slots(op: Op, tag: &str) -> Vec<OutputSlot> {
    use ArtifactKind as K;
    let slot = |artifact: String, kind, file: String| OutputSlot {
        artifact,
        kind,
        file,
    };
    match op {
        Op::Index => vec![slot(tag.into(), K::Index, format!("{tag}.index.json"))],
        Op::Bm25Weigh => vec![
            slot(tag.into(), K::SparseVectors, format!("{tag}.docs.tsv")),
            slot(
                format!("{tag}.queries"),
                K::SparseVectors,
                format!("{tag}.queries.tsv"),
            ),
        ],
        Op::Retrieve | Op::PrfRetrieve | Op::LateRetrieve | Op::Fuse | Op::RerankMerge => {
            vec![slot(tag.into(), K::Run, format!("{tag}.run"))]
        }
        Op::Eval => vec![
            slot(tag.into(), K::Report, format!("{tag}.eval.txt")),
            slot(format!("{tag}.tsv"), K::Report, format!("{tag}.eval.tsv")),
        ],
        Op::FilterDev => vec![
            slot(tag.into(), K::Qrels, format!("{tag}.qrels")),
            slot(
                format!("{tag}.report"),
                K::Report,
                format!("{tag}.filter.json"),
            ),
        ],
    }
}

fn plan_op(op: Op, p: &mut Params<'_>) -> Option<Plan> {
    match op {
        Op::Index => p.artifact("vectors").map(|vectors| Plan::Index { vectors }),
        Op::Bm25Weigh => {
            let docs = p.artifact("docs");
            let queries = p.artifact("queries");
            let defaults = Bm25Params::default();
            let params = Bm25Params {
                k1: p.number("k1", defaults.k1),
                b: p.number("b", defaults.b),
            };
            p.check(params.validate());
            Some(Plan::Bm25Weigh {
                docs: docs?,
                queries: queries?,
                params,
            })
        }
        Op::Retrieve | Op::PrfRetrieve => {
            let docs = p.artifact("docs");
            let queries = p.artifact("queries");
            let index = p.opt_artifact("index");
            let topk = p.count("topk", DEFAULT_TOPK);
            if op == Op::Retrieve {
                Some(Plan::Retrieve {
                    docs: docs?,
                    queries: queries?,
                    index,
                    topk,
                })
            } else {
                let d = RocchioParams::default();
                let rocchio = RocchioParams {
                    alpha: p.number("alpha", d.alpha),
                    beta: p.number("beta", d.beta),
                    fb_docs: p.count("fb_docs", d.fb_docs),
                    term_cap: p.opt_count("term_cap"),
                };
                p.check(rocchio.validate());
                Some(Plan::PrfRetrieve {
                    docs: docs?,
                    queries: queries?,
                    index,
                    topk,
                    rocchio,
                })
            }
        }
        Op::LateRetrieve => {
            let docs = p.artifact("docs");
            let queries = p.artifact("queries");
            let topk = p.count("topk", DEFAULT_TOPK);
            Some(Plan::LateRetrieve {
                docs: docs?,
                queries: queries?,
                topk,
            })
        }
        Op::Fuse => {
            let members = p.artifact_list("members");
            let weights = p.opt_number_list("weights");
            let missing = p.string("missing", "zero");
            let missing = p
                .check(missing.parse::<MissingPolicy>())
                .unwrap_or_default();
            if let Some(m) = &members {
                let spec = FusionSpec {
                    weights: weights.clone(),
                    ..FusionSpec::new(m.clone(), "fused")
                };
                p.check(spec.validate());
            }
            Some(Plan::Fuse {
                members: members?,
                weights,
                missing,
            })
        }
        Op::RerankMerge => {
            let candidate = p.artifact("candidate");
            let scores = p.artifact("scores");
            let depth = p.count("depth", RerankScores::DEFAULT_DEPTH);
            Some(Plan::RerankMerge {
                candidate: candidate?,
                scores: scores?,
                depth,
            })
        }
        Op::Eval => {
            let run = p.artifact("run");
            let qrels = p.artifact("qrels");
            let metrics = p.string("metrics", "ndcg@20,map@1000,recall@1000");
            let metrics = p.check(parse_metric_list(&metrics)).unwrap_or_default();
            if metrics.is_empty() {
                p.error("`metrics` names no metric".into());
            }
            let per_query = p.boolean("per_query", false);
            Some(Plan::Eval {
                run: run?,
                qrels: qrels?,
                metrics,
                per_query,
            })
        }
        Op::FilterDev => {
            let qrels = p.artifact("qrels");
            let collection_ids = p.artifact("collection_ids");
            let queries = p.opt_artifact("queries");
            Some(Plan::FilterDev {
                qrels: qrels?,
                collection_ids: collection_ids?,
                queries,
            })
        }
    }
}

/// Accumulates type errors while reading a stage's params.
struct Params<'a> {
    params: &'a Map<String, Value>,
    cfg: &'a PipelineConfig,
    seen: BTreeSet<&'static str>,
    errors: Vec<String>,
}

impl<'a> Params<'a> {
    fn new(params: &'a Map<String, Value>, cfg: &'a PipelineConfig) -> Self {
        Self {
            params,
            cfg,
            seen: BTreeSet::new(),
            errors: Vec::new(),
        }
    }

    fn error(&mut self, e: String) {
        self.errors.push(e);
    }

    fn check<T, E: fmt::Display>(&mut self, r: Result<T, E>) -> Option<T> {
        r.map_err(|e| self.error(e.to_string())).ok()
    }

    fn get(&mut self, name: &'static str) -> Option<&'a Value> {
        self.seen.insert(name);
        self.params.get(name).filter(|v| !v.is_null())
    }

    fn opt_artifact(&mut self, name: &'static str) -> Option<String> {
        match self.get(name)? {
            Value::String(s) if !s.is_empty() => Some(self.cfg.expand(s)),
            _ => {
                self.error(format!("`{name}` must be an artifact name"));
                None
            }
        }
    }

    fn artifact(&mut self, name: &'static str) -> Option<String> {
        if self.params.get(name).is_none_or(Value::is_null) {
            self.seen.insert(name);
            self.error(format!("missing required param `{name}`"));
            return None;
        }
        self.opt_artifact(name)
    }

    fn artifact_list(&mut self, name: &'static str) -> Option<Vec<String>> {
        let Some(v) = self.get(name) else {
            self.error(format!("missing required param `{name}`"));
            return None;
        };
        let list = v.as_array().and_then(|items| {
            items
                .iter()
                .map(|i| {
                    i.as_str()
                        .filter(|s| !s.is_empty())
                        .map(|s| self.cfg.expand(s))
                })
                .collect::<Option<Vec<_>>>()
        });
        if list.is_none() {
            self.error(format!("`{name}` must be a list of artifact names"));
        }
        list
    }

    fn number(&mut self, name: &'static str, default: f64) -> f64 {
        match self.get(name) {
            None => default,
            Some(v) => v.as_f64().unwrap_or_else(|| {
                self.error(format!("`{name}` must be a number"));
                default
            }),
        }
    }

    fn opt_count(&mut self, name: &'static str) -> Option<usize> {
        let v = self.get(name)?;
        match v.as_u64().filter(|&n| n >= 1) {
            Some(n) => Some(n as usize),
            None => {
                self.error(format!("`{name}` must be an integer >= 1"));
                None
            }
        }
    }

    fn count(&mut self, name: &'static str, default: usize) -> usize {
        self.opt_count(name).unwrap_or(default)
    }

    fn opt_number_list(&mut self, name: &'static str) -> Option<Vec<f64>> {
        let v = self.get(name)?;
        let list = v
            .as_array()
            .and_then(|items| items.iter().map(Value::as_f64).collect::<Option<Vec<_>>>());
        if list.is_none() {
            self.error(format!("`{name}` must be a list of numbers"));
        }
        list
    }

    fn string(&mut self, name: &'static str, default: &str) -> String {
        match self.get(name) {
            None => default.to_owned(),
            Some(Value::String(s)) => s.clone(),
            Some(_) => {
                self.error(format!("`{name}` must be a string"));
                default.to_owned()
            }
        }
    }

    fn boolean(&mut self, name: &'static str, default: bool) -> bool {
        match self.get(name) {
            None => default,
            Some(v) => v.as_bool().unwrap_or_else(|| {
                self.error(format!("`{name}` must be true or false"));
                default
            }),
        }
    }

    fn finish(mut self, op: Op, plan: Option<Plan>) -> Result<Plan, Vec<String>> {
        for key in self.params.keys() {
            if !self.seen.contains(key.as_str()) {
                self.errors
                    .push(format!("unknown param `{key}` for op `{}`", op.as_str()));
            }
        }
        match plan {
            Some(plan) if self.errors.is_empty() => Ok(plan),
            _ => Err(self.errors),
        }
    }
}

/// Where an artifact comes from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Source {
    Input,
    Stage(usize),
    /// Declared by a stage that failed validation.
    Unplanned,
}

#[derive(Clone, Debug)]
pub struct PlannedStage {
    pub tag: String,
    pub plan: Plan,
}

/// Validated pipeline: typed stages, artifact producers and an execution
/// order.
#[derive(Clone, Debug)]
pub struct Graph {
    pub stages: Vec<PlannedStage>,
    pub artifacts: HashMap<String, (ArtifactKind, Source)>,
    /// Stage indices in dependency order; ready stages run in tag order.
    pub order: Vec<usize>,
}

pub fn build_graph(cfg: &PipelineConfig) -> Result<Graph, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut diag = |stage: &str, reason: String| {
        diags.push(Diagnostic {
            stage: stage.to_owned(),
            reason,
        })
    };

    if cfg.language.trim().is_empty() {
        diag("config", "language tag is empty".into());
    }
    if cfg.stages.is_empty() {
        diag("config", "no stages declared".into());
    }

    let mut artifacts: HashMap<String, (ArtifactKind, Source)> = HashMap::new();
    for (name, input) in &cfg.inputs {
        match input.kind.parse::<ArtifactKind>() {
            Ok(kind) => {
                artifacts.insert(name.clone(), (kind, Source::Input));
            }
            Err(e) => diag(&format!("inputs.{name}"), e.to_string()),
        }
    }

    let mut stages = Vec::new();
    let mut tags: BTreeMap<String, usize> = BTreeMap::new();
    // Outputs of stages that failed to plan; references to them are not
    // reported again.
    let mut unplanned: Vec<(String, Op)> = Vec::new();
    for spec in &cfg.stages {
        let tag = cfg.expand(&spec.output_tag);
        if tag.is_empty() || tag.chars().any(char::is_whitespace) || tag.contains(['/', '\\']) {
            diag(
                &tag,
                "output tag must be a non-empty word without path separators".into(),
            );
            continue;
        }
        *tags.entry(tag.clone()).or_default() += 1;
        let op = match spec.op.parse::<Op>() {
            Ok(op) => op,
            Err(e) => {
                diag(&tag, e);
                continue;
            }
        };
        match Plan::parse(op, &spec.params, cfg) {
            Ok(plan) => stages.push(PlannedStage { tag, plan }),
            Err(errors) => {
                errors.into_iter().for_each(|e| diag(&tag, e));
                unplanned.push((tag, op));
            }
        }
    }
    for (tag, n) in &tags {
        if *n > 1 {
            diag(tag, format!("duplicate output tag (declared {n} times)"));
        }
    }
    stages.retain(|s| {
        let unique = tags[&s.tag] == 1;
        if !unique {
            unplanned.push((s.tag.clone(), s.plan.op()));
        }
        unique
    });

    for (tag, op) in &unplanned {
        for slot in output_slots(*op, tag) {
            artifacts
                .entry(slot.artifact)
                .or_insert((slot.kind, Source::Unplanned));
        }
    }
    for (i, s) in stages.iter().enumerate() {
        for slot in s.plan.outputs(&s.tag) {
            match artifacts.entry(slot.artifact) {
                Entry::Occupied(e) => diag(
                    &s.tag,
                    format!("artifact `{}` is already declared", e.key()),
                ),
                Entry::Vacant(e) => {
                    e.insert((slot.kind, Source::Stage(i)));
                }
            }
        }
    }

    let mut deps: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); stages.len()];
    for (i, s) in stages.iter().enumerate() {
        for (param, name, want) in s.plan.refs() {
            match artifacts.get(name) {
                None => diag(
                    &s.tag,
                    format!("`{param}` references undeclared artifact `{name}`"),
                ),
                Some((kind, _)) if *kind != want => diag(
                    &s.tag,
                    format!("`{param}` expects a {want} artifact but `{name}` is a {kind}"),
                ),
                Some((_, Source::Stage(j))) => {
                    deps[i].insert(*j);
                }
                Some((_, Source::Input | Source::Unplanned)) => {}
            }
        }
    }

    let mut remaining: Vec<usize> = deps.iter().map(BTreeSet::len).collect();
    let mut ready: BTreeSet<(&str, usize)> = (0..stages.len())
        .filter(|&i| remaining[i] == 0)
        .map(|i| (stages[i].tag.as_str(), i))
        .collect();
    let mut order = Vec::with_capacity(stages.len());
    while let Some((_, i)) = ready.pop_first() {
        order.push(i);
        for (j, d) in deps.iter().enumerate() {
            if d.contains(&i) {
                remaining[j] -= 1;
                if remaining[j] == 0 {
                    ready.insert((stages[j].tag.as_str(), j));
                }
            }
        }
    }
    if order.len() < stages.len() {
        let stuck: Vec<&str> = (0..stages.len())
            .filter(|i| !order.contains(i))
            .map(|i| stages[i].tag.as_str())
            .collect();
        for tag in &stuck {
            diag(
                tag,
                format!("dependency cycle among stages {}", stuck.join(", ")),
            );
        }
    }

    if diags.is_empty() {
        Ok(Graph {
            stages,
            artifacts,
            order,
        })
    } else {
        Err(diags)
    }
}
