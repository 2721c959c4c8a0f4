use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use clirforge_core::eval::{self, format_report, format_report_tsv, parse_metric_list};
use clirforge_core::fusion::{apply_rerank_scores, fuse, FusionSpec, MissingPolicy, RerankScores};
use clirforge_core::io::{self as cio, read_file, Run};
use clirforge_core::late::late_retrieve_run;
use clirforge_core::pipeline::{run_pipeline, run_pipeline_in, validate_config, PipelineConfig};
use clirforge_core::sparse::{
    bm25_weigh_corpus, retrieve_run_with_prf, Bm25Params, ImpactIndex, RocchioParams,
};
use clirforge_core::synth::{generate, SynthSpec};

const THREADS_ENV: &str = "CLIRFORGE_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "clirforge",
    version,
    about = "Cross-language retrieval runs from precomputed model outputs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build an impact index from a sparse-vector file
    Index {
        #[arg(long)]
        vectors: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact top-k sparse retrieval
    Retrieve(RetrieveArgs),
    /// Turn token counts into BM25 document and query vectors
    Bm25Weigh {
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long)]
        out_docs: PathBuf,
        #[arg(long, requires = "queries")]
        out_queries: Option<PathBuf>,
        #[arg(long, default_value_t = 0.9)]
        k1: f64,
        #[arg(long, default_value_t = 0.4)]
        b: f64,
    },
    /// Exhaustive MaxSim retrieval over token embeddings
    LateRetrieve {
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[command(flatten)]
        run: RunOut,
    },
    /// Sparse retrieval with Rocchio pseudo-relevance feedback
    PrfRetrieve {
        #[command(flatten)]
        base: RetrieveArgs,
        #[arg(long, default_value_t = 1.0)]
        prf_alpha: f64,
        #[arg(long, default_value_t = 0.75)]
        prf_beta: f64,
        #[arg(long, default_value_t = 10)]
        prf_docs: usize,
        #[arg(long)]
        prf_term_cap: Option<usize>,
    },
    /// Average min-max normalized scores of several runs
    Fuse {
        /// Comma-separated run files
        #[arg(long, value_delimiter = ',', required = true)]
        members: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        #[arg(long, default_value = "zero")]
        missing: MissingPolicy,
        #[arg(long)]
        tag: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reorder a candidate run by external reranker scores
    RerankMerge {
        #[arg(long)]
        candidate: PathBuf,
        /// Lines of `qid docid score`
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, default_value_t = RerankScores::DEFAULT_DEPTH)]
        depth: usize,
        /// Defaults to the candidate run's tag
        #[arg(long)]
        tag: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a run against qrels
    Eval {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long, default_value = "ndcg@20,map@1000,recall@1000")]
        metrics: String,
        #[arg(long)]
        per_query: bool,
        /// Also write `qid metric value` lines here
        #[arg(long)]
        tsv: Option<PathBuf>,
    },
    /// Restrict qrels to documents of a collection
    FilterDev {
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long)]
        collection_ids: PathBuf,
        /// Keep only the query ids listed in this file
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the drop counts as JSON here instead of stderr
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Validate or execute a pipeline config
    Pipeline {
        #[command(subcommand)]
        action: PipelineAction,
    },
    /// Write a synthetic collection with a seven-run pipeline config
    Synth {
        #[arg(long)]
        language: String,
        #[arg(long, default_value_t = 13)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 300)]
        num_docs: usize,
        #[arg(long, default_value_t = 12)]
        num_queries: usize,
    },
}

#[derive(Subcommand, Debug)]
enum PipelineAction {
    Run {
        config: PathBuf,
        /// Overrides the config's output_dir
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    Validate {
        config: PathBuf,
    },
}

#[derive(Args, Debug)]
struct RetrieveArgs {
    /// Sparse document vectors
    #[arg(long, required_unless_present = "index")]
    docs: Option<PathBuf>,
    /// Prebuilt index from `clirforge index`
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long)]
    queries: PathBuf,
    #[command(flatten)]
    run: RunOut,
}

#[derive(Args, Debug)]
struct RunOut {
    #[arg(long, default_value_t = 1000)]
    topk: usize,
    #[arg(long, default_value = "clirforge")]
    tag: String,
    /// Run file to write; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads().and_then(|()| dispatch(cli.command)) {
        eprintln!("error: {e:#}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .with_context(|| format!("{THREADS_ENV} must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()?;
    Ok(())
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Index { vectors, out } => {
            let set = read_file(&vectors, cio::load_sparse_vectors)?;
            let index = ImpactIndex::build(&set);
            index.write_json(BufWriter::new(create(&out)?))?;
            eprintln!(
                "indexed {} docs, {} postings",
                index.doc_count(),
                index.num_postings()
            );
        }
        Command::Retrieve(args) => {
            let index = load_index(&args)?;
            let queries = read_file(&args.queries, cio::load_sparse_vectors)?;
            check_topk(args.run.topk)?;
            let run = index.retrieve_run(&queries, args.run.topk, &args.run.tag);
            emit_run(&run, args.run.out.as_deref())?;
        }
        Command::Bm25Weigh {
            docs,
            queries,
            out_docs,
            out_queries,
            k1,
            b,
        } => {
            let counts = read_file(&docs, cio::load_token_counts)?;
            let (vectors, model) = bm25_weigh_corpus(&counts, Bm25Params { k1, b })?;
            cio::write_sparse_vectors(&vectors, BufWriter::new(create(&out_docs)?))?;
            if let (Some(q), Some(out)) = (queries, out_queries) {
                let qcounts = read_file(&q, cio::load_token_counts)?;
                let qvecs = model.weigh_queries(&qcounts);
                cio::write_sparse_vectors(&qvecs, BufWriter::new(create(&out)?))?;
            }
            eprintln!(
                "weighted {} docs (avgdl {:.2})",
                model.num_docs(),
                model.avgdl()
            );
        }
        Command::LateRetrieve { docs, queries, run } => {
            let set = read_file(&docs, cio::load_embedding_set)?;
            let qs = read_file(&queries, cio::load_embedding_set)?;
            check_topk(run.topk)?;
            let out = late_retrieve_run(&set, &qs, run.topk, &run.tag)?;
            emit_run(&out, run.out.as_deref())?;
        }
        Command::PrfRetrieve {
            base,
            prf_alpha,
            prf_beta,
            prf_docs,
            prf_term_cap,
        } => {
            let params = RocchioParams {
                alpha: prf_alpha,
                beta: prf_beta,
                fb_docs: prf_docs,
                term_cap: prf_term_cap,
            };
            params.validate()?;
            let Some(docs) = &base.docs else {
                bail!("prf-retrieve needs --docs for the feedback document vectors");
            };
            let vectors = read_file(docs, cio::load_sparse_vectors)?;
            let index = match &base.index {
                Some(path) => read_file(path, ImpactIndex::read_json)?,
                None => ImpactIndex::build(&vectors),
            };
            let queries = read_file(&base.queries, cio::load_sparse_vectors)?;
            check_topk(base.run.topk)?;
            let run = retrieve_run_with_prf(
                &index,
                &vectors,
                &queries,
                base.run.topk,
                &params,
                &base.run.tag,
            )?;
            emit_run(&run, base.run.out.as_deref())?;
        }
        Command::Fuse {
            members,
            weights,
            missing,
            tag,
            out,
        } => {
            let runs = members
                .iter()
                .map(|p| read_file(p, cio::parse_trec_run))
                .collect::<Result<Vec<Run>, _>>()?;
            let mut spec = FusionSpec::new(runs.iter().map(|r| r.tag().to_owned()).collect(), &tag);
            spec.weights = weights;
            spec.missing = missing;
            let fused = fuse(&runs, &spec)?;
            emit_run(&fused, out.as_deref())?;
        }
        Command::RerankMerge {
            candidate,
            scores,
            depth,
            tag,
            out,
        } => {
            let cand = read_file(&candidate, cio::parse_trec_run)?;
            let table = read_file(&scores, cio::load_rerank_scores)?;
            let mut merged =
                apply_rerank_scores(&cand, &RerankScores::new(table).with_depth(depth))?;
            if let Some(tag) = tag {
                merged.set_tag(tag);
            }
            emit_run(&merged, out.as_deref())?;
        }
        Command::Eval {
            run,
            qrels,
            metrics,
            per_query,
            tsv,
        } => {
            let metrics = parse_metric_list(&metrics)?;
            if metrics.is_empty() {
                bail!("no metrics requested");
            }
            let run = read_file(&run, cio::parse_trec_run)?;
            let qrels = read_file(&qrels, cio::parse_qrels)?;
            let report = eval::evaluate(&run, &qrels, &metrics);
            print!("{}", format_report(&report, per_query));
            if let Some(path) = tsv {
                fs::write(&path, format_report_tsv(&report))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::FilterDev {
            qrels,
            collection_ids,
            queries,
            out,
            report,
        } => {
            let q = read_file(&qrels, cio::parse_qrels)?;
            let ids = read_file(&collection_ids, cio::load_id_list)?;
            let keep: Option<BTreeSet<String>> = match &queries {
                Some(p) => Some(read_file(p, cio::load_id_list)?),
                None => None,
            };
            let (filtered, counts) = eval::filter_devset(&q, &ids, keep.as_ref())?;
            match &out {
                Some(path) => cio::write_qrels(&filtered, BufWriter::new(create(path)?))?,
                None => cio::write_qrels(&filtered, io::stdout().lock())?,
            }
            let json = serde_json::to_string_pretty(&counts)?;
            match report {
                Some(path) => fs::write(&path, json + "\n")
                    .with_context(|| format!("writing {}", path.display()))?,
                None => eprintln!("{json}"),
            }
        }
        Command::Pipeline { action } => return pipeline(action),
        Command::Synth {
            language,
            seed,
            out,
            num_docs,
            num_queries,
        } => {
            let mut spec = SynthSpec::new(language, seed);
            spec.num_docs = num_docs;
            spec.num_queries = num_queries;
            let config = generate(&spec, &out)?;
            println!("{}", config.display());
        }
    }
    Ok(())
}

fn pipeline(action: PipelineAction) -> Result<()> {
    match action {
        PipelineAction::Validate { config } => {
            let cfg = PipelineConfig::load(&config)?;
            let diags = validate_config(&cfg);
            for d in &diags {
                println!("{d}");
            }
            if !diags.is_empty() {
                bail!("{} problem(s) in {}", diags.len(), config.display());
            }
            println!("ok: {} stages", cfg.stages.len());
        }
        PipelineAction::Run { config, output_dir } => {
            let cfg = PipelineConfig::load(&config)?;
            let out = match output_dir {
                Some(dir) => run_pipeline_in(&cfg, &dir)?,
                None => run_pipeline(&cfg)?,
            };
            for (tag, path) in &out.outputs {
                println!("{tag}\t{}", path.display());
            }
            eprintln!("manifest: {}", out.manifest.display());
        }
    }
    Ok(())
}

fn load_index(args: &RetrieveArgs) -> Result<ImpactIndex> {
    Ok(match (&args.index, &args.docs) {
        (Some(path), _) => read_file(path, ImpactIndex::read_json)?,
        (None, Some(docs)) => ImpactIndex::build(&read_file(docs, cio::load_sparse_vectors)?),
        (None, None) => bail!("either --index or --docs is required"),
    })
}

fn check_topk(k: usize) -> Result<()> {
    if k == 0 {
        bail!("--topk must be at least 1");
    }
    Ok(())
}

fn create(path: &Path) -> Result<File> {
    File::create(path).with_context(|| format!("creating {}", path.display()))
}

fn emit_run(run: &Run, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(create(path)?);
            cio::write_trec_run(run, run.tag(), &mut w)?;
            w.flush()?;
        }
        None => cio::write_trec_run(run, run.tag(), io::stdout().lock())?,
    }
    Ok(())
}
