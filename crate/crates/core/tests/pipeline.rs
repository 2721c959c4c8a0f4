use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clirforge_core::io::{parse_trec_run, read_file};
use clirforge_core::pipeline::{
    run_pipeline_in, sha256, validate_config, PipelineConfig, MANIFEST_FILE,
};
use clirforge_core::Error;
use serde_json::{json, Value};

fn config(value: Value, base: &Path) -> PipelineConfig {
    PipelineConfig::from_json(&value.to_string(), base).unwrap()
}

fn write_small_collection(dir: &Path) {
    fs::write(
        dir.join("docs.tsv"),
        "d1\t{\"a\": 2.0, \"b\": 1.0}\n\
         d2\t{\"b\": 3.0}\n\
         d3\t{\"a\": 0.5, \"c\": 4.0}\n\
         d4\t{\"c\": 1.0, \"b\": 0.25}\n",
    )
    .unwrap();
    fs::write(
        dir.join("queries.tsv"),
        "q1\t{\"a\": 1.0}\nq2\t{\"b\": 1.0, \"c\": 0.5}\n",
    )
    .unwrap();
}

fn small_inputs() -> Value {
    json!({
        "docs": { "path": "docs.tsv", "kind": "sparse-vectors" },
        "queries": { "path": "queries.tsv", "kind": "sparse-vectors" }
    })
}

fn bundled(language: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../recipes/neuclir-synthetic")
        .join(language)
        .join("pipeline.json")
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

#[test]
fn minimal_retrieve_config_is_valid() {
    let cfg = config(
        json!({
            "language": "fa",
            "inputs": small_inputs(),
            "stages": [
                { "op": "retrieve", "output_tag": "splade_{language}",
                  "params": { "docs": "docs", "queries": "queries" } }
            ]
        }),
        Path::new("."),
    );
    assert!(validate_config(&cfg).is_empty());
}

#[test]
fn undeclared_input_is_named() {
    let cfg = config(
        json!({
            "language": "fa",
            "inputs": small_inputs(),
            "stages": [
                { "op": "retrieve", "output_tag": "splade_fa",
                  "params": { "docs": "splade_vecs", "queries": "queries" } }
            ]
        }),
        Path::new("."),
    );
    let diags = validate_config(&cfg);
    assert_eq!(diags.len(), 1, "{diags:?}");
    assert_eq!(diags[0].stage, "splade_fa");
    assert!(diags[0].to_string().contains("splade_vecs"));
}

#[test]
fn duplicate_output_tag() {
    let stage = json!({ "op": "retrieve", "output_tag": "run",
                        "params": { "docs": "docs", "queries": "queries" } });
    let cfg = config(
        json!({ "language": "fa", "inputs": small_inputs(), "stages": [stage.clone(), stage] }),
        Path::new("."),
    );
    let diags = validate_config(&cfg);
    assert!(!diags.is_empty());
    assert!(
        diags.iter().any(|d| d.reason.contains("duplicate")),
        "{diags:?}"
    );
}

#[test]
fn cycles_and_bad_params_are_reported() {
    let cfg = config(
        json!({
            "language": "fa",
            "inputs": {},
            "stages": [
                { "op": "fuse", "output_tag": "x", "params": { "members": ["y"] } },
                { "op": "fuse", "output_tag": "y", "params": { "members": ["x"] } },
                { "op": "retrieve", "output_tag": "z", "params": { "topk": "many" } }
            ]
        }),
        Path::new("."),
    );
    let diags = validate_config(&cfg);
    let text: Vec<String> = diags.iter().map(ToString::to_string).collect();
    assert!(text.iter().any(|d| d.contains("cycle")), "{text:?}");
    assert!(diags.iter().any(|d| d.stage == "z"), "{text:?}");
}

#[test]
fn prf_without_feedback_weight_matches_plain_retrieval() {
    let tmp = tempfile::tempdir().unwrap();
    write_small_collection(tmp.path());
    let cfg = config(
        json!({
            "language": "fa",
            "inputs": small_inputs(),
            "stages": [
                { "op": "retrieve", "output_tag": "plain",
                  "params": { "docs": "docs", "queries": "queries" } },
                { "op": "prf-retrieve", "output_tag": "prf",
                  "params": { "docs": "docs", "queries": "queries", "beta": 0.0 } }
            ]
        }),
        tmp.path(),
    );
    let out = run_pipeline_in(&cfg, &tmp.path().join("runs")).unwrap();
    let plain = read_file(&out.outputs["plain"], parse_trec_run).unwrap();
    let prf = read_file(&out.outputs["prf"], parse_trec_run).unwrap();
    assert_eq!(plain.tag(), "plain");
    assert_eq!(prf.tag(), "prf");
    assert!(!plain.is_empty());
    assert_eq!(plain.with_tag("prf"), prf);
}

#[test]
fn monolingual_ensemble_fuses_four_first_stage_runs() {
    let cfg = PipelineConfig::load(&bundled("fa")).unwrap();
    let stage_of = |tag: &str| {
        cfg.stages
            .iter()
            .find(|s| cfg.expand(&s.output_tag) == tag)
            .unwrap_or_else(|| panic!("no stage `{tag}`"))
    };
    let mono = stage_of("NLE_fa_mono");
    assert_eq!(mono.op, "fuse");
    let members: Vec<String> = mono.params["members"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| cfg.expand(m.as_str().unwrap()))
        .collect();
    assert_eq!(
        members,
        [
            "bm25_fa",
            "splade_fa_plain",
            "splade_fa_ht",
            "colbert_fa_ht"
        ]
    );
    let ops: Vec<&str> = members.iter().map(|m| stage_of(m).op.as_str()).collect();
    assert_eq!(
        ops,
        ["retrieve", "retrieve", "prf-retrieve", "late-retrieve"]
    );
}

#[test]
fn stage_declaration_order_does_not_matter() {
    let cfg = PipelineConfig::load(&bundled("ru")).unwrap();
    let mut shuffled = cfg.clone();
    shuffled.stages.reverse();
    let n = shuffled.stages.len();
    shuffled.stages.swap(0, n / 2);

    let tmp = tempfile::tempdir().unwrap();
    run_pipeline_in(&cfg, &tmp.path().join("a")).unwrap();
    run_pipeline_in(&shuffled, &tmp.path().join("b")).unwrap();
    assert_eq!(
        read_tree(&tmp.path().join("a")),
        read_tree(&tmp.path().join("b"))
    );
}

#[test]
fn manifest_digests_match_files() {
    let cfg = PipelineConfig::load(&bundled("fa")).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let out = run_pipeline_in(&cfg, tmp.path()).unwrap();
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join(MANIFEST_FILE)).unwrap()).unwrap();
    let stages = manifest["stages"].as_array().unwrap();
    assert_eq!(stages.len(), cfg.stages.len());
    let mut checked = 0;
    for stage in stages {
        for (file, digest) in stage["outputs"].as_object().unwrap() {
            let bytes = fs::read(tmp.path().join(file)).unwrap();
            assert_eq!(digest.as_str().unwrap(), sha256(&bytes));
            checked += 1;
        }
        assert!(stage["params"].is_object());
    }
    assert!(checked > stages.len());
    for (tag, path) in &out.outputs {
        if path.extension().is_some_and(|e| e == "run") {
            let run = read_file(path, parse_trec_run).unwrap();
            assert_eq!(run.tag(), tag);
        }
    }
}

#[test]
fn failed_stage_is_named_and_outputs_removed() {
    let tmp = tempfile::tempdir().unwrap();
    write_small_collection(tmp.path());
    fs::write(tmp.path().join("rr.txt"), "q1 nowhere 3.0\n").unwrap();
    let mut inputs = small_inputs();
    inputs["rr"] = json!({ "path": "rr.txt", "kind": "rerank-scores" });
    let cfg = config(
        json!({
            "language": "fa",
            "inputs": inputs,
            "stages": [
                { "op": "retrieve", "output_tag": "first",
                  "params": { "docs": "docs", "queries": "queries" } },
                { "op": "rerank-merge", "output_tag": "reranked",
                  "params": { "candidate": "first", "scores": "rr" } }
            ]
        }),
        tmp.path(),
    );
    let out_dir = tmp.path().join("runs");
    let err = run_pipeline_in(&cfg, &out_dir).unwrap_err();
    match &err {
        Error::Stage { stage, source } => {
            assert_eq!(stage, "reranked");
            assert!(source.to_string().contains("nowhere"));
        }
        other => panic!("unexpected error {other}"),
    }
    assert!(read_tree(&out_dir).is_empty());
}
