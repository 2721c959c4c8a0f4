use clirforge_bench::{qrels, rng, run};
use clirforge_core::eval::{evaluate, MetricSpec};
use clirforge_core::fusion::{apply_rerank_scores, fuse, FusionSpec, RerankScores};
use clirforge_core::io::{parse_trec_run, run_to_string, ScoreTable};
use criterion::{criterion_group, criterion_main, Criterion};
use rand::Rng;

fn fusion(c: &mut Criterion) {
    let mut r = rng(21);
    let members: Vec<_> = (0..4)
        .map(|i| run(&mut r, &format!("m{i}"), 50, 5_000, 1000))
        .collect();
    let spec = FusionSpec::new(
        members.iter().map(|m| m.tag().to_owned()).collect(),
        "fused",
    );
    c.bench_function("fuse 4 runs x 50 queries x 1000", |b| {
        b.iter(|| fuse(&members, &spec).unwrap())
    });

    let mut table = ScoreTable::new();
    for (qid, list) in members[0].lists() {
        for d in list.iter().take(100) {
            table
                .entry(qid.to_owned())
                .or_default()
                .insert(d.doc_id.clone(), r.gen_range(-8.0..8.0));
        }
    }
    let rr = RerankScores::new(table).with_depth(100);
    c.bench_function("rerank-merge depth 100", |b| {
        b.iter(|| apply_rerank_scores(&members[0], &rr).unwrap())
    });
}

fn eval_and_io(c: &mut Criterion) {
    let mut r = rng(22);
    let candidate = run(&mut r, "r", 50, 5_000, 1000);
    let judged = qrels(&mut r, 50, 5_000, 300);
    let metrics = MetricSpec::defaults();
    c.bench_function("evaluate 50 queries", |b| {
        b.iter(|| evaluate(&candidate, &judged, &metrics))
    });

    let text = run_to_string(&candidate);
    c.bench_function("parse 50k-line run", |b| {
        b.iter(|| parse_trec_run(text.as_bytes()).unwrap())
    });
    c.bench_function("write 50k-line run", |b| {
        b.iter(|| run_to_string(&candidate))
    });
}

criterion_group!(benches, fusion, eval_and_io);
criterion_main!(benches);
