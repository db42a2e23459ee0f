use std::hint::black_box;
use std::path::PathBuf;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use swnabc::detector::default_firing_cap;
use swnabc::eventlog::parse_csv;
use swnabc::petrinet::parse_pnml;
use swnabc::{
    emd, estimate_language, exact_language, levenshtein, run_detector, DiscreteDistribution,
    EstimateConfig, GroundDistance, LogLanguage, OracleConfig, StochasticWorkflowNet,
};

fn running_example() -> (StochasticWorkflowNet, LogLanguage) {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data");
    let net =
        parse_pnml(&std::fs::read_to_string(data.join("running-example.pnml")).unwrap()).unwrap();
    let log =
        parse_csv(&std::fs::read_to_string(data.join("running-example.csv")).unwrap()).unwrap();
    (net, log)
}

fn detector(c: &mut Criterion) {
    let (net, lang) = running_example();
    let cap = default_firing_cap(&net, &lang);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    c.bench_function("detector_run", |b| {
        b.iter(|| run_detector(&net, &lang, cap, &mut rng).unwrap().outcome)
    });

    let mut group = c.benchmark_group("estimate_language");
    group.sample_size(10);
    for width in [0.1, 0.01] {
        let cfg = EstimateConfig {
            width,
            seed: 7,
            workers: 1,
            ..EstimateConfig::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(width), &cfg, |b, cfg| {
            b.iter(|| estimate_language(&net, &lang, cfg).unwrap().runs_total)
        });
    }
    group.finish();
}

fn oracle(c: &mut Criterion) {
    let (net, lang) = running_example();
    let cfg = OracleConfig::default();
    c.bench_function("exact_language_f64", |b| {
        b.iter(|| exact_language::<f64>(&net, &lang, &cfg).unwrap().nodes)
    });
}

fn word(len: usize, seed: usize) -> Vec<char> {
    (0..len)
        .map(|i| (b'a' + ((i * 7 + seed) % 5) as u8) as char)
        .collect()
}

/// Base-5 digits of `i` as letters, so traces are pairwise distinct.
fn distinct_trace(mut i: usize) -> Vec<String> {
    let mut t = vec![String::from("a")];
    while i > 0 {
        t.push(((b'a' + (i % 5) as u8) as char).to_string());
        i /= 5;
    }
    t
}

fn distance(c: &mut Criterion) {
    let (x, y) = (word(40, 0), word(40, 3));
    c.bench_function("levenshtein_40", |b| {
        b.iter(|| levenshtein(black_box(&x), black_box(&y)))
    });

    let mut group = c.benchmark_group("emd");
    for n in [4, 16, 64] {
        let traces: Vec<Vec<String>> = (0..n).map(distinct_trace).collect();
        let dist = |shift: usize| {
            let raw: Vec<f64> = (0..n).map(|i| 1.0 + ((i + shift) % 5) as f64).collect();
            let total: f64 = raw.iter().sum();
            let points = traces
                .iter()
                .cloned()
                .zip(raw.into_iter().map(|r| r / total))
                .collect();
            DiscreteDistribution::new(points).unwrap()
        };
        let (p, q) = (dist(0), dist(2));
        group.bench_with_input(BenchmarkId::from_parameter(n), &(p, q), |b, (p, q)| {
            b.iter(|| emd(p, q, GroundDistance::Normalized).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, detector, oracle, distance);
criterion_main!(benches);
