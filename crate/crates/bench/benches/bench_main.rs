use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use curio_core::causality::{granger_pairwise, scan_group, BehaviorSeries, ScanOptions, SeriesKey};
use curio_core::pattern::{build_windows, mine, WindowOptions, DEFAULT_MAX_PATTERN_ITEMS};
use curio_core::rating::{icc, run_rating_pipeline, RatingOptions};
use curio_core::simulate::{generate, simulate_judgments, Coupling, ScenarioConfig};
use curio_core::stats::f_sf;

fn scenario() -> ScenarioConfig {
    ScenarioConfig {
        seed: 11,
        default_base_rate: 0.04,
        couplings: vec![Coupling {
            src_member: 0,
            src_behavior: "uncertainty".into(),
            tgt_member: 1,
            tgt_behavior: "uncertainty".into(),
            lag: 1,
            strength: 0.8,
        }],
        ..ScenarioConfig::default()
    }
}

fn bench_mining(c: &mut Criterion) {
    let (corpus, _) = generate(&scenario()).unwrap();
    let windows = build_windows(&corpus, "g01", "m1", WindowOptions::default()).unwrap();
    c.bench_function("mine/180 slices, min utility 35", |b| {
        b.iter(|| mine(black_box(&windows), 35, DEFAULT_MAX_PATTERN_ITEMS))
    });
    c.bench_function("mine/180 slices, min utility 10", |b| {
        b.iter(|| mine(black_box(&windows), 10, DEFAULT_MAX_PATTERN_ITEMS))
    });
}

fn bench_causality(c: &mut Criterion) {
    let cfg = scenario();
    let (corpus, _) = generate(&cfg).unwrap();
    c.bench_function("scan_group/3 members", |b| {
        b.iter(|| scan_group(black_box(&corpus), "g01", &ScanOptions::default()).unwrap())
    });

    let y: Vec<f64> = (0..180).map(|t| ((t * 7919) % 13) as f64).collect();
    let x: Vec<f64> = (0..180)
        .map(|t| {
            if t == 0 {
                0.0
            } else {
                y[t - 1] + ((t * 31) % 5) as f64
            }
        })
        .collect();
    let (ys, xs) = (
        BehaviorSeries::new("g", SeriesKey::new("m1", "joy"), y),
        BehaviorSeries::new("g", SeriesKey::new("m2", "joy"), x),
    );
    c.bench_function("granger_pairwise/180", |b| {
        b.iter(|| granger_pairwise(black_box(&ys), black_box(&xs), 6))
    });
    c.bench_function("f_sf", |b| b.iter(|| f_sf(black_box(4.96), 1.0, 10.0)));
}

fn bench_rating(c: &mut Criterion) {
    let cfg = scenario();
    let (corpus, _) = generate(&cfg).unwrap();
    let judgments = simulate_judgments(&corpus, &cfg);
    c.bench_function("rating pipeline/90 HITs", |b| {
        b.iter(|| run_rating_pipeline(black_box(&judgments), RatingOptions::default()).unwrap())
    });
    let matrix: Vec<Vec<f64>> = (0..200)
        .map(|i| (0..4).map(|j| ((i * 3 + j * 5) % 3) as f64).collect())
        .collect();
    c.bench_function("icc/200x4", |b| b.iter(|| icc(black_box(&matrix))));
}

criterion_group!(benches, bench_mining, bench_causality, bench_rating);
criterion_main!(benches);
