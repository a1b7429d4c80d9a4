use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use crex_core::analysis::{compute_median_deviation, rpy_histogram, top_crs_for_rpy};
use crex_core::cre::{load_cre, save_cre, WorkingState};
use crex_core::matching::SimilarityConfig;
use crex_core::synth::Synth;

fn spectrum(c: &mut Criterion) {
    let ds = Synth::new(9).clustered_dataset(5000, 3, 1000);
    c.bench_function("rpy_histogram", |b| {
        b.iter(|| rpy_histogram(black_box(&ds)))
    });

    let counts: Vec<u64> = (0..400u64).map(|i| (i * 37) % 101).collect();
    c.bench_function("median_deviation_400_years", |b| {
        b.iter(|| compute_median_deviation(black_box(&counts)))
    });

    let year = ds.crs.values().find_map(|c| c.rpy).unwrap();
    c.bench_function("top_crs_for_rpy", |b| {
        b.iter(|| top_crs_for_rpy(black_box(&ds), year, 20).unwrap().len())
    });
}

fn persistence(c: &mut Criterion) {
    let ds = Synth::new(13).clustered_dataset(2000, 3, 400);
    let state = WorkingState::new(ds, SimilarityConfig::default());
    let mut bytes = Vec::new();
    save_cre(&state, &mut bytes).unwrap();

    let mut g = c.benchmark_group("cre");
    g.sample_size(20);
    g.bench_function("save", |b| {
        b.iter(|| {
            let mut out = Vec::with_capacity(bytes.len());
            save_cre(black_box(&state), &mut out).unwrap();
            out
        })
    });
    g.bench_function("load", |b| {
        b.iter(|| load_cre(black_box(bytes.as_slice())).unwrap())
    });
    g.finish();
}

criterion_group!(benches, spectrum, persistence);
criterion_main!(benches);
