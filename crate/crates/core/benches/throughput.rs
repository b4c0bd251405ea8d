use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use currsched_core::corpus::{build_freq_table_with, Corpus, FreqTables, Side};
use currsched_core::difficulty::{score_word_freq_rank_with, RankMode, Scope};
use currsched_core::par::Exec;
use currsched_core::sharding::jenks_breaks_with;
use currsched_core::synth::toy_bitext;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn freq_tables(c: &mut Criterion) {
    let (src, tgt) = toy_bitext(20_000, 5_000, 1);
    let corpus = Corpus::from_texts(&src, &tgt).unwrap();
    let mut group = c.benchmark_group("freq_table");
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| build_freq_table_with(black_box(&corpus), Side::Source, exec).unwrap())
        });
    }
    group.finish();
}

fn word_freq_scoring(c: &mut Criterion) {
    let (src, tgt) = toy_bitext(20_000, 5_000, 2);
    let corpus = Corpus::from_texts(&src, &tgt).unwrap();
    let tables = FreqTables::build(&corpus).unwrap();
    let mut group = c.benchmark_group("avg_wfr_both");
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| {
                score_word_freq_rank_with(black_box(&corpus), Scope::Both, RankMode::Avg, &tables, exec)
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn jenks(c: &mut Criterion) {
    let mut group = c.benchmark_group("jenks_k5");
    group.sample_size(10);
    for n in [1_000usize, 4_000] {
        // Irrational stride keeps every value distinct.
        let values: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.618_033_988_7).fract() * 100.0).collect();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &values, |b, v| {
                b.iter(|| jenks_breaks_with(black_box(v), 5, exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, freq_tables, word_freq_scoring, jenks);
criterion_main!(benches);
