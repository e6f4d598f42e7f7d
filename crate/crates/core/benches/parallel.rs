use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use trajprune_core::experiment::{held_out, run_compare, CompareConfig, PruneMethod};
use trajprune_core::metrics::score_dataset_with;
use trajprune_core::prune::rank_samples_with;
use trajprune_core::trainer::{synth_dataset, SyntheticSpec, TrainConfig};
use trajprune_core::{EpochSelector, Execution, Metric, TrajectoryLog};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn log(n: usize, c: usize, t: usize) -> TrajectoryLog {
    let mut r = Xoshiro256PlusPlus::seed_from_u64(1);
    let labels = (0..n).map(|_| r.gen_range(0..c as u32)).collect();
    let logits = (0..n * c * t).map(|_| r.gen_range(-4.0f32..4.0)).collect();
    TrajectoryLog::from_parts((0..n as u64).collect(), labels, c, logits, 1).unwrap()
}

fn scoring(cr: &mut Criterion) {
    let log = log(20_000, 10, 12);
    let mut g = cr.benchmark_group("score_dataset");
    for metric in [Metric::Entropy, Metric::Aum, Metric::Forgetting] {
        let sel = trajprune_core::experiment::default_selector(metric, log.n_epochs);
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(metric.name(), name), &exec, |b, &exec| {
                b.iter(|| score_dataset_with(black_box(&log), metric, &sel, exec).unwrap())
            });
        }
    }
    g.finish();
}

fn ranking(cr: &mut Criterion) {
    let log = log(100_000, 4, 2);
    let table = score_dataset_with(&log, Metric::El2n, &EpochSelector::Single(2), Execution::Sequential).unwrap();
    let mut g = cr.benchmark_group("rank_samples");
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| rank_samples_with(black_box(&table), exec).unwrap())
        });
    }
    g.finish();
}

fn compare(cr: &mut Criterion) {
    let spec = SyntheticSpec::separated(3, 8, 100, 1.0, 3.0, 5);
    let train = synth_dataset(&spec).unwrap();
    let test = held_out(&spec).unwrap();
    let base = TrainConfig {
        epochs: 4,
        ..TrainConfig::default()
    };
    let cfg = CompareConfig {
        methods: vec![PruneMethod::Metric(Metric::Entropy), PruneMethod::Random],
        rates: vec![0.0, 0.2, 0.4],
        seeds: vec![0, 1],
        score_run: base,
        retrain: base,
        selector: None,
    };
    let mut g = cr.benchmark_group("run_compare");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_compare(&train, &test, &cfg, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, scoring, ranking, compare);
criterion_main!(benches);
