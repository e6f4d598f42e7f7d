use std::collections::{HashMap, HashSet};

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use trajprune_core::manifest::{Manifest, ManifestEntry};
use trajprune_core::metrics::{ensemble_average, score_dataset, EpochSelector, Metric};
use trajprune_core::prune::{apply_plan, make_prune_plan, rank_samples, rank_samples_with};
use trajprune_core::purify::{correct_labels, detect_outliers, purify_pipeline, PurifyConfig, Verdict};
use trajprune_core::store::{decode, encode_binary, validate, IssueCode, TrajectoryLog};
use trajprune_core::{Execution, ScoreTable};

fn build_log(seed: u64, n: usize, c: usize, t: usize, scale: f32) -> TrajectoryLog {
    let mut r = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut ids: Vec<u64> = (0..n as u64).map(|i| 1000 + 3 * i).collect();
    ids.shuffle(&mut r);
    let labels = (0..n).map(|_| r.gen_range(0..c as u32)).collect();
    let logits = (0..n * c * t).map(|_| r.gen_range(-scale..scale)).collect();
    TrajectoryLog::from_parts(ids, labels, c, logits, seed).unwrap()
}

fn arb_log() -> impl Strategy<Value = TrajectoryLog> {
    (any::<u64>(), 1usize..40, 2usize..6, 1usize..6, prop::sample::select(vec![0.1f32, 1.0, 6.0]))
        .prop_map(|(seed, n, c, t, scale)| build_log(seed, n, c, t, scale))
}

/// The same samples in a different order.
fn reorder(log: &TrajectoryLog, order: &[usize]) -> TrajectoryLog {
    let (n, c) = (log.n_samples(), log.n_classes);
    let mut logits = Vec::with_capacity(log.logits.len());
    for t in 1..=log.n_epochs {
        for &i in order {
            logits.extend_from_slice(log.row(t, i));
        }
    }
    assert_eq!(logits.len(), n * c * log.n_epochs);
    TrajectoryLog::from_parts(
        order.iter().map(|&i| log.sample_ids[i]).collect(),
        order.iter().map(|&i| log.labels[i]).collect(),
        c,
        logits,
        log.run_seed,
    )
    .unwrap()
}

fn by_id(table: &ScoreTable) -> HashMap<u64, f64> {
    table.sample_ids.iter().copied().zip(table.scores.iter().copied()).collect()
}

fn entropy_table(log: &TrajectoryLog) -> ScoreTable {
    score_dataset(log, Metric::Entropy, &EpochSelector::EveryK(1)).unwrap()
}

proptest! {
    #[test]
    fn scores_do_not_depend_on_sample_order(log in arb_log(), seed in any::<u64>()) {
        let mut order: Vec<usize> = (0..log.n_samples()).collect();
        order.shuffle(&mut Xoshiro256PlusPlus::seed_from_u64(seed));
        let shuffled = reorder(&log, &order);
        for metric in Metric::ALL {
            let sel = match metric {
                Metric::El2n => EpochSelector::Single(log.n_epochs),
                _ => EpochSelector::EveryK(1),
            };
            let a = score_dataset(&log, metric, &sel).unwrap();
            let b = score_dataset(&shuffled, metric, &sel).unwrap();
            prop_assert_eq!(by_id(&a), by_id(&b));
            prop_assert_eq!(rank_samples(&a).unwrap().sample_ids, rank_samples(&b).unwrap().sample_ids);
        }
    }

    #[test]
    fn outlier_set_grows_with_delta(log in arb_log(), d1 in 0.01f64..0.99, d2 in 0.01f64..0.99) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let table = entropy_table(&log);
        let small: HashSet<u64> = detect_outliers(&table, lo).unwrap().into_iter().collect();
        let large: HashSet<u64> = detect_outliers(&table, hi).unwrap().into_iter().collect();
        prop_assert!(small.is_subset(&large));
    }

    #[test]
    fn corrections_are_idempotent(log in arb_log()) {
        let table = entropy_table(&log);
        let fixes = correct_labels(&log, &table).unwrap();
        let mut relabeled = log.clone();
        for f in &fixes {
            let i = relabeled.index_of(f.sample_id).unwrap();
            prop_assert_eq!(relabeled.labels[i], f.old_label);
            relabeled.labels[i] = f.new_label;
        }
        let again = correct_labels(&relabeled, &entropy_table(&relabeled)).unwrap();
        prop_assert!(again.is_empty(), "{} corrections after applying", again.len());
    }

    #[test]
    fn purification_plan_assigns_one_verdict_per_sample(
        log in arb_log(),
        delta in 0.01f64..0.99,
        rate in 0.0f64..1.0,
        correct in any::<bool>(),
        outliers in any::<bool>(),
    ) {
        let cfg = PurifyConfig { delta, prune_rate: rate, enable_correction: correct, enable_outlier_removal: outliers };
        let plan = purify_pipeline(&log, &entropy_table(&log), &cfg).unwrap();
        prop_assert_eq!(plan.entries.len(), log.n_samples());
        let ids: HashSet<u64> = plan.entries.iter().map(|e| e.sample_id).collect();
        prop_assert_eq!(ids, log.sample_ids.iter().copied().collect::<HashSet<_>>());
        let removed = plan.entries.iter().filter(|e| e.verdict.is_removal()).count();
        prop_assert_eq!(removed, plan.counts.total_removed());
        if !outliers {
            prop_assert_eq!(plan.counts.n_outliers, 0);
        }
        if !correct {
            prop_assert_eq!(plan.counts.n_corrected, 0);
        }
        // Every easy-pruned sample is at least as confident as every kept one.
        let max_pruned = plan.with_verdict(|v| v == Verdict::PruneEasy).map(|e| e.entropy).fold(f64::NEG_INFINITY, f64::max);
        let min_kept = plan.with_verdict(|v| !v.is_removal()).map(|e| e.entropy).fold(f64::INFINITY, f64::min);
        prop_assert!(max_pruned <= min_kept);
    }

    #[test]
    fn applying_a_prune_plan_keeps_manifest_order(log in arb_log(), rate in 0.0f64..1.0) {
        let manifest = Manifest {
            entries: log.sample_ids.iter().zip(&log.labels).map(|(&id, &label)| ManifestEntry {
                sample_id: id,
                label,
                payload_ref: format!("img/{id}.png"),
                corrected: None,
            }).collect(),
        };
        let plan = make_prune_plan(&rank_samples(&entropy_table(&log)).unwrap(), rate).unwrap();
        let out = apply_plan(&manifest, &plan).unwrap();
        let removed: HashSet<u64> = plan.removed.iter().copied().collect();
        let expected: Vec<u64> = manifest.ids().filter(|id| !removed.contains(id)).collect();
        prop_assert_eq!(out.ids().collect::<Vec<_>>(), expected);
    }

    #[test]
    fn parallel_and_sequential_rankings_agree(log in arb_log()) {
        let table = entropy_table(&log);
        let a = rank_samples_with(&table, Execution::Sequential).unwrap();
        let b = rank_samples_with(&table, Execution::default()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn ensemble_of_one_table_is_that_table(log in arb_log()) {
        let table = score_dataset(&log, Metric::Aum, &EpochSelector::EveryK(1)).unwrap();
        let avg = ensemble_average(std::slice::from_ref(&table)).unwrap();
        prop_assert_eq!(avg.scores, table.scores);
    }

    #[test]
    fn binary_encoding_round_trips(log in arb_log()) {
        let mut bytes = Vec::new();
        encode_binary(&log, &mut bytes).unwrap();
        prop_assert_eq!(decode(&bytes).unwrap(), log);
    }

    #[test]
    fn validation_reports_every_planted_violation(
        log in arb_log(),
        bad_labels in prop::collection::hash_set(0usize..40, 0..5),
        bad_cells in prop::collection::hash_set((0usize..40, 0usize..6), 0..6),
        dup in any::<bool>(),
    ) {
        let mut broken = log.clone();
        let (n, c, t) = (log.n_samples(), log.n_classes, log.n_epochs);
        let labels: HashSet<usize> = bad_labels.into_iter().filter(|&i| i < n).collect();
        for &i in &labels {
            broken.labels[i] = c as u32 + i as u32;
        }
        let cells: HashSet<(usize, usize)> = bad_cells.into_iter().filter(|&(i, e)| i < n && e < t).collect();
        for &(i, e) in &cells {
            broken.logits[(e * n + i) * c] = f32::NAN;
        }
        let dups = usize::from(dup && n > 1);
        if dups == 1 {
            broken.sample_ids[n - 1] = broken.sample_ids[0];
        }
        let report = validate(&broken);
        prop_assert_eq!(report.count(IssueCode::LabelOutOfRange), labels.len());
        prop_assert_eq!(report.count(IssueCode::NonFinite), cells.len());
        prop_assert_eq!(report.count(IssueCode::DuplicateSampleId), dups);
        prop_assert_eq!(report.issues.len(), labels.len() + cells.len() + dups);
        prop_assert_eq!(report.ok, report.issues.is_empty());
    }
}
