mod common;

use tayfcs_core::data::{generate_synthetic, Dataset, Pattern, PlantedCombo, SyntheticSpec};
use tayfcs_core::lre::*;
use tayfcs_core::models::LrModel;
use tayfcs_core::tayscorer::ComboScore;
use tayfcs_core::Error;

fn data(seed: u64) -> (Dataset, Dataset) {
    let spec = SyntheticSpec {
        cardinalities: vec![4, 4, 6, 4, 4],
        planted: vec![
            PlantedCombo { fields: vec![0, 1], pattern: Pattern::XorParity, weight: 3.0 },
            PlantedCombo { fields: vec![2], pattern: Pattern::LookupTable, weight: 2.0 },
        ],
        bias: 0.0,
        noise: 0.0,
        records: 6000,
        seed,
    };
    let (tr, va, _) = common::splits(&generate_synthetic(&spec).unwrap(), seed);
    (tr, va)
}

fn ranked(pairs: &[[usize; 2]]) -> Vec<ComboScore> {
    pairs
        .iter()
        .enumerate()
        .map(|(i, p)| ComboScore { fields: p.to_vec(), score: (pairs.len() - i) as f64 })
        .collect()
}

#[test]
fn disabled_elimination_keeps_top_window() {
    let (tr, va) = data(1);
    let list = ranked(&[[0, 1], [2, 3], [3, 4], [1, 2], [0, 4]]);
    let cfg = SelectionConfig { k: 2, window_size: 3, max_iterations: 0, ..SelectionConfig::default() };
    let art = run_lre(&list, &tr, &va, &cfg, &Sequential).unwrap();
    assert!(art.iterations.is_empty());
    assert_eq!(art.final_window.entries, vec![0, 1, 2]);
    let names: Vec<_> = art.selected.iter().map(|s| s.meta.name.as_str()).collect();
    assert_eq!(names, ["f0×f1", "f2×f3"]);
    assert!(!art.short);
}

#[test]
fn informative_pair_has_positive_gain_and_surrogate_is_frozen() {
    for seed in 0..3 {
        let (tr, va) = data(seed);
        let list = ranked(&[[3, 4], [0, 1], [1, 3]]);
        let cfg = SelectionConfig { k: 1, window_size: 3, seed, ..SelectionConfig::default() };
        let art = run_lre(&list, &tr, &va, &cfg, &Sequential).unwrap();
        let round = &art.iterations[0];
        let xor = round.gains.entries.iter().find(|e| e.name == "f0×f1").unwrap();
        assert!(xor.gain > 0.05, "seed {seed}: {}", xor.gain);
        let sums: Vec<_> = round.gains.entries.iter().map(|e| e.surrogate_checksum).collect();
        assert!(sums.windows(2).all(|w| w[0] == w[1]));
        for e in &round.gains.entries {
            assert_eq!(e.gain <= 0.0, round.evicted.contains(&e.candidate));
        }
        assert!(art.final_window.entries.contains(&1));
    }
}

#[test]
fn window_bound_and_monotone_cursor() {
    let (tr, va) = data(4);
    let list = ranked(&[[3, 4], [1, 3], [0, 1], [0, 3], [1, 4], [0, 4], [2, 3], [2, 4]]);
    let cfg = SelectionConfig { k: 2, window_size: 3, max_iterations: 5, seed: 4, ..SelectionConfig::default() };
    let art = run_lre(&list, &tr, &va, &cfg, &Sequential).unwrap();
    let mut seen = std::collections::BTreeSet::new();
    let mut window = vec![0, 1, 2];
    seen.extend(window.iter().copied());
    for r in &art.iterations {
        assert!(r.gains.entries.len() <= 3);
        window.retain(|c| !r.evicted.contains(c));
        for a in &r.admitted {
            assert!(seen.insert(*a), "candidate {a} admitted twice");
            window.push(*a);
        }
        assert!(window.len() <= 3);
    }
    assert_eq!(window, art.final_window.entries);
    let ranks: Vec<_> = art.selected.iter().map(|s| s.rank).collect();
    assert!(ranks.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn exhausted_list_sets_short_flag() {
    let (tr, va) = data(2);
    // three noise pairs and nothing else to refill from
    let list = ranked(&[[3, 4], [0, 3], [1, 4]]);
    let cfg = SelectionConfig { k: 3, window_size: 3, max_iterations: 3, seed: 2, ..SelectionConfig::default() };
    let art = run_lre(&list, &tr, &va, &cfg, &Sequential).unwrap();
    let evicted: usize = art.iterations.iter().map(|r| r.evicted.len()).sum();
    assert_eq!(art.short, evicted > 0);
    assert_eq!(art.selected.len(), 3 - evicted);
}

#[test]
fn zero_weight_feature_has_zero_gain() {
    let (tr, va) = data(3);
    let (va_aug, metas) = tayfcs_core::combiner::materialize(
        &va,
        &[tayfcs_core::combiner::CombinationSpec::new(vec![0, 1], tr.fields()).unwrap()],
        1000,
    )
    .unwrap();
    let active: Vec<usize> = (0..va_aug.num_fields()).collect();
    let mut m = LrModel::zeros(va_aug.fields(), &active).unwrap();
    m.bias = 0.3;
    for v in 0..7 {
        m.weights[2].row_mut(v)[0] = 0.1 * f64::from(v);
    }
    let col = metas[0].column;
    let g = shuffle_gain(&m, &va_aug, &[col], col, 9).unwrap();
    assert!(g.abs() <= 1e-12);
    assert_eq!(shuffle_gain(&m, &va_aug, &[col], 2, 9).unwrap_err(), Error::NotInWindow(2));
}

#[test]
fn selection_is_deterministic() {
    let (tr, va) = data(5);
    let list = ranked(&[[3, 4], [0, 1], [1, 3], [0, 2]]);
    let cfg = SelectionConfig { k: 2, window_size: 2, max_iterations: 2, seed: 5, ..SelectionConfig::default() };
    let a = run_lre(&list, &tr, &va, &cfg, &Sequential).unwrap();
    let b = run_lre(&list, &tr, &va, &cfg, &Sequential).unwrap();
    assert_eq!(a, b);
}

#[test]
fn ranked_list_must_name_known_fields() {
    let (tr, va) = data(6);
    let bad = vec![ComboScore { fields: vec![0, 9], score: 1.0 }];
    let cfg = SelectionConfig { k: 1, window_size: 1, ..SelectionConfig::default() };
    assert!(run_lre(&bad, &tr, &va, &cfg, &Sequential).is_err());
}
