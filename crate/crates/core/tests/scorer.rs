mod common;

use tayfcs_core::data::Dataset;
use tayfcs_core::models::{DnnConfig, DnnModel};
use tayfcs_core::nn::{train, AdamConfig, SignalTarget, TrainConfig};
use tayfcs_core::tayscorer::*;
use tayfcs_core::Error;

fn trained(fields: usize, dim: usize, records: usize, seed: u64) -> (DnnModel, Dataset) {
    let (tr, va, _) = common::xor_splits(fields, records, seed);
    let active: Vec<usize> = (0..fields).collect();
    let mut m = DnnModel::new(tr.fields(), &active, &DnnConfig { embedding_dim: dim, hidden: vec![8], seed }).unwrap();
    let cfg = TrainConfig {
        max_epochs: 3,
        batch_size: 32,
        adam: AdamConfig { lr: 0.01, ..AdamConfig::default() },
        patience: 2,
        seed,
    };
    train(&mut m, &tr, &va, &cfg).unwrap();
    (m, va)
}

fn naive_pair_scores(model: &DnnModel, x0: &ExpansionPoint, ds: &Dataset) -> Vec<((usize, usize), f64)> {
    let f = model.fields().len();
    let mut per_record = Vec::new();
    for r in 0..ds.len() {
        let mut c = BackwardCounter::default();
        per_record.push(field_signals(model, x0, ds, &[r], SignalTarget::Loss, &mut c).unwrap().values);
    }
    let mut out = Vec::new();
    for i in 0..f {
        for j in i + 1..f {
            let mut sum = 0.0;
            for s in &per_record {
                sum += (s[i] * s[j]).abs();
            }
            out.push(((i, j), sum / ds.len() as f64));
        }
    }
    out
}

#[test]
fn batched_scores_match_per_record_loop() {
    for seed in 0..3 {
        let (model, val) = trained(6, 2, 600, seed);
        let x0 = compute_expansion_point(&model, &val, ExpansionMode::RecordMean).unwrap();
        let mut c = BackwardCounter::default();
        let s = collect_signals(&model, &x0, &val, 50, SignalTarget::Loss, &mut c).unwrap();
        let fast = score_order2(&s).unwrap();
        for ((i, j), want) in naive_pair_scores(&model, &x0, &val) {
            let got = fast.iter().find(|c| c.fields == [i, j]).unwrap().score;
            assert!((got - want).abs() <= 1e-10, "({i},{j}) {got} vs {want}");
        }
    }
}

#[test]
fn one_backward_pass_per_batch_for_any_order() {
    let (model, val) = trained(10, 2, 1000, 1);
    for max_order in [2, 3] {
        let cfg = ScorerConfig { max_order, batch_size: 64, ..ScorerConfig::default() };
        let out = score_model(&model, &val, &cfg).unwrap();
        assert_eq!(out.backward_passes, val.len().div_ceil(64));
        assert_eq!(out.ranked.len(), if max_order == 2 { 45 } else { 165 });
    }
}

#[test]
fn expansion_point_modes() {
    let (model, val) = trained(3, 2, 300, 2);
    let rec = compute_expansion_point(&model, &val, ExpansionMode::RecordMean).unwrap();
    // brute force record mean of field 1
    let col = val.column(1).unwrap();
    let mut want = [0.0; 2];
    for &v in col {
        let row = model.network.tables[1].row_vec(v);
        want[0] += row[0] / col.len() as f64;
        want[1] += row[1] / col.len() as f64;
    }
    assert!((rec.vectors[1][0] - want[0]).abs() < 1e-12 && (rec.vectors[1][1] - want[1]).abs() < 1e-12);
    let tab = compute_expansion_point(&model, &val, ExpansionMode::TableMean).unwrap();
    let t = &model.network.tables[2];
    let mean0: f64 = (0..t.rows()).map(|r| t.row_vec(r)[0]).sum::<f64>() / f64::from(t.rows());
    assert!((tab.vectors[2][0] - mean0).abs() < 1e-12);
}

#[test]
fn ranked_fields_are_dataset_columns() {
    let (tr, va, _) = common::xor_splits(5, 400, 3);
    let m = DnnModel::new(tr.fields(), &[1, 3, 4], &DnnConfig { embedding_dim: 2, hidden: vec![4], seed: 1 }).unwrap();
    let out = score_model(&m, &va, &ScorerConfig { max_order: 3, ..ScorerConfig::default() }).unwrap();
    let mut tuples: Vec<_> = out.ranked.iter().map(|c| c.fields.clone()).collect();
    tuples.sort();
    assert_eq!(tuples, vec![vec![1, 3], vec![1, 3, 4], vec![1, 4], vec![3, 4]]);
}

#[test]
fn oracle_is_symmetric_and_guarded() {
    let (model, val) = trained(4, 2, 200, 4);
    let small = val.select(&(0..20).collect::<Vec<_>>());
    let x0 = compute_expansion_point(&model, &small, ExpansionMode::RecordMean).unwrap();
    let a = exact_importance_oracle(&model, &x0, &small, &[0, 1], SignalTarget::Loss).unwrap();
    let b = exact_importance_oracle(&model, &x0, &small, &[1, 0], SignalTarget::Loss).unwrap();
    assert!(a.is_finite() && a >= 0.0);
    assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    let t = exact_importance_oracle(&model, &x0, &small, &[0, 1, 3], SignalTarget::Logit).unwrap();
    assert!(t.is_finite());

    let (big, bval) = trained(9, 2, 200, 4);
    let x0 = compute_expansion_point(&big, &bval, ExpansionMode::RecordMean).unwrap();
    assert!(matches!(
        exact_importance_oracle(&big, &x0, &bval, &[0, 1], SignalTarget::Loss),
        Err(Error::SizeGuard(_))
    ));
}

#[test]
fn scoring_is_deterministic() {
    let (model, val) = trained(5, 2, 400, 6);
    let cfg = ScorerConfig { fraction: 0.5, seed: 3, ..ScorerConfig::default() };
    assert_eq!(score_model(&model, &val, &cfg).unwrap(), score_model(&model, &val, &cfg).unwrap());
}
