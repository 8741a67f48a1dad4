mod common;

use tayfcs_core::data::generate_synthetic;
use tayfcs_core::eval::auc;
use tayfcs_core::models::{DnnConfig, DnnModel, Predictor};
use tayfcs_core::nn::{gradient_check, random_tiny_case, train, AdamConfig, AdamState, TrainConfig};
use tayfcs_core::Error;

#[test]
fn backward_matches_finite_differences() {
    for seed in 0..10 {
        let (net, idx, labels) = random_tiny_case(seed);
        let report = gradient_check(&net, &idx, &labels, 1e-5, 1e-6).unwrap();
        assert!(report.checked > 0);
        assert!(report.max() <= 1e-3, "seed {seed}: {report:?}");
    }
}

#[test]
fn full_batch_adam_decreases_loss() {
    let (train_ds, _, _) = common::xor_splits(4, 400, 3);
    let mut model = DnnModel::new(
        train_ds.fields(),
        &[0, 1, 2, 3],
        &DnnConfig { embedding_dim: 4, hidden: vec![8], seed: 1 },
    )
    .unwrap();
    let all: Vec<usize> = (0..train_ds.len()).collect();
    let mut state = AdamState::for_network(AdamConfig { lr: 0.01, ..AdamConfig::default() }, &model.network);
    let mut losses = Vec::new();
    for _ in 0..10 {
        let cache = model.forward_records(&train_ds, &all).unwrap();
        losses.push(tayfcs_core::nn::bce_loss(&cache.probabilities, train_ds.labels()).unwrap());
        let (g, _) = model.network.backward(&cache, train_ds.labels()).unwrap();
        model.network.adam_step(&g, &mut state).unwrap();
    }
    for w in losses.windows(2) {
        assert!(w[1] < w[0], "{losses:?}");
    }
}

fn small_model(train_ds: &tayfcs_core::data::Dataset, seed: u64) -> DnnModel {
    let active: Vec<usize> = (0..train_ds.num_fields()).collect();
    DnnModel::new(train_ds.fields(), &active, &DnnConfig { embedding_dim: 8, hidden: vec![32, 16], seed }).unwrap()
}

fn fast_config(seed: u64) -> TrainConfig {
    TrainConfig {
        max_epochs: 30,
        batch_size: 64,
        adam: AdamConfig { lr: 0.01, ..AdamConfig::default() },
        patience: 2,
        seed,
    }
}

#[test]
fn learns_planted_xor() {
    let ds = generate_synthetic(&common::xor_spec(4, [0, 1], 4000, 11, 16.0)).unwrap();
    let (tr, va, te) = common::splits(&ds, 11);
    let mut model = small_model(&tr, 1);
    train(&mut model, &tr, &va, &fast_config(1)).unwrap();
    let a = auc(te.labels(), &model.predict(&te).unwrap()).unwrap();
    assert!(a >= 0.99, "test auc {a}");
}

#[test]
fn single_epoch_budget() {
    let (tr, va, _) = common::xor_splits(4, 500, 2);
    let mut model = small_model(&tr, 1);
    let h = train(&mut model, &tr, &va, &TrainConfig { max_epochs: 1, ..fast_config(1) }).unwrap();
    assert_eq!(h.epochs.len(), 1);
    assert_eq!(h.best_epoch, 1);
}

#[test]
fn zero_learning_rate_stops_after_patience() {
    let (tr, va, _) = common::xor_splits(4, 500, 2);
    let mut model = small_model(&tr, 1);
    let before = model.checksum();
    let cfg = TrainConfig {
        adam: AdamConfig { lr: 0.0, ..AdamConfig::default() },
        ..fast_config(1)
    };
    let h = train(&mut model, &tr, &va, &cfg).unwrap();
    assert_eq!(h.epochs.len(), 3);
    assert!(h.stopped_early);
    assert_eq!(h.best_epoch, 1);
    assert_eq!(model.checksum(), before);
}

#[test]
fn training_is_deterministic() {
    let (tr, va, te) = common::xor_splits(4, 800, 5);
    let run = || {
        let mut m = small_model(&tr, 9);
        let h = train(&mut m, &tr, &va, &TrainConfig { max_epochs: 3, ..fast_config(4) }).unwrap();
        (m.checksum(), h.epochs.last().unwrap().val_logloss, m.predict(&te).unwrap())
    };
    assert_eq!(run(), run());
}

#[test]
fn empty_training_set_rejected() {
    let (tr, va, _) = common::xor_splits(4, 200, 5);
    let mut model = small_model(&tr, 1);
    let empty = tr.select(&[]);
    assert_eq!(train(&mut model, &empty, &va, &fast_config(1)).unwrap_err(), Error::EmptyDataset);
}
