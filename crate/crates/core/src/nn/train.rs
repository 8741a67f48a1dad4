use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AdamConfig, AdamState};
use crate::data::Dataset;
use crate::eval::{auc, logloss};
use crate::hash::derive_seed;
use crate::models::{DnnModel, Predictor};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Consecutive non-improving epochs before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 100,
            batch_size: 1024,
            adam: AdamConfig::default(),
            patience: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auc: Option<f64>,
    pub val_logloss: f64,
    /// `val_auc - val_logloss`, or `-val_logloss` when AUC is undefined.
    pub monitor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Train with Adam, monitoring validation AUC − Logloss after every epoch.
/// Stops after `patience` consecutive epochs without improvement and leaves
/// the best epoch's parameters in `model`.
pub fn train(model: &mut DnnModel, train: &Dataset, val: &Dataset, config: &TrainConfig) -> Result<TrainHistory> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if config.max_epochs == 0 || config.batch_size == 0 {
        return Err(Error::InvalidConfig("epochs and batch_size must be >= 1".into()));
    }
    model.check_compatible(train)?;
    model.check_compatible(val)?;
    let mut state = AdamState::for_network(config.adam, &model.network);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = TrainHistory {
        epochs: Vec::new(),
        best_epoch: 0,
        stopped_early: false,
    };
    let mut best: Option<(f64, DnnModel)> = None;
    let mut stale = 0;
    let mut labels = Vec::with_capacity(config.batch_size);
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(config.seed, epoch as u64)));
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let cache = model.forward_records(train, batch)?;
            labels.clear();
            labels.extend(batch.iter().map(|&r| train.labels()[r]));
            let (grads, _) = model.network.backward(&cache, &labels)?;
            loss_sum += crate::nn::bce_loss(&cache.probabilities, &labels)? * batch.len() as f64;
            model.network.adam_step(&grads, &mut state)?;
        }
        let train_loss = loss_sum / train.len() as f64;
        if !train_loss.is_finite() || !model.network.all_finite() {
            return Err(Error::NonFinite("training"));
        }
        let (val_auc, val_logloss) = if val.is_empty() {
            (None, train_loss)
        } else {
            let p = model.predict(val)?;
            (auc(val.labels(), &p).ok(), logloss(val.labels(), &p)?)
        };
        let monitor = val_auc.map_or(-val_logloss, |a| a - val_logloss);
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_auc,
            val_logloss,
            monitor,
        });
        match &best {
            Some((b, _)) if monitor <= *b => {
                stale += 1;
                if stale >= config.patience {
                    history.stopped_early = true;
                    break;
                }
            }
            _ => {
                best = Some((monitor, model.clone()));
                history.best_epoch = epoch;
                stale = 0;
            }
        }
    }
    if let Some((_, m)) = best {
        *model = m;
    }
    Ok(history)
}
