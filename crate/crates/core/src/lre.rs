//! Redundancy elimination over the ranked candidate list.
//!
//! A window of the `S_w` best-ranked combinations is materialized next to
//! the original fields and a logistic-regression surrogate is fitted on the
//! training split. With the surrogate frozen, each window combination's
//! column is shuffled on the validation split; the gain is the resulting
//! Logloss increase. Combinations with gain `<= 0` are evicted and the
//! window is refilled from the list. Original fields are never shuffled.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::combiner::{materialize, CombinationMeta, CombinationSpec, DEFAULT_TAU};
use crate::data::{shuffle_field, Dataset};
use crate::eval::logloss;
use crate::hash::derive_seed;
use crate::models::{lr_train, LrConfig, LrModel, Predictor};
use crate::tayscorer::ComboScore;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Number of combinations to output.
    pub k: usize,
    pub window_size: usize,
    pub max_iterations: usize,
    pub max_order: usize,
    pub scoring_fraction: f64,
    pub tau: u32,
    pub seed: u64,
    pub surrogate: LrConfig,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            k: 5,
            window_size: 10,
            max_iterations: 1,
            max_order: 3,
            scoring_fraction: 1.0,
            tau: DEFAULT_TAU,
            seed: 0,
            surrogate: LrConfig::default(),
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.window_size {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= k <= window_size, got k={} window_size={}",
                self.k, self.window_size
            )));
        }
        if !(2..=3).contains(&self.max_order) {
            return Err(Error::InvalidConfig(format!("max_order must be 2 or 3, got {}", self.max_order)));
        }
        if !(self.scoring_fraction > 0.0 && self.scoring_fraction <= 1.0) {
            return Err(Error::InvalidConfig("scoring_fraction must be in (0, 1]".into()));
        }
        if self.tau == 0 {
            return Err(Error::InvalidConfig("tau must be >= 1".into()));
        }
        Ok(())
    }
}

/// Candidates currently under evaluation, as positions in the ranked list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureWindow {
    pub entries: Vec<usize>,
    /// Next ranked position not yet admitted.
    pub cursor: usize,
    pub iteration: usize,
}

impl FeatureWindow {
    /// The first `size` candidates of a list of length `available`.
    pub fn initial(available: usize, size: usize) -> Self {
        let take = size.min(available);
        FeatureWindow {
            entries: (0..take).collect(),
            cursor: take,
            iteration: 0,
        }
    }
}

/// Gain of one window candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainEntry {
    /// Position in the ranked list.
    pub candidate: usize,
    pub name: String,
    pub gain: f64,
    /// Surrogate checksum at the time of the measurement.
    pub surrogate_checksum: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainReport {
    pub baseline_logloss: f64,
    pub entries: Vec<GainEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub gains: GainReport,
    pub evicted: Vec<usize>,
    pub admitted: Vec<usize>,
}

/// Evict every entry whose gain is `<= 0`, then refill from the cursor up to
/// `size`. `gains` is aligned with `window.entries`. Returns
/// `(evicted, admitted)`.
pub fn apply_gains(window: &mut FeatureWindow, gains: &[f64], available: usize, size: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    if gains.len() != window.entries.len() {
        return Err(Error::LengthMismatch {
            expected: window.entries.len(),
            actual: gains.len(),
        });
    }
    let mut evicted = Vec::new();
    let mut kept = Vec::with_capacity(size);
    for (&c, &g) in window.entries.iter().zip(gains) {
        if g <= 0.0 {
            evicted.push(c);
        } else {
            kept.push(c);
        }
    }
    let mut admitted = Vec::new();
    while kept.len() < size && window.cursor < available {
        kept.push(window.cursor);
        admitted.push(window.cursor);
        window.cursor += 1;
    }
    window.entries = kept;
    window.iteration += 1;
    Ok((evicted, admitted))
}

/// Logloss increase on `val` when `column` is shuffled with `seed`, with the
/// surrogate frozen. `column` must be one of `window_columns`.
pub fn shuffle_gain(model: &LrModel, val: &Dataset, window_columns: &[usize], column: usize, seed: u64) -> Result<f64> {
    if !window_columns.contains(&column) || model.position_of(column).is_none() {
        return Err(Error::NotInWindow(column));
    }
    let baseline = logloss(val.labels(), &model.predict(val)?)?;
    shuffled_gain(model, val, column, seed, baseline)
}

fn shuffled_gain(model: &LrModel, val: &Dataset, column: usize, seed: u64, baseline: f64) -> Result<f64> {
    let shuffled = shuffle_field(val, column, seed)?;
    let g = logloss(shuffled.labels(), &model.predict(&shuffled)?)? - baseline;
    if !g.is_finite() {
        return Err(Error::NonFinite("shuffle gain"));
    }
    Ok(g)
}

/// One shuffle measurement: augmented column and its permutation seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GainTask {
    pub column: usize,
    pub seed: u64,
}

/// Runs the independent shuffle measurements of one round.
pub trait GainEvaluator {
    fn evaluate(&self, model: &LrModel, val: &Dataset, baseline: f64, tasks: &[GainTask]) -> Result<Vec<(f64, u64)>>;
}

/// Measures gains one after another.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl GainEvaluator for Sequential {
    fn evaluate(&self, model: &LrModel, val: &Dataset, baseline: f64, tasks: &[GainTask]) -> Result<Vec<(f64, u64)>> {
        tasks.iter().map(|t| measure(model, val, baseline, *t)).collect()
    }
}

/// Gain and surrogate checksum for one task.
pub fn measure(model: &LrModel, val: &Dataset, baseline: f64, task: GainTask) -> Result<(f64, u64)> {
    let checksum = model.checksum();
    Ok((shuffled_gain(model, val, task.column, task.seed, baseline)?, checksum))
}

/// Seed of the permutation applied to `candidate` in `iteration`.
pub fn shuffle_seed(seed: u64, iteration: usize, candidate: usize) -> u64 {
    derive_seed(derive_seed(seed, iteration as u64), candidate as u64)
}

/// Convert ranked scores (dataset columns) into combination specs.
pub fn ranked_specs(ranked: &[ComboScore], schema: &[crate::data::FieldSchema]) -> Result<Vec<CombinationSpec>> {
    ranked.iter().map(|c| CombinationSpec::new(c.fields.clone(), schema)).collect()
}

/// Fit the surrogate on originals plus the window, measure every window
/// candidate's gain and update the window.
pub fn lre_iterate<E: GainEvaluator + ?Sized>(
    window: &mut FeatureWindow,
    ranked: &[CombinationSpec],
    train: &Dataset,
    val: &Dataset,
    config: &SelectionConfig,
    evaluator: &E,
) -> Result<IterationRecord> {
    let iteration = window.iteration;
    let combos: Vec<CombinationSpec> = window.entries.iter().map(|&c| ranked[c].clone()).collect();
    let (train_aug, metas) = materialize(train, &combos, config.tau)?;
    let (val_aug, _) = materialize(val, &combos, config.tau)?;
    let active: Vec<usize> = (0..train_aug.num_fields()).collect();
    let surrogate = LrConfig {
        seed: derive_seed(config.seed, iteration as u64),
        ..config.surrogate.clone()
    };
    let model = lr_train(&train_aug, &active, &surrogate)?;
    let baseline = logloss(val_aug.labels(), &model.predict(&val_aug)?)?;
    let tasks: Vec<GainTask> = window
        .entries
        .iter()
        .zip(&metas)
        .map(|(&c, m)| GainTask {
            column: m.column,
            seed: shuffle_seed(config.seed, iteration, c),
        })
        .collect();
    let measured = evaluator.evaluate(&model, &val_aug, baseline, &tasks)?;
    if measured.len() != tasks.len() {
        return Err(Error::LengthMismatch {
            expected: tasks.len(),
            actual: measured.len(),
        });
    }
    let entries: Vec<GainEntry> = window
        .entries
        .iter()
        .zip(&measured)
        .map(|(&c, &(gain, surrogate_checksum))| GainEntry {
            candidate: c,
            name: ranked[c].name.clone(),
            gain,
            surrogate_checksum,
        })
        .collect();
    let gains: Vec<f64> = entries.iter().map(|e| e.gain).collect();
    let (evicted, admitted) = apply_gains(window, &gains, ranked.len(), config.window_size)?;
    Ok(IterationRecord {
        iteration,
        gains: GainReport {
            baseline_logloss: baseline,
            entries,
        },
        evicted,
        admitted,
    })
}

/// A selected combination with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedCombination {
    pub rank: usize,
    pub score: f64,
    /// Gain from the last round that measured it, if any.
    pub gain: Option<f64>,
    pub meta: CombinationMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionArtifact {
    pub config: SelectionConfig,
    pub selected: Vec<SelectedCombination>,
    pub final_window: FeatureWindow,
    pub iterations: Vec<IterationRecord>,
    /// Fewer than `k` candidates survived.
    pub short: bool,
}

/// Run elimination rounds until none evicts anything or `max_iterations`
/// is reached, then return the first `k` survivors in rank order.
pub fn run_lre<E: GainEvaluator + ?Sized>(
    ranked: &[ComboScore],
    train: &Dataset,
    val: &Dataset,
    config: &SelectionConfig,
    evaluator: &E,
) -> Result<SelectionArtifact> {
    config.validate()?;
    if ranked.is_empty() {
        return Err(Error::InvalidConfig("ranked list is empty".into()));
    }
    let specs = ranked_specs(ranked, train.fields())?;
    let mut window = FeatureWindow::initial(specs.len(), config.window_size);
    let mut iterations = Vec::new();
    while window.iteration < config.max_iterations && !window.entries.is_empty() {
        let record = lre_iterate(&mut window, &specs, train, val, config, evaluator)?;
        let evicted_any = !record.evicted.is_empty();
        iterations.push(record);
        if !evicted_any {
            break;
        }
    }
    let mut survivors = window.entries.clone();
    survivors.sort_unstable();
    let short = survivors.len() < config.k;
    survivors.truncate(config.k);
    let chosen: Vec<CombinationSpec> = survivors.iter().map(|&c| specs[c].clone()).collect();
    let (_, metas) = materialize(&train.select(&[]), &chosen, config.tau)?;
    let selected = survivors
        .iter()
        .zip(metas)
        .map(|(&c, meta)| SelectedCombination {
            rank: c,
            score: ranked[c].score,
            gain: iterations
                .iter()
                .rev()
                .find_map(|r: &IterationRecord| r.gains.entries.iter().find(|e| e.candidate == c).map(|e| e.gain)),
            meta,
        })
        .collect();
    Ok(SelectionArtifact {
        config: config.clone(),
        selected,
        final_window: window,
        iterations,
        short,
    })
}
