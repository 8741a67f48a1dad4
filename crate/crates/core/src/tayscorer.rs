//! Taylor-expansion importance of field combinations.
//!
//! Around an expansion point `x0` (one reference embedding per field) the
//! mixed second- and third-order terms of the expansion of a record's loss
//! are approximated by products of first-order signals
//! `s_i = J_i · (e_i - x0_i)`, where `J_i` is the gradient of the record's
//! loss with respect to field `i`'s embedding. Outer products of the
//! gradient stand in for the Hessian and its third-order extension, so every
//! pair and triple is scored from a single backward pass per batch:
//!
//! * pair `(i, j)`: mean over records of `|s_i s_j|`
//! * triple `(i, j, k)`: mean over records of `|s_i s_j s_k|`
//!
//! Both families carry coefficient 1 in the expansion (the mixed pair term of
//! `T2` and `6/3!` for distinct triples in `T3`), so the scores are ranked in
//! one list. [`exact_importance_oracle`] evaluates the true mixed partials by
//! finite differences for small models.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::models::DnnModel;
use crate::nn::SignalTarget;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansionMode {
    /// Frequency-weighted mean of each field's embeddings over the scoring
    /// records.
    #[default]
    RecordMean,
    /// Unweighted mean over all rows of each embedding table.
    TableMean,
}

/// Reference embedding per field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionPoint {
    pub dim: usize,
    pub vectors: Vec<Vec<f64>>,
}

impl ExpansionPoint {
    pub fn flat(&self) -> Vec<f64> {
        self.vectors.concat()
    }
}

pub fn compute_expansion_point(model: &DnnModel, dataset: &Dataset, mode: ExpansionMode) -> Result<ExpansionPoint> {
    model.check_compatible(dataset)?;
    let dim = model.dim();
    let mut vectors = Vec::with_capacity(model.fields().len());
    let mut row = vec![0.0; dim];
    for (pos, field) in model.fields().iter().enumerate() {
        let table = &model.network.tables[pos];
        let mut acc = vec![0.0; dim];
        match mode {
            ExpansionMode::RecordMean => {
                if dataset.is_empty() {
                    return Err(Error::EmptyDataset);
                }
                let mut counts = vec![0u64; field.cardinality as usize];
                for &v in dataset.column(field.field_id)? {
                    counts[v as usize] += 1;
                }
                for (v, &c) in counts.iter().enumerate().filter(|(_, &c)| c > 0) {
                    table.read_row(v as u32, &mut row);
                    for (a, x) in acc.iter_mut().zip(&row) {
                        *a += c as f64 * x;
                    }
                }
                acc.iter_mut().for_each(|a| *a /= dataset.len() as f64);
            }
            ExpansionMode::TableMean => {
                for v in 0..table.rows() {
                    table.read_row(v, &mut row);
                    for (a, x) in acc.iter_mut().zip(&row) {
                        *a += x;
                    }
                }
                acc.iter_mut().for_each(|a| *a /= f64::from(table.rows()));
            }
        }
        vectors.push(acc);
    }
    Ok(ExpansionPoint { dim, vectors })
}

/// Counts backward passes spent on scoring.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BackwardCounter {
    pub passes: usize,
}

/// Per-record signals `s_i = J_i · Δx_i`, `records x fields` row-major.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldSignals {
    pub fields: usize,
    pub values: Vec<f64>,
}

impl FieldSignals {
    pub fn records(&self) -> usize {
        if self.fields == 0 {
            0
        } else {
            self.values.len() / self.fields
        }
    }

    pub fn record(&self, r: usize) -> &[f64] {
        &self.values[r * self.fields..(r + 1) * self.fields]
    }

    /// Concatenate batches in the given order.
    pub fn concat(parts: Vec<FieldSignals>) -> Self {
        let fields = parts.first().map_or(0, |p| p.fields);
        FieldSignals {
            fields,
            values: parts.into_iter().flat_map(|p| p.values).collect(),
        }
    }
}

/// Signals for one batch of `records`, spending exactly one backward pass.
pub fn field_signals(
    model: &DnnModel,
    x0: &ExpansionPoint,
    dataset: &Dataset,
    records: &[usize],
    target: SignalTarget,
    counter: &mut BackwardCounter,
) -> Result<FieldSignals> {
    let fields = model.fields().len();
    if x0.vectors.len() != fields || x0.dim != model.dim() {
        return Err(Error::ShapeMismatch("expansion point does not match model".into()));
    }
    let cache = model.forward_records(dataset, records)?;
    let labels: Vec<u8> = records.iter().map(|&r| dataset.labels()[r]).collect();
    let tape = model.network.input_gradients(&cache, &labels, target)?;
    counter.passes += 1;
    let dim = model.dim();
    let inputs = &cache.acts[0];
    let mut values = Vec::with_capacity(records.len() * fields);
    for r in 0..records.len() {
        for (f, center) in x0.vectors.iter().enumerate() {
            let start = (r * fields + f) * dim;
            let s: f64 = tape
                .get(r, f)
                .iter()
                .zip(&inputs[start..start + dim])
                .zip(center)
                .map(|((j, e), c)| j * (e - c))
                .sum();
            values.push(s);
        }
    }
    Ok(FieldSignals { fields, values })
}

/// Signals for every record of `dataset`, one backward pass per batch.
pub fn collect_signals(
    model: &DnnModel,
    x0: &ExpansionPoint,
    dataset: &Dataset,
    batch_size: usize,
    target: SignalTarget,
    counter: &mut BackwardCounter,
) -> Result<FieldSignals> {
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
    }
    let all: Vec<usize> = (0..dataset.len()).collect();
    let parts = all
        .chunks(batch_size)
        .map(|batch| field_signals(model, x0, dataset, batch, target, counter))
        .collect::<Result<Vec<_>>>()?;
    let mut out = FieldSignals::concat(parts);
    out.fields = model.fields().len();
    Ok(out)
}

/// Importance of one field tuple. `fields` is strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComboScore {
    pub fields: Vec<usize>,
    pub score: f64,
}

impl ComboScore {
    pub fn order(&self) -> usize {
        self.fields.len()
    }
}

/// Mean `|s_i s_j|` for every pair `i < j`.
pub fn score_order2(signals: &FieldSignals) -> Result<Vec<ComboScore>> {
    let n = signals.records();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let f = signals.fields;
    let mut sums = vec![0.0; f * f];
    let mut abs = vec![0.0; f];
    for r in 0..n {
        for (a, s) in abs.iter_mut().zip(signals.record(r)) {
            *a = s.abs();
        }
        for i in 0..f {
            for j in i + 1..f {
                sums[i * f + j] += abs[i] * abs[j];
            }
        }
    }
    let mut out = Vec::with_capacity(f * f.saturating_sub(1) / 2);
    for i in 0..f {
        for j in i + 1..f {
            out.push(ComboScore {
                fields: vec![i, j],
                score: sums[i * f + j] / n as f64,
            });
        }
    }
    Ok(out)
}

/// Mean `|s_i s_j s_k|` for every triple `i < j < k`.
pub fn score_order3(signals: &FieldSignals) -> Result<Vec<ComboScore>> {
    let n = signals.records();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let f = signals.fields;
    let triples: Vec<[usize; 3]> = (0..f)
        .flat_map(|i| (i + 1..f).flat_map(move |j| (j + 1..f).map(move |k| [i, j, k])))
        .collect();
    let mut sums = vec![0.0; triples.len()];
    let mut abs = vec![0.0; f];
    for r in 0..n {
        for (a, s) in abs.iter_mut().zip(signals.record(r)) {
            *a = s.abs();
        }
        for (acc, [i, j, k]) in sums.iter_mut().zip(&triples) {
            *acc += abs[*i] * abs[*j] * abs[*k];
        }
    }
    Ok(triples
        .into_iter()
        .zip(sums)
        .map(|(t, s)| ComboScore {
            fields: t.to_vec(),
            score: s / n as f64,
        })
        .collect())
}

/// Merge and sort descending by score; ties go to the lower order, then the
/// lexicographically smaller tuple.
pub fn rank_combinations(order2: Vec<ComboScore>, order3: Vec<ComboScore>) -> Vec<ComboScore> {
    let mut all: Vec<ComboScore> = order2.into_iter().chain(order3).collect();
    all.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.order().cmp(&b.order()))
            .then_with(|| a.fields.cmp(&b.fields))
    });
    all
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerConfig {
    /// 2 or 3.
    pub max_order: usize,
    pub batch_size: usize,
    pub target: SignalTarget,
    pub expansion: ExpansionMode,
    /// Fraction of the scoring set to use, in `(0, 1]`.
    pub fraction: f64,
    pub seed: u64,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        Self {
            max_order: 3,
            batch_size: 1024,
            target: SignalTarget::Loss,
            expansion: ExpansionMode::RecordMean,
            fraction: 1.0,
            seed: 0,
        }
    }
}

impl ScorerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.max_order) {
            return Err(Error::InvalidConfig(alloc::format!(
                "max_order must be 2 or 3, got {}",
                self.max_order
            )));
        }
        if self.batch_size == 0 || !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::InvalidConfig("batch_size >= 1 and fraction in (0, 1] required".into()));
        }
        Ok(())
    }
}

/// Result of scoring a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringOutcome {
    /// Ranked combinations; field ids are dataset columns.
    pub ranked: Vec<ComboScore>,
    pub records: usize,
    pub backward_passes: usize,
    pub expansion_point: ExpansionPoint,
}

/// Seeded subsample of `fraction` of the records (all when `fraction == 1`).
pub fn scoring_subset(dataset: &Dataset, fraction: f64, seed: u64) -> Dataset {
    if fraction >= 1.0 {
        return dataset.clone();
    }
    let take = ((dataset.len() as f64 * fraction) as usize).max(1).min(dataset.len());
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx.truncate(take);
    idx.sort_unstable();
    dataset.select(&idx)
}

/// Expansion point, signals and ranked pair (and triple) scores.
pub fn score_model(model: &DnnModel, scoring_set: &Dataset, config: &ScorerConfig) -> Result<ScoringOutcome> {
    config.validate()?;
    let subset = scoring_subset(scoring_set, config.fraction, config.seed);
    let x0 = compute_expansion_point(model, &subset, config.expansion)?;
    let mut counter = BackwardCounter::default();
    let signals = collect_signals(model, &x0, &subset, config.batch_size, config.target, &mut counter)?;
    score_signals(model, &signals, config.max_order, subset.len(), counter.passes, x0)
}

/// Rank precomputed signals (used when batches are evaluated elsewhere).
pub fn score_signals(
    model: &DnnModel,
    signals: &FieldSignals,
    max_order: usize,
    records: usize,
    backward_passes: usize,
    expansion_point: ExpansionPoint,
) -> Result<ScoringOutcome> {
    let order2 = score_order2(signals)?;
    let order3 = if max_order >= 3 { score_order3(signals)? } else { Vec::new() };
    let mut ranked = rank_combinations(order2, order3);
    for c in &mut ranked {
        for f in &mut c.fields {
            *f = model.fields()[*f].field_id;
        }
    }
    Ok(ScoringOutcome {
        ranked,
        records,
        backward_passes,
        expansion_point,
    })
}

/// Largest model the finite-difference oracle accepts.
pub const ORACLE_MAX_FIELDS: usize = 8;
pub const ORACLE_MAX_DIM: usize = 4;
/// Step of the nested central differences.
pub const ORACLE_STEP: f64 = 1e-3;

/// Mixed directional derivative `∂^k g / ∂t_1 … ∂t_k` at `t = 0` of
/// `g(t) = f(point + Σ_c t_c · u_c)` by nested central differences, where
/// direction `u_c` is `blocks[c].1` placed at offset `blocks[c].0`.
pub fn mixed_difference<F: Fn(&[f64]) -> f64>(f: &F, point: &[f64], blocks: &[(usize, &[f64])], h: f64) -> f64 {
    let k = blocks.len();
    let mut x = point.to_vec();
    let mut total = 0.0;
    for mask in 0..(1u32 << k) {
        x.copy_from_slice(point);
        let mut sign = 1.0;
        for (c, (offset, dir)) in blocks.iter().enumerate() {
            let s = if mask & (1 << c) != 0 { -1.0 } else { 1.0 };
            sign *= s;
            for (xi, d) in x[*offset..*offset + dir.len()].iter_mut().zip(*dir) {
                *xi += s * h * d;
            }
        }
        total += sign * f(&x);
    }
    total / libm::pow(2.0 * h, k as f64)
}

/// Mean over records of `|∂^k f / ∂x_{c_1}…∂x_{c_k} · Δx_{c_1}…Δx_{c_k}|`
/// evaluated at `x0`, where `f(x, r)` is record `r`'s objective and
/// `deltas[r]` its flat embedding deviation (`F*dim`).
pub fn oracle_score<F: Fn(&[f64], usize) -> f64>(
    f: F,
    x0: &[f64],
    deltas: &[Vec<f64>],
    dim: usize,
    combo: &[usize],
    h: f64,
) -> Result<f64> {
    if deltas.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let fields = x0.len() / dim.max(1);
    if combo.iter().any(|&c| c >= fields) {
        return Err(Error::UnknownField(*combo.iter().max().unwrap_or(&0)));
    }
    let mut total = 0.0;
    for (r, delta) in deltas.iter().enumerate() {
        let blocks: Vec<(usize, &[f64])> = combo.iter().map(|&c| (c * dim, &delta[c * dim..(c + 1) * dim])).collect();
        let g = |x: &[f64]| f(x, r);
        total += mixed_difference(&g, x0, &blocks, h).abs();
    }
    Ok(total / deltas.len() as f64)
}

/// Exact (finite-difference) counterpart of the pair / triple score for
/// tiny models. `combo` holds model field positions in any order.
pub fn exact_importance_oracle(
    model: &DnnModel,
    x0: &ExpansionPoint,
    dataset: &Dataset,
    combo: &[usize],
    target: SignalTarget,
) -> Result<f64> {
    let fields = model.fields().len();
    if fields > ORACLE_MAX_FIELDS || model.dim() > ORACLE_MAX_DIM {
        return Err(Error::SizeGuard(alloc::format!(
            "oracle supports at most {ORACLE_MAX_FIELDS} fields and dim {ORACLE_MAX_DIM}"
        )));
    }
    if !(2..=3).contains(&combo.len()) {
        return Err(Error::InvalidConfig("oracle combos have 2 or 3 fields".into()));
    }
    let center = x0.flat();
    let records: Vec<usize> = (0..dataset.len()).collect();
    let idx = model.gather(dataset, &records)?;
    let inputs = model.network.lookup(&idx, records.len())?;
    let width = center.len();
    let deltas: Vec<Vec<f64>> = inputs
        .chunks_exact(width)
        .map(|e| e.iter().zip(&center).map(|(a, b)| a - b).collect())
        .collect();
    let labels = dataset.labels();
    oracle_score(
        |x, r| model.network.record_objective(x, labels[r], target),
        &center,
        &deltas,
        model.dim(),
        combo,
        ORACLE_STEP,
    )
}
