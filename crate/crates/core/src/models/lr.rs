use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_fields, Predictor};
use crate::data::{Dataset, FieldSchema};
use crate::hash::{checksum_f64, derive_seed, FNV_OFFSET};
use crate::nn::{bce, sigmoid, AdamConfig, AdamState, EmbeddingTable, RowInit};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for LrConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 5,
            batch_size: 256,
            l2: 1e-6,
            seed: 0,
        }
    }
}

/// Logistic regression with one weight per categorical value:
/// `p = σ(b + Σ_f w_f[x_f])`.
#[derive(Debug, Clone, PartialEq)]
pub struct LrModel {
    fields: Vec<FieldSchema>,
    pub bias: f64,
    pub weights: Vec<EmbeddingTable>,
}

impl LrModel {
    pub fn zeros(schema: &[FieldSchema], active: &[usize]) -> Result<Self> {
        let fields: Vec<FieldSchema> = active
            .iter()
            .map(|&f| schema.get(f).cloned().ok_or(Error::UnknownField(f)))
            .collect::<Result<_>>()?;
        let weights = fields
            .iter()
            .map(|f| EmbeddingTable::new(f.cardinality, 1, RowInit::Zeros))
            .collect();
        Ok(Self {
            fields,
            bias: 0.0,
            weights,
        })
    }

    /// Reassemble from parts (checkpoint loading).
    pub fn from_parts(fields: Vec<FieldSchema>, bias: f64, weights: Vec<EmbeddingTable>) -> Result<Self> {
        if fields.len() != weights.len() {
            return Err(Error::ShapeMismatch("one weight table per field required".into()));
        }
        for (f, t) in fields.iter().zip(&weights) {
            if f.cardinality != t.rows() || t.width() != 1 {
                return Err(Error::ShapeMismatch(alloc::format!("weights for {} have wrong shape", f.name)));
            }
        }
        Ok(Self { fields, bias, weights })
    }

    pub fn fields(&self) -> &[FieldSchema] {
        &self.fields
    }

    /// Position of dataset column `column` among the active fields.
    pub fn position_of(&self, column: usize) -> Option<usize> {
        self.fields.iter().position(|f| f.field_id == column)
    }

    pub fn weight(&self, position: usize, value: u32) -> f64 {
        let mut w = [0.0];
        self.weights[position].read_row(value, &mut w);
        w[0]
    }

    fn columns<'a>(&self, dataset: &'a Dataset) -> Result<Vec<&'a [u32]>> {
        check_fields(&self.fields, dataset)?;
        self.fields.iter().map(|f| dataset.column(f.field_id)).collect()
    }

    fn logit(&self, cols: &[&[u32]], record: usize) -> f64 {
        self.bias
            + cols
                .iter()
                .enumerate()
                .map(|(p, c)| self.weight(p, c[record]))
                .sum::<f64>()
    }

    /// Mean BCE plus `l2 / 2 · ‖w‖²`.
    pub fn objective(&self, dataset: &Dataset, l2: f64) -> Result<f64> {
        let p = self.predict(dataset)?;
        let loss = crate::nn::bce_loss(&p, dataset.labels())?;
        let norm: f64 = self.weights.iter().map(EmbeddingTable::squared_norm).sum();
        Ok(loss + 0.5 * l2 * norm)
    }

    pub fn checksum(&self) -> u64 {
        let h = checksum_f64(FNV_OFFSET, &[self.bias]);
        self.weights.iter().fold(h, |acc, t| t.checksum(acc))
    }

    /// One Adam step on the records in `batch`.
    fn step(&mut self, cols: &[&[u32]], labels: &[u8], batch: &[usize], l2: f64, state: &mut AdamState) -> Result<f64> {
        let scale = 1.0 / batch.len() as f64;
        let mut grads: Vec<BTreeMap<u32, Vec<f64>>> = (0..cols.len()).map(|_| BTreeMap::new()).collect();
        let mut bias_grad = 0.0;
        let mut loss = 0.0;
        for &r in batch {
            let p = sigmoid(self.logit(cols, r));
            let y = f64::from(labels[r]);
            loss += bce(p, y);
            let delta = (p - y) * scale;
            bias_grad += delta;
            for (g, c) in grads.iter_mut().zip(cols) {
                g.entry(c[r]).or_insert_with(|| vec![0.0])[0] += delta;
            }
        }
        for (g, table) in grads.iter_mut().zip(&self.weights) {
            for (&row, v) in g.iter_mut() {
                let mut w = [0.0];
                table.read_row(row, &mut w);
                v[0] += l2 * w[0];
            }
        }
        state.begin_step();
        let mut b = [self.bias];
        state.update_dense(0, &mut b, &[bias_grad])?;
        self.bias = b[0];
        for (i, (table, g)) in self.weights.iter_mut().zip(&grads).enumerate() {
            state.update_rows(i, table, g)?;
        }
        Ok(loss * scale)
    }
}

impl Predictor for LrModel {
    fn predict(&self, dataset: &Dataset) -> Result<Vec<f64>> {
        let cols = self.columns(dataset)?;
        Ok((0..dataset.len()).map(|r| sigmoid(self.logit(&cols, r))).collect())
    }
}

/// Fit the surrogate by mini-batch Adam on BCE + L2, seeded batch order.
pub fn lr_train(dataset: &Dataset, active: &[usize], config: &LrConfig) -> Result<LrModel> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if config.batch_size == 0 || !(config.learning_rate >= 0.0) || !(config.l2 >= 0.0) {
        return Err(Error::InvalidConfig("surrogate needs batch_size >= 1, lr >= 0, l2 >= 0".into()));
    }
    let mut model = LrModel::zeros(dataset.fields(), active)?;
    let cols = model.columns(dataset)?;
    let adam = AdamConfig {
        lr: config.learning_rate,
        ..AdamConfig::default()
    };
    let tables: Vec<&EmbeddingTable> = model.weights.iter().collect();
    let mut state = AdamState::new(adam, &[1], &tables);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(config.seed, epoch as u64)));
        for batch in order.chunks(config.batch_size) {
            let loss = model.step(&cols, dataset.labels(), batch, config.l2, &mut state)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite("surrogate loss"));
            }
        }
    }
    Ok(model)
}

/// Full-batch steps, used to check monotone descent.
#[cfg(test)]
fn full_batch_objectives(dataset: &Dataset, active: &[usize], lr: f64, l2: f64, steps: usize) -> Vec<f64> {
    let mut model = LrModel::zeros(dataset.fields(), active).unwrap();
    let cols = model.columns(dataset).unwrap();
    let tables: Vec<&EmbeddingTable> = model.weights.iter().collect();
    let mut state = AdamState::new(AdamConfig { lr, ..AdamConfig::default() }, &[1], &tables);
    let all: Vec<usize> = (0..dataset.len()).collect();
    let mut out = vec![model.objective(dataset, l2).unwrap()];
    for _ in 0..steps {
        model.step(&cols, dataset.labels(), &all, l2, &mut state).unwrap();
        out.push(model.objective(dataset, l2).unwrap());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, shuffle_field, split_indices, Pattern, PlantedCombo, SplitTag, SyntheticSpec};
    use crate::eval::{auc, logloss};

    fn spec(planted: Vec<PlantedCombo>, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            cardinalities: vec![6, 5, 4],
            planted,
            bias: 0.0,
            noise: 0.0,
            records: 20_000,
            seed,
        }
    }

    fn train_val(ds: &Dataset) -> (Dataset, Dataset) {
        let [tr, va, _] = split_indices(ds.len(), [0.7, 0.2, 0.1], 1).unwrap();
        (ds.select(&tr).with_split(SplitTag::Train), ds.select(&va).with_split(SplitTag::Val))
    }

    #[test]
    fn separable_single_field() {
        // label = parity of field 0 with a very large weight
        let ds = generate_synthetic(&spec(
            vec![PlantedCombo { fields: vec![0], pattern: Pattern::XorParity, weight: 30.0 }],
            1,
        ))
        .unwrap();
        let (tr, va) = train_val(&ds);
        let m = lr_train(&tr, &[0, 1, 2], &LrConfig::default()).unwrap();
        let p = m.predict(&va).unwrap();
        assert!(auc(va.labels(), &p).unwrap() >= 0.99);
    }

    #[test]
    fn null_labels_give_chance_auc() {
        let ds = generate_synthetic(&spec(vec![], 2)).unwrap();
        let (tr, va) = train_val(&ds);
        let m = lr_train(&tr, &[0, 1, 2], &LrConfig::default()).unwrap();
        let a = auc(va.labels(), &m.predict(&va).unwrap()).unwrap();
        assert!((a - 0.5).abs() <= 0.02, "auc {a}");
    }

    #[test]
    fn duplicated_field_barely_moves_logloss() {
        let ds = generate_synthetic(&spec(
            vec![PlantedCombo { fields: vec![0], pattern: Pattern::LookupTable, weight: 2.0 }],
            3,
        ))
        .unwrap();
        let (mut tr, mut va) = train_val(&ds);
        for d in [&mut tr, &mut va] {
            let col = d.column(0).unwrap().to_vec();
            let card = d.fields()[0].cardinality;
            d.push_column("dup".into(), card, col).unwrap();
        }
        let cfg = LrConfig { epochs: 30, learning_rate: 0.01, ..LrConfig::default() };
        let single = lr_train(&tr, &[0, 1, 2], &cfg).unwrap();
        let double = lr_train(&tr, &[0, 1, 2, 3], &cfg).unwrap();
        let a = logloss(va.labels(), &single.predict(&va).unwrap()).unwrap();
        let b = logloss(va.labels(), &double.predict(&va).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-3, "{a} vs {b}");
    }

    #[test]
    fn zero_weights_predict_sigmoid_bias() {
        let ds = generate_synthetic(&spec(vec![], 4)).unwrap();
        let mut m = LrModel::zeros(ds.fields(), &[0, 1]).unwrap();
        m.bias = 0.7;
        assert!(m.predict(&ds).unwrap().iter().all(|&p| p == sigmoid(0.7)));
    }

    #[test]
    fn single_weight_hand_value() {
        let ds = generate_synthetic(&spec(vec![], 5)).unwrap();
        let mut m = LrModel::zeros(ds.fields(), &[0]).unwrap();
        let v = ds.column(0).unwrap()[0];
        m.weights[0].row_mut(v)[0] = 2.0;
        let p = m.predict(&ds).unwrap();
        assert!((p[0] - 0.880_797_077_977_882_3).abs() < 1e-12);
    }

    #[test]
    fn zero_weight_field_shuffle_is_invisible() {
        let ds = generate_synthetic(&spec(vec![], 6)).unwrap();
        let mut m = LrModel::zeros(ds.fields(), &[0, 1]).unwrap();
        m.weights[0].row_mut(2)[0] = 1.0;
        let shuffled = shuffle_field(&ds, 1, 3).unwrap();
        assert_eq!(m.predict(&ds).unwrap(), m.predict(&shuffled).unwrap());
        // inactive field
        let shuffled = shuffle_field(&ds, 2, 3).unwrap();
        assert_eq!(m.predict(&ds).unwrap(), m.predict(&shuffled).unwrap());
    }

    #[test]
    fn full_batch_objective_does_not_increase() {
        for seed in 0..5 {
            let ds = generate_synthetic(&SyntheticSpec {
                records: 2_000,
                ..spec(vec![PlantedCombo { fields: vec![0, 1], pattern: Pattern::LookupTable, weight: 2.0 }], seed)
            })
            .unwrap();
            let obj = full_batch_objectives(&ds, &[0, 1, 2], 1e-3, 1e-6, 30);
            for w in obj.windows(2) {
                assert!(w[1] <= w[0] + 1e-15, "{obj:?}");
            }
        }
    }

    #[test]
    fn training_is_deterministic() {
        let ds = generate_synthetic(&spec(vec![], 7)).unwrap();
        let a = lr_train(&ds, &[0, 1, 2], &LrConfig::default()).unwrap();
        let b = lr_train(&ds, &[0, 1, 2], &LrConfig::default()).unwrap();
        assert_eq!(a.checksum(), b.checksum());
    }

    #[test]
    fn empty_dataset_rejected() {
        let ds = generate_synthetic(&SyntheticSpec { records: 0, ..spec(vec![], 0) }).unwrap();
        assert_eq!(lr_train(&ds, &[0], &LrConfig::default()).unwrap_err(), Error::EmptyDataset);
    }
}
