use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, FieldSchema, SplitTag};
use crate::hash::{derive_seed, mix64};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    /// `+w/2` when the sum of the raw values over the tuple is odd, `-w/2`
    /// otherwise. With even cardinalities no single field carries signal.
    XorParity,
    /// `±w/2` looked up in a seeded random sign table over the joint values.
    LookupTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedCombo {
    pub fields: Vec<usize>,
    pub pattern: Pattern,
    pub weight: f64,
}

/// Generator for labelled categorical data with planted interactions.
///
/// Raw value `v` of a field with `c` levels is stored as index `v + 1`, so
/// the encoded cardinality is `c + 1` and index 0 stays the (unused) OOV slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub cardinalities: Vec<u32>,
    #[serde(default)]
    pub planted: Vec<PlantedCombo>,
    #[serde(default)]
    pub bias: f64,
    /// Standard deviation of Gaussian logit noise.
    #[serde(default)]
    pub noise: f64,
    pub records: usize,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn num_fields(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn field_name(field: usize) -> alloc::string::String {
        format!("f{field}")
    }

    pub fn validate(&self) -> Result<()> {
        if self.cardinalities.is_empty() {
            return Err(Error::InvalidConfig("synthetic spec needs at least one field".into()));
        }
        if self.cardinalities.iter().any(|&c| c == 0 || c == u32::MAX) {
            return Err(Error::InvalidConfig("field cardinality must be in 1..u32::MAX".into()));
        }
        if !self.bias.is_finite() || !self.noise.is_finite() || self.noise < 0.0 {
            return Err(Error::InvalidConfig("bias and noise must be finite, noise >= 0".into()));
        }
        for p in &self.planted {
            if p.fields.is_empty() || p.fields.iter().any(|&f| f >= self.num_fields()) {
                return Err(Error::InvalidConfig(format!("planted tuple {:?} references unknown field", p.fields)));
            }
            if !p.weight.is_finite() {
                return Err(Error::InvalidConfig("planted weight must be finite".into()));
            }
        }
        Ok(())
    }

    /// Noise-free logit contribution of the planted patterns for raw values.
    pub fn planted_logit(&self, raw: &[u32]) -> f64 {
        self.planted
            .iter()
            .enumerate()
            .map(|(k, p)| 0.5 * p.weight * pattern_sign(self, k, p, raw))
            .sum()
    }
}

fn pattern_sign(spec: &SyntheticSpec, k: usize, p: &PlantedCombo, raw: &[u32]) -> f64 {
    match p.pattern {
        Pattern::XorParity => {
            let parity = p.fields.iter().map(|&f| raw[f] & 1).fold(0, |a, b| a ^ b);
            if parity == 1 {
                1.0
            } else {
                -1.0
            }
        }
        Pattern::LookupTable => {
            let cell = p
                .fields
                .iter()
                .fold(0u64, |acc, &f| acc.wrapping_mul(u64::from(spec.cardinalities[f])).wrapping_add(u64::from(raw[f])));
            if mix64(derive_seed(spec.seed, k as u64) ^ mix64(cell)) & 1 == 1 {
                1.0
            } else {
                -1.0
            }
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-z))
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller, one draw per call
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

/// Draw a dataset from `spec`. Labels are Bernoulli(σ(bias + planted + noise)).
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let num_fields = spec.num_fields();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut columns: Vec<Vec<u32>> = (0..num_fields).map(|_| Vec::with_capacity(spec.records)).collect();
    let mut labels = Vec::with_capacity(spec.records);
    let mut raw = alloc::vec![0u32; num_fields];
    for _ in 0..spec.records {
        for (f, &card) in spec.cardinalities.iter().enumerate() {
            raw[f] = rng.gen_range(0..card);
            columns[f].push(raw[f] + 1);
        }
        let mut logit = spec.bias + spec.planted_logit(&raw);
        if spec.noise > 0.0 {
            logit += spec.noise * standard_normal(&mut rng);
        }
        let u: f64 = rng.gen();
        labels.push(u8::from(u < sigmoid(logit)));
    }
    let fields = spec
        .cardinalities
        .iter()
        .enumerate()
        .map(|(i, &c)| FieldSchema {
            field_id: i,
            name: SyntheticSpec::field_name(i),
            cardinality: c + 1,
        })
        .collect();
    Dataset::new(fields, columns, labels, SplitTag::Full)
}
