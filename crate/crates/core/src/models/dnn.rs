use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_fields, gather_indices, Predictor};
use crate::data::{Dataset, FieldSchema};
use crate::hash::{checksum_f64, FNV_OFFSET};
use crate::nn::{ForwardCache, Network};
use crate::{Error, Result};

const PREDICT_BATCH: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnnConfig {
    pub embedding_dim: usize,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for DnnConfig {
    fn default() -> Self {
        Self {
            embedding_dim: 16,
            hidden: alloc::vec![64, 64],
            seed: 0,
        }
    }
}

/// Embedding-MLP recommender over a set of active dataset fields (original
/// fields plus any materialized combinations).
#[derive(Debug, Clone, PartialEq)]
pub struct DnnModel {
    fields: Vec<FieldSchema>,
    pub network: Network,
}

impl DnnModel {
    /// Fresh model over `active` columns of a dataset with schema `schema`.
    pub fn new(schema: &[FieldSchema], active: &[usize], config: &DnnConfig) -> Result<Self> {
        if config.embedding_dim == 0 {
            return Err(Error::InvalidConfig("embedding_dim must be positive".into()));
        }
        if active.is_empty() {
            return Err(Error::InvalidConfig("model needs at least one field".into()));
        }
        let fields: Vec<FieldSchema> = active
            .iter()
            .map(|&f| schema.get(f).cloned().ok_or(Error::UnknownField(f)))
            .collect::<Result<_>>()?;
        let cards: Vec<u32> = fields.iter().map(|f| f.cardinality).collect();
        let network = Network::new(&cards, config.embedding_dim, &config.hidden, config.seed);
        Ok(Self { fields, network })
    }

    /// Reassemble from parts (checkpoint loading).
    pub fn from_parts(fields: Vec<FieldSchema>, network: Network) -> Result<Self> {
        if fields.len() != network.tables.len() || network.mlp.input_width() != fields.len() * network.dim {
            return Err(Error::ShapeMismatch("field list does not match network".into()));
        }
        for (f, t) in fields.iter().zip(&network.tables) {
            if f.cardinality != t.rows() || t.width() != network.dim {
                return Err(Error::ShapeMismatch(alloc::format!("table for {} has wrong shape", f.name)));
            }
        }
        Ok(Self { fields, network })
    }

    /// Active fields; `field_id` is the dataset column.
    pub fn fields(&self) -> &[FieldSchema] {
        &self.fields
    }

    pub fn dim(&self) -> usize {
        self.network.dim
    }

    pub fn check_compatible(&self, dataset: &Dataset) -> Result<()> {
        check_fields(&self.fields, dataset)
    }

    pub fn gather(&self, dataset: &Dataset, records: &[usize]) -> Result<Vec<u32>> {
        gather_indices(&self.fields, dataset, records)
    }

    pub fn forward_records(&self, dataset: &Dataset, records: &[usize]) -> Result<ForwardCache> {
        let idx = self.gather(dataset, records)?;
        self.network.forward(&idx, records.len())
    }

    pub fn checksum(&self) -> u64 {
        let mut h = FNV_OFFSET;
        for t in &self.network.tables {
            h = t.checksum(h);
        }
        for l in &self.network.mlp.layers {
            h = checksum_f64(checksum_f64(h, &l.weights), &l.bias);
        }
        h
    }
}

impl Predictor for DnnModel {
    fn predict(&self, dataset: &Dataset) -> Result<Vec<f64>> {
        self.check_compatible(dataset)?;
        let mut out = Vec::with_capacity(dataset.len());
        let all: Vec<usize> = (0..dataset.len()).collect();
        for chunk in all.chunks(PREDICT_BATCH) {
            out.extend(self.forward_records(dataset, chunk)?.probabilities);
        }
        Ok(out)
    }
}
