//! The DNN recommender and the sparse logistic-regression surrogate.

mod dnn;
mod lr;

pub use dnn::{DnnConfig, DnnModel};
pub use lr::{lr_train, LrConfig, LrModel};

use alloc::vec::Vec;

use crate::data::{Dataset, FieldSchema};
use crate::{Error, Result};

/// Anything that maps records to click probabilities.
pub trait Predictor {
    fn predict(&self, dataset: &Dataset) -> Result<Vec<f64>>;
}

/// Verify that `dataset` carries every field in `active` with the same name
/// and cardinality at the same position.
pub(crate) fn check_fields(active: &[FieldSchema], dataset: &Dataset) -> Result<()> {
    for field in active {
        match dataset.fields().get(field.field_id) {
            Some(f) if f.name == field.name && f.cardinality == field.cardinality => {}
            Some(f) if f.name == field.name => {
                return Err(Error::ShapeMismatch(alloc::format!(
                    "field {} has cardinality {} in data but {} in model",
                    f.name,
                    f.cardinality,
                    field.cardinality
                )))
            }
            _ => return Err(Error::MissingField(field.name.clone())),
        }
    }
    Ok(())
}

/// Row indices of `records` for every active field, `records.len() x F`.
pub(crate) fn gather_indices(active: &[FieldSchema], dataset: &Dataset, records: &[usize]) -> Result<Vec<u32>> {
    let cols: Vec<&[u32]> = active
        .iter()
        .map(|f| dataset.column(f.field_id))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(records.len() * cols.len());
    for &r in records {
        out.extend(cols.iter().map(|c| c[r]));
    }
    Ok(out)
}
