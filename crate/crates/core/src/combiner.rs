//! Materialization of field combinations as new categorical fields.
//!
//! A combination's raw value id is the mixed-radix index of its constituent
//! value indices (first field most significant). When the product of the
//! constituent cardinalities exceeds the threshold `tau`, the raw id is
//! hashed with [`stable_hash`] and reduced modulo `tau`, so the table never
//! holds more than `tau` rows.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FieldSchema};
use crate::hash::{fnv1a64, fnv1a64_extend, mix64};
use crate::{Error, Result};

/// Default embedding-table size threshold.
pub const DEFAULT_TAU: u32 = 5_000_000;

/// Identifier of the hash used above the threshold, recorded in artifacts.
pub const HASH_ALGORITHM: &str = "fnv1a64(name|0xff|raw_id_u128_le)+splitmix64-fmix/v1";

/// Separator used in derived combination names.
pub const NAME_SEPARATOR: &str = "×";

/// A strictly increasing tuple of two or three original field ids.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CombinationSpec {
    pub fields: Vec<usize>,
    pub name: String,
}

impl CombinationSpec {
    /// Canonicalize `fields` (sorted) and derive the name from `schema`.
    pub fn new(mut fields: Vec<usize>, schema: &[FieldSchema]) -> Result<Self> {
        fields.sort_unstable();
        fields.dedup();
        if !(2..=3).contains(&fields.len()) {
            return Err(Error::InvalidConfig(alloc::format!(
                "combinations need 2 or 3 distinct fields, got {fields:?}"
            )));
        }
        let mut name = String::new();
        for (i, &f) in fields.iter().enumerate() {
            let s = schema.get(f).ok_or(Error::UnknownField(f))?;
            if i > 0 {
                name.push_str(NAME_SEPARATOR);
            }
            name.push_str(&s.name);
        }
        Ok(Self { fields, name })
    }

    pub fn order(&self) -> usize {
        self.fields.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashedVocab {
    pub raw_cardinality: u128,
    pub effective_cardinality: u32,
    pub tau: u32,
}

impl HashedVocab {
    pub fn new(raw_cardinality: u128, tau: u32) -> Self {
        Self {
            raw_cardinality,
            effective_cardinality: raw_cardinality.min(u128::from(tau)) as u32,
            tau,
        }
    }

    pub fn is_hashed(&self) -> bool {
        self.raw_cardinality > u128::from(self.tau)
    }
}

/// Product of constituent cardinalities.
pub fn combined_cardinality(combo: &CombinationSpec, schema: &[FieldSchema]) -> Result<u128> {
    combo.fields.iter().try_fold(1u128, |acc, &f| {
        let s = schema.get(f).ok_or(Error::UnknownField(f))?;
        acc.checked_mul(u128::from(s.cardinality))
            .ok_or_else(|| Error::InvalidConfig("combined cardinality overflows u128".into()))
    })
}

/// Platform-independent 64-bit hash of a raw id salted by the combination
/// name: FNV-1a over `name`, a 0xff separator and the id as 16 little-endian
/// bytes, followed by the SplitMix64 finalizer.
pub fn stable_hash(name: &str, raw_id: u128) -> u64 {
    let h = fnv1a64(name.as_bytes());
    let h = fnv1a64_extend(h, &[0xff]);
    mix64(fnv1a64_extend(h, &raw_id.to_le_bytes()))
}

/// Id of one record's value tuple. `cardinalities` and `values` follow the
/// combination's field order.
pub fn combined_value_id(combo: &CombinationSpec, cardinalities: &[u32], values: &[u32], tau: u32) -> Result<u32> {
    if cardinalities.len() != combo.fields.len() || values.len() != combo.fields.len() {
        return Err(Error::LengthMismatch {
            expected: combo.fields.len(),
            actual: values.len(),
        });
    }
    let mut raw: u128 = 0;
    let mut card: u128 = 1;
    for ((&v, &c), &f) in values.iter().zip(cardinalities).zip(&combo.fields) {
        if v >= c {
            return Err(Error::IndexOutOfRange {
                field: f,
                index: v,
                cardinality: c,
            });
        }
        raw = raw * u128::from(c) + u128::from(v);
        card *= u128::from(c);
    }
    Ok(reduce(&combo.name, raw, card, tau))
}

#[inline]
fn reduce(name: &str, raw: u128, raw_cardinality: u128, tau: u32) -> u32 {
    if raw_cardinality > u128::from(tau) {
        (stable_hash(name, raw) % u64::from(tau)) as u32
    } else {
        raw as u32
    }
}

/// Provenance for one materialized combination.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombinationMeta {
    pub name: String,
    pub fields: Vec<usize>,
    pub field_names: Vec<String>,
    pub column: usize,
    pub raw_cardinality: u128,
    pub effective_cardinality: u32,
    pub hashed: bool,
    pub hash_algorithm: String,
}

/// Append one column per combination. Original columns are untouched and
/// the new fields get the effective (possibly hashed) cardinality.
pub fn materialize(dataset: &Dataset, combos: &[CombinationSpec], tau: u32) -> Result<(Dataset, Vec<CombinationMeta>)> {
    if tau == 0 {
        return Err(Error::InvalidConfig("tau must be positive".into()));
    }
    let mut out = dataset.clone();
    let mut meta = Vec::with_capacity(combos.len());
    for (i, combo) in combos.iter().enumerate() {
        if out.field_by_name(&combo.name).is_some() || combos[..i].iter().any(|c| c.fields == combo.fields) {
            return Err(Error::DuplicateCombination(combo.name.clone()));
        }
        let schema = dataset.fields();
        let vocab = HashedVocab::new(combined_cardinality(combo, schema)?, tau);
        let cols: Vec<&[u32]> = combo.fields.iter().map(|&f| dataset.column(f)).collect::<Result<_>>()?;
        let cards: Vec<u128> = combo.fields.iter().map(|&f| u128::from(schema[f].cardinality)).collect();
        let column: Vec<u32> = (0..dataset.len())
            .map(|r| {
                let raw = cols.iter().zip(&cards).fold(0u128, |acc, (c, &k)| acc * k + u128::from(c[r]));
                reduce(&combo.name, raw, vocab.raw_cardinality, tau)
            })
            .collect();
        let col_id = out.push_column(combo.name.clone(), vocab.effective_cardinality, column)?;
        meta.push(CombinationMeta {
            name: combo.name.clone(),
            fields: combo.fields.clone(),
            field_names: combo.fields.iter().map(|&f| schema[f].name.clone()).collect(),
            column: col_id,
            raw_cardinality: vocab.raw_cardinality,
            effective_cardinality: vocab.effective_cardinality,
            hashed: vocab.is_hashed(),
            hash_algorithm: HASH_ALGORITHM.into(),
        });
    }
    Ok((out, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SplitTag;
    use alloc::vec;
    use proptest::prelude::*;

    fn schema(cards: &[u32]) -> Vec<FieldSchema> {
        cards
            .iter()
            .enumerate()
            .map(|(i, &c)| FieldSchema {
                field_id: i,
                name: alloc::format!("f{i}"),
                cardinality: c,
            })
            .collect()
    }

    #[test]
    fn cardinality_products() {
        let s = schema(&[3, 4, 957, 4082]);
        let c = CombinationSpec::new(vec![1, 0], &s).unwrap();
        assert_eq!(c.fields, vec![0, 1]);
        assert_eq!(c.name, "f0×f1");
        assert_eq!(combined_cardinality(&c, &s).unwrap(), 12);
        let users_apps = CombinationSpec::new(vec![2, 3], &s).unwrap();
        let raw = combined_cardinality(&users_apps, &s).unwrap();
        assert_eq!(raw, 3_906_474);
        assert!(!HashedVocab::new(raw, DEFAULT_TAU).is_hashed());
        let big = HashedVocab::new(5_000_001, DEFAULT_TAU);
        assert_eq!(big.effective_cardinality, 5_000_000);
        assert!(big.is_hashed());
    }

    #[test]
    fn mixed_radix_ids() {
        let s = schema(&[3, 4, 5]);
        let c = CombinationSpec::new(vec![0, 1], &s).unwrap();
        assert_eq!(combined_value_id(&c, &[3, 4], &[2, 1], DEFAULT_TAU).unwrap(), 9);
        assert_eq!(combined_value_id(&c, &[3, 4], &[0, 0], DEFAULT_TAU).unwrap(), 0);
        assert!(matches!(
            combined_value_id(&c, &[3, 4], &[3, 0], DEFAULT_TAU),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn bad_combinations() {
        let s = schema(&[3, 4]);
        assert!(CombinationSpec::new(vec![0], &s).is_err());
        assert!(CombinationSpec::new(vec![0, 0], &s).is_err());
        assert!(matches!(CombinationSpec::new(vec![0, 5], &s), Err(Error::UnknownField(5))));
    }

    fn dataset(cards: &[u32], n: usize) -> Dataset {
        let s = schema(cards);
        let cols = cards
            .iter()
            .enumerate()
            .map(|(f, &c)| (0..n).map(|r| ((r * (f + 3) + f) % c as usize) as u32).collect())
            .collect();
        Dataset::new(s, cols, vec![0; n], SplitTag::Train).unwrap()
    }

    #[test]
    fn materialize_appends_fields() {
        let ds = dataset(&[3, 4, 5, 6], 50);
        let combos: Vec<CombinationSpec> = [vec![0, 1], vec![1, 2], vec![0, 2, 3]]
            .into_iter()
            .map(|f| CombinationSpec::new(f, ds.fields()).unwrap())
            .collect();
        let (aug, meta) = materialize(&ds, &combos, DEFAULT_TAU).unwrap();
        assert_eq!(aug.num_fields(), 7);
        for f in 0..4 {
            assert_eq!(aug.column(f).unwrap(), ds.column(f).unwrap());
        }
        assert_eq!(meta[2].raw_cardinality, 90);
        assert_eq!(aug.fields()[6].cardinality, 90);
        let (same, _) = materialize(&ds, &[], DEFAULT_TAU).unwrap();
        assert_eq!(same, ds);
    }

    #[test]
    fn duplicates_rejected() {
        let ds = dataset(&[3, 4], 10);
        let c = CombinationSpec::new(vec![0, 1], ds.fields()).unwrap();
        assert!(matches!(
            materialize(&ds, &[c.clone(), c.clone()], DEFAULT_TAU),
            Err(Error::DuplicateCombination(_))
        ));
        let (aug, _) = materialize(&ds, &[c.clone()], DEFAULT_TAU).unwrap();
        assert!(matches!(materialize(&aug, &[c], DEFAULT_TAU), Err(Error::DuplicateCombination(_))));
    }

    #[test]
    fn hashed_ids_are_bounded_and_stable() {
        let ds = dataset(&[1000, 1000, 1000], 2000);
        let c = CombinationSpec::new(vec![0, 1, 2], ds.fields()).unwrap();
        let (a, meta) = materialize(&ds, &[c.clone()], DEFAULT_TAU).unwrap();
        assert!(meta[0].hashed);
        assert_eq!(a.fields()[3].cardinality, DEFAULT_TAU);
        assert!(a.column(3).unwrap().iter().all(|&v| v < DEFAULT_TAU));
        let (b, _) = materialize(&ds, &[c], DEFAULT_TAU).unwrap();
        assert_eq!(a.column(3).unwrap(), b.column(3).unwrap());
    }

    proptest! {
        #[test]
        fn injective_below_threshold(c0 in 1u32..30, c1 in 1u32..30, c2 in 1u32..30) {
            let s = schema(&[c0, c1, c2]);
            let combo = CombinationSpec::new(vec![0, 1, 2], &s).unwrap();
            let mut seen = alloc::collections::BTreeSet::new();
            for a in 0..c0 { for b in 0..c1 { for c in 0..c2 {
                let id = combined_value_id(&combo, &[c0, c1, c2], &[a, b, c], DEFAULT_TAU).unwrap();
                prop_assert!(id < c0 * c1 * c2);
                prop_assert!(seen.insert(id));
            }}}
        }

        #[test]
        fn hashed_ids_are_functional_and_bounded(a in 0u32..1000, b in 0u32..1000, tau in 1u32..10_000) {
            let s = schema(&[1000, 1000]);
            let combo = CombinationSpec::new(vec![0, 1], &s).unwrap();
            let x = combined_value_id(&combo, &[1000, 1000], &[a, b], tau).unwrap();
            prop_assert!(x < tau);
            prop_assert_eq!(x, combined_value_id(&combo, &[1000, 1000], &[a, b], tau).unwrap());
        }
    }
}
