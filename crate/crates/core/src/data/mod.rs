//! Categorical click-log data: schemas, vocabularies, column-encoded
//! datasets, seeded splits and column shuffles.

mod synthetic;

pub use synthetic::{generate_synthetic, Pattern, PlantedCombo, SyntheticSpec};

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Index reserved in every field for values never seen in training.
pub const OOV_INDEX: u32 = 0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSchema {
    pub field_id: usize,
    pub name: String,
    /// Distinct values including the reserved OOV slot.
    pub cardinality: u32,
}

/// Rows as read from a delimited file, before encoding.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RawTable {
    pub field_names: Vec<String>,
    pub label_name: String,
    pub rows: Vec<RawRow>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRow {
    pub values: Vec<String>,
    pub label: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Train,
    Val,
    Test,
    Full,
}

impl SplitTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Val => "val",
            SplitTag::Test => "test",
            SplitTag::Full => "full",
        }
    }
}

/// Per-field value-to-index maps. Index 0 of every field is the OOV slot.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Vocabulary {
    fields: Vec<FieldVocab>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
struct FieldVocab {
    /// `values[i - 1]` is the string for index `i`.
    values: Vec<String>,
    #[serde(skip)]
    lookup: BTreeMap<String, u32>,
}

impl FieldVocab {
    fn insert(&mut self, value: &str) -> u32 {
        if let Some(&idx) = self.lookup.get(value) {
            return idx;
        }
        self.values.push(value.to_string());
        let idx = self.values.len() as u32;
        self.lookup.insert(value.to_string(), idx);
        idx
    }
}

impl Vocabulary {
    pub fn num_fields(&self) -> usize {
        self.fields.len()
    }

    /// Cardinality of `field`, OOV slot included.
    pub fn cardinality(&self, field: usize) -> Option<u32> {
        self.fields.get(field).map(|f| f.values.len() as u32 + 1)
    }

    pub fn encode(&self, field: usize, value: &str) -> Result<u32> {
        let vocab = self.fields.get(field).ok_or(Error::UnknownField(field))?;
        Ok(vocab.lookup.get(value).copied().unwrap_or(OOV_INDEX))
    }

    /// `None` for the OOV slot and out-of-range indices.
    pub fn decode(&self, field: usize, index: u32) -> Option<&str> {
        let vocab = self.fields.get(field)?;
        if index == OOV_INDEX {
            return None;
        }
        vocab.values.get(index as usize - 1).map(String::as_str)
    }

    /// Rebuild lookup maps after deserialization.
    pub fn rebuild_index(&mut self) {
        for f in &mut self.fields {
            f.lookup = f
                .values
                .iter()
                .enumerate()
                .map(|(i, v)| (v.clone(), i as u32 + 1))
                .collect();
        }
    }
}

/// Column-encoded categorical records with binary labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    fields: Vec<FieldSchema>,
    columns: Vec<Vec<u32>>,
    labels: Vec<u8>,
    split: SplitTag,
}

impl Dataset {
    pub fn new(
        fields: Vec<FieldSchema>,
        columns: Vec<Vec<u32>>,
        labels: Vec<u8>,
        split: SplitTag,
    ) -> Result<Self> {
        if fields.len() != columns.len() {
            return Err(Error::LengthMismatch {
                expected: fields.len(),
                actual: columns.len(),
            });
        }
        for (i, (schema, col)) in fields.iter().zip(&columns).enumerate() {
            if schema.field_id != i {
                return Err(Error::UnknownField(schema.field_id));
            }
            if col.len() != labels.len() {
                return Err(Error::LengthMismatch {
                    expected: labels.len(),
                    actual: col.len(),
                });
            }
            if let Some(&bad) = col.iter().find(|&&v| v >= schema.cardinality) {
                return Err(Error::IndexOutOfRange {
                    field: i,
                    index: bad,
                    cardinality: schema.cardinality,
                });
            }
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::NonBinaryLabel);
        }
        Ok(Self {
            fields,
            columns,
            labels,
            split,
        })
    }

    pub fn fields(&self) -> &[FieldSchema] {
        &self.fields
    }

    pub fn num_fields(&self) -> usize {
        self.fields.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn column(&self, field: usize) -> Result<&[u32]> {
        self.columns
            .get(field)
            .map(Vec::as_slice)
            .ok_or(Error::UnknownField(field))
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn split(&self) -> SplitTag {
        self.split
    }

    pub fn with_split(mut self, split: SplitTag) -> Self {
        self.split = split;
        self
    }

    pub fn field_by_name(&self, name: &str) -> Option<&FieldSchema> {
        self.fields.iter().find(|f| f.name == name)
    }

    /// Records at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            fields: self.fields.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| indices.iter().map(|&i| c[i]).collect())
                .collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            split: self.split,
        }
    }

    /// Append a column. Its schema gets the next field id.
    pub fn push_column(&mut self, name: String, cardinality: u32, column: Vec<u32>) -> Result<usize> {
        if column.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                actual: column.len(),
            });
        }
        let field = self.fields.len();
        if let Some(&bad) = column.iter().find(|&&v| v >= cardinality) {
            return Err(Error::IndexOutOfRange {
                field,
                index: bad,
                cardinality,
            });
        }
        self.fields.push(FieldSchema {
            field_id: field,
            name,
            cardinality,
        });
        self.columns.push(column);
        Ok(field)
    }

    /// Keep only the first `count` fields.
    pub fn truncate_fields(&mut self, count: usize) {
        self.fields.truncate(count);
        self.columns.truncate(count);
    }

    /// Fraction of positive labels.
    pub fn positive_rate(&self) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        self.labels.iter().map(|&y| f64::from(y)).sum::<f64>() / self.labels.len() as f64
    }
}

/// Sizes of a three-way split of `n` rows.
///
/// Test is carved first as `floor(n * r_test)`, validation next as
/// `floor(rest * r_val / (r_train + r_val))`, and training takes whatever is
/// left. For 288,609 rows at 7:2:1 this yields 202,027 / 57,722 / 28,860.
pub fn split_sizes(n: usize, ratios: [f64; 3]) -> Result<[usize; 3]> {
    let sum: f64 = ratios.iter().sum();
    if ratios.iter().any(|r| !(*r > 0.0) || !r.is_finite()) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidRatios(sum));
    }
    let [r_train, r_val, r_test] = ratios;
    let floor = |x: f64| libm::floor(x + 1e-9).max(0.0) as usize;
    let n_test = floor(n as f64 * r_test).min(n);
    let rest = n - n_test;
    let n_val = floor(rest as f64 * r_val / (r_train + r_val)).min(rest);
    Ok([rest - n_val, n_val, n_test])
}

/// Seeded partition of `0..n` into train/val/test index lists, each sorted.
pub fn split_indices(n: usize, ratios: [f64; 3], seed: u64) -> Result<[Vec<usize>; 3]> {
    let [n_train, n_val, _] = split_sizes(n, ratios)?;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = perm[..n_train].to_vec();
    let mut val = perm[n_train..n_train + n_val].to_vec();
    let mut test = perm[n_train + n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok([train, val, test])
}

/// Seeded row-wise split of arbitrary rows.
pub fn split<T: Clone>(rows: &[T], ratios: [f64; 3], seed: u64) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let [a, b, c] = split_indices(rows.len(), ratios, seed)?;
    let pick = |idx: Vec<usize>| idx.into_iter().map(|i| rows[i].clone()).collect();
    Ok((pick(a), pick(b), pick(c)))
}

/// Build vocabularies from `train` and encode all three splits. Values not
/// seen in training map to [`OOV_INDEX`].
pub fn build_vocab_and_encode(
    field_names: &[String],
    train: &[RawRow],
    val: &[RawRow],
    test: &[RawRow],
) -> Result<(Vocabulary, [Dataset; 3])> {
    let num_fields = field_names.len();
    let mut vocab = Vocabulary {
        fields: (0..num_fields).map(|_| FieldVocab::default()).collect(),
    };
    for row in train {
        check_width(row, num_fields)?;
        for (f, v) in row.values.iter().enumerate() {
            vocab.fields[f].insert(v);
        }
    }
    let schemas: Vec<FieldSchema> = field_names
        .iter()
        .enumerate()
        .map(|(i, name)| FieldSchema {
            field_id: i,
            name: name.clone(),
            cardinality: vocab.cardinality(i).unwrap_or(1),
        })
        .collect();
    let encode = |rows: &[RawRow], tag: SplitTag| -> Result<Dataset> {
        let mut columns = alloc::vec![Vec::with_capacity(rows.len()); num_fields];
        let mut labels = Vec::with_capacity(rows.len());
        for row in rows {
            check_width(row, num_fields)?;
            for (f, v) in row.values.iter().enumerate() {
                columns[f].push(vocab.encode(f, v)?);
            }
            labels.push(row.label);
        }
        Dataset::new(schemas.clone(), columns, labels, tag)
    };
    let sets = [
        encode(train, SplitTag::Train)?,
        encode(val, SplitTag::Val)?,
        encode(test, SplitTag::Test)?,
    ];
    Ok((vocab, sets))
}

fn check_width(row: &RawRow, expected: usize) -> Result<()> {
    if row.values.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            actual: row.values.len(),
        });
    }
    Ok(())
}

/// Copy of `dataset` with one column permuted by a seeded permutation.
pub fn shuffle_field(dataset: &Dataset, field: usize, seed: u64) -> Result<Dataset> {
    if field >= dataset.num_fields() {
        return Err(Error::UnknownField(field));
    }
    let mut out = dataset.clone();
    out.columns[field].shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn row(values: &[&str], label: u8) -> RawRow {
        RawRow {
            values: values.iter().map(|s| s.to_string()).collect(),
            label,
        }
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| alloc::format!("f{i}")).collect()
    }

    #[test]
    fn frappe_split_sizes() {
        assert_eq!(split_sizes(288_609, [0.7, 0.2, 0.1]).unwrap(), [202_027, 57_722, 28_860]);
    }

    #[test]
    fn ten_rows_split() {
        assert_eq!(split_sizes(10, [0.8, 0.1, 0.1]).unwrap(), [8, 1, 1]);
    }

    #[test]
    fn bad_ratios() {
        assert!(matches!(split_sizes(10, [0.5, 0.2, 0.2]), Err(Error::InvalidRatios(_))));
        assert!(matches!(split_sizes(10, [1.2, -0.1, -0.1]), Err(Error::InvalidRatios(_))));
    }

    #[test]
    fn split_is_deterministic_partition() {
        let rows: Vec<usize> = (0..1000).collect();
        let a = split(&rows, [0.7, 0.2, 0.1], 9).unwrap();
        let b = split(&rows, [0.7, 0.2, 0.1], 9).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<usize> = a.0.iter().chain(&a.1).chain(&a.2).copied().collect();
        all.sort_unstable();
        assert_eq!(all, rows);
        let c = split(&rows, [0.7, 0.2, 0.1], 10).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn oov_and_reserved_slot() {
        let (vocab, [train, _, test]) = build_vocab_and_encode(
            &names(1),
            &[row(&["a"], 1), row(&["b"], 0)],
            &[],
            &[row(&["c"], 0), row(&["a"], 1)],
        )
        .unwrap();
        assert_eq!(vocab.cardinality(0), Some(3));
        assert_eq!(train.fields()[0].cardinality, 3);
        assert_eq!(test.column(0).unwrap(), &[OOV_INDEX, train.column(0).unwrap()[0]]);
        assert_eq!(vocab.decode(0, 1), Some("a"));
        assert_eq!(vocab.decode(0, OOV_INDEX), None);
    }

    #[test]
    fn ragged_row_is_rejected() {
        let err = build_vocab_and_encode(&names(2), &[row(&["a"], 1)], &[], &[]).unwrap_err();
        assert_eq!(err, Error::LengthMismatch { expected: 2, actual: 1 });
    }

    #[test]
    fn vocabulary_survives_serde_rebuild() {
        let (mut vocab, _) =
            build_vocab_and_encode(&names(1), &[row(&["x"], 1), row(&["y"], 0)], &[], &[]).unwrap();
        vocab.fields[0].lookup.clear();
        assert_eq!(vocab.encode(0, "y").unwrap(), OOV_INDEX);
        vocab.rebuild_index();
        assert_eq!(vocab.encode(0, "y").unwrap(), 2);
    }

    fn two_field(col0: Vec<u32>, col1: Vec<u32>, labels: Vec<u8>) -> Dataset {
        let fields = vec![
            FieldSchema { field_id: 0, name: "a".into(), cardinality: 10 },
            FieldSchema { field_id: 1, name: "b".into(), cardinality: 10 },
        ];
        Dataset::new(fields, vec![col0, col1], labels, SplitTag::Train).unwrap()
    }

    #[test]
    fn shuffle_constant_column_is_identity() {
        let ds = two_field(vec![3; 20], (0..20).map(|i| i % 10).collect(), vec![0; 20]);
        assert_eq!(shuffle_field(&ds, 0, 5).unwrap(), ds);
    }

    #[test]
    fn shuffle_two_records() {
        let ds = two_field(vec![5, 7], vec![1, 2], vec![0, 1]);
        // one of the two seeds must produce the swap; both are valid permutations
        let swapped = (0..16u64)
            .map(|s| shuffle_field(&ds, 0, s).unwrap())
            .find(|d| d.column(0).unwrap() == [7, 5])
            .expect("some seed swaps");
        assert_eq!(swapped.column(1).unwrap(), &[1, 2]);
        assert_eq!(swapped.labels(), &[0, 1]);
    }

    #[test]
    fn shuffle_is_seeded_and_touches_one_column() {
        let ds = two_field((0..10).collect(), (0..10).rev().collect(), vec![1; 10]);
        let a = shuffle_field(&ds, 0, 3).unwrap();
        assert_eq!(a, shuffle_field(&ds, 0, 3).unwrap());
        assert_eq!(a.column(1).unwrap(), ds.column(1).unwrap());
        assert_eq!(ds.column(0).unwrap(), (0..10).collect::<Vec<u32>>().as_slice());
        assert!(matches!(shuffle_field(&ds, 2, 0), Err(Error::UnknownField(2))));
    }

    #[test]
    fn dataset_rejects_out_of_range_index() {
        let fields = vec![FieldSchema { field_id: 0, name: "a".into(), cardinality: 2 }];
        let err = Dataset::new(fields, vec![vec![0, 2]], vec![0, 1], SplitTag::Train).unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { index: 2, .. }));
    }
}
