#![allow(dead_code)]

use tayfcs_core::data::{generate_synthetic, Pattern, PlantedCombo, SyntheticSpec};
use tayfcs_core::data::{split_indices, Dataset, SplitTag};

pub fn xor_spec(fields: usize, pair: [usize; 2], records: usize, seed: u64, weight: f64) -> SyntheticSpec {
    SyntheticSpec {
        cardinalities: vec![4; fields],
        planted: vec![PlantedCombo {
            fields: pair.to_vec(),
            pattern: Pattern::XorParity,
            weight,
        }],
        bias: 0.0,
        noise: 0.0,
        records,
        seed,
    }
}

pub fn splits(ds: &Dataset, seed: u64) -> (Dataset, Dataset, Dataset) {
    let [a, b, c] = split_indices(ds.len(), [0.7, 0.2, 0.1], seed).unwrap();
    (
        ds.select(&a).with_split(SplitTag::Train),
        ds.select(&b).with_split(SplitTag::Val),
        ds.select(&c).with_split(SplitTag::Test),
    )
}

pub fn xor_splits(fields: usize, records: usize, seed: u64) -> (Dataset, Dataset, Dataset) {
    let ds = generate_synthetic(&xor_spec(fields, [0, 1], records, seed, 4.0)).unwrap();
    splits(&ds, seed)
}
