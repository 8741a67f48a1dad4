use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::hash::{checksum_f64, derive_seed, mix64, unit_f64};

/// Tables with more entries than this keep only touched rows in memory.
pub const DENSE_ENTRY_LIMIT: usize = 1 << 21;

/// How a row is filled before it is first written.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RowInit {
    Zeros,
    /// Uniform on `[-bound, bound)`, drawn from a hash of `(seed, row, col)`
    /// so dense and sparse backings agree entry for entry.
    Uniform { seed: u64, bound: f64 },
}

impl RowInit {
    /// Xavier-uniform bound for a `rows x width` table.
    pub fn xavier(seed: u64, rows: u32, width: usize) -> Self {
        let bound = libm::sqrt(6.0 / (f64::from(rows) + width as f64));
        RowInit::Uniform { seed, bound }
    }

    fn fill(&self, row: u32, out: &mut [f64]) {
        match *self {
            RowInit::Zeros => out.fill(0.0),
            RowInit::Uniform { seed, bound } => {
                let row_seed = derive_seed(seed, u64::from(row));
                for (c, v) in out.iter_mut().enumerate() {
                    let u = unit_f64(mix64(row_seed ^ (c as u64)));
                    *v = (2.0 * u - 1.0) * bound;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Backing {
    Dense(Vec<f64>),
    Sparse(BTreeMap<u32, Vec<f64>>),
}

/// A `rows x width` parameter matrix addressed by row index.
///
/// Large tables (hashed combinations can have millions of rows) are stored
/// sparsely: untouched rows are never allocated and read back as their
/// deterministic initial value.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    rows: u32,
    width: usize,
    init: RowInit,
    backing: Backing,
}

impl EmbeddingTable {
    pub fn new(rows: u32, width: usize, init: RowInit) -> Self {
        let sparse = rows as usize * width > DENSE_ENTRY_LIMIT;
        Self::with_backing(rows, width, init, sparse)
    }

    pub fn with_backing(rows: u32, width: usize, init: RowInit, sparse: bool) -> Self {
        let backing = if sparse {
            Backing::Sparse(BTreeMap::new())
        } else {
            let mut data = vec![0.0; rows as usize * width];
            if init != RowInit::Zeros {
                for (r, chunk) in data.chunks_mut(width.max(1)).enumerate() {
                    init.fill(r as u32, chunk);
                }
            }
            Backing::Dense(data)
        };
        Self { rows, width, init, backing }
    }

    pub fn rows(&self) -> u32 {
        self.rows
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn init(&self) -> RowInit {
        self.init
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.backing, Backing::Sparse(_))
    }

    /// Copy row `row` into `out`.
    pub fn read_row(&self, row: u32, out: &mut [f64]) {
        debug_assert!(row < self.rows);
        match &self.backing {
            Backing::Dense(data) => {
                let start = row as usize * self.width;
                out.copy_from_slice(&data[start..start + self.width]);
            }
            Backing::Sparse(map) => match map.get(&row) {
                Some(v) => out.copy_from_slice(v),
                None => self.init.fill(row, out),
            },
        }
    }

    pub fn row_vec(&self, row: u32) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        self.read_row(row, &mut out);
        out
    }

    /// Mutable access, materializing the row if needed.
    pub fn row_mut(&mut self, row: u32) -> &mut [f64] {
        debug_assert!(row < self.rows);
        let width = self.width;
        let init = self.init;
        match &mut self.backing {
            Backing::Dense(data) => {
                let start = row as usize * width;
                &mut data[start..start + width]
            }
            Backing::Sparse(map) => map.entry(row).or_insert_with(|| {
                let mut v = vec![0.0; width];
                init.fill(row, &mut v);
                v
            }),
        }
    }

    /// Rows held in memory, ascending. Dense tables yield every row.
    pub fn stored_rows(&self) -> impl Iterator<Item = (u32, &[f64])> + '_ {
        let dense = match &self.backing {
            Backing::Dense(data) => Some(data.chunks(self.width.max(1)).enumerate().map(|(r, c)| (r as u32, c))),
            Backing::Sparse(_) => None,
        };
        let sparse = match &self.backing {
            Backing::Sparse(map) => Some(map.iter().map(|(&r, v)| (r, v.as_slice()))),
            Backing::Dense(_) => None,
        };
        dense.into_iter().flatten().chain(sparse.into_iter().flatten())
    }

    pub fn stored_row_count(&self) -> usize {
        match &self.backing {
            Backing::Dense(_) => self.rows as usize,
            Backing::Sparse(map) => map.len(),
        }
    }

    /// Order-sensitive checksum of stored entries.
    pub fn checksum(&self, state: u64) -> u64 {
        self.stored_rows().fold(state, |acc, (r, v)| {
            checksum_f64(crate::hash::fnv1a64_extend(acc, &r.to_le_bytes()), v)
        })
    }

    /// Sum of squares of stored entries; exact for zero-initialized tables.
    pub fn squared_norm(&self) -> f64 {
        self.stored_rows().map(|(_, v)| v.iter().map(|x| x * x).sum::<f64>()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.stored_rows().all(|(_, v)| v.iter().all(|x| x.is_finite()))
    }
}
