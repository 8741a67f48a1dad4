//! Feature-combination selection for deep CTR models.
//!
//! The crate is `no_std` (with `alloc`) and holds every numeric piece of the
//! pipeline:
//!
//! * [`data`]: vocabularies, column-encoded datasets, seeded splits and the
//!   synthetic generator with planted interactions.
//! * [`nn`]: embedding tables, a ReLU MLP, BCE loss, reverse-mode gradients
//!   with capture at the embedding boundary, Adam and the training loop.
//! * [`models`]: the DNN recommender and the sparse logistic-regression
//!   surrogate.
//! * [`tayscorer`]: expansion point, per-field Taylor signals and order-2 /
//!   order-3 combination scores from one backward pass per batch.
//! * [`lre`]: shuffle-gain redundancy elimination over a sliding window.
//! * [`combiner`]: mixed-radix / hash-modulo materialization of combinations.
//! * [`eval`]: AUC, Logloss and relative improvement.
//!
//! File formats, CSV ingestion and the command-line driver live in the
//! `tayfcs` crate.
#![no_std]

extern crate alloc;

pub mod combiner;
pub mod data;
pub mod error;
pub mod eval;
pub mod hash;
pub mod lre;
pub mod models;
pub mod nn;
pub mod tayscorer;

pub use error::{Error, Result};
