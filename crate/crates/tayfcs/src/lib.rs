//! Files, configuration and the staged command-line pipeline around
//! [`tayfcs_core`].

pub mod config;
pub mod csv_io;
pub mod error;
pub mod formats;
pub mod parallel;
pub mod pipeline;

pub use error::{Error, Result};
