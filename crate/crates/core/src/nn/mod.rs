//! Dense network core: embedding tables, MLP, BCE loss, reverse-mode
//! gradients with capture at the embedding boundary, Adam and training.

mod adam;
mod embedding;
mod gradcheck;
mod mlp;
mod network;
mod train;

pub use adam::{AdamConfig, AdamState, Moments};
pub use embedding::{EmbeddingTable, RowInit, DENSE_ENTRY_LIMIT};
pub use gradcheck::{gradient_check, random_tiny_case, relative_error, GradCheckReport};
pub use mlp::{Activation, Dense, Mlp};
pub use network::{ForwardCache, GradientTape, Gradients, Network, SignalTarget};
pub use train::{train, EpochRecord, TrainConfig, TrainHistory};

use crate::{Error, Result};

/// Probability clamp applied before taking logs.
pub const PROB_EPS: f64 = 1e-7;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// Per-record binary cross-entropy with the probability clamped to
/// `[PROB_EPS, 1 - PROB_EPS]`.
pub fn bce(p: f64, y: f64) -> f64 {
    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    -(y * libm::log(p) + (1.0 - y) * libm::log(1.0 - p))
}

/// Mean BCE over a batch.
pub fn bce_loss(probabilities: &[f64], labels: &[u8]) -> Result<f64> {
    if probabilities.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            actual: probabilities.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let total: f64 = probabilities
        .iter()
        .zip(labels)
        .map(|(&p, &y)| bce(p, f64::from(y)))
        .sum();
    Ok(total / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_hand_values() {
        // -(ln 0.9 + ln 0.9) / 2
        let expected = -libm::log(0.9);
        assert!((bce_loss(&[0.9, 0.1], &[1, 0]).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.10536).abs() < 1e-5);
        assert!((bce_loss(&[0.5], &[1]).unwrap() - core::f64::consts::LN_2).abs() < 1e-12);
        assert!((bce_loss(&[0.5], &[0]).unwrap() - core::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn bce_perfect_prediction_is_clamped() {
        let l = bce_loss(&[1.0, 0.0], &[1, 0]).unwrap();
        assert!(l > 0.0 && l < 1.1e-7);
    }

    #[test]
    fn bce_length_mismatch() {
        assert!(matches!(bce_loss(&[0.5], &[1, 0]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn sigmoid_is_stable() {
        assert!((sigmoid(2.0) - 0.880_797_077_977_882_3).abs() < 1e-15);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
    }
}
