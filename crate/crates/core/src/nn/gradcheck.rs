//! Central finite-difference check of [`Network::backward`].

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::network::{logit_bce, Network};
use super::SignalTarget;
use crate::Result;

/// Largest relative errors found.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradCheckReport {
    /// Per-record embedding-input gradients against the record loss.
    pub tape: f64,
    /// Table and MLP gradients against the mean batch loss.
    pub params: f64,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn max(&self) -> f64 {
        self.tape.max(self.params)
    }
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn mean_loss(net: &Network, indices: &[u32], labels: &[u8]) -> Result<f64> {
    let cache = net.forward(indices, labels.len())?;
    let total: f64 = cache
        .logits
        .iter()
        .zip(labels)
        .map(|(&z, &y)| logit_bce(z, f64::from(y)))
        .sum();
    Ok(total / labels.len() as f64)
}

/// Compare every tape entry and every parameter gradient with central
/// differences of step `h`. Relative errors use `floor` as the smallest
/// denominator.
pub fn gradient_check(net: &Network, indices: &[u32], labels: &[u8], h: f64, floor: f64) -> Result<GradCheckReport> {
    let n = labels.len();
    let cache = net.forward(indices, n)?;
    let (grads, tape) = net.backward(&cache, labels)?;
    let mut report = GradCheckReport::default();
    let width = net.input_width();
    let inputs = &cache.acts[0];

    for r in 0..n {
        let x = &inputs[r * width..(r + 1) * width];
        let mut probe: Vec<f64> = x.to_vec();
        for f in 0..net.num_fields() {
            for k in 0..net.dim {
                let i = f * net.dim + k;
                probe[i] = x[i] + h;
                let up = net.record_objective(&probe, labels[r], SignalTarget::Loss);
                probe[i] = x[i] - h;
                let down = net.record_objective(&probe, labels[r], SignalTarget::Loss);
                probe[i] = x[i];
                let numeric = (up - down) / (2.0 * h);
                report.tape = report.tape.max(relative_error(tape.get(r, f)[k], numeric, floor));
                report.checked += 1;
            }
        }
    }

    let mut work = net.clone();
    for (t, rows) in grads.tables.iter().enumerate() {
        for (&row, g) in rows {
            for (k, &analytic) in g.iter().enumerate() {
                let orig = work.tables[t].row_vec(row)[k];
                work.tables[t].row_mut(row)[k] = orig + h;
                let up = mean_loss(&work, indices, labels)?;
                work.tables[t].row_mut(row)[k] = orig - h;
                let down = mean_loss(&work, indices, labels)?;
                work.tables[t].row_mut(row)[k] = orig;
                report.params = report.params.max(relative_error(analytic, (up - down) / (2.0 * h), floor));
                report.checked += 1;
            }
        }
    }

    for (l, lg) in grads.layers.iter().enumerate() {
        for (i, &analytic) in lg.weights.iter().enumerate() {
            let orig = work.mlp.layers[l].weights[i];
            work.mlp.layers[l].weights[i] = orig + h;
            let up = mean_loss(&work, indices, labels)?;
            work.mlp.layers[l].weights[i] = orig - h;
            let down = mean_loss(&work, indices, labels)?;
            work.mlp.layers[l].weights[i] = orig;
            report.params = report.params.max(relative_error(analytic, (up - down) / (2.0 * h), floor));
            report.checked += 1;
        }
        for (i, &analytic) in lg.bias.iter().enumerate() {
            let orig = work.mlp.layers[l].bias[i];
            work.mlp.layers[l].bias[i] = orig + h;
            let up = mean_loss(&work, indices, labels)?;
            work.mlp.layers[l].bias[i] = orig - h;
            let down = mean_loss(&work, indices, labels)?;
            work.mlp.layers[l].bias[i] = orig;
            report.params = report.params.max(relative_error(analytic, (up - down) / (2.0 * h), floor));
            report.checked += 1;
        }
    }
    Ok(report)
}

/// A random tiny network with a batch of records, away from ReLU kinks by
/// at least `1e-3` so central differences of step `<= 1e-4` are valid.
pub fn random_tiny_case(seed: u64) -> (Network, Vec<u32>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fields = rng.gen_range(2..=4);
    let dim = rng.gen_range(1..=3);
    let hidden: Vec<usize> = (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(2..=5)).collect();
    let cards: Vec<u32> = (0..fields).map(|_| rng.gen_range(2..=5)).collect();
    let mut net = Network::new(&cards, dim, &hidden, seed);
    let n = rng.gen_range(1..=6);
    let indices: Vec<u32> = (0..n)
        .flat_map(|_| cards.iter().map(|&c| rng.gen_range(0..c)).collect::<Vec<_>>())
        .collect();
    let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
    loop {
        for layer in &mut net.mlp.layers {
            layer.bias.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
        }
        let cache = net.forward(&indices, n).expect("valid indices");
        if cache.pre.iter().flatten().all(|p| p.abs() > 1e-3) {
            return (net, indices, labels);
        }
    }
}
