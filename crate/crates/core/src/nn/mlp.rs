use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Identity,
}

/// Fully connected layer, `weights` row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
            activation,
        }
    }

    /// Xavier-uniform weights, zero bias.
    pub fn xavier(inputs: usize, outputs: usize, activation: Activation, rng: &mut ChaCha8Rng) -> Self {
        let bound = libm::sqrt(6.0 / (inputs + outputs) as f64);
        let weights = (0..inputs * outputs).map(|_| rng.gen_range(-bound..bound)).collect();
        Self {
            inputs,
            outputs,
            weights,
            bias: vec![0.0; outputs],
            activation,
        }
    }

    /// `out[n x outputs] = x[n x inputs] W^T + b` (pre-activation).
    pub fn affine(&self, x: &[f64], n: usize, out: &mut Vec<f64>) {
        out.clear();
        out.resize(n * self.outputs, 0.0);
        for r in 0..n {
            let xr = &x[r * self.inputs..(r + 1) * self.inputs];
            let or = &mut out[r * self.outputs..(r + 1) * self.outputs];
            for (o, w) in or.iter_mut().zip(self.weights.chunks_exact(self.inputs)) {
                *o = dot(xr, w);
            }
            for (o, b) in or.iter_mut().zip(&self.bias) {
                *o += b;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// ReLU hidden layers followed by a single identity output unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    pub fn new(input: usize, hidden: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut width = input;
        for &h in hidden {
            layers.push(Dense::xavier(width, h, Activation::Relu, &mut rng));
            width = h;
        }
        layers.push(Dense::xavier(width, 1, Activation::Identity, &mut rng));
        Self { layers }
    }

    pub fn zeros(input: usize, hidden: &[usize]) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut width = input;
        for &h in hidden {
            layers.push(Dense::zeros(width, h, Activation::Relu));
            width = h;
        }
        layers.push(Dense::zeros(width, 1, Activation::Identity));
        Self { layers }
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(|l| l.outputs).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(Dense::all_finite)
    }
}
