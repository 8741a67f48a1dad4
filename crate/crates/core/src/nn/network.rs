use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::mlp::{Activation, Mlp};
use super::{sigmoid, EmbeddingTable, RowInit};
use crate::hash::derive_seed;
use crate::{Error, Result};

/// Which scalar the embedding-input gradients are taken of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalTarget {
    /// Per-record BCE loss.
    #[default]
    Loss,
    /// Pre-sigmoid output.
    Logit,
}

/// Per-field embedding tables feeding a ReLU MLP with a sigmoid output.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub tables: Vec<EmbeddingTable>,
    pub mlp: Mlp,
    pub dim: usize,
}

/// Activations kept from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub n: usize,
    /// Table row per record and field, `n x F`; empty when the pass started
    /// from explicit embedding inputs.
    pub indices: Vec<u32>,
    /// `acts[0]` is the concatenated embedding input, `acts[l + 1]` the
    /// output of layer `l`.
    pub acts: Vec<Vec<f64>>,
    pub pre: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
}

/// Gradients of each record's own loss (or logit) with respect to its
/// embedding inputs, `n x F x d` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientTape {
    pub n: usize,
    pub fields: usize,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl GradientTape {
    pub fn get(&self, record: usize, field: usize) -> &[f64] {
        let start = (record * self.fields + field) * self.dim;
        &self.values[start..start + self.dim]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Gradients of the mean batch loss. Embedding gradients are keyed by the
/// rows the batch touched.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tables: Vec<BTreeMap<u32, Vec<f64>>>,
    pub layers: Vec<LayerGrad>,
}

impl Network {
    /// Xavier-initialized network over tables with the given row counts.
    pub fn new(cardinalities: &[u32], dim: usize, hidden: &[usize], seed: u64) -> Self {
        let tables = cardinalities
            .iter()
            .enumerate()
            .map(|(i, &rows)| EmbeddingTable::new(rows, dim, RowInit::xavier(derive_seed(seed, i as u64), rows, dim)))
            .collect();
        let mlp = Mlp::new(cardinalities.len() * dim, hidden, derive_seed(seed, u64::MAX));
        Self { tables, mlp, dim }
    }

    pub fn num_fields(&self) -> usize {
        self.tables.len()
    }

    pub fn input_width(&self) -> usize {
        self.tables.len() * self.dim
    }

    /// Concatenated embeddings for `n` records, `indices` is `n x F`.
    pub fn lookup(&self, indices: &[u32], n: usize) -> Result<Vec<f64>> {
        let fields = self.num_fields();
        if indices.len() != n * fields {
            return Err(Error::LengthMismatch {
                expected: n * fields,
                actual: indices.len(),
            });
        }
        let mut inputs = vec![0.0; n * fields * self.dim];
        for (r, row) in indices.chunks_exact(fields.max(1)).enumerate().take(n) {
            for (f, (&idx, table)) in row.iter().zip(&self.tables).enumerate() {
                if idx >= table.rows() {
                    return Err(Error::IndexOutOfRange {
                        field: f,
                        index: idx,
                        cardinality: table.rows(),
                    });
                }
                let start = (r * fields + f) * self.dim;
                table.read_row(idx, &mut inputs[start..start + self.dim]);
            }
        }
        Ok(inputs)
    }

    pub fn forward(&self, indices: &[u32], n: usize) -> Result<ForwardCache> {
        let inputs = self.lookup(indices, n)?;
        let mut cache = self.forward_inputs(inputs, n)?;
        cache.indices = indices.to_vec();
        Ok(cache)
    }

    /// Forward pass from explicit embedding inputs (`n x F*d`).
    pub fn forward_inputs(&self, inputs: Vec<f64>, n: usize) -> Result<ForwardCache> {
        if inputs.len() != n * self.input_width() {
            return Err(Error::LengthMismatch {
                expected: n * self.input_width(),
                actual: inputs.len(),
            });
        }
        let mut acts = Vec::with_capacity(self.mlp.layers.len() + 1);
        let mut pre = Vec::with_capacity(self.mlp.layers.len());
        acts.push(inputs);
        for layer in &self.mlp.layers {
            let mut z = Vec::new();
            layer.affine(acts.last().expect("input present"), n, &mut z);
            let a = match layer.activation {
                Activation::Relu => z.iter().map(|&v| v.max(0.0)).collect(),
                Activation::Identity => z.clone(),
            };
            pre.push(z);
            acts.push(a);
        }
        let logits = acts.pop().expect("output layer");
        let probabilities = logits.iter().map(|&z| sigmoid(z)).collect();
        Ok(ForwardCache {
            n,
            indices: Vec::new(),
            acts,
            pre,
            logits,
            probabilities,
        })
    }

    /// Backward pass of the mean batch BCE. Returns parameter gradients and
    /// the per-record embedding-input tape.
    pub fn backward(&self, cache: &ForwardCache, labels: &[u8]) -> Result<(Gradients, GradientTape)> {
        let seeds = loss_seeds(cache, labels)?;
        let (layers, input_grad) = self.backprop(cache, &seeds, true);
        let layers = layers.expect("parameter gradients requested");
        let scale = 1.0 / cache.n.max(1) as f64;
        let fields = self.num_fields();
        let mut tables: Vec<BTreeMap<u32, Vec<f64>>> = (0..fields).map(|_| BTreeMap::new()).collect();
        if !cache.indices.is_empty() {
            for r in 0..cache.n {
                for (f, grads) in tables.iter_mut().enumerate() {
                    let row = cache.indices[r * fields + f];
                    let start = (r * fields + f) * self.dim;
                    let g = grads.entry(row).or_insert_with(|| vec![0.0; self.dim]);
                    for (acc, v) in g.iter_mut().zip(&input_grad[start..start + self.dim]) {
                        *acc += v * scale;
                    }
                }
            }
        }
        let tape = GradientTape {
            n: cache.n,
            fields,
            dim: self.dim,
            values: input_grad,
        };
        Ok((Gradients { tables, layers }, tape))
    }

    /// One backward pass producing only the embedding-input tape.
    pub fn input_gradients(&self, cache: &ForwardCache, labels: &[u8], target: SignalTarget) -> Result<GradientTape> {
        let seeds = match target {
            SignalTarget::Loss => loss_seeds(cache, labels)?,
            SignalTarget::Logit => vec![1.0; cache.n],
        };
        let (_, values) = self.backprop(cache, &seeds, false);
        Ok(GradientTape {
            n: cache.n,
            fields: self.num_fields(),
            dim: self.dim,
            values,
        })
    }

    /// `seeds[r]` is d(record r's objective)/d(logit r). Parameter gradients
    /// are averaged over the batch; input gradients are per record.
    fn backprop(&self, cache: &ForwardCache, seeds: &[f64], want_params: bool) -> (Option<Vec<LayerGrad>>, Vec<f64>) {
        let n = cache.n;
        let mut dz: Vec<f64> = seeds.to_vec();
        let mut grads: Vec<LayerGrad> = Vec::new();
        let scale = 1.0 / n.max(1) as f64;
        for (l, layer) in self.mlp.layers.iter().enumerate().rev() {
            let x = &cache.acts[l];
            if want_params {
                let mut gw = vec![0.0; layer.weights.len()];
                let mut gb = vec![0.0; layer.outputs];
                for r in 0..n {
                    let xr = &x[r * layer.inputs..(r + 1) * layer.inputs];
                    let dzr = &dz[r * layer.outputs..(r + 1) * layer.outputs];
                    for (o, &d) in dzr.iter().enumerate() {
                        if d == 0.0 {
                            continue;
                        }
                        gb[o] += d;
                        for (g, xv) in gw[o * layer.inputs..(o + 1) * layer.inputs].iter_mut().zip(xr) {
                            *g += d * xv;
                        }
                    }
                }
                gw.iter_mut().chain(gb.iter_mut()).for_each(|g| *g *= scale);
                grads.push(LayerGrad { weights: gw, bias: gb });
            }
            let mut dx = vec![0.0; n * layer.inputs];
            for r in 0..n {
                let dzr = &dz[r * layer.outputs..(r + 1) * layer.outputs];
                let dxr = &mut dx[r * layer.inputs..(r + 1) * layer.inputs];
                for (&d, w) in dzr.iter().zip(layer.weights.chunks_exact(layer.inputs)) {
                    if d == 0.0 {
                        continue;
                    }
                    for (g, wv) in dxr.iter_mut().zip(w) {
                        *g += d * wv;
                    }
                }
            }
            if l > 0 && self.mlp.layers[l - 1].activation == Activation::Relu {
                for (g, &p) in dx.iter_mut().zip(&cache.pre[l - 1]) {
                    if p <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            dz = dx;
        }
        if want_params {
            grads.reverse();
            (Some(grads), dz)
        } else {
            (None, dz)
        }
    }

    /// Objective of one record as a function of its embedding input
    /// (`F*d` values): unclamped BCE or the logit.
    pub fn record_objective(&self, input: &[f64], label: u8, target: SignalTarget) -> f64 {
        let mut x = input.to_vec();
        let mut z = Vec::new();
        for layer in &self.mlp.layers {
            layer.affine(&x, 1, &mut z);
            if layer.activation == Activation::Relu {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            core::mem::swap(&mut x, &mut z);
        }
        let logit = x[0];
        match target {
            SignalTarget::Logit => logit,
            SignalTarget::Loss => logit_bce(logit, f64::from(label)),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.mlp.all_finite() && self.tables.iter().all(EmbeddingTable::all_finite)
    }
}

/// BCE written on the logit: `softplus(z) - y z`.
pub fn logit_bce(z: f64, y: f64) -> f64 {
    z.max(0.0) - y * z + libm::log1p(libm::exp(-z.abs()))
}

fn loss_seeds(cache: &ForwardCache, labels: &[u8]) -> Result<Vec<f64>> {
    if labels.len() != cache.n {
        return Err(Error::LengthMismatch {
            expected: cache.n,
            actual: labels.len(),
        });
    }
    Ok(cache
        .probabilities
        .iter()
        .zip(labels)
        .map(|(&p, &y)| p - f64::from(y))
        .collect())
}
