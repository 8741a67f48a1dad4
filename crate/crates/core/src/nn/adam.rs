use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{EmbeddingTable, Network, RowInit};
use super::network::Gradients;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moments for one dense parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Moments {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

/// Adam with bias correction. Embedding tables are updated lazily: only rows
/// with a gradient in the current step move, and their moments live in
/// tables with the same backing as the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    dense: Vec<Moments>,
    tables: Vec<(EmbeddingTable, EmbeddingTable)>,
}

impl AdamState {
    /// State for `dense_lens` dense vectors and the given tables' shapes.
    pub fn new(config: AdamConfig, dense_lens: &[usize], tables: &[&EmbeddingTable]) -> Self {
        let moment_table = |t: &EmbeddingTable| EmbeddingTable::with_backing(t.rows(), t.width(), RowInit::Zeros, t.is_sparse());
        Self {
            config,
            step: 0,
            dense: dense_lens.iter().map(|&len| Moments::new(len)).collect(),
            tables: tables.iter().map(|t| (moment_table(t), moment_table(t))).collect(),
        }
    }

    pub fn for_network(config: AdamConfig, net: &Network) -> Self {
        let dense: Vec<usize> = net
            .mlp
            .layers
            .iter()
            .flat_map(|l| [l.weights.len(), l.bias.len()])
            .collect();
        let tables: Vec<&EmbeddingTable> = net.tables.iter().collect();
        Self::new(config, &dense, &tables)
    }

    /// Advance the step counter; call once before the updates of one step.
    pub fn begin_step(&mut self) {
        self.step += 1;
    }

    fn corrections(&self) -> (f64, f64) {
        let t = self.step.max(1) as f64;
        (
            1.0 - libm::pow(self.config.beta1, t),
            1.0 - libm::pow(self.config.beta2, t),
        )
    }

    /// Update dense vector `group` in place.
    pub fn update_dense(&mut self, group: usize, params: &mut [f64], grads: &[f64]) -> Result<()> {
        let (c1, c2) = self.corrections();
        let cfg = self.config;
        let moments = self
            .dense
            .get_mut(group)
            .ok_or_else(|| Error::ShapeMismatch(alloc::format!("no dense group {group}")))?;
        if params.len() != grads.len() || params.len() != moments.m.len() {
            return Err(Error::ShapeMismatch(alloc::format!(
                "params {} grads {} moments {}",
                params.len(),
                grads.len(),
                moments.m.len()
            )));
        }
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(moments.m.iter_mut().zip(moments.v.iter_mut()))
        {
            adam_scalar(p, g, m, v, cfg, c1, c2);
        }
        Ok(())
    }

    /// Update the rows of table `index` that appear in `grads`.
    pub fn update_rows(&mut self, index: usize, table: &mut EmbeddingTable, grads: &BTreeMap<u32, Vec<f64>>) -> Result<()> {
        let (c1, c2) = self.corrections();
        let cfg = self.config;
        let (mt, vt) = self
            .tables
            .get_mut(index)
            .ok_or_else(|| Error::ShapeMismatch(alloc::format!("no table moments {index}")))?;
        if mt.rows() != table.rows() || mt.width() != table.width() {
            return Err(Error::ShapeMismatch("table moments do not match parameters".into()));
        }
        for (&row, g) in grads {
            if g.len() != table.width() || row >= table.rows() {
                return Err(Error::ShapeMismatch(alloc::format!("gradient row {row}")));
            }
            let p = table.row_mut(row);
            let m = mt.row_mut(row);
            let v = vt.row_mut(row);
            for c in 0..g.len() {
                adam_scalar(&mut p[c], g[c], &mut m[c], &mut v[c], cfg, c1, c2);
            }
        }
        Ok(())
    }
}

#[inline]
fn adam_scalar(p: &mut f64, g: f64, m: &mut f64, v: &mut f64, cfg: AdamConfig, c1: f64, c2: f64) {
    *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
    *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
    let m_hat = *m / c1;
    let v_hat = *v / c2;
    *p -= cfg.lr * m_hat / (libm::sqrt(v_hat) + cfg.eps);
}

impl Network {
    /// One Adam step over every parameter.
    pub fn adam_step(&mut self, grads: &Gradients, state: &mut AdamState) -> Result<()> {
        if grads.layers.len() != self.mlp.layers.len() || grads.tables.len() != self.tables.len() {
            return Err(Error::ShapeMismatch("gradient structure does not match network".into()));
        }
        state.begin_step();
        for (l, (layer, g)) in self.mlp.layers.iter_mut().zip(&grads.layers).enumerate() {
            state.update_dense(2 * l, &mut layer.weights, &g.weights)?;
            state.update_dense(2 * l + 1, &mut layer.bias, &g.bias)?;
        }
        for (i, (table, g)) in self.tables.iter_mut().zip(&grads.tables).enumerate() {
            state.update_rows(i, table, g)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = AdamState::new(AdamConfig::default(), &[3], &[]);
        let mut p = [1.0, -2.0, 0.5];
        s.begin_step();
        s.update_dense(0, &mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, [1.0, -2.0, 0.5]);
    }

    #[test]
    fn constant_gradient_matches_scalar_trace() {
        // independent recurrence written out by hand
        let cfg = AdamConfig { lr: 0.01, ..AdamConfig::default() };
        let g = 0.3;
        let (mut m, mut v, mut x) = (0.0f64, 0.0f64, 1.0f64);
        let mut state = AdamState::new(cfg, &[1], &[]);
        let mut p = [1.0];
        for t in 1..=200 {
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - libm::pow(0.9, t as f64));
            let vh = v / (1.0 - libm::pow(0.999, t as f64));
            x -= 0.01 * mh / (libm::sqrt(vh) + 1e-8);
            state.begin_step();
            state.update_dense(0, &mut p, &[g]).unwrap();
            assert!((p[0] - x).abs() < 1e-12);
        }
        // each step moves by ~lr in the direction opposite the gradient
        assert!((p[0] - (1.0 - 200.0 * 0.01)).abs() < 1e-3);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut s = AdamState::new(AdamConfig::default(), &[2], &[]);
        s.begin_step();
        assert!(s.update_dense(0, &mut [0.0; 3], &[0.0; 3]).is_err());
        assert!(s.update_dense(1, &mut [0.0; 2], &[0.0; 2]).is_err());
    }
}
