//! Adaptive-moment optimizer over a fixed parameter group.
//!
//! The trainer runs two disjoint instances — one over generator parameters,
//! one over discriminator parameters — so a minimax step never fuses the
//! two updates. A parameter whose gradient is absent from a step (its term
//! was ablated away, say) decays its moments against a zero gradient; with
//! zero-initialized moments that reproduces "no update" bitwise.

use alloc::format;
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::graph::{Grads, Graph, ParamId};
use crate::net::Params;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(CoreError::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(CoreError::InvalidConfig(format!(
                    "{name} must lie in [0, 1), got {b}"
                )));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(CoreError::InvalidConfig("epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Adam state for one parameter group.
pub struct Adam<F> {
    cfg: AdamConfig,
    ids: Vec<ParamId>,
    m: Vec<Tensor<F>>,
    v: Vec<Tensor<F>>,
    t: u64,
}

impl<F: Scalar> Adam<F> {
    pub fn new(cfg: AdamConfig, ids: Vec<ParamId>, params: &Params<F>) -> Result<Self, CoreError> {
        cfg.validate()?;
        let m = ids.iter().map(|&id| Tensor::zeros(params.get(id).shape())).collect();
        let v = ids.iter().map(|&id| Tensor::zeros(params.get(id).shape())).collect();
        Ok(Self {
            cfg,
            ids,
            m,
            v,
            t: 0,
        })
    }

    pub fn ids(&self) -> &[ParamId] {
        &self.ids
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Applies one update from the gradients of a backward pass. Gradients
    /// are looked up through the graph's parameter bindings; parameters
    /// outside this group are untouched even if the graph holds gradients
    /// for them.
    pub fn step(&mut self, params: &mut Params<F>, g: &Graph<F>, grads: &Grads<F>) {
        self.t += 1;
        let b1 = self.cfg.beta1;
        let b2 = self.cfg.beta2;
        let bias1 = 1.0 - b1.powi(self.t as i32);
        let bias2 = 1.0 - b2.powi(self.t as i32);
        // Per-element: p −= lr · m̂ / (√v̂ + ε) with bias-corrected moments.
        let lr = F::from_f64(self.cfg.learning_rate);
        let eps = F::from_f64(self.cfg.epsilon);
        let f_b1 = F::from_f64(b1);
        let f_b2 = F::from_f64(b2);
        let c1 = F::from_f64(1.0 - b1);
        let c2 = F::from_f64(1.0 - b2);
        let inv_bias1 = F::from_f64(1.0 / bias1);
        let inv_bias2 = F::from_f64(1.0 / bias2);

        for (i, &id) in self.ids.iter().enumerate() {
            let grad = g.node_of_param(id).and_then(|n| grads.get(n));
            let p = params.get_mut(id);
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for (k, pk) in p.data_mut().iter_mut().enumerate() {
                let gk = grad.map_or(F::zero(), |t| t.data()[k]);
                m[k] = f_b1 * m[k] + c1 * gk;
                v[k] = f_b2 * v[k] + c2 * gk * gk;
                let m_hat = m[k] * inv_bias1;
                let v_hat = v[k] * inv_bias2;
                *pk = *pk - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }

    /// Moment tensors in group order, for checkpointing.
    pub fn state(&self) -> (&[Tensor<F>], &[Tensor<F>], u64) {
        (&self.m, &self.v, self.t)
    }

    /// Restores moments captured by [`Adam::state`]. Shapes must match the
    /// group exactly.
    pub fn restore(&mut self, m: Vec<Tensor<F>>, v: Vec<Tensor<F>>, t: u64) -> Result<(), CoreError> {
        if m.len() != self.ids.len() || v.len() != self.ids.len() {
            return Err(CoreError::ShapeMismatch(format!(
                "optimizer state holds {} tensors, group has {}",
                m.len(),
                self.ids.len()
            )));
        }
        for (i, (mm, vv)) in m.iter().zip(v.iter()).enumerate() {
            if mm.shape() != self.m[i].shape() || vv.shape() != self.v[i].shape() {
                return Err(CoreError::ShapeMismatch(format!(
                    "optimizer state tensor {i} has shape {}, expected {}",
                    mm.shape_str(),
                    self.m[i].shape_str()
                )));
            }
        }
        self.m = m;
        self.v = v;
        self.t = t;
        Ok(())
    }
}
