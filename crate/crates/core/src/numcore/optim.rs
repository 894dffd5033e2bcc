use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{ParamStore, Tensor};

pub const DEFAULT_CLIP_NORM: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sgd,
    Adam(Adam),
}

/// Stateful optimizer. Adam moments are kept per parameter slot and grow
/// with the parameter (new rows start with zero moments).
#[derive(Clone, Debug)]
pub struct Optimizer {
    method: Method,
    clip_norm: Option<f64>,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Optimizer {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            clip_norm: Some(DEFAULT_CLIP_NORM),
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn sgd() -> Self {
        Self::new(Method::Sgd)
    }

    pub fn adam() -> Self {
        Self::new(Method::Adam(Adam::default()))
    }

    pub fn with_clip_norm(mut self, clip: Option<f64>) -> Self {
        self.clip_norm = clip;
        self
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update from the accumulated gradients, then zeroes them.
    pub fn step(&mut self, store: &mut ParamStore, rate: f64) -> Result<()> {
        for id in store.ids() {
            if !store.grad(id).is_finite() {
                return Err(Error::NonFinite(format!("gradient of parameter `{}`", store.name(id))));
            }
        }
        if let Some(max) = self.clip_norm {
            clip_grad_norm(store, max);
        }
        self.step += 1;
        match self.method {
            Method::Sgd => {
                let (values, grads) = store.values_and_grads_mut();
                for (value, g) in values.iter_mut().zip(grads) {
                    value.add_scaled(g, -rate);
                }
            }
            Method::Adam(h) => {
                self.sync_moments(store);
                let t = self.step as i32;
                let bc1 = 1.0 - h.beta1.powi(t);
                let bc2 = 1.0 - h.beta2.powi(t);
                let (values, grads) = store.values_and_grads_mut();
                for (slot, (value, g)) in values.iter_mut().zip(grads).enumerate() {
                    let m = self.m[slot].data_mut();
                    let v = self.v[slot].data_mut();
                    for (k, (x, &gk)) in value.data_mut().iter_mut().zip(g.data()).enumerate() {
                        m[k] = h.beta1 * m[k] + (1.0 - h.beta1) * gk;
                        v[k] = h.beta2 * v[k] + (1.0 - h.beta2) * gk * gk;
                        let mhat = m[k] / bc1;
                        let vhat = v[k] / bc2;
                        *x -= rate * mhat / (vhat.sqrt() + h.eps);
                    }
                }
            }
        }
        store.zero_grads();
        Ok(())
    }

    fn sync_moments(&mut self, store: &ParamStore) {
        for (slot, value) in store.values().iter().enumerate() {
            if slot >= self.m.len() {
                self.m.push(Tensor::zeros(value.shape()));
                self.v.push(Tensor::zeros(value.shape()));
            } else if !self.m[slot].same_shape(value) {
                let extra = Tensor::zeros(&[value.rows() - self.m[slot].rows(), value.cols()]);
                self.m[slot].append_rows(&extra).expect("rows only grow");
                self.v[slot].append_rows(&extra).expect("rows only grow");
            }
        }
    }
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(store: &mut ParamStore, max_norm: f64) -> f64 {
    let norm = store.grads().iter().map(Tensor::norm_sq).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for g in store.grads_mut() {
            g.data_mut().iter_mut().for_each(|v| *v *= s);
        }
    }
    norm
}
