//! Two-hidden-layer MLP with hand-derived backward passes, plus Adam.
//!
//! Hidden activations are tanh, the output is linear. Everything is f64 so
//! gradients can be checked against central finite differences.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    /// out × in.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Linear {
    fn new(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        // Uniform ±1/sqrt(fan_in).
        let bound = 1.0 / (in_dim as f64).sqrt();
        let mut w = Array2::zeros((out_dim, in_dim));
        for v in w.iter_mut() {
            *v = (rng.gen::<f64>() * 2.0 - 1.0) * bound;
        }
        let mut b = Array1::zeros(out_dim);
        for v in b.iter_mut() {
            *v = (rng.gen::<f64>() * 2.0 - 1.0) * bound;
        }
        Linear { w, b }
    }

    fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut y = x.dot(&self.w.t());
        y += &self.b;
        y
    }
}

/// `in → h1 → h2 → out`, tanh hidden activations.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub l1: Linear,
    pub l2: Linear,
    pub l3: Linear,
}

/// Forward-pass activations kept for the backward pass.
pub struct MlpCache {
    x: Array2<f64>,
    a1: Array2<f64>,
    a2: Array2<f64>,
    pub out: Array2<f64>,
}

/// Parameter gradients, same shapes as [`Mlp`].
pub struct MlpGrads {
    pub l1w: Array2<f64>,
    pub l1b: Array1<f64>,
    pub l2w: Array2<f64>,
    pub l2b: Array1<f64>,
    pub l3w: Array2<f64>,
    pub l3b: Array1<f64>,
}

impl Mlp {
    pub fn new(
        in_dim: usize,
        hidden: (usize, usize),
        out_dim: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        Mlp {
            l1: Linear::new(in_dim, hidden.0, rng),
            l2: Linear::new(hidden.0, hidden.1, rng),
            l3: Linear::new(hidden.1, out_dim, rng),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.l1.w.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.l3.w.nrows()
    }

    pub fn forward(&self, x: &Array2<f64>) -> MlpCache {
        let a1 = self.l1.forward(x).mapv(f64::tanh);
        let a2 = self.l2.forward(&a1).mapv(f64::tanh);
        let out = self.l3.forward(&a2);
        MlpCache {
            x: x.clone(),
            a1,
            a2,
            out,
        }
    }

    /// Backpropagates `d_out` (n × out), returning parameter gradients and
    /// the gradient with respect to the input (n × in).
    pub fn backward(&self, cache: &MlpCache, d_out: &Array2<f64>) -> (MlpGrads, Array2<f64>) {
        let l3w = d_out.t().dot(&cache.a2);
        let l3b = d_out.sum_axis(Axis(0));
        let da2 = d_out.dot(&self.l3.w);
        let dz2 = &da2 * &cache.a2.mapv(|a| 1.0 - a * a);
        let l2w = dz2.t().dot(&cache.a1);
        let l2b = dz2.sum_axis(Axis(0));
        let da1 = dz2.dot(&self.l2.w);
        let dz1 = &da1 * &cache.a1.mapv(|a| 1.0 - a * a);
        let l1w = dz1.t().dot(&cache.x);
        let l1b = dz1.sum_axis(Axis(0));
        let dx = dz1.dot(&self.l1.w);
        (
            MlpGrads {
                l1w,
                l1b,
                l2w,
                l2b,
                l3w,
                l3b,
            },
            dx,
        )
    }

    pub fn param_count(&self) -> usize {
        self.l1.w.len()
            + self.l1.b.len()
            + self.l2.w.len()
            + self.l2.b.len()
            + self.l3.w.len()
            + self.l3.b.len()
    }

    /// Flattened parameters in a fixed order (w1, b1, w2, b2, w3, b3).
    pub fn params_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in [&self.l1, &self.l2, &self.l3] {
            out.extend(layer.w.iter());
            out.extend(layer.b.iter());
        }
        out
    }

    pub fn set_params_vec(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.param_count());
        let mut idx = 0;
        for layer in [&mut self.l1, &mut self.l2, &mut self.l3] {
            for p in layer.w.iter_mut() {
                *p = v[idx];
                idx += 1;
            }
            for p in layer.b.iter_mut() {
                *p = v[idx];
                idx += 1;
            }
        }
    }

    /// θ ← θ - lr·g via the given Adam state.
    pub fn adam_step(&mut self, grads: &MlpGrads, opt: &mut Adam) {
        let flat: Vec<f64> = [
            grads.l1w.iter().copied().collect::<Vec<_>>(),
            grads.l1b.iter().copied().collect(),
            grads.l2w.iter().copied().collect(),
            grads.l2b.iter().copied().collect(),
            grads.l3w.iter().copied().collect(),
            grads.l3b.iter().copied().collect(),
        ]
        .concat();
        let mut params = self.params_vec();
        opt.step(&mut params, &flat);
        self.set_params_vec(&params);
    }

    /// θ ← τ·online + (1-τ)·θ, elementwise.
    pub fn soft_update_from(&mut self, online: &Mlp, tau: f64) {
        let online_params = online.params_vec();
        let mut params = self.params_vec();
        for (t, o) in params.iter_mut().zip(online_params.iter()) {
            *t = tau * o + (1.0 - tau) * *t;
        }
        self.set_params_vec(&params);
    }

    /// True when every parameter is finite.
    pub fn is_finite(&self) -> bool {
        self.params_vec().iter().all(|v| v.is_finite())
    }
}

/// Adam over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(lr: f64, dim: usize) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        debug_assert_eq!(params.len(), grads.len());
        debug_assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}
