//! Sparse Adam with lazy updates.
//!
//! Only parameters present in a step's gradient are visited. A parameter that
//! sat out `k` steps first replays those `k` steps as zero-gradient Adam steps
//! (moments decay, the bias-corrected update is still applied), then takes the
//! current step. The result equals dense Adam fed explicit zeros for every
//! untouched parameter; [`SparseAdam::flush`] brings every parameter up to date
//! before the values are read out.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Adam hyperparameters.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        default_hyperparameters()
    }
}

pub fn default_hyperparameters() -> AdamHyper {
    AdamHyper {
        lr: 1e-2,
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    }
}

impl AdamHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(invalid(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(invalid(format!("{name} must be in [0, 1), got {b}")));
            }
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(invalid(format!("eps must be positive, got {}", self.eps)));
        }
        Ok(())
    }
}

/// Gradient over a fixed-size parameter vector where only some entries are
/// present. Storage is dense; the touched set is tracked separately.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseVec {
    values: Vec<f64>,
    present: Vec<bool>,
    indices: Vec<usize>,
}

impl SparseVec {
    pub fn new(len: usize) -> Self {
        SparseVec {
            values: vec![0.0; len],
            present: vec![false; len],
            indices: Vec::new(),
        }
    }

    /// Capacity, i.e. the size of the parameter vector.
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Number of touched entries.
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    #[inline]
    pub fn add(&mut self, i: usize, x: f64) {
        if !self.present[i] {
            self.present[i] = true;
            self.indices.push(i);
        }
        self.values[i] += x;
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.present[i].then(|| self.values[i])
    }

    /// Touched `(index, value)` pairs in first-touch order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().map(|&i| (i, self.values[i]))
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn scale(&mut self, factor: f64) {
        for &i in &self.indices {
            self.values[i] *= factor;
        }
    }

    /// Adds every touched entry of `other`.
    pub fn merge(&mut self, other: &SparseVec) {
        for (i, x) in other.iter() {
            self.add(i, x);
        }
    }

    /// Dense copy with zeros for untouched entries.
    pub fn to_dense(&self) -> Vec<f64> {
        self.values.clone()
    }
}

/// Per-parameter Adam state with lazy catch-up.
#[derive(Clone, Debug)]
pub struct SparseAdam {
    hyper: AdamHyper,
    m: Vec<f64>,
    v: Vec<f64>,
    last_step: Vec<u64>,
    global_step: u64,
    bounds: Option<(f64, f64)>,
}

impl SparseAdam {
    pub fn new(n_params: usize, hyper: AdamHyper) -> Result<Self> {
        hyper.validate()?;
        Ok(SparseAdam {
            hyper,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            last_step: vec![0; n_params],
            global_step: 0,
            bounds: None,
        })
    }

    /// Clamp parameters to `[lo, hi]` after every update.
    pub fn with_bounds(mut self, lo: f64, hi: f64) -> Self {
        self.bounds = Some((lo, hi));
        self
    }

    pub fn hyper(&self) -> &AdamHyper {
        &self.hyper
    }

    pub fn set_lr(&mut self, lr: f64) -> Result<()> {
        AdamHyper { lr, ..self.hyper }.validate()?;
        self.hyper.lr = lr;
        Ok(())
    }

    pub fn global_step(&self) -> u64 {
        self.global_step
    }

    pub fn last_step(&self, i: usize) -> u64 {
        self.last_step[i]
    }

    /// Stored (not yet caught up) moments of parameter `i`.
    pub fn raw_moments(&self, i: usize) -> (f64, f64) {
        (self.m[i], self.v[i])
    }

    /// Moments of parameter `i` as of the current global step, i.e. decayed
    /// through the steps it skipped.
    pub fn moments(&self, i: usize) -> (f64, f64) {
        let k = (self.global_step - self.last_step[i]) as i32;
        (
            self.m[i] * self.hyper.beta1.powi(k),
            self.v[i] * self.hyper.beta2.powi(k),
        )
    }

    #[inline]
    fn apply(&mut self, i: usize, param: &mut f64, grad: f64, t: u64) {
        let h = self.hyper;
        self.m[i] = h.beta1 * self.m[i] + (1.0 - h.beta1) * grad;
        self.v[i] = h.beta2 * self.v[i] + (1.0 - h.beta2) * grad * grad;
        let m_hat = self.m[i] / (1.0 - h.beta1.powi(t as i32));
        let v_hat = self.v[i] / (1.0 - h.beta2.powi(t as i32));
        *param -= h.lr * m_hat / (v_hat.sqrt() + h.eps);
        if let Some((lo, hi)) = self.bounds {
            *param = param.clamp(lo, hi);
        }
    }

    /// Replays zero-gradient steps for `i` up to and including `upto`.
    fn catch_up(&mut self, i: usize, param: &mut f64, upto: u64) {
        if self.m[i] == 0.0 && self.v[i] == 0.0 {
            // Zero moments stay zero and produce no motion.
            self.last_step[i] = upto;
            return;
        }
        for t in self.last_step[i] + 1..=upto {
            self.apply(i, param, 0.0, t);
        }
        self.last_step[i] = upto;
    }

    /// One Adam step over the touched entries of `grads`.
    ///
    /// A non-finite gradient rejects the whole step and leaves all state as it was.
    pub fn step(&mut self, params: &mut [f64], grads: &SparseVec) -> Result<()> {
        if params.len() != self.m.len() || grads.dim() != self.m.len() {
            return Err(invalid(format!(
                "optimizer has {} parameters, got {} params and a gradient of size {}",
                self.m.len(),
                params.len(),
                grads.dim()
            )));
        }
        if let Some((index, _)) = grads.iter().find(|(_, g)| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { index });
        }
        self.global_step += 1;
        let t = self.global_step;
        for (i, g) in grads.iter() {
            let mut p = params[i];
            self.catch_up(i, &mut p, t - 1);
            self.apply(i, &mut p, g, t);
            self.last_step[i] = t;
            params[i] = p;
        }
        Ok(())
    }

    /// Brings every parameter up to the current global step.
    pub fn flush(&mut self, params: &mut [f64]) {
        let t = self.global_step;
        for (i, p) in params.iter_mut().enumerate() {
            if self.last_step[i] < t {
                self.catch_up(i, p, t);
            }
        }
    }
}
