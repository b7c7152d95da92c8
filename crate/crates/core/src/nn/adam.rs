//! Adam optimizer over named parameters.

use crate::nn::{GradStore, Parameterized};
use crate::scalar::Scalar;
use ndarray::ArrayD;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        // β₂ = 0.99 matches the segmentation training recipe; the same
        // settings are reused for the denoiser.
        AdamConfig { learning_rate: 1e-3, beta1: 0.9, beta2: 0.99, eps: 1e-8 }
    }
}

/// First/second-moment state keyed by parameter name.
#[derive(Debug, Clone)]
pub struct Adam<S> {
    pub config: AdamConfig,
    step: u64,
    m: BTreeMap<String, ArrayD<S>>,
    v: BTreeMap<String, ArrayD<S>>,
}

impl<S: Scalar> Adam<S> {
    pub fn new(config: AdamConfig) -> Self {
        Adam { config, step: 0, m: BTreeMap::new(), v: BTreeMap::new() }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Apply one update. Parameters without a gradient entry are left
    /// untouched.
    pub fn step(&mut self, model: &mut impl Parameterized<S>, grads: &GradStore<S>) {
        self.step += 1;
        let b1 = S::from_f64(self.config.beta1);
        let b2 = S::from_f64(self.config.beta2);
        let lr = S::from_f64(self.config.learning_rate);
        let eps = S::from_f64(self.config.eps);
        let bc1 = S::from_f64(1.0 - self.config.beta1.powi(self.step as i32));
        let bc2 = S::from_f64(1.0 - self.config.beta2.powi(self.step as i32));

        for (name, mut param) in model.params_mut() {
            let Some(g) = grads.get(&name) else { continue };
            let m = self
                .m
                .entry(name.clone())
                .or_insert_with(|| ArrayD::zeros(param.raw_dim()));
            let v = self.v.entry(name).or_insert_with(|| ArrayD::zeros(param.raw_dim()));
            ndarray::Zip::from(&mut param)
                .and(m)
                .and(v)
                .and(g)
                .for_each(|p, m, v, g| {
                    *m = b1 * *m + (S::one() - b1) * *g;
                    *v = b2 * *v + (S::one() - b2) * *g * *g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
                });
        }
    }
}
