//! Minimal neural-network toolkit: layers with explicit forward/backward
//! passes, parameter visitation for the optimizer and checkpointing, and
//! Adam.
//!
//! Layers operate on single items (channels, height, width); data
//! parallelism across a batch happens at the training-step level, which
//! keeps gradient accumulation order fixed and results reproducible.

pub mod adam;
pub mod attention;
pub mod conv;
pub mod gradcheck;
pub mod linear;
pub mod norm;
pub mod ops;

pub use adam::{Adam, AdamConfig};
pub use attention::{attention, attention_backward, attention_cached, AttentionCache};
pub use conv::Conv2d;
pub use linear::Linear;
pub use norm::GroupNorm;

use crate::scalar::Scalar;
use ndarray::{ArrayD, ArrayViewD, ArrayViewMutD};
use std::collections::BTreeMap;

/// Named parameter views, produced in a stable order.
pub type ParamRefs<'a, S> = Vec<(String, ArrayViewD<'a, S>)>;
pub type ParamMuts<'a, S> = Vec<(String, ArrayViewMutD<'a, S>)>;

/// Anything holding trainable tensors.
pub trait Parameterized<S: Scalar> {
    fn params(&self) -> ParamRefs<'_, S>;
    fn params_mut(&mut self) -> ParamMuts<'_, S>;

    fn param_count(&self) -> usize {
        self.params().iter().map(|(_, v)| v.len()).sum()
    }
}

/// Gradients accumulated per named parameter.
#[derive(Debug, Clone, Default)]
pub struct GradStore<S> {
    grads: BTreeMap<String, ArrayD<S>>,
}

impl<S: Scalar> GradStore<S> {
    pub fn new() -> Self {
        GradStore { grads: BTreeMap::new() }
    }

    /// Add `grad` into the named slot, creating it if absent.
    pub fn accumulate(&mut self, name: &str, grad: ArrayD<S>) {
        match self.grads.get_mut(name) {
            Some(g) => *g += &grad,
            None => {
                self.grads.insert(name.to_string(), grad);
            }
        }
    }

    /// Merge another store into this one (used to reduce per-item grads).
    pub fn merge(&mut self, other: GradStore<S>) {
        for (name, grad) in other.grads {
            match self.grads.get_mut(&name) {
                Some(g) => *g += &grad,
                None => {
                    self.grads.insert(name, grad);
                }
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<&ArrayD<S>> {
        self.grads.get(name)
    }

    pub fn scale(&mut self, factor: S) {
        for g in self.grads.values_mut() {
            g.mapv_inplace(|v| v * factor);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn l2_norm(&self) -> f64 {
        self.grads
            .values()
            .map(|g| g.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }
}
