//! Finite-difference gradient checking helpers (test support).

use crate::nn::Parameterized;
use ndarray::{ArrayD, IxDyn};
use std::collections::BTreeMap;

/// Central-difference gradient of `loss` with respect to every element of
/// `x`, perturbing in place.
pub fn fd_input_grad<F>(x: &mut ArrayD<f64>, mut loss: F, h: f64) -> ArrayD<f64>
where
    F: FnMut(&ArrayD<f64>) -> f64,
{
    let mut grad = ArrayD::zeros(x.raw_dim());
    let idxs: Vec<IxDyn> = x.indexed_iter().map(|(i, _)| i).collect();
    for idx in idxs {
        let orig = x[&idx];
        x[&idx] = orig + h;
        let fp = loss(x);
        x[&idx] = orig - h;
        let fm = loss(x);
        x[&idx] = orig;
        grad[&idx] = (fp - fm) / (2.0 * h);
    }
    grad
}

fn nudge_param<M: Parameterized<f64>>(model: &mut M, name: &str, idx: &IxDyn, delta: f64) {
    for (n, mut view) in model.params_mut() {
        if n == name {
            view[idx] += delta;
            return;
        }
    }
    panic!("unknown parameter {name}");
}

/// Central-difference gradients of `loss` with respect to every parameter of
/// `model`.
pub fn fd_param_grads<M, F>(model: &mut M, loss: F, h: f64) -> BTreeMap<String, ArrayD<f64>>
where
    M: Parameterized<f64>,
    F: Fn(&M) -> f64,
{
    let specs: Vec<(String, Vec<IxDyn>)> = model
        .params()
        .iter()
        .map(|(name, view)| (name.clone(), view.indexed_iter().map(|(i, _)| i).collect()))
        .collect();
    let mut out = BTreeMap::new();
    for (name, idxs) in specs {
        let shape = model
            .params()
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| v.raw_dim())
            .unwrap();
        let mut grad = ArrayD::zeros(shape);
        for idx in idxs {
            nudge_param(model, &name, &idx, h);
            let fp = loss(model);
            nudge_param(model, &name, &idx, -2.0 * h);
            let fm = loss(model);
            nudge_param(model, &name, &idx, h);
            grad[&idx] = (fp - fm) / (2.0 * h);
        }
        out.insert(name, grad);
    }
    out
}

/// Largest relative deviation between two gradient arrays, using a
/// magnitude floor so near-zero entries compare absolutely.
pub fn max_rel_err(analytic: &ArrayD<f64>, numeric: &ArrayD<f64>) -> f64 {
    analytic
        .iter()
        .zip(numeric.iter())
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-4))
        .fold(0.0, f64::max)
}
