//! Scaled dot-product attention.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use ndarray::{linalg::general_mat_mul, Array2};

/// `softmax(Q·Kᵀ/√d)·V` with row-wise softmax.
///
/// `q` is (queries, d), `k` is (keys, d), `v` is (keys, dv). Softmax rows
/// sum to 1; a query attending to a single key returns that key's value.
pub fn attention<S: Scalar>(q: &Array2<S>, k: &Array2<S>, v: &Array2<S>) -> Result<Array2<S>> {
    Ok(attention_cached(q, k, v)?.0)
}

/// Row-stochastic attention weights and output, keeping the weights for
/// backprop.
pub fn attention_cached<S: Scalar>(q: &Array2<S>, k: &Array2<S>, v: &Array2<S>) -> Result<(Array2<S>, AttentionCache<S>)> {
    let (nq, d) = q.dim();
    let (nk, dk) = k.dim();
    let (nv, dv) = v.dim();
    if d != dk {
        return Err(Error::Argument(format!("attention: query dim {d} != key dim {dk}")));
    }
    if nk != nv {
        return Err(Error::Argument(format!("attention: {nk} keys vs {nv} values")));
    }
    let scale = S::from_f64(1.0 / (d as f64).sqrt());
    let mut logits = Array2::zeros((nq, nk));
    general_mat_mul(scale, q, &k.t(), S::zero(), &mut logits);
    // Row-wise stable softmax.
    for mut row in logits.rows_mut() {
        let max = row.iter().copied().fold(S::neg_infinity(), S::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    let weights = logits;
    let mut out = Array2::zeros((nq, dv));
    general_mat_mul(S::one(), &weights, v, S::zero(), &mut out);
    Ok((out, AttentionCache { weights }))
}

/// Softmax weights cached by [`attention_cached`].
#[derive(Debug, Clone)]
pub struct AttentionCache<S> {
    /// (queries, keys), rows sum to 1.
    pub weights: Array2<S>,
}

/// Backward pass; returns (gq, gk, gv).
pub fn attention_backward<S: Scalar>(
    q: &Array2<S>,
    k: &Array2<S>,
    v: &Array2<S>,
    cache: &AttentionCache<S>,
    gy: &Array2<S>,
) -> (Array2<S>, Array2<S>, Array2<S>) {
    let a = &cache.weights;
    let (nq, nk) = a.dim();
    let d = q.dim().1;
    let scale = S::from_f64(1.0 / (d as f64).sqrt());

    // gv = Aᵀ · gy
    let mut gv = Array2::zeros(v.raw_dim());
    general_mat_mul(S::one(), &a.t(), gy, S::zero(), &mut gv);

    // ga = gy · Vᵀ, then softmax backward per row: gl = a ∘ (ga − Σ(ga∘a))
    let mut ga = Array2::zeros((nq, nk));
    general_mat_mul(S::one(), gy, &v.t(), S::zero(), &mut ga);
    let mut gl = ga;
    for (mut grow, arow) in gl.rows_mut().into_iter().zip(a.rows()) {
        let dot: S = grow.iter().zip(arow.iter()).map(|(g, a)| *g * *a).fold(S::zero(), |acc, v| acc + v);
        grow.zip_mut_with(&arow, |g, a| *g = *a * (*g - dot));
    }

    // gq = gl · K · scale; gk = glᵀ · Q · scale
    let mut gq = Array2::zeros(q.raw_dim());
    general_mat_mul(scale, &gl, k, S::zero(), &mut gq);
    let mut gk = Array2::zeros(k.raw_dim());
    general_mat_mul(scale, &gl.t(), q, S::zero(), &mut gk);

    (gq, gk, gv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn single_key_value_pair_returns_value() {
        let q = array![[0.3, -1.2], [5.0, 2.0]];
        let k = array![[0.7, 0.1]];
        let v = array![[2.5, -3.5, 7.0]];
        let out = attention(&q, &k, &v).unwrap();
        for row in out.rows() {
            assert_abs_diff_eq!(row[0], 2.5);
            assert_abs_diff_eq!(row[1], -3.5);
            assert_abs_diff_eq!(row[2], 7.0);
        }
    }

    #[test]
    fn orthogonal_query_averages_values() {
        // Q orthogonal to all keys ⇒ all logits 0 ⇒ uniform mean of V rows.
        let q = array![[0.0, 0.0, 1.0]];
        let k = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]];
        let v = array![[3.0], [6.0], [9.0]];
        let out = attention(&q, &k, &v).unwrap();
        assert_abs_diff_eq!(out[[0, 0]], 6.0, epsilon = 1e-12);
    }

    #[test]
    fn matches_direct_summation_oracle() {
        let q = array![[1.0, 2.0], [-1.0, 0.0]];
        let k = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let v = array![[1.0, 4.0], [2.0, 5.0], [3.0, 6.0]];
        let out = attention(&q, &k, &v).unwrap();

        // Brute-force softmax-weighted sum.
        let d = 2.0f64;
        for qi in 0..2 {
            let logits: Vec<f64> = (0..3)
                .map(|ki| (q[[qi, 0]] * k[[ki, 0]] + q[[qi, 1]] * k[[ki, 1]]) / d.sqrt())
                .collect();
            let z: f64 = logits.iter().map(|l| l.exp()).sum();
            for col in 0..2 {
                let expect: f64 = (0..3).map(|ki| logits[ki].exp() / z * v[[ki, col]]).sum();
                assert_abs_diff_eq!(out[[qi, col]], expect, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let q = array![[1.0, 2.0]];
        let k = array![[1.0, 2.0, 3.0]];
        let v = array![[1.0]];
        assert!(attention(&q, &k, &v).is_err());
        let k2 = array![[1.0, 2.0], [3.0, 4.0]];
        let v2 = array![[1.0]];
        assert!(attention(&q, &k2, &v2).is_err());
    }

    #[test]
    fn rows_sum_to_one() {
        let q = array![[0.2, -0.4], [1.3, 0.9], [-2.0, 0.1]];
        let k = array![[0.5, 0.5], [-0.5, 1.0], [2.0, -1.0], [0.0, 0.0]];
        let v = Array2::from_elem((4, 2), 1.0);
        let (_, cache) = attention_cached(&q, &k, &v).unwrap();
        for row in cache.weights.rows() {
            assert_abs_diff_eq!(row.sum(), 1.0, epsilon = 1e-12);
        }
    }
}
