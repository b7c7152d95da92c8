//! Noise schedule, forward noising and deterministic DDIM stepping.
//!
//! Conventions used throughout the crate:
//!
//! - Latent timestep `t` runs `0..=T`, where `t = 0` is the clean image and
//!   `ᾱ_0 = 1` exactly.
//! - Denoising *step index* `s` runs `1..=T` counting from the start of
//!   denoising, so `s = 1` operates on the noisiest latent (`t = T`) and
//!   `s = T` produces the clean latent. Injection/AdaIN windows are
//!   expressed in `s`.
//! - Sampling evaluates ε at `(z_t, t)` and steps `t → t-1`; inversion walks
//!   `t → t+1` evaluating ε at `(z_t, t+1)`, which makes the two loops exact
//!   inverses for any input-independent ε predictor.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use ndarray::{Array3, Array4, Axis};

/// Cumulative products ᾱ_t of a linear-β diffusion schedule.
#[derive(Debug, Clone)]
pub struct NoiseSchedule<S> {
    alphas_cumprod: Vec<S>,
    beta_range: Option<(f64, f64)>,
}

impl<S: Scalar> NoiseSchedule<S> {
    /// Number of denoising steps `T` (the schedule holds `T + 1` values).
    pub fn steps(&self) -> usize {
        self.alphas_cumprod.len() - 1
    }

    /// ᾱ_t for `t` in `0..=T`.
    pub fn alpha_cumprod(&self, t: usize) -> S {
        self.alphas_cumprod[t]
    }

    pub fn alphas_cumprod(&self) -> &[S] {
        &self.alphas_cumprod
    }

    /// β range used to build this schedule, when known.
    pub fn beta_range(&self) -> Option<(f64, f64)> {
        self.beta_range
    }

    pub fn sqrt_alpha_cumprod(&self, t: usize) -> S {
        self.alphas_cumprod[t].sqrt()
    }

    pub fn sqrt_one_minus_alpha_cumprod(&self, t: usize) -> S {
        (S::one() - self.alphas_cumprod[t]).sqrt()
    }

    /// Build a schedule from raw ᾱ values. Exposed for tests that need
    /// hand-crafted (possibly degenerate) schedules.
    pub fn from_alphas_cumprod(alphas_cumprod: Vec<S>) -> Result<Self> {
        if alphas_cumprod.len() < 2 {
            return Err(Error::Config("schedule needs at least one step".into()));
        }
        if (alphas_cumprod[0] - S::one()).abs() > S::epsilon() {
            return Err(Error::Config("alphas_cumprod[0] must be 1".into()));
        }
        if alphas_cumprod.iter().any(|a| *a <= S::zero() || *a > S::one()) {
            return Err(Error::Config("alphas_cumprod values must lie in (0, 1]".into()));
        }
        Ok(NoiseSchedule { alphas_cumprod, beta_range: None })
    }
}

/// Build a linear-β schedule: `alphas_cumprod[t] = Π_{s=1..t} (1 − β_s)` with
/// β linearly spaced over `[beta_start, beta_end]`, and `alphas_cumprod[0] = 1`.
pub fn make_schedule<S: Scalar>(steps: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule<S>> {
    if steps == 0 {
        return Err(Error::Config("step count must be >= 1".into()));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::Config(format!(
            "invalid beta range [{beta_start}, {beta_end}]: need 0 < beta_start <= beta_end < 1"
        )));
    }
    let mut alphas_cumprod = Vec::with_capacity(steps + 1);
    alphas_cumprod.push(S::one());
    let mut prod = 1.0f64;
    for i in 0..steps {
        // Products are accumulated in f64 so f32 schedules stay monotone.
        let beta = if steps == 1 {
            beta_start
        } else {
            beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64
        };
        prod *= 1.0 - beta;
        alphas_cumprod.push(S::from_f64(prod));
    }
    Ok(NoiseSchedule { alphas_cumprod, beta_range: Some((beta_start, beta_end)) })
}

/// Default step count: 100 denoising steps.
pub const DEFAULT_STEPS: usize = 100;
/// Default linear-β range.
pub const DEFAULT_BETA_START: f64 = 1e-4;
pub const DEFAULT_BETA_END: f64 = 0.02;

/// The default 100-step schedule used by the whole pipeline.
pub fn default_schedule<S: Scalar>() -> NoiseSchedule<S> {
    make_schedule(DEFAULT_STEPS, DEFAULT_BETA_START, DEFAULT_BETA_END).expect("default schedule params are valid")
}

/// A spatial feature array tagged with its timestep index.
#[derive(Debug, Clone)]
pub struct Latent<S> {
    /// Feature data of shape (channels, height, width).
    pub data: Array3<S>,
    /// Timestep index in `0..=T`.
    pub t: usize,
}

impl<S: Scalar> Latent<S> {
    pub fn new(data: Array3<S>, t: usize) -> Self {
        Latent { data, t }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        let d = self.data.dim();
        (d.0, d.1, d.2)
    }
}

fn check_same_shape<S: Scalar>(a: &Array3<S>, b: &Array3<S>, what: &str) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Argument(format!(
            "{what}: shape mismatch {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// Forward noising: `√(ᾱ_t)·x0 + √(1−ᾱ_t)·eps`, tagged with timestep `t`.
pub fn add_noise<S: Scalar>(x0: &Latent<S>, eps: &Latent<S>, t: usize, sched: &NoiseSchedule<S>) -> Result<Latent<S>> {
    check_same_shape(&x0.data, &eps.data, "add_noise")?;
    if t > sched.steps() {
        return Err(Error::Argument(format!("add_noise: t={t} out of range 0..={}", sched.steps())));
    }
    let a = sched.sqrt_alpha_cumprod(t);
    let b = sched.sqrt_one_minus_alpha_cumprod(t);
    let data = x0.data.mapv(|v| v * a) + &eps.data.mapv(|v| v * b);
    Ok(Latent::new(data, t))
}

/// One deterministic (η = 0) DDIM update from timestep `t` to `t_prev`.
///
/// Recovers `x0_hat = (x_t − √(1−ᾱ_t)·ε)/√(ᾱ_t)` and re-noises it to the
/// target level: `√(ᾱ_{t_prev})·x0_hat + √(1−ᾱ_{t_prev})·ε`.
pub fn ddim_step<S: Scalar>(
    x_t: &Latent<S>,
    eps_pred: &Latent<S>,
    t: usize,
    t_prev: usize,
    sched: &NoiseSchedule<S>,
) -> Result<Latent<S>> {
    check_same_shape(&x_t.data, &eps_pred.data, "ddim_step")?;
    if t <= t_prev {
        return Err(Error::Argument(format!("ddim_step: need t > t_prev, got t={t}, t_prev={t_prev}")));
    }
    if t > sched.steps() {
        return Err(Error::Argument(format!("ddim_step: t={t} out of range 0..={}", sched.steps())));
    }
    let data = ddim_step_array(&x_t.data, &eps_pred.data, t, t_prev, sched);
    Ok(Latent::new(data, t_prev))
}

fn ddim_step_array<S: Scalar>(
    x_t: &Array3<S>,
    eps: &Array3<S>,
    t: usize,
    t_prev: usize,
    sched: &NoiseSchedule<S>,
) -> Array3<S> {
    let sa_t = sched.sqrt_alpha_cumprod(t);
    let sb_t = sched.sqrt_one_minus_alpha_cumprod(t);
    let sa_p = sched.sqrt_alpha_cumprod(t_prev);
    let sb_p = sched.sqrt_one_minus_alpha_cumprod(t_prev);
    // √ᾱ_prev/√ᾱ_t · x_t + (√(1−ᾱ_prev) − √ᾱ_prev·√(1−ᾱ_t)/√ᾱ_t) · ε
    let scale = sa_p / sa_t;
    let eps_coef = sb_p - scale * sb_t;
    let mut out = x_t.mapv(|v| v * scale);
    out.zip_mut_with(eps, |o, e| *o += *e * eps_coef);
    out
}

/// The exact inverse of [`ddim_step`]: move a latent *up* the noise ladder
/// from `t_prev` to `t` using the same ε.
fn ddim_step_up_array<S: Scalar>(
    x_prev: &Array3<S>,
    eps: &Array3<S>,
    t_prev: usize,
    t: usize,
    sched: &NoiseSchedule<S>,
) -> Array3<S> {
    let sa_t = sched.sqrt_alpha_cumprod(t);
    let sb_t = sched.sqrt_one_minus_alpha_cumprod(t);
    let sa_p = sched.sqrt_alpha_cumprod(t_prev);
    let sb_p = sched.sqrt_one_minus_alpha_cumprod(t_prev);
    let scale = sa_t / sa_p;
    let eps_coef = sb_t - scale * sb_p;
    let mut out = x_prev.mapv(|v| v * scale);
    out.zip_mut_with(eps, |o, e| *o += *e * eps_coef);
    out
}

/// ε predictor driving DDIM loops. Implemented by the denoiser U-Net and by
/// simple closed-form predictors in tests.
pub trait EpsilonPredictor<S: Scalar>: Sync {
    /// Predict ε for a batch of latents (batch, channels, height, width) at
    /// timestep `t`.
    fn predict_batch(&self, z: &Array4<S>, t: usize) -> Array4<S>;

    /// Expected (channels, height, width) of inputs, when fixed.
    fn input_shape(&self) -> Option<(usize, usize, usize)> {
        None
    }
}

/// ε predictor that always returns zero; inversion reduces to scaling.
pub struct ZeroEps;

impl<S: Scalar> EpsilonPredictor<S> for ZeroEps {
    fn predict_batch(&self, z: &Array4<S>, _t: usize) -> Array4<S> {
        Array4::zeros(z.raw_dim())
    }
}

/// ε predictor returning a fixed field regardless of input or timestep.
pub struct ConstEps<S>(pub Array3<S>);

impl<S: Scalar> EpsilonPredictor<S> for ConstEps<S> {
    fn predict_batch(&self, z: &Array4<S>, _t: usize) -> Array4<S> {
        let n = z.dim().0;
        let mut out = Array4::zeros(z.raw_dim());
        for mut item in out.axis_iter_mut(Axis(0)) {
            item.assign(&self.0);
        }
        debug_assert_eq!(n, out.dim().0);
        out
    }
}

fn check_predictor_shape<S: Scalar>(pred: &dyn EpsilonPredictor<S>, shape: (usize, usize, usize), what: &str) -> Result<()> {
    if let Some(expected) = pred.input_shape() {
        if expected != shape {
            return Err(Error::Argument(format!(
                "{what}: latent shape {shape:?} does not match denoiser input {expected:?}"
            )));
        }
    }
    Ok(())
}

/// DDIM inversion: map a clean latent (`t = 0`) to its noise latent `z_T` by
/// running the deterministic update in reverse order.
pub fn ddim_invert<S: Scalar>(
    x0: &Latent<S>,
    denoiser: &dyn EpsilonPredictor<S>,
    sched: &NoiseSchedule<S>,
) -> Result<Latent<S>> {
    if x0.t != 0 {
        return Err(Error::Argument(format!("ddim_invert: input must be tagged t=0, got t={}", x0.t)));
    }
    check_predictor_shape(denoiser, x0.shape(), "ddim_invert")?;
    let batch = x0.data.clone().insert_axis(Axis(0));
    let out = ddim_invert_batch(&batch, denoiser, sched);
    Ok(Latent::new(out.index_axis(Axis(0), 0).to_owned(), sched.steps()))
}

/// Batched DDIM inversion over (batch, channels, height, width).
pub fn ddim_invert_batch<S: Scalar>(
    x0: &Array4<S>,
    denoiser: &dyn EpsilonPredictor<S>,
    sched: &NoiseSchedule<S>,
) -> Array4<S> {
    let t_max = sched.steps();
    let mut z = x0.clone();
    for t_hi in 1..=t_max {
        let eps = denoiser.predict_batch(&z, t_hi);
        let mut next = Array4::zeros(z.raw_dim());
        for (i, item) in z.axis_iter(Axis(0)).enumerate() {
            let stepped = ddim_step_up_array(
                &item.to_owned(),
                &eps.index_axis(Axis(0), i).to_owned(),
                t_hi - 1,
                t_hi,
                sched,
            );
            next.index_axis_mut(Axis(0), i).assign(&stepped);
        }
        z = next;
    }
    z
}

/// Plain DDIM sampling loop: denoise `z_T` down to `t = 0` with no hooks.
pub fn ddim_sample<S: Scalar>(
    z_t: &Latent<S>,
    denoiser: &dyn EpsilonPredictor<S>,
    sched: &NoiseSchedule<S>,
) -> Result<Latent<S>> {
    if z_t.t != sched.steps() {
        return Err(Error::Argument(format!(
            "ddim_sample: input must be tagged t=T={}, got t={}",
            sched.steps(),
            z_t.t
        )));
    }
    check_predictor_shape(denoiser, z_t.shape(), "ddim_sample")?;
    let batch = z_t.data.clone().insert_axis(Axis(0));
    let out = ddim_sample_batch(&batch, denoiser, sched);
    Ok(Latent::new(out.index_axis(Axis(0), 0).to_owned(), 0))
}

/// Batched DDIM sampling over (batch, channels, height, width).
pub fn ddim_sample_batch<S: Scalar>(
    z_noisy: &Array4<S>,
    denoiser: &dyn EpsilonPredictor<S>,
    sched: &NoiseSchedule<S>,
) -> Array4<S> {
    let t_max = sched.steps();
    let mut z = z_noisy.clone();
    for t in (1..=t_max).rev() {
        let eps = denoiser.predict_batch(&z, t);
        let mut next = Array4::zeros(z.raw_dim());
        for (i, item) in z.axis_iter(Axis(0)).enumerate() {
            let stepped = ddim_step_array(
                &item.to_owned(),
                &eps.index_axis(Axis(0), i).to_owned(),
                t,
                t - 1,
                sched,
            );
            next.index_axis_mut(Axis(0), i).assign(&stepped);
        }
        z = next;
    }
    z
}
