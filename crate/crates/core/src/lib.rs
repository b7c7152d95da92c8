//! Zero-shot multi-class appearance transfer in a pixel-space toy diffusion
//! model, together with the downstream machinery needed to evaluate it:
//! a procedural two-class texture dataset, a small segmentation U-Net, and
//! nonparametric statistics for comparing training arms.
//!
//! The crate is organized around the pipeline stages:
//!
//! - [`schedule`] — noise schedule, forward noising, deterministic DDIM
//!   stepping and inversion
//! - [`nn`] — hand-rolled layers (conv / group norm / attention) with
//!   explicit backward passes and an Adam optimizer
//! - [`denoiser`] — the ε-prediction U-Net with attention hooks, plus its
//!   training loop and checkpoint format
//! - [`transfer`] — cross-image KV injection, guidance blending and
//!   class-masked AdaIN; the appearance-transfer driver
//! - [`synth`] — procedural "epithelium/stroma"-like dataset generation
//! - [`seg`] — segmentation U-Net trained with combined BCE + Dice loss
//! - [`stats`] — Dice score, percentile bootstrap, Wilcoxon signed-rank
//! - [`experiment`] — the real / real+in-silico training-arm comparison
//! - [`cli_support`] — manifests, key-value config files, plot rendering
//!
//! All numeric kernels are generic over the scalar type via [`Scalar`];
//! concrete aliases for the common instantiations live at the crate root.

pub mod denoiser;
pub mod error;
pub mod experiment;
pub mod image_io;
pub mod mask;
pub mod nn;
pub mod pca;
pub mod scalar;
pub mod schedule;
pub mod seg;
pub mod stats;
pub mod synth;
pub mod transfer;

pub mod cli_support {
    //! Run manifests, flat key-value files and minimal plot rendering used
    //! by the command-line front end.
    pub mod kv;
    pub mod manifest;
    pub mod plot;
}

pub use error::Error;
pub use scalar::Scalar;

/// Scalar used by the neural pipeline (training, transfer, experiments).
pub type PipelineScalar = f32;

/// `Latent` instantiated with the pipeline scalar.
pub type Latent32 = schedule::Latent<f32>;
/// `Latent` in double precision, used where tight tolerances matter.
pub type Latent64 = schedule::Latent<f64>;
/// `NoiseSchedule` instantiated with the pipeline scalar.
pub type NoiseSchedule32 = schedule::NoiseSchedule<f32>;
/// `NoiseSchedule` in double precision.
pub type NoiseSchedule64 = schedule::NoiseSchedule<f64>;
