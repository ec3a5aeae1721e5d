//! Function extension from manifold samples by normalized Gaussian-kernel
//! diffusion, with a parallel-beam CT toolkit for sinogram interpolation.
//!
//! The estimator projects queries onto the dominant right singular vectors
//! of a sample/reference difference matrix ([`dimred`]), weights training
//! samples with a Gaussian whose bandwidth adapts to the nearest sample
//! ([`extender`]), and can fold new samples into cached evaluations without
//! refitting ([`online`]).

pub mod analysis;
pub mod dimred;
pub mod error;
pub mod extender;
pub mod formats;
pub mod harness;
pub mod matrix;
pub mod online;
pub mod tomo;

pub use analysis::{frobenius_error, ErrorReport};
pub use dimred::{build_a1, svd_basis, ProjectionBasis, ReferenceSet};
pub use error::{Error, ErrorKind, Result};
pub use extender::{
    fit, gaussian_kernel, Bandwidth, BandwidthChoice, ExtenderModel, Extension, ExtensionSource,
    FitParams, SampleValues,
};
pub use harness::{
    load_model, run, run_ct, run_spiral, save_model, Experiment, ExperimentConfig, RunOutput,
};
pub use matrix::{Matrix, PointCloud};
pub use online::{evaluate_cached, update, EvaluationCache, UpdateStats};
pub use tomo::{AngleEmbedding, ImageGrid, Sinogram};
