//! Simulation and inference toolkit for near-surface NV centers created by
//! masked ion implantation.
//!
//! The toolkit covers the full workflow around screening-mask implantation
//! experiments:
//!
//! - [`implant`]: binary-collision Monte Carlo transport of N+ ions through
//!   an amorphous SiO2 mask into diamond, yielding stopped-ion depth
//!   profiles.
//! - [`models`]: forward models for every measured signal (coherence decay,
//!   proton NMR dip, rms dipolar field, decoupling scaling, DEER decay,
//!   instantaneous diffusion, relaxation).
//! - [`synth`]: synthetic measurements with Poisson photon shot noise.
//! - [`noise`]: spectral decomposition of decoupling data, Lorentzian bath
//!   fits, and SQ/DQ relaxation-rate algebra.
//! - [`fit`]: damped least-squares inversion of all models, NV-depth
//!   estimation from NMR spectra, and the detectability bound.
//! - [`assembly`]: population-level yield and depth-histogram analysis.
//! - [`io`] / [`cli`]: file codecs and the command-line pipeline.
//!
//! Everything numerical is deterministic under a fixed seed, including the
//! parallel Monte Carlo transport. See the crate examples for one runnable
//! walkthrough per capability.

// Validation guards use `!(x > 0.0)` on purpose: unlike `x <= 0.0` it also
// rejects NaN. Frozen oracle constants keep their full printed digits.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod assembly;
pub mod cli;
pub mod constants;
pub mod error;
pub mod fit;
pub mod implant;
pub mod io;
pub mod models;
pub mod noise;
pub mod records;
pub mod synth;

pub use constants::{
    nominal_transitions, proton_larmor, FieldConfig, PhotonModel, PhysicalConstants, CONSTANTS,
};
pub use error::{Error, Result};
pub use records::{DecayTrace, NmrSpectrum, SequenceKind};
