//! Sparse Bayesian VAR(1) modelling of seasonal multivariate count series.
//!
//! The pipeline runs in stages:
//!
//! 1. [`data_io`] reads count, covariate and taxonomy tables into [`SeriesTable`]s.
//! 2. [`phase_binning`] clusters series by the phase of their first annual
//!    harmonic and produces scaled log counts per bin.
//! 3. [`model`] defines a VAR(1) with a seasonal, covariate-driven mean, a
//!    regularised horseshoe prior on the autoregressive matrix and a circulant
//!    tridiagonal error precision ([`circulant`]); [`shrinkage`] holds the
//!    horseshoe calibration machinery.
//! 4. [`hmc`] samples the posterior; [`diagnostics`] checks it.
//! 5. [`analysis`] turns draws into selections and reports.
//!
//! [`synth`] generates data with known truth for recovery checks.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod circulant;
pub mod data_io;
pub mod diagnostics;
pub mod draws;
pub mod error;
pub mod hmc;
pub mod model;
pub mod phase_binning;
pub mod shrinkage;
pub mod stats;
pub mod synth;

pub use circulant::CirculantPrecision;
pub use data_io::{CovariateSpec, SeriesTable};
pub use draws::DrawTable;
pub use error::{Error, Result};
pub use model::{Model, ModelConfig, ModelData};
pub use phase_binning::BinnedSeries;
