//! Estimation for functional single index models `Y = g(∫X β) + ε`.
//!
//! The estimator is nested. The inner level is a local quadratic kernel
//! smoother that yields `ĝ`, `ĝ′` and `ĝ″` at any index value. The outer
//! level runs a derivative-free simplex search over the coefficient function
//! `β`, expressed in an orthonormal Fourier basis and scored by the
//! leave-one-out Nadaraya–Watson mean squared error. Around that sit
//! bandwidth selection (GCV and k-fold), a Monte-Carlo simulation harness,
//! and ingestion of the ecological growth schema with two functional
//! covariates and one scalar covariate.
//!
//! Modules, bottom-up:
//!
//! - [`basis`]: Fourier basis on `[0, 1]`, expansions, projection of samples
//! - [`kernel`]: the compactly supported smoothing kernel
//! - [`locfit`]: local quadratic fits, smoother rows, leave-one-out NW
//! - [`model`]: datasets, index computation, the coefficient objective
//! - [`optimize`]: initial values and Nelder–Mead coefficient search
//! - [`bandwidth`]: GCV / k-fold scoring and grid selection
//! - [`simulate`]: data generator, error metrics, experiment tables
//! - [`ingest`]: ecological CSV schema and synthetic generator

pub mod bandwidth;
pub mod basis;
pub mod error;
pub mod ingest;
pub mod kernel;
pub mod locfit;
pub mod model;
pub mod optimize;
pub mod simulate;

mod linalg;
mod seed;

pub use error::{Error, Result};
