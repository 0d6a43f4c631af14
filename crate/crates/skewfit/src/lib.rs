//! F-measure-oriented logistic regression for class-imbalanced binary data.
//!
//! The centrepiece is an alternating estimator ([`fwlr`]) that reweights the
//! logistic cross-entropy with a relative density ratio fitted over the
//! model's own predicted scores ([`rulsif`]). Around it sit the usual
//! suspects: dataset handling ([`data`]), confusion-matrix metrics and AUC
//! ([`metrics`]), a plain/weighted/cost-sensitive/soft-F logistic core
//! ([`glm`]), SMOTE oversampling ([`resample`]), and a benchmark harness with
//! a CLI ([`bench`]).
//!
//! All randomized operations take an explicit `u64` seed and run on
//! `ChaCha8Rng`, a portable counter-based generator, so every experiment is
//! reproducible bit-for-bit across runs of the same build.

pub mod bench;
pub mod data;
pub mod error;
pub mod fwlr;
pub mod glm;
pub mod metrics;
pub mod resample;
pub mod rulsif;
pub(crate) mod seeding;

pub use error::{Error, Result};
