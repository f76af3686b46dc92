//! Robust two-sample testing of run-to-run variability in stochastically
//! trained binary classifiers.
//!
//! Each trained model is summarised by its logit gaps over a shared test set.
//! The empirical CDF of one model (the candidate) is compared against the
//! averaged eCDF of a pool of independently trained models (the reference)
//! through an impartially trimmed Kolmogorov–Smirnov statistic. The minimal
//! trimming level that makes the test accept, averaged over bootstrap
//! resamples, is the discrepancy score `alpha_hat`.
//!
//! Module map:
//!
//! * [`pool`]: model pools, ingest/export, clipping, splits, ensembles.
//! * [`ecdf`]: step and interpolated CDFs, exact sup-norm distances.
//! * [`bounds`]: DKW radii and the derived probability bounds.
//! * [`trimming`]: the trimming envelope, trimmed KS, robust test.
//! * [`alpha`]: bootstrap estimation of `alpha_hat`.
//! * [`metrics`]: accuracy, churn, calibration error.
//! * [`synth`]: synthetic pools and the ensemble-size sweep.

pub mod alpha;
pub mod bounds;
pub mod ecdf;
mod error;
pub mod exec;
pub mod metrics;
pub mod numfmt;
pub mod pool;
pub mod rng;
pub mod synth;
pub mod trimming;

pub use error::{Error, Result};
