//! Estimation of on/off channel occupancy traffic.
//!
//! The channel alternates between an off state (exponential sojourn with rate
//! `lambda_f`) and an on state (rate `lambda_n`). This crate provides
//!
//! * [`traffic`]: the ground-truth process, sampling and sensing errors,
//! * [`estimators`]: averaging, weighted and maximum-likelihood estimators,
//! * [`accuracy`]: closed-form MSE and Cramér–Rao bounds plus brute-force oracles,
//! * [`design`]: optimal sampling schedules and weights,
//! * [`blind`]: the two blind estimation algorithms,
//! * `harness` (feature `harness`): Monte Carlo experiments and the CLI.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accuracy;
pub mod blind;
pub mod design;
pub mod error;
pub mod estimators;
pub mod optimize;
pub mod seed;
pub mod traffic;

#[cfg(feature = "harness")]
pub mod harness;

pub use error::{Error, Result};
pub use traffic::{SampleSchedule, SampleStream, SensingModel, TrafficParams, Trajectory};
