//! Evaluation toolkit for probabilistic regression forecasts.
//!
//! Forecasts arrive as histograms, quantile sets or samples and are reduced
//! to a finite point-mass distribution ([`forecast::DiscreteForecast`]).
//! [`scoring`] evaluates proper scoring rules and point metrics on them,
//! [`diagnostics`] reports sharpness, dispersion and coverage, and
//! [`ranking`] turns per-fold results from many models on many datasets into
//! a permutation-test leaderboard.

pub mod diagnostics;
pub mod error;
pub mod forecast;
pub mod io;
pub mod numeric;
pub mod ranking;
pub mod scoring;
pub mod synth;

pub use error::{Error, Result};
