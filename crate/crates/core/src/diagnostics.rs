//! Batch calibration and concentration diagnostics: sharpness, dispersion
//! and empirical coverage of central prediction intervals.

use crate::error::{Error, Result};
use crate::forecast::DiscreteForecast;
use crate::numeric::{fmean, population_std};
use crate::scoring::central_interval;

/// Mean of the per-instance predictive standard deviations.
pub fn sharpness(batch: &[DiscreteForecast]) -> Result<f64> {
    let stds: Vec<f64> = batch.iter().map(DiscreteForecast::std).collect();
    sharpness_of_stds(&stds)
}

/// Population standard deviation of the per-instance predictive standard
/// deviations.
pub fn dispersion(batch: &[DiscreteForecast]) -> Result<f64> {
    let stds: Vec<f64> = batch.iter().map(DiscreteForecast::std).collect();
    dispersion_of_stds(&stds)
}

pub(crate) fn sharpness_of_stds(stds: &[f64]) -> Result<f64> {
    fmean(stds).ok_or(Error::EmptyBatch)
}

pub(crate) fn dispersion_of_stds(stds: &[f64]) -> Result<f64> {
    population_std(stds).ok_or(Error::EmptyBatch)
}

/// Whether `y` falls inside the central interval at `level`, bounds included.
pub fn covers(f: &DiscreteForecast, y: f64, level: f64) -> Result<bool> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidLevel(level));
    }
    let (lower, upper) = central_interval(f, 1.0 - level)?;
    Ok(lower <= y && y <= upper)
}

/// Fraction of observations inside their forecast's central interval at
/// `level`. Step CDFs can over-cover; that is reported as is.
pub fn coverage(batch: &[(DiscreteForecast, f64)], level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidLevel(level));
    }
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut hits = 0usize;
    for (f, y) in batch {
        if covers(f, *y, level)? {
            hits += 1;
        }
    }
    Ok(hits as f64 / batch.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub sharpness: f64,
    pub dispersion: f64,
    /// `(nominal level, empirical coverage)` in the order requested.
    pub coverage: Vec<(f64, f64)>,
}

pub fn calibration_report(batch: &[(DiscreteForecast, f64)], levels: &[f64]) -> Result<CalibrationReport> {
    let stds: Vec<f64> = batch.iter().map(|(f, _)| f.std()).collect();
    let coverage = levels
        .iter()
        .map(|&level| coverage(batch, level).map(|c| (level, c)))
        .collect::<Result<_>>()?;
    Ok(CalibrationReport {
        sharpness: sharpness_of_stds(&stds)?,
        dispersion: dispersion_of_stds(&stds)?,
        coverage,
    })
}
