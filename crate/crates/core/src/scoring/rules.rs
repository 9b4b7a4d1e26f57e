//! Scoring rules for a single forecast/observation pair.
//!
//! The integral scores (CRPS, CRLS, weighted CRPS) are evaluated exactly on
//! the segments between consecutive support points and the observation:
//! the step CDF and the observation indicator are constant on each segment,
//! so only the weight function needs integrating. Outside the hull of
//! `support ∪ {y}` every integrand is identically zero.

use statrs::function::erf::erfc;

use super::metric::{WeightKind, WeightRef};
use crate::error::{Error, Result};
use crate::forecast::{DiscreteForecast, HistogramForecast};

/// Lower clamp on the CRLS integrand argument.
pub const CRLS_EPS: f64 = 1e-12;
/// Lower clamp on the bin probability inside the log score.
pub const LOG_SCORE_EPS: f64 = 1e-12;

/// Calls `visit(a, b, F(a), a >= y)` for every segment `[a, b)` of positive
/// width between consecutive breakpoints of `support ∪ {y}`.
fn for_each_segment(f: &DiscreteForecast, y: f64, mut visit: impl FnMut(f64, f64, f64, bool)) {
    let points = f.points();
    let cumulative = f.cumulative();
    let split = points.partition_point(|&p| p < y);

    // Breakpoints in ascending order with the CDF value holding just right of each.
    let mut prev: Option<(f64, f64)> = None;
    let mut emit = |x: f64, cdf: f64| {
        if let Some((a, fa)) = prev {
            if x > a {
                visit(a, x, fa, a >= y);
            }
        }
        prev = Some((x, cdf));
    };
    for j in 0..split {
        emit(points[j], cumulative[j]);
    }
    let cdf_at_y = if split < points.len() && points[split] == y {
        cumulative[split]
    } else if split == 0 {
        0.0
    } else {
        cumulative[split - 1]
    };
    emit(y, cdf_at_y);
    for j in split..points.len() {
        emit(points[j], cumulative[j]);
    }
}

/// Continuous ranked probability score, `∫ (F(x) - 1{x >= y})² dx`.
pub fn crps(f: &DiscreteForecast, y: f64) -> f64 {
    let mut total = 0.0;
    for_each_segment(f, y, |a, b, cdf, above| {
        let d = cdf - if above { 1.0 } else { 0.0 };
        total += d * d * (b - a);
    });
    total
}

/// Continuous ranked logarithmic score, `-∫ log |F(x) + 1{y <= x} - 1| dx`,
/// with the integrand argument clamped below at [`CRLS_EPS`].
pub fn crls(f: &DiscreteForecast, y: f64) -> f64 {
    let mut total = 0.0;
    for_each_segment(f, y, |a, b, cdf, above| {
        let arg = if above { cdf } else { 1.0 - cdf };
        total -= arg.max(CRLS_EPS).ln() * (b - a);
    });
    total
}

/// Weighted CRPS, `∫ w((x - μ)/σ) (F(x) - 1{x >= y})² dx`.
pub fn wcrps(f: &DiscreteForecast, y: f64, kind: WeightKind, reference: WeightRef) -> Result<f64> {
    let WeightRef { location, scale } = reference;
    if !(scale > 0.0 && scale.is_finite()) || !location.is_finite() {
        return Err(Error::InvalidScale(scale));
    }
    let mut total = 0.0;
    for_each_segment(f, y, |a, b, cdf, above| {
        let d = cdf - if above { 1.0 } else { 0.0 };
        if d != 0.0 {
            let za = (a - location) / scale;
            let zb = (b - location) / scale;
            total += d * d * scale * weight_integral(kind, za, zb);
        }
    });
    Ok(total)
}

fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Upper tail `1 - Φ(z)`, accurate for large positive `z`.
fn norm_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

fn norm_cdf(z: f64) -> f64 {
    norm_sf(-z)
}

/// Antiderivative of Φ: `z Φ(z) + φ(z)`.
fn norm_cdf_integral(z: f64) -> f64 {
    z * norm_cdf(z) + norm_pdf(z)
}

/// `∫_{za}^{zb} w(z) dz` for the standardized weight functions.
fn weight_integral(kind: WeightKind, za: f64, zb: f64) -> f64 {
    match kind {
        WeightKind::Unit => zb - za,
        WeightKind::Right => norm_cdf_integral(zb) - norm_cdf_integral(za),
        WeightKind::Left => norm_cdf_integral(-za) - norm_cdf_integral(-zb),
        WeightKind::Center => {
            if za >= 0.0 {
                norm_sf(za) - norm_sf(zb)
            } else {
                norm_cdf(zb) - norm_cdf(za)
            }
        }
    }
}

/// Standardized weight function value, `w(z)`.
pub fn weight(kind: WeightKind, z: f64) -> f64 {
    match kind {
        WeightKind::Unit => 1.0,
        WeightKind::Right => norm_cdf(z),
        WeightKind::Left => norm_sf(z),
        WeightKind::Center => norm_pdf(z),
    }
}

/// β-energy score `E|X - y|^β - ½ E|X - X'|^β`, by exact double sum.
pub fn energy_score(f: &DiscreteForecast, y: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta <= 2.0) {
        return Err(Error::InvalidBeta(beta));
    }
    let points = f.points();
    let probs = f.probs();
    let mut to_obs = 0.0;
    let mut spread = 0.0;
    for j in 0..points.len() {
        to_obs += probs[j] * (points[j] - y).abs().powf(beta);
        let mut row = 0.0;
        for k in j + 1..points.len() {
            row += probs[k] * (points[k] - points[j]).powf(beta);
        }
        spread += probs[j] * row;
    }
    // Off-diagonal pairs counted once: ½ Σ_j Σ_k = Σ_{j<k}.
    Ok(to_obs - spread)
}

/// Central `(1 - α)` prediction interval `[l, u]` from the generalized inverse.
pub fn central_interval(f: &DiscreteForecast, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidLevel(alpha));
    }
    Ok((f.quantile(alpha / 2.0)?, f.quantile(1.0 - alpha / 2.0)?))
}

/// Interval score of the central `(1 - α)` interval.
pub fn interval_score(f: &DiscreteForecast, y: f64, alpha: f64) -> Result<f64> {
    let (lower, upper) = central_interval(f, alpha)?;
    Ok(interval_score_bounds(lower, upper, y, alpha))
}

pub(crate) fn interval_score_bounds(lower: f64, upper: f64, y: f64, alpha: f64) -> f64 {
    let mut score = upper - lower;
    if y < lower {
        score += 2.0 / alpha * (lower - y);
    }
    if y > upper {
        score += 2.0 / alpha * (y - upper);
    }
    score
}

/// Negative log density `-log(p_k / w_k)` of the bin holding `y`. An
/// observation outside every bin scores [`LOG_SCORE_EPS`] over the width of
/// the nearest bin.
pub fn log_score(h: &HistogramForecast, y: f64) -> f64 {
    let (bin, prob) = match h.bin_of(y) {
        Some(k) => (k, h.probs()[k]),
        None if y < h.edges()[0] => (0, 0.0),
        None => (h.num_bins() - 1, 0.0),
    };
    -(prob.max(LOG_SCORE_EPS) / h.width(bin)).ln()
}

/// Squared distance between the bin probabilities and the one-hot vector of
/// the bin holding `y`.
pub fn brier(h: &HistogramForecast, y: f64) -> Result<f64> {
    let target = h.bin_of(y).ok_or_else(|| Error::OutsideSupport {
        y,
        lo: h.edges()[0],
        hi: h.edges()[h.num_bins()],
    })?;
    Ok(h
        .probs()
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let d = p - if k == target { 1.0 } else { 0.0 };
            d * d
        })
        .sum())
}

/// Batch point-estimate accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMetrics {
    pub mae: f64,
    pub rmse: f64,
    /// `None` when the targets have zero variance.
    pub r2: Option<f64>,
}

/// MAE of `median_preds`, RMSE and R² of `mean_preds` against `targets`.
pub fn point_metrics(median_preds: &[f64], mean_preds: &[f64], targets: &[f64]) -> Result<PointMetrics> {
    let n = targets.len();
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    if median_preds.len() != n || mean_preds.len() != n {
        return Err(Error::InvalidForecast(format!(
            "{} targets but {} / {} predictions",
            n,
            median_preds.len(),
            mean_preds.len()
        )));
    }
    let nf = n as f64;
    let mae = median_preds.iter().zip(targets).map(|(p, y)| (y - p).abs()).sum::<f64>() / nf;
    let sse: f64 = mean_preds.iter().zip(targets).map(|(p, y)| (y - p) * (y - p)).sum();
    let target_mean = targets.iter().sum::<f64>() / nf;
    let sst: f64 = targets.iter().map(|y| (y - target_mean) * (y - target_mean)).sum();
    Ok(PointMetrics {
        mae,
        rmse: (sse / nf).sqrt(),
        r2: (sst > 0.0).then(|| 1.0 - sse / sst),
    })
}
