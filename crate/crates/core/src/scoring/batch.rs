use std::borrow::Cow;

use rayon::prelude::*;

use super::metric::{Metric, MetricSpec, WeightRef};
use super::rules;
use crate::diagnostics::{covers, dispersion_of_stds, sharpness_of_stds};
use crate::error::{Error, Result};
use crate::forecast::{DiscreteForecast, HistogramForecast};
use crate::io::{ForecastForm, ForecastRecord};
use crate::numeric::{fmean, population_std};

/// Functional of the predictive distribution used as a point prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointFunctional {
    Median,
    Mean,
    Quantile(f64),
}

impl PointFunctional {
    pub fn apply(self, f: &DiscreteForecast) -> Result<f64> {
        match self {
            PointFunctional::Median => f.quantile(0.5),
            PointFunctional::Mean => Ok(f.mean()),
            PointFunctional::Quantile(tau) => f.quantile(tau),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchOptions {
    /// Point prediction scored by MAE.
    pub absolute: PointFunctional,
    /// Point prediction scored by RMSE and R².
    pub squared: PointFunctional,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            absolute: PointFunctional::Median,
            squared: PointFunctional::Mean,
        }
    }
}

/// One metric over a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreResult {
    pub metric: String,
    /// Per-instance contributions, `None` where the metric is undefined for
    /// that record's forecast form. RMSE holds squared errors, coverage holds
    /// 0/1 hit indicators, sharpness and dispersion hold predictive stds.
    pub values: Vec<Option<f64>>,
    /// Arithmetic mean of the defined `values`.
    pub mean: Option<f64>,
    /// The metric's reported batch value: the mean for additive scores,
    /// `sqrt(mean)` for RMSE, R², and the population std for dispersion.
    pub aggregate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchScores {
    pub ids: Vec<String>,
    pub targets: Vec<f64>,
    pub results: Vec<ScoreResult>,
    pub warnings: Vec<String>,
}

impl BatchScores {
    pub fn get(&self, metric: &str) -> Option<&ScoreResult> {
        self.results.iter().find(|r| r.metric == metric)
    }
}

pub fn score_batch(records: &[ForecastRecord], specs: &[MetricSpec]) -> Result<BatchScores> {
    score_batch_with(records, specs, &BatchOptions::default())
}

/// Scores every record under every metric. Quantile forecasts reach the
/// histogram-only metrics through the quantile-to-histogram conversion;
/// sample forecasts leave them undefined.
pub fn score_batch_with(
    records: &[ForecastRecord],
    specs: &[MetricSpec],
    options: &BatchOptions,
) -> Result<BatchScores> {
    if records.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let targets: Vec<f64> = records.iter().map(|r| r.target).collect();
    let discrete: Vec<DiscreteForecast> =
        records.par_iter().map(|r| r.forecast.to_discrete()).collect();

    let mut warnings = Vec::new();
    let crossed = records
        .iter()
        .filter(|r| matches!(&r.forecast, ForecastForm::Quantiles(q) if q.crossings_repaired() > 0))
        .count();
    if crossed > 0 {
        warnings.push(format!(
            "{crossed} quantile record(s) had crossing quantiles, repaired by sorting"
        ));
    }

    let needs_histogram = specs.iter().any(|s| s.metric.needs_histogram());
    let histograms: Vec<Option<Cow<'_, HistogramForecast>>> = if needs_histogram {
        let hs: Vec<_> = records
            .iter()
            .map(|r| match &r.forecast {
                ForecastForm::Histogram(h) => Some(Cow::Borrowed(h)),
                ForecastForm::Quantiles(q) => q.to_histogram().ok().map(Cow::Owned),
                ForecastForm::Samples(_) => None,
            })
            .collect();
        let quantile = records
            .iter()
            .filter(|r| matches!(r.forecast, ForecastForm::Quantiles(_)))
            .count();
        let samples = records
            .iter()
            .filter(|r| matches!(r.forecast, ForecastForm::Samples(_)))
            .count();
        let unconvertible = records
            .iter()
            .zip(&hs)
            .filter(|(r, h)| matches!(r.forecast, ForecastForm::Quantiles(_)) && h.is_none())
            .count();
        if quantile > 0 {
            warnings.push(format!(
                "histogram metrics for {quantile} quantile record(s) computed on bins between adjacent quantiles"
            ));
        }
        if unconvertible > 0 {
            warnings.push(format!(
                "{unconvertible} single-quantile record(s) cannot form bins; histogram metrics left empty"
            ));
        }
        if samples > 0 {
            warnings.push(format!(
                "histogram metrics undefined for {samples} sample record(s)"
            ));
        }
        hs
    } else {
        Vec::new()
    };

    let batch_ref = || -> Result<WeightRef> {
        let location = fmean(&targets).expect("nonempty");
        let scale = population_std(&targets).expect("nonempty");
        if scale > 0.0 {
            Ok(WeightRef { location, scale })
        } else {
            Err(Error::InvalidScale(scale))
        }
    };

    let mut results = Vec::with_capacity(specs.len());
    for spec in specs {
        let metric = spec.metric;
        let weight_ref = match (metric, spec.weight_ref) {
            (Metric::Wcrps(_), None) => Some(batch_ref()?),
            (_, r) => r,
        };

        let per_instance = |i: usize| -> Result<Option<f64>> {
            let f = &discrete[i];
            let y = targets[i];
            Ok(match metric {
                Metric::Crps => Some(rules::crps(f, y)),
                Metric::Crls => Some(rules::crls(f, y)),
                Metric::EnergyScore { beta } => Some(rules::energy_score(f, y, beta)?),
                Metric::Wcrps(kind) => Some(rules::wcrps(f, y, kind, weight_ref.unwrap())?),
                Metric::IntervalScore { alpha } => Some(rules::interval_score(f, y, alpha)?),
                Metric::LogScore => histograms[i].as_ref().map(|h| rules::log_score(h, y)),
                Metric::BrierScore => match &histograms[i] {
                    Some(h) => Some(rules::brier(h, y)?),
                    None => None,
                },
                Metric::Mae => Some((y - options.absolute.apply(f)?).abs()),
                Metric::Rmse => {
                    let e = y - options.squared.apply(f)?;
                    Some(e * e)
                }
                Metric::R2 => None,
                Metric::Sharpness | Metric::Dispersion => Some(f.std()),
                Metric::Coverage { level } => Some(if covers(f, y, level)? { 1.0 } else { 0.0 }),
            })
        };
        let computed: Vec<Result<Option<f64>>> =
            (0..records.len()).into_par_iter().map(per_instance).collect();
        let mut values = Vec::with_capacity(computed.len());
        for (i, v) in computed.into_iter().enumerate() {
            values.push(v.map_err(|e| e.at_record(i))?);
        }

        let defined: Vec<f64> = values.iter().flatten().copied().collect();
        let mean = fmean(&defined);
        let aggregate = match metric {
            Metric::Rmse => mean.map(f64::sqrt),
            Metric::R2 => {
                let preds = discrete
                    .iter()
                    .map(|f| options.squared.apply(f))
                    .collect::<Result<Vec<_>>>()?;
                rules::point_metrics(&preds, &preds, &targets)?.r2
            }
            Metric::Sharpness => Some(sharpness_of_stds(&defined)?),
            Metric::Dispersion => Some(dispersion_of_stds(&defined)?),
            _ => mean,
        };
        results.push(ScoreResult {
            metric: spec.name(),
            values,
            mean,
            aggregate,
        });
    }

    Ok(BatchScores {
        ids: records.iter().map(|r| r.id.clone()).collect(),
        targets,
        results,
        warnings,
    })
}
