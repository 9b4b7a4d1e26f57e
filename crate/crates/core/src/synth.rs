//! Synthetic run tables and forecast batches with known ground truth.
//!
//! Scenario values sit on a unit grid with gap 1.0 between rank positions and
//! fold noise bounded by 0.25, so the intended within-dataset order survives
//! fold averaging exactly. Every cell draws from its own ChaCha8 stream.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forecast::DiscreteForecast;
use crate::ranking::RunRecord;
use crate::scoring::{Metric, Orientation};

const GAP: f64 = 1.0;
const FOLD_NOISE: f64 = 0.25;
const MAX_SUPPORT: usize = 8;
/// Atoms of self-calibrated truths lie on a 1/64 grid in [-10, 10], so they
/// survive conversions that add and subtract small powers of two.
const GRID: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    /// Model 0 best everywhere, then model 1, and so on.
    Dominant,
    /// Three models in a rock-paper-scissors cycle.
    IntransitiveTriple,
    /// Every cell independent and identically distributed.
    IidNull,
    /// Forecast batch whose observations are drawn from the forecasts.
    SelfCalibrated,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Dominant => "dominant",
            ScenarioKind::IntransitiveTriple => "intransitive_triple",
            ScenarioKind::IidNull => "iid_null",
            ScenarioKind::SelfCalibrated => "self_calibrated",
        }
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dominant" => Ok(ScenarioKind::Dominant),
            "intransitive_triple" | "intransitive" => Ok(ScenarioKind::IntransitiveTriple),
            "iid_null" => Ok(ScenarioKind::IidNull),
            "self_calibrated" => Ok(ScenarioKind::SelfCalibrated),
            other => Err(Error::InvalidSpec(format!(
                "unknown scenario `{other}` (expected dominant, intransitive_triple, iid_null or self_calibrated)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub models: usize,
    pub datasets: usize,
    pub folds: usize,
    pub seed: u64,
    /// Metric names to emit; each gets its own independent table.
    pub metrics: Vec<String>,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind, models: usize, datasets: usize, folds: usize, seed: u64) -> Self {
        Self {
            kind,
            models,
            datasets,
            folds,
            seed,
            metrics: vec!["crps".to_string()],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.models == 0 || self.datasets == 0 || self.folds == 0 {
            return Err(Error::InvalidSpec("models, datasets and folds must all be at least 1".into()));
        }
        if self.metrics.is_empty() {
            return Err(Error::InvalidSpec("at least one metric is required".into()));
        }
        if self.kind == ScenarioKind::IntransitiveTriple {
            if self.models != 3 {
                return Err(Error::InvalidSpec(format!(
                    "intransitive_triple needs exactly 3 models, got {}",
                    self.models
                )));
            }
            if !self.datasets.is_multiple_of(3) {
                return Err(Error::InvalidSpec(format!(
                    "intransitive_triple needs a dataset count divisible by 3, got {}",
                    self.datasets
                )));
            }
        }
        Ok(())
    }
}

pub fn model_name(i: usize) -> String {
    format!("model_{i}")
}

pub fn dataset_name(i: usize) -> String {
    format!("dataset_{i:03}")
}

fn cell_rng(seed: u64, metric: usize, dataset: usize, model: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((metric as u64) << 48) | ((dataset as u64) << 24) | model as u64);
    rng
}

/// Zero-based rank position a scenario assigns to `model` on `dataset`, or
/// `None` when the cell is unstructured.
fn position(kind: ScenarioKind, model: usize, dataset: usize) -> Option<usize> {
    match kind {
        ScenarioKind::Dominant => Some(model),
        ScenarioKind::IntransitiveTriple => Some((model + dataset % 3) % 3),
        _ => None,
    }
}

pub fn generate_runs(spec: &ScenarioSpec) -> Result<Vec<RunRecord>> {
    spec.validate()?;
    if spec.kind == ScenarioKind::SelfCalibrated {
        return Err(Error::InvalidSpec(
            "self_calibrated produces forecasts, not run records".into(),
        ));
    }
    let orientations: Vec<Orientation> = spec
        .metrics
        .iter()
        .map(|name| {
            name.parse::<Metric>()
                .map(|m| m.orientation())
                .map_err(|_| Error::InvalidSpec(format!("unknown metric `{name}`")))
        })
        .collect::<Result<_>>()?;

    let mut out = Vec::with_capacity(spec.metrics.len() * spec.models * spec.datasets * spec.folds);
    for (k, (metric, orientation)) in spec.metrics.iter().zip(&orientations).enumerate() {
        let sign = match orientation {
            Orientation::LowerBetter => 1.0,
            Orientation::HigherBetter => -1.0,
        };
        for d in 0..spec.datasets {
            // Shared per-dataset offset so datasets differ in scale of difficulty.
            let base = cell_rng(spec.seed, k, d, usize::MAX >> 40).random_range(0.0..10.0);
            for m in 0..spec.models {
                let mut rng = cell_rng(spec.seed, k, d, m);
                let centre = match position(spec.kind, m, d) {
                    Some(p) => base + sign * GAP * p as f64,
                    None => base + rng.random::<f64>(),
                };
                for fold in 0..spec.folds {
                    let noise = match spec.kind {
                        ScenarioKind::IidNull => 0.0,
                        _ => rng.random_range(-FOLD_NOISE..FOLD_NOISE),
                    };
                    out.push(RunRecord {
                        model: model_name(m),
                        dataset: dataset_name(d),
                        fold: fold as u32,
                        metric: metric.clone(),
                        value: centre + noise,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// `n` instances, each a random discrete truth with at most 8 atoms used as
/// its own forecast, plus an observation drawn from it.
pub fn generate_self_calibrated_batch(n: usize, seed: u64) -> Result<Vec<(DiscreteForecast, f64)>> {
    if n == 0 {
        return Err(Error::InvalidSpec("instance count must be at least 1".into()));
    }
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let k = rng.random_range(1..=MAX_SUPPORT);
            let pairs: Vec<(f64, f64)> = (0..k)
                .map(|_| {
                    let x = rng.random_range(-640i32..=640) as f64 / GRID;
                    (x, rng.random_range(0.05..1.0))
                })
                .collect();
            let f = DiscreteForecast::from_weighted(pairs)?;
            let u: f64 = rng.random();
            let y = draw(&f, u);
            Ok((f, y))
        })
        .collect()
}

/// Inverse-CDF draw for `u` in [0, 1).
fn draw(f: &DiscreteForecast, u: f64) -> f64 {
    let idx = f.cumulative().partition_point(|&c| c <= u);
    f.points()[idx.min(f.len() - 1)]
}
