use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    LowerBetter,
    HigherBetter,
}

impl Orientation {
    /// `true` when `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Orientation::LowerBetter => a < b,
            Orientation::HigherBetter => a > b,
        }
    }
}

/// Region of the outcome axis emphasized by the weighted CRPS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightKind {
    /// `1 - Φ(z)`
    Left,
    /// `Φ(z)`
    Right,
    /// `φ(z)`
    Center,
    Unit,
}

impl WeightKind {
    fn as_str(self) -> &'static str {
        match self {
            WeightKind::Left => "left",
            WeightKind::Right => "right",
            WeightKind::Center => "center",
            WeightKind::Unit => "unit",
        }
    }
}

/// Location and scale standardizing the outcome axis for the wCRPS weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightRef {
    pub location: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    Mae,
    Rmse,
    R2,
    Crps,
    Crls,
    LogScore,
    BrierScore,
    EnergyScore { beta: f64 },
    Wcrps(WeightKind),
    /// `alpha` is the mass outside the central interval.
    IntervalScore { alpha: f64 },
    Sharpness,
    Dispersion,
    Coverage { level: f64 },
}

const FIXED_IDS: &[&str] = &[
    "mae",
    "rmse",
    "r2",
    "crps",
    "crls",
    "log_score",
    "brier_score",
    "energy_score_beta_0.2",
    "energy_score_beta_0.5",
    "energy_score_beta_1.0",
    "energy_score_beta_1.5",
    "energy_score_beta_2.0",
    "wcrps_left",
    "wcrps_right",
    "wcrps_center",
    "interval_score_90",
    "interval_score_95",
    "sharpness",
    "dispersion",
    "coverage_90",
    "coverage_95",
];

/// Formats a percentage or exponent without trailing noise: `90`, `97.5`, `1.0`.
fn fmt_param(value: f64, min_decimals: usize) -> String {
    for decimals in min_decimals..=12 {
        let s = format!("{value:.decimals$}");
        if s.parse::<f64>().is_ok_and(|v| (v - value).abs() <= 1e-9 * value.abs().max(1.0)) {
            return s;
        }
    }
    format!("{value}")
}

impl Metric {
    /// The full suite, in the column order used by the score table.
    pub fn standard_suite() -> Vec<Metric> {
        FIXED_IDS.iter().map(|id| id.parse().unwrap()).collect()
    }

    /// Comma-separated list of accepted identifiers.
    pub fn valid_ids() -> String {
        let mut ids = FIXED_IDS.join(", ");
        ids.push_str(
            ", wcrps_unit, energy_score_beta_<b>, interval_score_<pct>, coverage_<pct>",
        );
        ids
    }

    pub fn id(&self) -> String {
        match *self {
            Metric::Mae => "mae".into(),
            Metric::Rmse => "rmse".into(),
            Metric::R2 => "r2".into(),
            Metric::Crps => "crps".into(),
            Metric::Crls => "crls".into(),
            Metric::LogScore => "log_score".into(),
            Metric::BrierScore => "brier_score".into(),
            Metric::EnergyScore { beta } => format!("energy_score_beta_{}", fmt_param(beta, 1)),
            Metric::Wcrps(kind) => format!("wcrps_{}", kind.as_str()),
            Metric::IntervalScore { alpha } => {
                format!("interval_score_{}", fmt_param(100.0 * (1.0 - alpha), 0))
            }
            Metric::Sharpness => "sharpness".into(),
            Metric::Dispersion => "dispersion".into(),
            Metric::Coverage { level } => format!("coverage_{}", fmt_param(100.0 * level, 0)),
        }
    }

    /// R² is the only metric where larger values are better.
    pub fn orientation(&self) -> Orientation {
        match self {
            Metric::R2 => Orientation::HigherBetter,
            _ => Orientation::LowerBetter,
        }
    }

    /// Log score and Brier score are defined on bins, not point masses.
    pub fn needs_histogram(&self) -> bool {
        matches!(self, Metric::LogScore | Metric::BrierScore)
    }

    fn validate(self) -> Result<Self> {
        match self {
            Metric::EnergyScore { beta } if !(beta > 0.0 && beta <= 2.0) => {
                Err(Error::InvalidBeta(beta))
            }
            Metric::IntervalScore { alpha } if !(alpha > 0.0 && alpha < 1.0) => {
                Err(Error::InvalidLevel(alpha))
            }
            Metric::Coverage { level } if !(level > 0.0 && level < 1.0) => {
                Err(Error::InvalidLevel(level))
            }
            m => Ok(m),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownMetric {
            name: s.to_string(),
            valid: Metric::valid_ids(),
        };
        let number = |t: &str| -> Result<f64> {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(unknown)
        };
        let id = s.trim().to_ascii_lowercase();
        let metric = match id.as_str() {
            "mae" => Metric::Mae,
            "rmse" => Metric::Rmse,
            "r2" => Metric::R2,
            "crps" => Metric::Crps,
            "crls" => Metric::Crls,
            "log_score" => Metric::LogScore,
            "brier_score" => Metric::BrierScore,
            "wcrps_left" => Metric::Wcrps(WeightKind::Left),
            "wcrps_right" => Metric::Wcrps(WeightKind::Right),
            "wcrps_center" => Metric::Wcrps(WeightKind::Center),
            "wcrps_unit" => Metric::Wcrps(WeightKind::Unit),
            "sharpness" => Metric::Sharpness,
            "dispersion" => Metric::Dispersion,
            other => {
                if let Some(b) = other.strip_prefix("energy_score_beta_") {
                    Metric::EnergyScore { beta: number(b)? }
                } else if let Some(p) = other.strip_prefix("interval_score_") {
                    Metric::IntervalScore {
                        alpha: 1.0 - number(p)? / 100.0,
                    }
                } else if let Some(p) = other.strip_prefix("coverage_") {
                    Metric::Coverage {
                        level: number(p)? / 100.0,
                    }
                } else {
                    return Err(unknown());
                }
            }
        };
        metric.validate()
    }
}

/// A metric plus the parameters it is evaluated with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSpec {
    pub metric: Metric,
    /// Reference for wCRPS weights; `None` standardizes by the scored
    /// batch's target mean and population standard deviation.
    pub weight_ref: Option<WeightRef>,
}

impl MetricSpec {
    pub fn new(metric: Metric) -> Self {
        Self {
            metric,
            weight_ref: None,
        }
    }

    pub fn with_weight_ref(mut self, location: f64, scale: f64) -> Self {
        self.weight_ref = Some(WeightRef { location, scale });
        self
    }

    pub fn name(&self) -> String {
        self.metric.id()
    }

    pub fn orientation(&self) -> Orientation {
        self.metric.orientation()
    }
}

impl From<Metric> for MetricSpec {
    fn from(metric: Metric) -> Self {
        Self::new(metric)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_ids_round_trip() {
        for id in FIXED_IDS {
            let m: Metric = id.parse().unwrap();
            assert_eq!(&m.id(), id);
        }
        assert_eq!(Metric::standard_suite().len(), FIXED_IDS.len());
    }

    #[test]
    fn parameterized_ids() {
        assert_eq!(
            "interval_score_90".parse::<Metric>().unwrap(),
            Metric::IntervalScore { alpha: 1.0 - 0.9 }
        );
        let m: Metric = "interval_score_97.5".parse().unwrap();
        assert_eq!(m.id(), "interval_score_97.5");
        let m: Metric = "energy_score_beta_0.25".parse().unwrap();
        assert_eq!(m, Metric::EnergyScore { beta: 0.25 });
        assert_eq!(m.id(), "energy_score_beta_0.25");
        assert_eq!(Metric::Coverage { level: 0.8 }.id(), "coverage_80");
    }

    #[test]
    fn bad_ids() {
        assert!(matches!("nope".parse::<Metric>(), Err(Error::UnknownMetric { .. })));
        assert!(matches!(
            "energy_score_beta_3".parse::<Metric>(),
            Err(Error::InvalidBeta(_))
        ));
        assert!(matches!(
            "interval_score_100".parse::<Metric>(),
            Err(Error::InvalidLevel(_))
        ));
        assert!(matches!(
            "coverage_x".parse::<Metric>(),
            Err(Error::UnknownMetric { .. })
        ));
    }

    #[test]
    fn only_r2_is_higher_better() {
        for m in Metric::standard_suite() {
            let expected = if m == Metric::R2 {
                Orientation::HigherBetter
            } else {
                Orientation::LowerBetter
            };
            assert_eq!(m.orientation(), expected, "{m}");
        }
    }
}
