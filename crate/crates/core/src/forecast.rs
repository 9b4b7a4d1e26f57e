//! Predictive distributions in histogram, quantile and sample form, and the
//! point-mass form every distributional score is computed on.
//!
//! Histograms collapse to their bin centers, quantile sets to their values
//! (with the level axis split at midpoints), and samples to their empirical
//! frequencies. All three canonicalize into a [`DiscreteForecast`], whose CDF
//! is the right-continuous step function `P(X <= x)`.

use crate::error::{Error, Result};

/// Tolerance on total probability mass.
pub const MASS_TOLERANCE: f64 = 1e-9;

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidForecast(msg.into())
}

fn check_finite(name: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(invalid(format!("{name}[{i}] is not finite"))),
        None => Ok(()),
    }
}

fn check_strictly_ascending(name: &str, values: &[f64]) -> Result<()> {
    match values.windows(2).position(|w| w[0] >= w[1]) {
        Some(i) => Err(invalid(format!(
            "{name} must be strictly ascending ({name}[{i}] = {} >= {name}[{}] = {})",
            values[i],
            i + 1,
            values[i + 1]
        ))),
        None => Ok(()),
    }
}

/// Bin edges in target units with a probability per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramForecast {
    edges: Vec<f64>,
    probs: Vec<f64>,
    mass_deviation: f64,
}

impl HistogramForecast {
    /// Validates and normalizes. Probabilities only need a positive total;
    /// the deviation of the supplied total from 1 is kept for reporting.
    pub fn new(edges: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(invalid("histogram needs at least one bin"));
        }
        if edges.len() != probs.len() + 1 {
            return Err(invalid(format!(
                "histogram with {} bins needs {} edges, got {}",
                probs.len(),
                probs.len() + 1,
                edges.len()
            )));
        }
        check_finite("edges", &edges)?;
        check_finite("probs", &probs)?;
        check_strictly_ascending("edges", &edges)?;
        if let Some(i) = probs.iter().position(|&p| p < 0.0) {
            return Err(invalid(format!("probs[{i}] is negative")));
        }
        let total: f64 = probs.iter().sum();
        if total <= 0.0 {
            return Err(invalid("histogram carries no probability mass"));
        }
        let probs = probs.into_iter().map(|p| p / total).collect();
        Ok(Self {
            edges,
            probs,
            mass_deviation: (total - 1.0).abs(),
        })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn num_bins(&self) -> usize {
        self.probs.len()
    }

    pub fn width(&self, bin: usize) -> f64 {
        self.edges[bin + 1] - self.edges[bin]
    }

    /// `|sum(probs) - 1|` of the probabilities as supplied, before normalization.
    pub fn mass_deviation(&self) -> f64 {
        self.mass_deviation
    }

    /// Bin holding `y`: bins are left-closed and right-open, except the last
    /// which also holds its right edge. `None` outside `[edges[0], edges[K]]`.
    pub fn bin_of(&self, y: f64) -> Option<usize> {
        let k = self.num_bins();
        if y < self.edges[0] || y > self.edges[k] {
            return None;
        }
        let idx = self.edges.partition_point(|&e| e <= y);
        Some(idx.saturating_sub(1).min(k - 1))
    }

    pub fn to_discrete(&self) -> DiscreteForecast {
        histogram_to_discrete(self)
    }
}

/// Quantile levels in (0, 1) with their values in target units.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileForecast {
    levels: Vec<f64>,
    values: Vec<f64>,
    crossings_repaired: usize,
}

impl QuantileForecast {
    /// Crossing quantiles are repaired by sorting the values ascending; the
    /// number of descending adjacent pairs found is kept in
    /// [`crossings_repaired`](Self::crossings_repaired).
    pub fn new(levels: Vec<f64>, mut values: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(invalid("quantile forecast needs at least one level"));
        }
        if levels.len() != values.len() {
            return Err(invalid(format!(
                "{} levels but {} values",
                levels.len(),
                values.len()
            )));
        }
        check_finite("levels", &levels)?;
        check_finite("values", &values)?;
        if let Some(&l) = levels.iter().find(|&&l| l <= 0.0 || l >= 1.0) {
            return Err(Error::InvalidLevel(l));
        }
        check_strictly_ascending("levels", &levels)?;
        let crossings_repaired = values.windows(2).filter(|w| w[1] < w[0]).count();
        if crossings_repaired > 0 {
            values.sort_by(f64::total_cmp);
        }
        Ok(Self {
            levels,
            values,
            crossings_repaired,
        })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Values after monotone rearrangement.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn crossings_repaired(&self) -> usize {
        self.crossings_repaired
    }

    pub fn to_discrete(&self) -> DiscreteForecast {
        quantiles_to_discrete(self)
    }

    pub fn to_histogram(&self) -> Result<HistogramForecast> {
        quantiles_to_histogram(self)
    }
}

/// Draws from the predictive distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleForecast {
    values: Vec<f64>,
}

impl SampleForecast {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("sample forecast needs at least one value"));
        }
        check_finite("values", &values)?;
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_discrete(&self) -> DiscreteForecast {
        samples_to_discrete(self)
    }
}

/// Finite point-mass distribution: strictly ascending support with positive
/// probabilities summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteForecast {
    points: Vec<f64>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl DiscreteForecast {
    pub fn new(points: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("discrete forecast needs at least one point"));
        }
        if points.len() != probs.len() {
            return Err(invalid(format!(
                "{} points but {} probabilities",
                points.len(),
                probs.len()
            )));
        }
        check_finite("points", &points)?;
        check_finite("probs", &probs)?;
        check_strictly_ascending("points", &points)?;
        if let Some(i) = probs.iter().position(|&p| p <= 0.0) {
            return Err(invalid(format!("probs[{i}] is not positive")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self::from_canonical(points, probs, total))
    }

    /// Builds a forecast from arbitrary (point, weight) pairs: sorts, merges
    /// equal points, drops zero weights and normalizes.
    pub fn from_weighted<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut pairs: Vec<(f64, f64)> = pairs.into_iter().collect();
        if let Some((x, w)) = pairs
            .iter()
            .find(|(x, w)| !x.is_finite() || !w.is_finite() || *w < 0.0)
        {
            return Err(invalid(format!("invalid weighted point ({x}, {w})")));
        }
        pairs.retain(|&(_, w)| w > 0.0);
        if pairs.is_empty() {
            return Err(invalid("no positive mass"));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut points: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut probs: Vec<f64> = Vec::with_capacity(pairs.len());
        for (x, w) in pairs {
            match points.last() {
                Some(&last) if last == x => *probs.last_mut().unwrap() += w,
                _ => {
                    points.push(x);
                    probs.push(w);
                }
            }
        }
        let total: f64 = probs.iter().sum();
        Ok(Self::from_canonical(points, probs, total))
    }

    pub fn point_mass(x: f64) -> Result<Self> {
        Self::new(vec![x], vec![1.0])
    }

    fn from_canonical(points: Vec<f64>, probs: Vec<f64>, total: f64) -> Self {
        let probs: Vec<f64> = probs.into_iter().map(|p| p / total).collect();
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cumulative.push(acc.min(1.0));
        }
        *cumulative.last_mut().unwrap() = 1.0;
        Self {
            points,
            probs,
            cumulative,
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn min_point(&self) -> f64 {
        self.points[0]
    }

    pub fn max_point(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// `P(X <= points[j])`.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// Right-continuous step CDF, `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self.points.partition_point(|&p| p <= x) {
            0 => 0.0,
            n => self.cumulative[n - 1],
        }
    }

    /// Generalized inverse: the smallest support point whose CDF reaches `tau`.
    pub fn quantile(&self, tau: f64) -> Result<f64> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidLevel(tau));
        }
        let j = self.cumulative.partition_point(|&c| c < tau);
        Ok(self.points[j.min(self.points.len() - 1)])
    }

    pub fn mean(&self) -> f64 {
        self.points.iter().zip(&self.probs).map(|(x, p)| x * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        let var: f64 = self
            .points
            .iter()
            .zip(&self.probs)
            .map(|(x, p)| p * (x - mean) * (x - mean))
            .sum();
        var.max(0.0)
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Pushes every support point through `x -> scale * x + shift`.
    pub fn affine(&self, scale: f64, shift: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) || !shift.is_finite() {
            return Err(invalid(format!("affine map needs scale > 0, got {scale}")));
        }
        let points = self.points.iter().map(|x| scale * x + shift).collect();
        Self::new(points, self.probs.clone())
    }
}

/// One atom per nonempty bin, placed at the bin center.
pub fn histogram_to_discrete(h: &HistogramForecast) -> DiscreteForecast {
    let mut points = Vec::with_capacity(h.num_bins());
    let mut probs = Vec::with_capacity(h.num_bins());
    for (k, &p) in h.probs.iter().enumerate() {
        if p > 0.0 {
            points.push(0.5 * (h.edges[k] + h.edges[k + 1]));
            probs.push(p);
        }
    }
    let total = probs.iter().sum();
    DiscreteForecast::from_canonical(points, probs, total)
}

/// Each quantile value becomes an atom whose mass is the slice of (0, 1)
/// closest to its level, split at midpoints between adjacent levels.
pub fn quantiles_to_discrete(q: &QuantileForecast) -> DiscreteForecast {
    let levels = &q.levels;
    let m = levels.len();
    let mass = |j: usize| -> f64 {
        if m == 1 {
            return 1.0;
        }
        let lower = if j == 0 {
            0.0
        } else {
            0.5 * (levels[j - 1] + levels[j])
        };
        let upper = if j == m - 1 {
            1.0
        } else {
            0.5 * (levels[j] + levels[j + 1])
        };
        upper - lower
    };
    DiscreteForecast::from_weighted(q.values.iter().enumerate().map(|(j, &v)| (v, mass(j))))
        .expect("midpoint partition of valid levels has positive mass")
}

/// Bins between consecutive quantile values carrying the level gap between
/// them; the two open tails are dropped and the interior renormalized.
/// Zero-width bins from tied values are widened symmetrically.
pub fn quantiles_to_histogram(q: &QuantileForecast) -> Result<HistogramForecast> {
    let m = q.levels.len();
    if m < 2 {
        return Err(Error::NotConvertible(
            "a single quantile cannot form a histogram bin".into(),
        ));
    }
    let edges = widen_ties(&q.values);
    let probs = q.levels.windows(2).map(|w| w[1] - w[0]).collect();
    HistogramForecast::new(edges, probs)
}

fn tie_half_width(v: f64) -> f64 {
    1e-9_f64.max(1e-9 * v.abs())
}

/// Spreads each run of equal values evenly over `[v - eps, v + eps]`,
/// staying within a quarter of the gap to a neighbouring distinct value.
fn widen_ties(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut edges = values.to_vec();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[end] == values[start] {
            end += 1;
        }
        let run = end - start;
        if run > 1 {
            let v = values[start];
            let eps = tie_half_width(v);
            let mut lo = v - eps;
            let mut hi = v + eps;
            if start > 0 {
                lo = lo.max(v - 0.25 * (v - values[start - 1]));
            }
            if end < n {
                hi = hi.min(v + 0.25 * (values[end] - v));
            }
            let step = (hi - lo) / (run - 1) as f64;
            for i in 0..run {
                edges[start + i] = lo + step * i as f64;
            }
            edges[end - 1] = hi;
        }
        start = end;
    }
    edges
}

/// Distinct sorted sample values weighted by their empirical frequencies.
pub fn samples_to_discrete(s: &SampleForecast) -> DiscreteForecast {
    DiscreteForecast::from_weighted(s.values.iter().map(|&v| (v, 1.0)))
        .expect("samples are finite and nonempty")
}
