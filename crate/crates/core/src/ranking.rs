//! Permutation-test leaderboard for many models over many datasets.
//!
//! Pipeline: fold runs are averaged into one score per (model, dataset);
//! datasets where every model scored identically are dropped; scores become
//! within-dataset ranks; each model's average rank is compared against a null
//! built by shuffling every dataset's rank vector independently. The p-value
//! is `(count + 1) / (nsim + 1)`, where `count` is the number of null means at
//! or below the observed average rank. Models are ordered by p-value, then by
//! their raw observed mean.
//!
//! The null is reproducible from `(seed, sim, dataset)` alone: every shuffle
//! draws from its own ChaCha8 stream, so results do not depend on how many
//! worker threads run the simulations.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::fsum;
use crate::scoring::Orientation;

pub const DEFAULT_NSIM: usize = 20_000;

/// One fold-level observation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub model: String,
    pub dataset: String,
    pub fold: u32,
    pub metric: String,
    pub value: f64,
}

/// Fold-averaged scores, one row per dataset and one column per model.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub models: Vec<String>,
    pub datasets: Vec<String>,
    /// `cells[dataset][model]`
    pub cells: Vec<Vec<f64>>,
    pub orientation: Orientation,
}

impl ScoreMatrix {
    fn keep_datasets(&self, keep: &[bool]) -> ScoreMatrix {
        let (datasets, cells) = self
            .datasets
            .iter()
            .zip(&self.cells)
            .zip(keep)
            .filter(|(_, &k)| k)
            .map(|((d, c), _)| (d.clone(), c.clone()))
            .unzip();
        ScoreMatrix {
            models: self.models.clone(),
            datasets,
            cells,
            orientation: self.orientation,
        }
    }
}

/// Averages each (model, dataset)'s folds for `metric` (case-insensitive).
/// Datasets missing any model are dropped and returned alongside.
pub fn aggregate_folds(
    records: &[RunRecord],
    metric: &str,
    orientation: Orientation,
) -> Result<(ScoreMatrix, Vec<String>)> {
    let mut folds: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    let mut models: BTreeSet<&str> = BTreeSet::new();
    let mut datasets: BTreeSet<&str> = BTreeSet::new();
    for r in records.iter().filter(|r| r.metric.eq_ignore_ascii_case(metric)) {
        folds
            .entry((r.dataset.as_str(), r.model.as_str()))
            .or_default()
            .push(r.value);
        models.insert(&r.model);
        datasets.insert(&r.dataset);
    }
    if models.len() < 2 {
        return Err(Error::NotComparable(format!(
            "metric `{metric}` has runs for {} model(s); at least 2 are needed",
            models.len()
        )));
    }

    let mut kept = Vec::new();
    let mut cells = Vec::new();
    let mut dropped = Vec::new();
    for &d in &datasets {
        let row: Option<Vec<f64>> = models
            .iter()
            .map(|&m| {
                folds
                    .get(&(d, m))
                    .map(|v| fsum(v.iter().copied()) / v.len() as f64)
            })
            .collect();
        match row {
            Some(row) => {
                kept.push(d.to_string());
                cells.push(row);
            }
            None => dropped.push(d.to_string()),
        }
    }
    if kept.is_empty() {
        return Err(Error::NotComparable(format!(
            "no dataset for metric `{metric}` has runs from every model"
        )));
    }
    Ok((
        ScoreMatrix {
            models: models.into_iter().map(String::from).collect(),
            datasets: kept,
            cells,
            orientation,
        },
        dropped,
    ))
}

/// Removes datasets whose scores are exactly equal across all models.
pub fn drop_zero_variance(m: &ScoreMatrix) -> Result<(ScoreMatrix, Vec<String>)> {
    let keep: Vec<bool> = m
        .cells
        .iter()
        .map(|row| row.iter().any(|&v| v != row[0]))
        .collect();
    if !keep.iter().any(|&k| k) {
        return Err(Error::NoInformativeDatasets);
    }
    let dropped = m
        .datasets
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| !k)
        .map(|(d, _)| d.clone())
        .collect();
    Ok((m.keep_datasets(&keep), dropped))
}

/// Within-dataset ranks, `ranks[dataset][model]`, 1 = best.
#[derive(Debug, Clone, PartialEq)]
pub struct RankMatrix {
    pub ranks: Vec<Vec<f64>>,
}

impl RankMatrix {
    pub fn num_models(&self) -> usize {
        self.ranks.first().map_or(0, Vec::len)
    }

    pub fn num_datasets(&self) -> usize {
        self.ranks.len()
    }

    /// Mean rank of each model over datasets.
    pub fn column_means(&self) -> Vec<f64> {
        column_means(&self.ranks, self.num_models())
    }
}

fn column_means(rows: &[Vec<f64>], models: usize) -> Vec<f64> {
    let mut sums = vec![0.0; models];
    for row in rows {
        for (s, r) in sums.iter_mut().zip(row) {
            *s += r;
        }
    }
    let n = rows.len() as f64;
    sums.into_iter().map(|s| s / n).collect()
}

/// Fractional ranks of one dataset's scores; tied scores share the mean of
/// the positions they span.
pub fn rank_row(scores: &[f64], orientation: Orientation) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let ord = scores[a].total_cmp(&scores[b]);
        match orientation {
            Orientation::LowerBetter => ord,
            Orientation::HigherBetter => ord.reverse(),
        }
    });
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // Positions i+1 ..= j share their average.
        let shared = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = shared;
        }
        i = j;
    }
    ranks
}

pub fn rank_transform(m: &ScoreMatrix) -> RankMatrix {
    RankMatrix {
        ranks: m.cells.iter().map(|row| rank_row(row, m.orientation)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservedStatistics {
    pub average_rank: Vec<f64>,
    /// Raw metric value averaged over datasets.
    pub observed: Vec<f64>,
}

pub fn observed_statistics(ranks: &RankMatrix, m: &ScoreMatrix) -> ObservedStatistics {
    let observed = (0..m.models.len())
        .map(|j| fsum(m.cells.iter().map(|row| row[j])) / m.cells.len() as f64)
        .collect();
    ObservedStatistics {
        average_rank: ranks.column_means(),
        observed,
    }
}

/// Null distribution of each model's average rank.
#[derive(Debug, Clone, PartialEq)]
pub struct NullDistribution {
    /// `means[model][sim]`
    pub means: Vec<Vec<f64>>,
}

impl NullDistribution {
    pub fn nsim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }
}

fn stream_id(sim: usize, dataset: usize) -> u64 {
    ((sim as u64) << 32) | dataset as u64
}

/// Shuffles every dataset's rank vector independently `nsim` times and
/// records each model's mean permuted rank.
pub fn permutation_null(ranks: &RankMatrix, nsim: usize, seed: u64) -> NullDistribution {
    let models = ranks.num_models();
    let base = ChaCha8Rng::seed_from_u64(seed);
    let per_sim: Vec<Vec<f64>> = (0..nsim)
        .into_par_iter()
        .map(|sim| {
            let permuted: Vec<Vec<f64>> = ranks
                .ranks
                .iter()
                .enumerate()
                .map(|(d, row)| {
                    let mut rng = base.clone();
                    rng.set_stream(stream_id(sim, d));
                    rng.set_word_pos(0);
                    let mut row = row.clone();
                    row.shuffle(&mut rng);
                    row
                })
                .collect();
            column_means(&permuted, models)
        })
        .collect();
    let means = (0..models)
        .map(|m| per_sim.iter().map(|s| s[m]).collect())
        .collect();
    NullDistribution { means }
}

/// `(count + 1) / (nsim + 1)` with `count` the null means at or below
/// `observed` (lower average rank is better).
pub fn empirical_p(observed: f64, null_means: &[f64]) -> f64 {
    let count = null_means.iter().filter(|&&m| m <= observed).count();
    p_from_count(count, null_means.len())
}

pub fn p_from_count(count: usize, nsim: usize) -> f64 {
    (count as f64 + 1.0) / (nsim as f64 + 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderboardRow {
    pub rank: usize,
    pub model: String,
    pub p_value: f64,
    pub observed: f64,
    pub average_rank: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LeaderboardConfig {
    pub nsim: usize,
    pub seed: u64,
    /// Thread count for the null simulation; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl LeaderboardConfig {
    pub fn new(nsim: usize, seed: u64) -> Self {
        Self {
            nsim,
            seed,
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Leaderboard {
    pub metric: String,
    pub rows: Vec<LeaderboardRow>,
    /// Datasets dropped because some model has no runs there.
    pub incomplete_datasets: Vec<String>,
    /// Datasets dropped because all models scored identically.
    pub zero_variance_datasets: Vec<String>,
    pub datasets_used: usize,
}

/// Orders models by p-value, then by observed mean (better first), then by
/// name, and numbers them from 1.
pub fn order_rows(
    models: &[String],
    p_values: &[f64],
    stats: &ObservedStatistics,
    orientation: Orientation,
) -> Vec<LeaderboardRow> {
    let mut idx: Vec<usize> = (0..models.len()).collect();
    idx.sort_by(|&a, &b| {
        p_values[a]
            .total_cmp(&p_values[b])
            .then_with(|| {
                let ord = stats.observed[a].total_cmp(&stats.observed[b]);
                match orientation {
                    Orientation::LowerBetter => ord,
                    Orientation::HigherBetter => ord.reverse(),
                }
            })
            .then_with(|| models[a].cmp(&models[b]))
    });
    idx.into_iter()
        .enumerate()
        .map(|(pos, j)| LeaderboardRow {
            rank: pos + 1,
            model: models[j].clone(),
            p_value: p_values[j],
            observed: stats.observed[j],
            average_rank: stats.average_rank[j],
        })
        .collect()
}

pub fn build_leaderboard(
    records: &[RunRecord],
    metric: &str,
    orientation: Orientation,
    config: &LeaderboardConfig,
) -> Result<Leaderboard> {
    if config.nsim == 0 {
        return Err(Error::InvalidSpec("nsim must be at least 1".into()));
    }
    let (matrix, incomplete_datasets) = aggregate_folds(records, metric, orientation)?;
    let (matrix, zero_variance_datasets) = drop_zero_variance(&matrix)?;
    let ranks = rank_transform(&matrix);
    let stats = observed_statistics(&ranks, &matrix);
    let null = match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidSpec(format!("worker pool: {e}")))?
            .install(|| permutation_null(&ranks, config.nsim, config.seed)),
        None => permutation_null(&ranks, config.nsim, config.seed),
    };
    let p_values: Vec<f64> = stats
        .average_rank
        .iter()
        .zip(&null.means)
        .map(|(&obs, means)| empirical_p(obs, means))
        .collect();
    Ok(Leaderboard {
        metric: metric.to_string(),
        rows: order_rows(&matrix.models, &p_values, &stats, orientation),
        incomplete_datasets,
        zero_variance_datasets,
        datasets_used: matrix.datasets.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(model: &str, dataset: &str, fold: u32, value: f64) -> RunRecord {
        RunRecord {
            model: model.into(),
            dataset: dataset.into(),
            fold,
            metric: "crps".into(),
            value,
        }
    }

    fn matrix(cells: Vec<Vec<f64>>, orientation: Orientation) -> ScoreMatrix {
        let models = (0..cells[0].len()).map(|i| format!("m{i}")).collect();
        let datasets = (0..cells.len()).map(|i| format!("d{i}")).collect();
        ScoreMatrix {
            models,
            datasets,
            cells,
            orientation,
        }
    }

    #[test]
    fn fold_averaging() {
        let mut recs: Vec<_> = (1..=5).map(|f| rec("A", "d", f, 2.0)).collect();
        recs.extend([rec("B", "d", 0, 0.0), rec("B", "d", 1, 1.0)]);
        let (m, dropped) = aggregate_folds(&recs, "crps", Orientation::LowerBetter).unwrap();
        assert_eq!(m.cells, vec![vec![2.0, 0.5]]);
        assert!(dropped.is_empty());
    }

    #[test]
    fn incomplete_datasets_are_dropped() {
        let recs = vec![
            rec("A", "d1", 0, 1.0),
            rec("B", "d1", 0, 2.0),
            rec("A", "d2", 0, 1.0),
        ];
        let (m, dropped) = aggregate_folds(&recs, "crps", Orientation::LowerBetter).unwrap();
        assert_eq!(m.datasets, vec!["d1"]);
        assert_eq!(dropped, vec!["d2"]);
    }

    #[test]
    fn fewer_than_two_models_is_not_comparable() {
        let recs = vec![rec("A", "d1", 0, 1.0), rec("A", "d2", 0, 1.0)];
        assert!(matches!(
            aggregate_folds(&recs, "crps", Orientation::LowerBetter),
            Err(Error::NotComparable(_))
        ));
        assert!(matches!(
            aggregate_folds(&recs, "rmse", Orientation::LowerBetter),
            Err(Error::NotComparable(_))
        ));
    }

    #[test]
    fn zero_variance_rule() {
        let m = matrix(
            vec![vec![2.0, 2.0, 2.0], vec![2.0, 2.0000001, 2.0]],
            Orientation::LowerBetter,
        );
        let (kept, dropped) = drop_zero_variance(&m).unwrap();
        assert_eq!(kept.datasets, vec!["d1"]);
        assert_eq!(dropped, vec!["d0"]);

        let flat = matrix(vec![vec![1.0, 1.0], vec![3.0, 3.0]], Orientation::LowerBetter);
        assert!(matches!(drop_zero_variance(&flat), Err(Error::NoInformativeDatasets)));
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_row(&[3.0, 1.0, 2.0], Orientation::LowerBetter), vec![3.0, 1.0, 2.0]);
        assert_eq!(rank_row(&[3.0, 1.0, 2.0], Orientation::HigherBetter), vec![1.0, 3.0, 2.0]);
        assert_eq!(rank_row(&[1.0, 1.0, 2.0], Orientation::LowerBetter), vec![1.5, 1.5, 3.0]);
        assert_eq!(rank_row(&[5.0; 4], Orientation::LowerBetter), vec![2.5; 4]);
    }

    #[test]
    fn observed_statistics_examples() {
        let m = matrix(vec![vec![1.0, 2.0]], Orientation::LowerBetter);
        let s = observed_statistics(&rank_transform(&m), &m);
        assert_eq!(s.average_rank, vec![1.0, 2.0]);

        let m = matrix(
            vec![vec![0.0, 5.0, 9.0], vec![1.0, 0.0, 9.0], vec![2.0, 1.0, 0.0]],
            Orientation::LowerBetter,
        );
        let s = observed_statistics(&rank_transform(&m), &m);
        assert_eq!(s.average_rank[0], 2.0);
        assert_eq!(s.observed[0], 1.0);
    }

    #[test]
    fn null_with_one_model_is_degenerate() {
        let ranks = RankMatrix {
            ranks: vec![vec![1.0]; 4],
        };
        let null = permutation_null(&ranks, 50, 3);
        assert!(null.means[0].iter().all(|&m| m == 1.0));
    }

    #[test]
    fn null_two_models_one_dataset_is_fair_coin() {
        let ranks = RankMatrix {
            ranks: vec![vec![1.0, 2.0]],
        };
        let nsim = 20_000;
        let null = permutation_null(&ranks, nsim, 11);
        let ones = null.means[0].iter().filter(|&&m| m == 1.0).count();
        assert!(null.means[0].iter().all(|&m| m == 1.0 || m == 2.0));
        // Exact probability 1/2; 5 sigma band.
        let sigma = (nsim as f64 * 0.25).sqrt();
        assert!((ones as f64 - nsim as f64 / 2.0).abs() < 5.0 * sigma, "{ones}");
    }

    #[test]
    fn null_two_models_three_datasets_matches_enumeration() {
        // Enumerate all 2^3 shuffles: model 0 has mean rank 1 in exactly one.
        let mut hits = 0;
        for mask in 0..8u32 {
            let mean = (0..3).map(|d| if mask >> d & 1 == 0 { 1.0 } else { 2.0 }).sum::<f64>() / 3.0;
            if mean == 1.0 {
                hits += 1;
            }
        }
        assert_eq!(hits, 1);
        let ranks = RankMatrix {
            ranks: vec![vec![1.0, 2.0]; 3],
        };
        let nsim = 40_000;
        let null = permutation_null(&ranks, nsim, 5);
        let freq = null.means[0].iter().filter(|&&m| m == 1.0).count() as f64 / nsim as f64;
        let sigma = (0.125 * 0.875 / nsim as f64).sqrt();
        assert!((freq - 0.125).abs() < 5.0 * sigma, "{freq}");
    }

    #[test]
    fn null_is_seed_deterministic_and_worker_independent() {
        let ranks = RankMatrix {
            ranks: vec![vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 1.0], vec![1.5, 1.5, 3.0]],
        };
        let a = permutation_null(&ranks, 500, 9);
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| permutation_null(&ranks, 500, 9));
        assert_eq!(a, b);
        assert_ne!(a, permutation_null(&ranks, 500, 10));
    }

    #[test]
    fn empirical_p_examples() {
        assert_eq!(p_from_count(0, 20_000), 1.0 / 20_001.0);
        assert!((p_from_count(0, 20_000) - 4.99975e-5).abs() < 1e-10);
        assert_eq!(empirical_p(1.0, &[1.0, 2.0, 3.0]), 0.5);
        assert_eq!(empirical_p(3.0, &[1.0, 2.0, 3.0]), 1.0);
        assert_eq!(empirical_p(0.5, &[1.0, 2.0, 3.0]), 0.25);
    }

    #[test]
    fn p_near_half_at_population_mean() {
        // Observed mean 2.0 equals the null centre for 3 models.
        let ranks = RankMatrix {
            ranks: (0..30).map(|i| match i % 3 {
                0 => vec![1.0, 2.0, 3.0],
                1 => vec![3.0, 1.0, 2.0],
                _ => vec![2.0, 3.0, 1.0],
            }).collect(),
        };
        let null = permutation_null(&ranks, 20_000, 1);
        for m in 0..3 {
            let p = empirical_p(2.0, &null.means[m]);
            // Symmetric null with an atom at the centre: P(mean <= 2) ≈ 0.5 + P(mean = 2)/2.
            assert!(p > 0.5 && p < 0.65, "{p}");
        }
    }

    #[test]
    fn leaderboard_dominant_pair() {
        let mut recs = Vec::new();
        for d in 0..20 {
            recs.push(rec("good", &format!("d{d}"), 0, d as f64));
            recs.push(rec("bad", &format!("d{d}"), 0, d as f64 + 1.0));
        }
        let lb = build_leaderboard(&recs, "crps", Orientation::LowerBetter, &LeaderboardConfig::new(20_000, 7))
            .unwrap();
        assert_eq!(lb.rows[0].model, "good");
        assert!(lb.rows[0].p_value <= 1e-3);
        assert_eq!(lb.rows[1].p_value, 1.0);
        assert_eq!(lb.rows[0].average_rank, 1.0);
        assert_eq!(lb.rows[1].rank, 2);
    }

    #[test]
    fn identical_models_have_no_informative_datasets() {
        let recs: Vec<_> = (0..5)
            .flat_map(|d| [rec("a", &d.to_string(), 0, 1.0), rec("b", &d.to_string(), 0, 1.0)])
            .collect();
        assert!(matches!(
            build_leaderboard(&recs, "crps", Orientation::LowerBetter, &LeaderboardConfig::new(10, 1)),
            Err(Error::NoInformativeDatasets)
        ));
    }

    #[test]
    fn ties_in_p_break_on_observed_mean_by_orientation() {
        let models: Vec<String> = vec!["x".into(), "y".into(), "z".into()];
        let stats = ObservedStatistics {
            average_rank: vec![2.0, 2.0, 2.0],
            observed: vec![0.5, 0.7, 0.6],
        };
        let p = [0.3, 0.3, 0.1];
        let lower = order_rows(&models, &p, &stats, Orientation::LowerBetter);
        let names: Vec<_> = lower.iter().map(|r| r.model.as_str()).collect();
        assert_eq!(names, ["z", "x", "y"]);
        let higher = order_rows(&models, &p, &stats, Orientation::HigherBetter);
        let names: Vec<_> = higher.iter().map(|r| r.model.as_str()).collect();
        assert_eq!(names, ["z", "y", "x"]);
        assert_eq!(higher.iter().map(|r| r.rank).collect::<Vec<_>>(), [1, 2, 3]);
    }

    proptest! {
        #[test]
        fn average_ranks_centre_on_half_m_plus_one(
            cells in prop::collection::vec(prop::collection::vec(-5i32..5, 4), 1..12)
        ) {
            let cells: Vec<Vec<f64>> = cells.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect();
            let m = matrix(cells, Orientation::LowerBetter);
            let ranks = rank_transform(&m);
            let avg = ranks.column_means();
            let mean = avg.iter().sum::<f64>() / avg.len() as f64;
            prop_assert!((mean - 2.5).abs() < 1e-12);
        }

        #[test]
        fn p_values_within_bounds(
            cells in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 2..8),
            seed in 0u64..1000,
        ) {
            let mut recs = Vec::new();
            for (d, row) in cells.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    recs.push(rec(&format!("m{j}"), &format!("d{d}"), 0, *v));
                }
            }
            let nsim = 200;
            if let Ok(lb) = build_leaderboard(&recs, "crps", Orientation::LowerBetter, &LeaderboardConfig::new(nsim, seed)) {
                for row in &lb.rows {
                    prop_assert!(row.p_value >= 1.0 / (nsim as f64 + 1.0) && row.p_value <= 1.0);
                    prop_assert!(row.average_rank >= 1.0);
                }
            }
        }
    }
}
