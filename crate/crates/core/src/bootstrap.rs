//! Bootstrap confidence intervals for the sensitivity summaries.
//!
//! Each replicate resamples seeds with replacement inside every
//! (algorithm, environment, setting) cell, then reruns the whole pipeline:
//! divergence filter, percentile bands (unless frozen), normalization,
//! sensitivity. Intervals are percentile-method over the replicate
//! estimates.
//!
//! Replicate b draws from its own counter-derived random stream, so
//! results are identical no matter how many worker threads run or how the
//! scheduler interleaves them.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_model::{build_cells, Cell, CellKey, CellTable, RunSet};
use crate::error::{Error, Result};
use crate::scoring::{env_percentiles, interpolated_quantile, normalize, EnvNorms};
use crate::sensitivity::sensitivity;

/// Fraction of replicates allowed to fail pipeline preconditions before
/// the whole bootstrap is called off.
const MAX_SKIP_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    /// Two-sided miss probability; 0.05 gives a 95% interval.
    pub alpha: f64,
    pub seed: u64,
    /// Reuse the full-data percentile bands in every replicate instead of
    /// re-estimating them, isolating seed noise from band noise.
    pub freeze_norms: bool,
    pub div_threshold: f64,
    pub q_lo: f64,
    pub q_hi: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            replicates: 10_000,
            alpha: 0.05,
            seed: 0,
            freeze_norms: false,
            div_threshold: 0.10,
            q_lo: 5.0,
            q_hi: 95.0,
        }
    }
}

/// Point estimates for one algorithm on the full data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointEstimate {
    pub phi: f64,
    pub per_env_tuned: f64,
}

/// Bootstrap intervals for one algorithm: sensitivity and performance
/// marginals from the same replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalPair {
    pub point: PointEstimate,
    pub sens_lo: f64,
    pub sens_hi: f64,
    pub perf_lo: f64,
    pub perf_hi: f64,
    pub replicates: usize,
    /// Replicates discarded because a precondition failed (for example an
    /// environment lost too many cells to form a band).
    pub skipped: usize,
    pub alpha: f64,
    pub seed: u64,
}

/// Percentile-method interval: the alpha/2 and 1-alpha/2 quantiles of the
/// replicate estimates, with the shared interpolated estimator.
pub fn percentile_interval(samples: &[f64], alpha: f64) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("estimates are finite"));
    let lo = interpolated_quantile(&sorted, 100.0 * (alpha / 2.0));
    let hi = interpolated_quantile(&sorted, 100.0 * (1.0 - alpha / 2.0));
    Ok((lo, hi))
}

/// Runs of one cell, in seed order so resampling indices mean the same
/// thing on every machine.
struct CellRuns {
    key: CellKey,
    perf_div: Vec<(f64, bool)>,
}

fn index_cells(runs: &RunSet) -> Vec<CellRuns> {
    let mut grouped: BTreeMap<CellKey, Vec<(u64, f64, bool)>> = BTreeMap::new();
    for r in runs.records() {
        grouped
            .entry((
                r.algorithm.clone(),
                r.environment.clone(),
                r.setting.clone(),
            ))
            .or_default()
            .push((r.seed, r.perf, r.diverged));
    }
    grouped
        .into_iter()
        .map(|(key, mut rows)| {
            rows.sort_by_key(|&(seed, _, _)| seed);
            CellRuns {
                key,
                perf_div: rows.into_iter().map(|(_, p, d)| (p, d)).collect(),
            }
        })
        .collect()
}

/// One replicate: resample every cell, rebuild the table, rerun the
/// pipeline. `None` marks a precondition failure.
fn replicate(
    cells: &[CellRuns],
    runs: &RunSet,
    algs: &[String],
    cfg: &BootstrapConfig,
    frozen: Option<&EnvNorms>,
    full_envs: &[String],
    b: u64,
) -> Option<Vec<PointEstimate>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(b);

    let mut table: BTreeMap<CellKey, Cell> = BTreeMap::new();
    let mut survivors: Vec<f64> = Vec::new();
    for cell in cells {
        let k = cell.perf_div.len();
        survivors.clear();
        let mut n_diverged = 0usize;
        for _ in 0..k {
            let (perf, diverged) = cell.perf_div[rng.random_range(0..k)];
            if diverged {
                n_diverged += 1;
            } else {
                survivors.push(perf);
            }
        }
        survivors.sort_by(|a, b| a.partial_cmp(b).expect("survivor perfs are finite"));
        let mean_perf = if survivors.is_empty() {
            None
        } else {
            Some(survivors.iter().sum::<f64>() / survivors.len() as f64)
        };
        let frac = n_diverged as f64 / k as f64;
        table.insert(
            cell.key.clone(),
            Cell {
                n_runs: k,
                n_diverged,
                mean_perf,
                retained: mean_perf.is_some() && frac <= cfg.div_threshold,
            },
        );
    }
    let cell_table = CellTable::from_parts(runs.space().clone(), cfg.div_threshold, table);

    let owned_norms;
    let norms = match frozen {
        Some(n) => n,
        None => {
            owned_norms = env_percentiles(&cell_table, cfg.q_lo, cfg.q_hi).ok()?;
            &owned_norms
        }
    };
    let scores = normalize(&cell_table, norms).ok()?;
    // With frozen bands a replicate can silently lose a whole environment
    // from scope; that changes the statistic, so treat it as a failure.
    if scores.environments() != full_envs {
        return None;
    }

    let mut out = Vec::with_capacity(algs.len());
    for alg in algs {
        let report = sensitivity(&scores, alg).ok()?;
        out.push(PointEstimate {
            phi: report.phi,
            per_env_tuned: report.per_env_tuned,
        });
    }
    Some(out)
}

/// Full bootstrap for the named algorithms. Errors if more than 10% of
/// replicates fail preconditions; otherwise skipped replicates are simply
/// excluded from the interval estimates.
pub fn bootstrap_metrics(
    runs: &RunSet,
    algs: &[String],
    cfg: &BootstrapConfig,
) -> Result<BTreeMap<String, IntervalPair>> {
    if cfg.replicates == 0 {
        return Err(Error::InvalidConfig("need at least 1 replicate".into()));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha must lie in (0, 1), got {}",
            cfg.alpha
        )));
    }
    if algs.is_empty() {
        return Err(Error::InvalidConfig("no algorithms requested".into()));
    }

    // Point estimates on the full data; any failure here is a hard error.
    let full_cells = build_cells(runs, cfg.div_threshold)?;
    let full_norms = env_percentiles(&full_cells, cfg.q_lo, cfg.q_hi)?;
    let full_scores = normalize(&full_cells, &full_norms)?;
    let full_envs = full_scores.environments();
    let mut points = Vec::with_capacity(algs.len());
    for alg in algs {
        let report = sensitivity(&full_scores, alg)?;
        points.push(PointEstimate {
            phi: report.phi,
            per_env_tuned: report.per_env_tuned,
        });
    }

    let cells = index_cells(runs);
    let frozen = cfg.freeze_norms.then_some(&full_norms);

    let results: Vec<Option<Vec<PointEstimate>>> = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|b| replicate(&cells, runs, algs, cfg, frozen, &full_envs, b))
        .collect();

    let skipped = results.iter().filter(|r| r.is_none()).count();
    if skipped as f64 / cfg.replicates as f64 > MAX_SKIP_FRACTION {
        return Err(Error::TooManyReplicateFailures {
            skipped,
            total: cfg.replicates,
        });
    }

    let mut out = BTreeMap::new();
    for (i, alg) in algs.iter().enumerate() {
        let phis: Vec<f64> = results
            .iter()
            .flatten()
            .map(|est| est[i].phi)
            .collect();
        let perfs: Vec<f64> = results
            .iter()
            .flatten()
            .map(|est| est[i].per_env_tuned)
            .collect();
        let (sens_lo, sens_hi) = percentile_interval(&phis, cfg.alpha)?;
        let (perf_lo, perf_hi) = percentile_interval(&perfs, cfg.alpha)?;
        out.insert(
            alg.clone(),
            IntervalPair {
                point: points[i],
                sens_lo,
                sens_hi,
                perf_lo,
                perf_hi,
                replicates: cfg.replicates,
                skipped,
                alpha: cfg.alpha,
                seed: cfg.seed,
            },
        );
    }
    Ok(out)
}
