//! Percentile normalization of cell means.
//!
//! Raw performance scales differ wildly across environments, so each
//! environment gets its own band [p_lo, p_hi] estimated from the retained
//! cell means of every algorithm and setting in that environment. A cell's
//! normalized score is its position inside that band, deliberately not
//! clipped: scores below 0 and above 1 carry information.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::data_model::{CellKey, CellTable};
use crate::error::{Error, Result};
use crate::space::{HyperSpace, SettingCoord};

/// Linearly interpolated percentile of an ascending-sorted sample.
///
/// For n values the rank of percentile q is r = (q/100)(n-1); the result
/// interpolates between the neighbors of r. Exact for integral r. This is
/// the one percentile estimator in the crate; normalization, bootstrap
/// intervals, and return scaling all call it.
pub fn interpolated_quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!((0.0..=100.0).contains(&q));
    debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
    let n = sorted.len();
    let r = (q / 100.0) * (n - 1) as f64;
    let lo = r.floor() as usize;
    let hi = r.ceil() as usize;
    if lo == hi {
        return sorted[lo];
    }
    let frac = r - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// One environment's normalization band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvNorm {
    pub p_lo: f64,
    pub p_hi: f64,
}

/// Per-environment bands plus the quantile ranks they were taken at.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvNorms {
    pub q_lo: f64,
    pub q_hi: f64,
    per_env: BTreeMap<String, EnvNorm>,
}

impl EnvNorms {
    pub fn get(&self, env: &str) -> Option<EnvNorm> {
        self.per_env.get(env).copied()
    }

    pub fn environments(&self) -> impl Iterator<Item = (&str, EnvNorm)> {
        self.per_env.iter().map(|(e, n)| (e.as_str(), *n))
    }

    pub fn len(&self) -> usize {
        self.per_env.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_env.is_empty()
    }
}

/// Estimates each environment's band from the pooled retained cell means.
///
/// Requires 0 < q_lo < q_hi < 100, at least two retained cells per
/// environment, and a non-degenerate band (p_lo < p_hi).
pub fn env_percentiles(cells: &CellTable, q_lo: f64, q_hi: f64) -> Result<EnvNorms> {
    if !(q_lo > 0.0 && q_lo < q_hi && q_hi < 100.0) {
        return Err(Error::InvalidConfig(format!(
            "quantile ranks must satisfy 0 < q_lo < q_hi < 100, got ({q_lo}, {q_hi})"
        )));
    }
    let mut per_env = BTreeMap::new();
    for env in cells.environments() {
        let mut pool = cells.retained_means(&env);
        if pool.len() < 2 {
            return Err(Error::TooFewCells {
                env,
                count: pool.len(),
            });
        }
        pool.sort_by(|a, b| a.partial_cmp(b).expect("cell means are finite"));
        let p_lo = interpolated_quantile(&pool, q_lo);
        let p_hi = interpolated_quantile(&pool, q_hi);
        if p_hi <= p_lo {
            return Err(Error::DegenerateNormalization { env, q_lo, q_hi });
        }
        per_env.insert(env, EnvNorm { p_lo, p_hi });
    }
    Ok(EnvNorms {
        q_lo,
        q_hi,
        per_env,
    })
}

/// Normalized scores for every retained cell, keyed like the cell table.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    space: HyperSpace,
    gammas: BTreeMap<CellKey, f64>,
    norms: Option<EnvNorms>,
    /// Digest of the cell table the scores came from, for report
    /// provenance. Synthetic tables carry a fixed marker.
    source: String,
}

/// Maps every retained cell mean into its environment's band. Fails if any
/// environment in the table lacks norms.
pub fn normalize(cells: &CellTable, norms: &EnvNorms) -> Result<ScoreTable> {
    for env in cells.environments() {
        if norms.get(&env).is_none() {
            return Err(Error::MissingEnvNorm { env });
        }
    }
    let mut gammas = BTreeMap::new();
    for (key, cell) in cells.iter() {
        if !cell.retained {
            continue;
        }
        let norm = norms.get(&key.1).expect("checked above");
        let mean = cell.mean_perf.expect("retained cells have a mean");
        gammas.insert(key.clone(), (mean - norm.p_lo) / (norm.p_hi - norm.p_lo));
    }
    Ok(ScoreTable {
        space: cells.space().clone(),
        gammas,
        norms: Some(norms.clone()),
        source: cells.digest(),
    })
}

impl ScoreTable {
    /// Builds a table directly from scores, bypassing normalization. Meant
    /// for synthetic ground truth and tests.
    pub fn from_gammas(space: HyperSpace, gammas: BTreeMap<CellKey, f64>) -> Result<Self> {
        for ((_, _, coord), g) in &gammas {
            if !space.contains(coord) {
                return Err(Error::InvalidSpace(format!(
                    "score at {:?} is outside the grid",
                    coord.0
                )));
            }
            if !g.is_finite() {
                return Err(Error::InvalidSpace("non-finite score".into()));
            }
        }
        Ok(ScoreTable {
            space,
            gammas,
            norms: None,
            source: "direct".into(),
        })
    }

    pub fn space(&self) -> &HyperSpace {
        &self.space
    }

    pub fn norms(&self) -> Option<&EnvNorms> {
        self.norms.as_ref()
    }

    pub fn source_digest(&self) -> &str {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CellKey, f64)> {
        self.gammas.iter().map(|(k, &g)| (k, g))
    }

    pub fn gamma(&self, alg: &str, env: &str, setting: &SettingCoord) -> Option<f64> {
        self.gammas
            .get(&(alg.to_string(), env.to_string(), setting.clone()))
            .copied()
    }

    /// Every environment with at least one scored cell, for any algorithm.
    /// This is the environment scope downstream summaries range over.
    pub fn environments(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.gammas.keys().map(|(_, e, _)| e.as_str()).collect();
        set.into_iter().map(String::from).collect()
    }

    pub fn algorithms(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.gammas.keys().map(|(a, _, _)| a.as_str()).collect();
        set.into_iter().map(String::from).collect()
    }

    /// Scored settings of one algorithm in one environment, in coordinate
    /// order.
    pub fn settings_for(&self, alg: &str, env: &str) -> Vec<(SettingCoord, f64)> {
        self.gammas
            .iter()
            .filter(|((a, e, _), _)| a == alg && e == env)
            .map(|((_, _, c), &g)| (c.clone(), g))
            .collect()
    }
}
