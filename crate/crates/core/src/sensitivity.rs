//! Hyperparameter sensitivity.
//!
//! Two summaries of a normalized score table, per algorithm:
//!
//! * per-environment tuned score: tune separately in every environment,
//!   then average the winners;
//! * cross-environment tuned score: pick the single setting with the best
//!   average, i.e. tune once for the whole suite.
//!
//! Sensitivity is their gap. It is never negative: the cross-environment
//! winner is one candidate the per-environment maxima already dominate.
//! Ties pick the lexicographically lowest coordinate so reruns agree.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scoring::ScoreTable;
use crate::space::SettingCoord;

/// Everything the sensitivity computation decided for one algorithm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub algorithm: String,
    pub per_env_tuned: f64,
    pub cross_env_tuned: f64,
    /// `per_env_tuned - cross_env_tuned`.
    pub phi: f64,
    /// Winning setting inside each environment.
    pub per_env_argmax: BTreeMap<String, SettingCoord>,
    /// The single setting behind `cross_env_tuned`.
    pub cross_env_argmax: SettingCoord,
    /// Settings retained in every environment in scope.
    pub eligible_count: usize,
    /// Environments the summaries ranged over, sorted.
    pub env_set: Vec<String>,
}

fn envs_in_scope(scores: &ScoreTable) -> Result<Vec<String>> {
    let envs = scores.environments();
    if envs.is_empty() {
        return Err(Error::EmptyRunSet);
    }
    Ok(envs)
}

/// Max score and its argmax for one algorithm in one environment,
/// restricted to `envs`' members individually.
fn best_in_env(scores: &ScoreTable, alg: &str, env: &str) -> Result<(f64, SettingCoord)> {
    let mut best: Option<(f64, SettingCoord)> = None;
    // settings_for iterates in ascending coordinate order, so keeping the
    // incumbent on ties selects the lowest coordinate.
    for (coord, g) in scores.settings_for(alg, env) {
        match &best {
            Some((bg, _)) if g <= *bg => {}
            _ => best = Some((g, coord)),
        }
    }
    best.ok_or_else(|| Error::NoRetainedSettings {
        alg: alg.to_string(),
        env: env.to_string(),
    })
}

fn per_env_tuned_over(
    scores: &ScoreTable,
    alg: &str,
    envs: &[String],
) -> Result<(f64, BTreeMap<String, SettingCoord>)> {
    let mut total = 0.0;
    let mut argmax = BTreeMap::new();
    for env in envs {
        let (g, coord) = best_in_env(scores, alg, env)?;
        total += g;
        argmax.insert(env.clone(), coord);
    }
    Ok((total / envs.len() as f64, argmax))
}

fn cross_env_tuned_over(
    scores: &ScoreTable,
    alg: &str,
    envs: &[String],
) -> Result<(f64, SettingCoord, usize)> {
    // Eligible settings are retained in every environment in scope. Seed
    // the candidate list from the first environment, then intersect.
    let mut eligible: Vec<SettingCoord> = scores
        .settings_for(alg, &envs[0])
        .into_iter()
        .map(|(c, _)| c)
        .collect();
    for env in &envs[1..] {
        eligible.retain(|c| scores.gamma(alg, env, c).is_some());
    }
    if eligible.is_empty() {
        return Err(Error::NoEligibleSetting {
            alg: alg.to_string(),
        });
    }

    let mut best: Option<(f64, SettingCoord)> = None;
    for coord in &eligible {
        let mut total = 0.0;
        for env in envs {
            total += scores.gamma(alg, env, coord).expect("eligible everywhere");
        }
        let mean = total / envs.len() as f64;
        match &best {
            Some((bg, _)) if mean <= *bg => {}
            _ => best = Some((mean, coord.clone())),
        }
    }
    let (g, coord) = best.expect("eligible set is non-empty");
    Ok((g, coord, eligible.len()))
}

/// Mean over environments of the best score in each. Errors if the
/// algorithm has no retained setting somewhere in scope.
pub fn per_env_tuned(scores: &ScoreTable, alg: &str) -> Result<(f64, BTreeMap<String, SettingCoord>)> {
    let envs = envs_in_scope(scores)?;
    per_env_tuned_over(scores, alg, &envs)
}

/// Best cross-environment mean over settings retained everywhere. Errors
/// if no setting qualifies.
pub fn cross_env_tuned(scores: &ScoreTable, alg: &str) -> Result<(f64, SettingCoord)> {
    let envs = envs_in_scope(scores)?;
    let (g, coord, _) = cross_env_tuned_over(scores, alg, &envs)?;
    Ok((g, coord))
}

fn sensitivity_over(scores: &ScoreTable, alg: &str, envs: &[String]) -> Result<SensitivityReport> {
    let (pet, per_env_argmax) = per_env_tuned_over(scores, alg, envs)?;
    let (cet, cross_env_argmax, eligible_count) = cross_env_tuned_over(scores, alg, envs)?;
    Ok(SensitivityReport {
        algorithm: alg.to_string(),
        per_env_tuned: pet,
        cross_env_tuned: cet,
        phi: pet - cet,
        per_env_argmax,
        cross_env_argmax,
        eligible_count,
        env_set: envs.to_vec(),
    })
}

/// Full sensitivity summary for one algorithm over every environment in
/// the table.
pub fn sensitivity(scores: &ScoreTable, alg: &str) -> Result<SensitivityReport> {
    let envs = envs_in_scope(scores)?;
    sensitivity_over(scores, alg, &envs)
}

/// Recomputes sensitivity with each environment dropped in turn, reusing
/// the existing scores (bands are not re-estimated). Returns, per dropped
/// environment, the reports for the requested algorithms. Needs at least
/// two environments.
pub fn leave_one_out(
    scores: &ScoreTable,
    algs: &[String],
) -> Result<BTreeMap<String, Vec<SensitivityReport>>> {
    let envs = envs_in_scope(scores)?;
    if envs.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "leave-one-out needs at least 2 environments, got {}",
            envs.len()
        )));
    }
    let mut out = BTreeMap::new();
    for dropped in &envs {
        let kept: Vec<String> = envs.iter().filter(|e| *e != dropped).cloned().collect();
        let mut reports = Vec::with_capacity(algs.len());
        for alg in algs {
            reports.push(sensitivity_over(scores, alg, &kept)?);
        }
        out.insert(dropped.clone(), reports);
    }
    Ok(out)
}
