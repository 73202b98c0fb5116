//! Synthetic run generation with known ground truth.
//!
//! A spec fixes a grid, per-environment affine transforms of a shared
//! "true" performance surface, noise levels, and divergence probabilities.
//! [`generate`] samples runs; [`oracle_metrics`] computes what the
//! pipeline *should* recover, by brute force and by a different
//! formulation (fixed-pattern enumeration instead of free-subset search),
//! so agreement between the two is meaningful.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::data_model::{axis_value_from_toml, PerfMetric, RunRecord, RunSet};
use crate::error::{Error, Result};
use crate::scoring::interpolated_quantile;
use crate::space::{HyperSpace, SettingCoord};

/// Quantile ranks and dimensionality threshold the ground truth assumes;
/// they match the pipeline defaults.
pub const TRUTH_Q_LO: f64 = 5.0;
pub const TRUTH_Q_HI: f64 = 95.0;
pub const TRUTH_THRESHOLD: f64 = 0.95;

/// Settings enumeration cap: the oracle walks every grid point.
const MAX_ORACLE_SETTINGS: usize = 1 << 20;
const MAX_ORACLE_AXES: usize = 20;

/// One environment: performance is `scale * surface[i] + offset` plus
/// Gaussian noise with deviation `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvSpec {
    pub id: String,
    pub scale: f64,
    pub offset: f64,
    pub sigma: f64,
    /// True surface in grid flat order (last axis fastest).
    pub surface: Vec<f64>,
}

/// A divergence probability for matching cells. `env` `None` matches every
/// environment; `axis`/`value_index` `None` match every setting. When
/// several rules match a cell, the largest probability wins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceRule {
    pub env: Option<String>,
    pub axis: Option<String>,
    pub value_index: Option<usize>,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthSpec {
    pub algorithm: String,
    pub space: HyperSpace,
    pub environments: Vec<EnvSpec>,
    pub seeds_per_cell: usize,
    pub divergence: Vec<DivergenceRule>,
}

/// Best free subset of one size, in the ground truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthSubset {
    pub size: usize,
    pub free_axes: Vec<String>,
    pub score: f64,
}

/// What the pipeline should recover from noiseless data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    pub algorithm: String,
    /// Per environment, the true normalized score of every setting in
    /// flat order.
    pub gamma: BTreeMap<String, Vec<f64>>,
    pub per_env_tuned: f64,
    pub cross_env_tuned: f64,
    pub phi: f64,
    pub threshold_fraction: f64,
    pub d: usize,
    pub best_subsets: Vec<TruthSubset>,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.algorithm.is_empty() {
            return Err(Error::InvalidConfig("algorithm name is empty".into()));
        }
        if self.seeds_per_cell == 0 {
            return Err(Error::InvalidConfig("seeds_per_cell must be at least 1".into()));
        }
        if self.environments.is_empty() {
            return Err(Error::InvalidConfig("no environments declared".into()));
        }
        let total = self.space.total_settings();
        let mut seen = std::collections::BTreeSet::new();
        for env in &self.environments {
            if env.id.is_empty() {
                return Err(Error::InvalidConfig("environment with empty id".into()));
            }
            if !seen.insert(&env.id) {
                return Err(Error::InvalidConfig(format!(
                    "environment {} declared twice",
                    env.id
                )));
            }
            if !(env.scale > 0.0 && env.scale.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "environment {}: scale must be positive, got {}",
                    env.id, env.scale
                )));
            }
            if !env.offset.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "environment {}: offset must be finite",
                    env.id
                )));
            }
            if !(env.sigma >= 0.0 && env.sigma.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "environment {}: sigma must be non-negative, got {}",
                    env.id, env.sigma
                )));
            }
            if env.surface.len() != total {
                return Err(Error::InvalidConfig(format!(
                    "environment {}: surface has {} values, grid has {} settings",
                    env.id,
                    env.surface.len(),
                    total
                )));
            }
            if env.surface.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "environment {}: surface must be finite",
                    env.id
                )));
            }
        }
        for rule in &self.divergence {
            if !(0.0..=1.0).contains(&rule.prob) {
                return Err(Error::InvalidConfig(format!(
                    "divergence probability must lie in [0, 1], got {}",
                    rule.prob
                )));
            }
            if let Some(env) = &rule.env {
                if !self.environments.iter().any(|e| &e.id == env) {
                    return Err(Error::InvalidConfig(format!(
                        "divergence rule names unknown environment {env}"
                    )));
                }
            }
            match (&rule.axis, rule.value_index) {
                (None, None) => {}
                (Some(axis), Some(vi)) => {
                    let idx = self.space.axis_index(axis).ok_or_else(|| {
                        Error::InvalidConfig(format!(
                            "divergence rule names unknown axis {axis}"
                        ))
                    })?;
                    if vi >= self.space.axes()[idx].values.len() {
                        return Err(Error::InvalidConfig(format!(
                            "divergence rule value index {vi} is off the {axis} axis"
                        )));
                    }
                }
                _ => {
                    return Err(Error::InvalidConfig(
                        "divergence rule needs axis and value_index together".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Parses the TOML spec format:
    ///
    /// ```toml
    /// algorithm = "ppo"
    /// seeds_per_cell = 8
    ///
    /// [space]
    /// lambda = [0.1, 0.9]
    ///
    /// [[env]]
    /// id = "swimmer"
    /// scale = 1.0
    /// offset = 0.0
    /// sigma = 0.1
    /// surface = [0.2, 0.5]
    ///
    /// [[divergence]]        # optional
    /// env = "swimmer"       # optional filter
    /// axis = "lambda"       # optional, with value_index
    /// value_index = 1
    /// prob = 0.5
    /// ```
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let doc: toml::Table = text.parse()?;
        let bad = |msg: String| Error::InvalidConfig(msg);

        let algorithm = doc
            .get("algorithm")
            .and_then(|v| v.as_str())
            .ok_or_else(|| bad("spec needs a string field algorithm".into()))?
            .to_string();
        let seeds_per_cell = doc
            .get("seeds_per_cell")
            .and_then(|v| v.as_integer())
            .ok_or_else(|| bad("spec needs an integer field seeds_per_cell".into()))?;
        if seeds_per_cell < 1 {
            return Err(bad("seeds_per_cell must be at least 1".into()));
        }

        let space_table = doc
            .get("space")
            .and_then(|v| v.as_table())
            .ok_or_else(|| bad("spec needs a [space] table".into()))?;
        let mut axes = Vec::new();
        for (name, v) in space_table {
            let arr = v
                .as_array()
                .ok_or_else(|| bad(format!("axis {name} must be an array")))?;
            let mut values = Vec::new();
            for item in arr {
                values.push(axis_value_from_toml(name, item)?);
            }
            axes.push((name.clone(), values));
        }
        let space = HyperSpace::new(axes)?;

        let envs = doc
            .get("env")
            .and_then(|v| v.as_array())
            .ok_or_else(|| bad("spec needs at least one [[env]] block".into()))?;
        let mut environments = Vec::new();
        for (i, env) in envs.iter().enumerate() {
            let t = env
                .as_table()
                .ok_or_else(|| bad(format!("env #{i} is not a table")))?;
            let num = |key: &str, default: Option<f64>| -> Result<f64> {
                match t.get(key) {
                    Some(toml::Value::Integer(v)) => Ok(*v as f64),
                    Some(toml::Value::Float(v)) => Ok(*v),
                    None => default
                        .ok_or_else(|| bad(format!("env #{i} is missing {key}"))),
                    Some(_) => Err(bad(format!("env #{i}: {key} must be a number"))),
                }
            };
            let surface = t
                .get("surface")
                .and_then(|v| v.as_array())
                .ok_or_else(|| bad(format!("env #{i} is missing a surface array")))?
                .iter()
                .map(|v| match v {
                    toml::Value::Integer(x) => Ok(*x as f64),
                    toml::Value::Float(x) => Ok(*x),
                    _ => Err(bad(format!("env #{i}: surface entries must be numbers"))),
                })
                .collect::<Result<Vec<f64>>>()?;
            environments.push(EnvSpec {
                id: t
                    .get("id")
                    .and_then(|v| v.as_str())
                    .ok_or_else(|| bad(format!("env #{i} is missing a string id")))?
                    .to_string(),
                scale: num("scale", Some(1.0))?,
                offset: num("offset", Some(0.0))?,
                sigma: num("sigma", Some(0.0))?,
                surface,
            });
        }

        let mut divergence = Vec::new();
        if let Some(arr) = doc.get("divergence") {
            let arr = arr
                .as_array()
                .ok_or_else(|| bad("divergence must be an array of tables".into()))?;
            for (i, rule) in arr.iter().enumerate() {
                let t = rule
                    .as_table()
                    .ok_or_else(|| bad(format!("divergence #{i} is not a table")))?;
                let prob = match t.get("prob") {
                    Some(toml::Value::Float(v)) => *v,
                    Some(toml::Value::Integer(v)) => *v as f64,
                    _ => return Err(bad(format!("divergence #{i} needs a numeric prob"))),
                };
                divergence.push(DivergenceRule {
                    env: t.get("env").and_then(|v| v.as_str()).map(String::from),
                    axis: t.get("axis").and_then(|v| v.as_str()).map(String::from),
                    value_index: t
                        .get("value_index")
                        .and_then(|v| v.as_integer())
                        .map(|v| v as usize),
                    prob,
                });
            }
        }

        let spec = SynthSpec {
            algorithm,
            space,
            environments,
            seeds_per_cell: seeds_per_cell as usize,
            divergence,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        SynthSpec::from_toml_str(&std::fs::read_to_string(path)?)
    }

    fn divergence_prob(&self, env: &str, coord: &SettingCoord) -> f64 {
        let mut p: f64 = 0.0;
        for rule in &self.divergence {
            if let Some(e) = &rule.env {
                if e != env {
                    continue;
                }
            }
            if let (Some(axis), Some(vi)) = (&rule.axis, rule.value_index) {
                let idx = self.space.axis_index(axis).expect("validated");
                if coord.0[idx] != vi {
                    continue;
                }
            }
            p = p.max(rule.prob);
        }
        p
    }
}

/// Samples a run set. Each (environment, setting) cell draws from its own
/// counter-derived stream of the master seed, so output is independent of
/// generation order and identical across runs.
pub fn generate(spec: &SynthSpec, seed: u64) -> Result<(RunSet, GroundTruth)> {
    spec.validate()?;
    let truth = oracle_metrics(spec)?;

    let total = spec.space.total_settings();
    let coords: Vec<SettingCoord> = spec.space.settings().collect();
    let mut records = Vec::with_capacity(spec.environments.len() * total * spec.seeds_per_cell);
    for (ei, env) in spec.environments.iter().enumerate() {
        let noise = if env.sigma > 0.0 {
            Some(Normal::new(0.0, env.sigma).expect("sigma validated"))
        } else {
            None
        };
        for (flat, coord) in coords.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((ei * total + flat) as u64);
            let div_prob = spec.divergence_prob(&env.id, coord);
            for s in 0..spec.seeds_per_cell {
                let eps = match &noise {
                    Some(n) => n.sample(&mut rng),
                    None => 0.0,
                };
                let diverged = div_prob > 0.0 && rng.random::<f64>() < div_prob;
                records.push(RunRecord {
                    algorithm: spec.algorithm.clone(),
                    environment: env.id.clone(),
                    setting: coord.clone(),
                    seed: s as u64,
                    perf: env.scale * env.surface[flat] + env.offset + eps,
                    diverged,
                });
            }
        }
    }
    let runs = RunSet::from_records(spec.space.clone(), PerfMetric::Auc, records)?;
    Ok((runs, truth))
}

/// Ground truth by brute force, independent of the pipeline modules.
///
/// Scores normalize the transformed surface with the shared percentile
/// estimator over all settings. Dimensionality enumerates every pattern of
/// axes fixed at the cross-environment winner (all 2^n of them) and counts
/// the largest feasible fixed set, rather than searching free subsets the
/// way the pipeline does.
pub fn oracle_metrics(spec: &SynthSpec) -> Result<GroundTruth> {
    spec.validate()?;
    let n = spec.space.axis_count();
    let total = spec.space.total_settings();
    if n > MAX_ORACLE_AXES {
        return Err(Error::TooManyAxes {
            n,
            max: MAX_ORACLE_AXES,
        });
    }
    if total > MAX_ORACLE_SETTINGS {
        return Err(Error::TooLarge {
            what: "grid settings",
            size: total,
            max: MAX_ORACLE_SETTINGS,
        });
    }

    // True normalized scores per environment, sorted by environment id to
    // match pipeline aggregation order.
    let mut gamma: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for env in &spec.environments {
        let values: Vec<f64> = env
            .surface
            .iter()
            .map(|&s| env.scale * s + env.offset)
            .collect();
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("validated finite"));
        let p_lo = interpolated_quantile(&sorted, TRUTH_Q_LO);
        let p_hi = interpolated_quantile(&sorted, TRUTH_Q_HI);
        if p_hi <= p_lo {
            return Err(Error::DegenerateNormalization {
                env: env.id.clone(),
                q_lo: TRUTH_Q_LO,
                q_hi: TRUTH_Q_HI,
            });
        }
        gamma.insert(
            env.id.clone(),
            values.iter().map(|&v| (v - p_lo) / (p_hi - p_lo)).collect(),
        );
    }
    let env_rows: Vec<&Vec<f64>> = gamma.values().collect();
    let n_envs = env_rows.len() as f64;

    let per_env_tuned = env_rows
        .iter()
        .map(|row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / n_envs;

    let mut h_star = 0;
    let mut cross_env_tuned = f64::NEG_INFINITY;
    for i in 0..total {
        let mean = env_rows.iter().map(|row| row[i]).sum::<f64>() / n_envs;
        if mean > cross_env_tuned {
            cross_env_tuned = mean;
            h_star = i;
        }
    }
    let phi = per_env_tuned - cross_env_tuned;

    // Fixed-pattern enumeration. mask bit a set = axis a pinned to h*.
    let coords: Vec<SettingCoord> = spec.space.settings().collect();
    let href = &coords[h_star];
    let target = TRUTH_THRESHOLD * per_env_tuned;
    let mut mask_scores = vec![f64::NEG_INFINITY; 1 << n];
    let mut best_fixed: Option<usize> = None;
    for (mask, slot) in mask_scores.iter_mut().enumerate() {
        let fixed: Vec<usize> = (0..n).filter(|&a| mask & (1 << a) != 0).collect();
        let mut score = 0.0;
        for row in &env_rows {
            let best = coords
                .iter()
                .enumerate()
                .filter(|(_, c)| fixed.iter().all(|&a| c.0[a] == href.0[a]))
                .map(|(i, _)| row[i])
                .fold(f64::NEG_INFINITY, f64::max);
            score += best;
        }
        score /= n_envs;
        *slot = score;
        if score >= target {
            best_fixed = Some(best_fixed.map_or(fixed.len(), |b| b.max(fixed.len())));
        }
    }
    let d = match best_fixed {
        Some(k) => n - k,
        None => n,
    };

    let axis_names: Vec<&str> = spec.space.axes().iter().map(|a| a.name.as_str()).collect();
    let mut best_subsets = Vec::with_capacity(n + 1);
    for size in 0..=n {
        let mut best: Option<(f64, Vec<String>)> = None;
        for (mask, &score) in mask_scores.iter().enumerate() {
            let free: Vec<String> = (0..n)
                .filter(|&a| mask & (1 << a) == 0)
                .map(|a| axis_names[a].to_string())
                .collect();
            if free.len() != size {
                continue;
            }
            let better = match &best {
                None => true,
                Some((bs, bf)) => score > *bs || (score == *bs && free < *bf),
            };
            if better {
                best = Some((score, free));
            }
        }
        let (score, free_axes) = best.expect("every size has at least one mask");
        best_subsets.push(TruthSubset {
            size,
            free_axes,
            score,
        });
    }

    Ok(GroundTruth {
        algorithm: spec.algorithm.clone(),
        gamma,
        per_env_tuned,
        cross_env_tuned,
        phi,
        threshold_fraction: TRUTH_THRESHOLD,
        d,
        best_subsets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::build_cells;
    use crate::dimensionality::dim_curve;
    use crate::scoring::{env_percentiles, normalize};
    use crate::sensitivity::sensitivity;
    use crate::space::AxisValue;
    use approx::assert_relative_eq;

    fn basic_spec() -> SynthSpec {
        SynthSpec {
            algorithm: "synth".into(),
            space: HyperSpace::new(vec![
                ("a".into(), vec![AxisValue::Num(0.0), AxisValue::Num(1.0), AxisValue::Num(2.0)]),
                ("b".into(), vec![AxisValue::Num(0.0), AxisValue::Num(1.0), AxisValue::Num(2.0)]),
            ])
            .unwrap(),
            environments: vec![
                EnvSpec {
                    id: "e1".into(),
                    scale: 2.0,
                    offset: 5.0,
                    sigma: 0.0,
                    surface: vec![0.9, 0.1, 0.2, 0.3, 0.8, 0.0, 0.4, 0.2, 0.1],
                },
                EnvSpec {
                    id: "e2".into(),
                    scale: 0.5,
                    offset: -3.0,
                    sigma: 0.0,
                    surface: vec![0.2, 0.3, 0.9, 0.1, 0.7, 0.4, 0.0, 0.5, 0.3],
                },
            ],
            seeds_per_cell: 3,
            divergence: vec![],
        }
    }

    #[test]
    fn toml_spec_round_trip() {
        let text = r#"
algorithm = "ppo"
seeds_per_cell = 4

[space]
lambda = [0.1, 0.9]
tau = [0.001, 0.01]

[[env]]
id = "swimmer"
scale = 1.0
offset = 0.0
sigma = 0.25
surface = [0.2, 0.5, 0.9, 0.1]

[[divergence]]
env = "swimmer"
axis = "lambda"
value_index = 1
prob = 0.5
"#;
        let spec = SynthSpec::from_toml_str(text).unwrap();
        assert_eq!(spec.algorithm, "ppo");
        assert_eq!(spec.seeds_per_cell, 4);
        assert_eq!(spec.space.total_settings(), 4);
        assert_eq!(spec.environments[0].sigma, 0.25);
        assert_eq!(spec.divergence[0].prob, 0.5);
    }

    #[test]
    fn spec_validation_catches_shape_errors() {
        let mut spec = basic_spec();
        spec.environments[0].surface.pop();
        assert!(matches!(spec.validate(), Err(Error::InvalidConfig(_))));

        let mut spec = basic_spec();
        spec.environments[1].id = "e1".into();
        assert!(matches!(spec.validate(), Err(Error::InvalidConfig(_))));

        let mut spec = basic_spec();
        spec.environments[0].scale = 0.0;
        assert!(matches!(spec.validate(), Err(Error::InvalidConfig(_))));

        let mut spec = basic_spec();
        spec.divergence.push(DivergenceRule {
            env: Some("nope".into()),
            axis: None,
            value_index: None,
            prob: 0.1,
        });
        assert!(matches!(spec.validate(), Err(Error::InvalidConfig(_))));

        let mut spec = basic_spec();
        spec.divergence.push(DivergenceRule {
            env: None,
            axis: Some("a".into()),
            value_index: None,
            prob: 0.1,
        });
        assert!(matches!(spec.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn noiseless_generation_is_exact_and_deterministic() {
        let spec = basic_spec();
        let (runs, _) = generate(&spec, 7).unwrap();
        assert_eq!(runs.len(), 2 * 9 * 3);
        for r in runs.records() {
            let env = spec
                .environments
                .iter()
                .find(|e| e.id == r.environment)
                .unwrap();
            let flat = spec.space.flat_index(&r.setting);
            assert_eq!(r.perf, env.scale * env.surface[flat] + env.offset);
            assert!(!r.diverged);
        }
        let (again, _) = generate(&spec, 7).unwrap();
        assert_eq!(runs.records(), again.records());
    }

    #[test]
    fn noisy_generation_depends_on_the_seed_only() {
        let mut spec = basic_spec();
        spec.environments[0].sigma = 0.3;
        let (a, _) = generate(&spec, 1).unwrap();
        let (b, _) = generate(&spec, 1).unwrap();
        let (c, _) = generate(&spec, 2).unwrap();
        assert_eq!(a.records(), b.records());
        assert_ne!(a.records(), c.records());
    }

    #[test]
    fn divergence_rules_hit_their_cells() {
        let mut spec = basic_spec();
        spec.divergence.push(DivergenceRule {
            env: Some("e1".into()),
            axis: Some("a".into()),
            value_index: Some(2),
            prob: 1.0,
        });
        let (runs, _) = generate(&spec, 3).unwrap();
        for r in runs.records() {
            let should_diverge = r.environment == "e1" && r.setting.0[0] == 2;
            assert_eq!(r.diverged, should_diverge, "record {r:?}");
        }
    }

    #[test]
    fn oracle_matches_pipeline_on_noiseless_data() {
        let spec = basic_spec();
        let (runs, truth) = generate(&spec, 11).unwrap();
        let cells = build_cells(&runs, 0.10).unwrap();
        let norms = env_percentiles(&cells, TRUTH_Q_LO, TRUTH_Q_HI).unwrap();
        let scores = normalize(&cells, &norms).unwrap();

        for (env, row) in &truth.gamma {
            for (flat, coord) in spec.space.settings().enumerate() {
                let g = scores.gamma("synth", env, &coord).unwrap();
                assert_relative_eq!(g, row[flat], max_relative = 1e-9, epsilon = 1e-12);
            }
        }

        let report = sensitivity(&scores, "synth").unwrap();
        assert_relative_eq!(report.phi, truth.phi, max_relative = 1e-9, epsilon = 1e-12);
        assert_relative_eq!(
            report.per_env_tuned,
            truth.per_env_tuned,
            max_relative = 1e-9
        );

        let curve = dim_curve(&scores, "synth", TRUTH_THRESHOLD).unwrap();
        assert_eq!(curve.d, truth.d);
        for (p, t) in curve.points.iter().zip(&truth.best_subsets) {
            assert_eq!(p.size, t.size);
            assert_relative_eq!(p.score, t.score, max_relative = 1e-9, epsilon = 1e-12);
            assert_eq!(p.free_axes, t.free_axes);
        }
    }

    #[test]
    fn identical_environments_have_zero_sensitivity() {
        let mut spec = basic_spec();
        spec.environments[1].surface = spec.environments[0].surface.clone();
        let truth = oracle_metrics(&spec).unwrap();
        assert_eq!(truth.phi, 0.0);
        assert_eq!(truth.d, 0);
    }

    #[test]
    fn single_environment_has_zero_sensitivity() {
        let mut spec = basic_spec();
        spec.environments.pop();
        let truth = oracle_metrics(&spec).unwrap();
        assert_eq!(truth.phi, 0.0);
    }

    #[test]
    fn separable_surfaces_have_zero_sensitivity() {
        // surface(e, h) = f(e) + g(h): the same setting wins everywhere.
        let g = [0.1, 0.7, 0.3, 0.2, 0.9, 0.4, 0.0, 0.5, 0.6];
        let mut spec = basic_spec();
        spec.environments[0].surface = g.to_vec();
        spec.environments[1].surface = g.iter().map(|x| x + 2.0).collect();
        let truth = oracle_metrics(&spec).unwrap();
        assert!(truth.phi.abs() <= 1e-12);
    }

    #[test]
    fn one_axis_surfaces_recover_d_equal_one() {
        // Only axis b matters, and its winner flips across environments,
        // so one free axis suffices but zero do not.
        let by_b = |vals: [f64; 3]| -> Vec<f64> {
            (0..9).map(|i| vals[i % 3]).collect()
        };
        let mut spec = basic_spec();
        spec.environments[0].surface = by_b([0.9, 0.1, 0.2]);
        spec.environments[1].surface = by_b([0.1, 0.9, 0.2]);
        let truth = oracle_metrics(&spec).unwrap();
        assert_eq!(truth.d, 1);
        assert_eq!(truth.best_subsets[1].free_axes, vec!["b".to_string()]);
        assert!(truth.phi > 0.0);
    }

    #[test]
    fn degenerate_surface_is_rejected() {
        let mut spec = basic_spec();
        spec.environments[0].surface = vec![1.0; 9];
        assert!(matches!(
            oracle_metrics(&spec),
            Err(Error::DegenerateNormalization { .. })
        ));
    }
}
