//! Effective hyperparameter dimensionality.
//!
//! How many axes actually need per-environment tuning? Freeze the rest at
//! the cross-environment winner h*, leave a subset free, and ask how close
//! per-environment tuning over just the free axes gets to the full
//! per-environment tuned score. The effective dimensionality is the
//! smallest free-subset size whose best score reaches a fraction
//! (default 0.95) of the full score.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scoring::ScoreTable;
use crate::sensitivity::{cross_env_tuned, per_env_tuned};
use crate::space::SettingCoord;

/// Subset enumeration is exponential in the axis count; refuse beyond this.
pub const MAX_AXES: usize = 20;

/// Best subset of one size and the score it achieved.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimPoint {
    pub size: usize,
    /// Free axis names, sorted. Ties across subsets pick the
    /// lexicographically first name list.
    pub free_axes: Vec<String>,
    pub score: f64,
}

/// The whole curve for one algorithm, one point per subset size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimCurve {
    pub algorithm: String,
    pub threshold_fraction: f64,
    pub per_env_tuned: f64,
    pub cross_env_tuned: f64,
    pub points: Vec<DimPoint>,
    /// Smallest size whose score reaches `threshold_fraction *
    /// per_env_tuned`; falls back to the axis count when no size does
    /// (possible only when the full score is negative).
    pub d: usize,
}

/// All k-element ascending index subsets of 0..n, in lexicographic order.
fn index_combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k > n {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    'outer: loop {
        out.push(idx.clone());
        if k == 0 {
            break;
        }
        let mut i = k - 1;
        loop {
            if idx[i] < n - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                continue 'outer;
            }
            if i == 0 {
                break 'outer;
            }
            i -= 1;
        }
    }
    out
}

/// Per-environment retained settings of one algorithm, fetched once so
/// subset scoring does not rescan the table.
struct AlgView {
    envs: Vec<Vec<(SettingCoord, f64)>>,
}

impl AlgView {
    fn build(scores: &ScoreTable, alg: &str) -> Result<Self> {
        let mut envs = Vec::new();
        for env in scores.environments() {
            let settings = scores.settings_for(alg, &env);
            if settings.is_empty() {
                return Err(Error::NoRetainedSettings {
                    alg: alg.to_string(),
                    env,
                });
            }
            envs.push(settings);
        }
        if envs.is_empty() {
            return Err(Error::EmptyRunSet);
        }
        Ok(AlgView { envs })
    }

    /// Mean over environments of the best score among settings that agree
    /// with `reference` on every frozen axis. `None` if some environment
    /// has no such setting.
    fn score(&self, reference: &SettingCoord, frozen: &[usize]) -> Option<f64> {
        let mut total = 0.0;
        for settings in &self.envs {
            let mut best = f64::NEG_INFINITY;
            let mut found = false;
            for (coord, g) in settings {
                if frozen.iter().all(|&a| coord.0[a] == reference.0[a]) && *g > best {
                    best = *g;
                    found = true;
                }
            }
            if !found {
                return None;
            }
            total += best;
        }
        Some(total / self.envs.len() as f64)
    }
}

/// Score of one free-axis subset: remaining axes frozen at the
/// cross-environment winner, free axes tuned per environment. Errors if
/// some environment has no retained setting agreeing with the freeze.
pub fn subset_score(scores: &ScoreTable, alg: &str, free_axes: &[String]) -> Result<f64> {
    let space = scores.space();
    let mut free = Vec::with_capacity(free_axes.len());
    for name in free_axes {
        let idx = space.axis_index(name).ok_or_else(|| {
            Error::InvalidConfig(format!("unknown axis {name:?}"))
        })?;
        if free.contains(&idx) {
            return Err(Error::InvalidConfig(format!("axis {name:?} listed twice")));
        }
        free.push(idx);
    }
    let frozen: Vec<usize> = (0..space.axis_count())
        .filter(|i| !free.contains(i))
        .collect();

    let (_, reference) = cross_env_tuned(scores, alg)?;
    let view = AlgView::build(scores, alg)?;
    view.score(&reference, &frozen).ok_or_else(|| {
        // Name the first environment that broke; score() does not say.
        let envs = scores.environments();
        let env = envs
            .iter()
            .zip(&view.envs)
            .find(|(_, settings)| {
                !settings
                    .iter()
                    .any(|(c, _)| frozen.iter().all(|&a| c.0[a] == reference.0[a]))
            })
            .map(|(e, _)| e.clone())
            .unwrap_or_default();
        Error::NoFeasibleSetting { env }
    })
}

/// Sweeps subset sizes 0..=n, keeping the best subset of each size.
///
/// The reference h* is retained in every environment, so freezing onto it
/// is always feasible. Within a size, subsets are scored in parallel and
/// the winner picked deterministically afterwards.
pub fn dim_curve(scores: &ScoreTable, alg: &str, threshold_fraction: f64) -> Result<DimCurve> {
    if !(threshold_fraction > 0.0 && threshold_fraction.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "threshold fraction must be positive, got {threshold_fraction}"
        )));
    }
    let space = scores.space();
    let n = space.axis_count();
    if n > MAX_AXES {
        return Err(Error::TooManyAxes { n, max: MAX_AXES });
    }

    let (pet, _) = per_env_tuned(scores, alg)?;
    let (cet, reference) = cross_env_tuned(scores, alg)?;
    let view = AlgView::build(scores, alg)?;
    let axis_names: Vec<&str> = space.axes().iter().map(|a| a.name.as_str()).collect();

    let mut points = Vec::with_capacity(n + 1);
    for size in 0..=n {
        let combos = index_combinations(n, size);
        let scored: Vec<f64> = combos
            .par_iter()
            .map(|free| {
                let frozen: Vec<usize> =
                    (0..n).filter(|i| !free.contains(i)).collect();
                view.score(&reference, &frozen)
                    .expect("freezing onto the cross-environment winner is feasible")
            })
            .collect();
        // Strict > keeps the first (lexicographically smallest) subset on
        // ties, independent of the parallel schedule above.
        let mut best = 0;
        for i in 1..scored.len() {
            if scored[i] > scored[best] {
                best = i;
            }
        }
        points.push(DimPoint {
            size,
            free_axes: combos[best]
                .iter()
                .map(|&i| axis_names[i].to_string())
                .collect(),
            score: scored[best],
        });
    }

    let target = threshold_fraction * pet;
    let d = points
        .iter()
        .find(|p| p.score >= target)
        .map(|p| p.size)
        .unwrap_or(n);

    Ok(DimCurve {
        algorithm: alg.to_string(),
        threshold_fraction,
        per_env_tuned: pet,
        cross_env_tuned: cet,
        points,
        d,
    })
}

/// The headline number from the curve.
pub fn effective_dimensionality(
    scores: &ScoreTable,
    alg: &str,
    threshold_fraction: f64,
) -> Result<usize> {
    Ok(dim_curve(scores, alg, threshold_fraction)?.d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{AxisValue, HyperSpace};
    use std::collections::BTreeMap;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn grid(dims: &[usize]) -> HyperSpace {
        HyperSpace::new(
            dims.iter()
                .enumerate()
                .map(|(i, &d)| {
                    (
                        // Axis names a, b, c... sort in index order.
                        ((b'a' + i as u8) as char).to_string(),
                        (0..d).map(|v| AxisValue::Num(v as f64)).collect(),
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    fn table(dims: &[usize], envs: &[BTreeMap<SettingCoord, f64>]) -> ScoreTable {
        let space = grid(dims);
        let mut gammas = BTreeMap::new();
        for (ei, env) in envs.iter().enumerate() {
            for (c, &g) in env {
                gammas.insert(("x".to_string(), format!("env{ei}"), c.clone()), g);
            }
        }
        ScoreTable::from_gammas(space, gammas).unwrap()
    }

    fn dense_env(dims: &[usize], f: impl Fn(&SettingCoord) -> f64) -> BTreeMap<SettingCoord, f64> {
        grid(dims).settings().map(|c| {
            let g = f(&c);
            (c, g)
        }).collect()
    }

    #[test]
    fn combination_enumeration_is_lexicographic() {
        assert_eq!(index_combinations(3, 0), vec![Vec::<usize>::new()]);
        assert_eq!(
            index_combinations(3, 2),
            vec![vec![0, 1], vec![0, 2], vec![1, 2]]
        );
        assert_eq!(index_combinations(3, 3), vec![vec![0, 1, 2]]);
        assert_eq!(index_combinations(2, 3), Vec::<Vec<usize>>::new());
        assert_eq!(index_combinations(5, 2).len(), 10);
    }

    #[test]
    fn empty_subset_recovers_cross_env_and_full_subset_recovers_per_env() {
        let dims = [2, 2];
        let e1 = dense_env(&dims, |c| if c.0 == [0, 0] { 1.0 } else { 0.2 });
        let e2 = dense_env(&dims, |c| if c.0 == [1, 1] { 0.9 } else { 0.3 });
        let t = table(&dims, &[e1, e2]);

        let empty = subset_score(&t, "x", &[]).unwrap();
        let (cet, _) = cross_env_tuned(&t, "x").unwrap();
        assert_eq!(empty, cet);

        let full = subset_score(&t, "x", &["a".into(), "b".into()]).unwrap();
        let (pet, _) = per_env_tuned(&t, "x").unwrap();
        assert_eq!(full, pet);
    }

    #[test]
    fn single_relevant_axis_gives_d_one() {
        // Axis b decides everything; its best index flips per environment.
        let dims = [2, 2];
        let e1 = dense_env(&dims, |c| if c.0[1] == 0 { 1.0 } else { 0.2 });
        let e2 = dense_env(&dims, |c| if c.0[1] == 1 { 1.0 } else { 0.2 });
        let t = table(&dims, &[e1, e2]);

        let curve = dim_curve(&t, "x", 0.95).unwrap();
        assert_eq!(curve.per_env_tuned, 1.0);
        assert_relative_eq!(curve.cross_env_tuned, 0.6, max_relative = 1e-12);
        assert_eq!(curve.d, 1);
        assert_eq!(curve.points[1].free_axes, vec!["b".to_string()]);
        assert_eq!(curve.points[1].score, 1.0);
    }

    #[test]
    fn no_tuning_needed_gives_d_zero() {
        // One setting dominates everywhere: h* already achieves the
        // per-environment tuned score.
        let dims = [2, 2];
        let e1 = dense_env(&dims, |c| if c.0 == [0, 1] { 0.9 } else { 0.1 });
        let e2 = dense_env(&dims, |c| if c.0 == [0, 1] { 0.8 } else { 0.2 });
        let t = table(&dims, &[e1, e2]);
        let curve = dim_curve(&t, "x", 0.95).unwrap();
        assert_eq!(curve.d, 0);
        assert_eq!(curve.points[0].free_axes, Vec::<String>::new());
    }

    #[test]
    fn worked_example_needs_both_axes() {
        let dims = [2, 2];
        let mut e1 = BTreeMap::new();
        e1.insert(SettingCoord(vec![0, 0]), 1.0);
        e1.insert(SettingCoord(vec![1, 1]), 0.2);
        let mut e2 = BTreeMap::new();
        e2.insert(SettingCoord(vec![0, 0]), 0.3);
        e2.insert(SettingCoord(vec![1, 1]), 0.9);
        let t = table(&dims, &[e1, e2]);

        let curve = dim_curve(&t, "x", 0.95).unwrap();
        assert_eq!(curve.per_env_tuned, 0.95);
        assert_eq!(curve.cross_env_tuned, 0.65);
        // Freezing either axis at h*=(0,0) pins the other to (0,0) too,
        // because only the diagonal cells exist.
        assert_eq!(curve.points[1].score, 0.65);
        assert_eq!(curve.d, 2);
    }

    #[test]
    fn subset_ties_pick_the_first_name_list() {
        // Symmetric in a and b: freeing either one scores the same.
        let dims = [2, 2];
        let e1 = dense_env(&dims, |c| {
            if c.0 == [1, 0] || c.0 == [0, 1] { 1.0 } else { 0.0 }
        });
        let e2 = dense_env(&dims, |c| if c.0 == [0, 0] { 1.0 } else { 0.0 });
        let t = table(&dims, &[e1, e2]);
        let curve = dim_curve(&t, "x", 0.95).unwrap();
        assert_eq!(curve.points[1].free_axes, vec!["a".to_string()]);
    }

    #[test]
    fn axis_cap_is_enforced() {
        let dims: Vec<usize> = vec![1; 21];
        let envs = [dense_env(&dims, |_| 0.5)];
        let t = table(&dims, &envs);
        assert!(matches!(
            dim_curve(&t, "x", 0.95),
            Err(Error::TooManyAxes { n: 21, max: 20 })
        ));
    }

    #[test]
    fn bad_inputs_error() {
        let dims = [2];
        let t = table(&dims, &[dense_env(&dims, |c| c.0[0] as f64)]);
        assert!(matches!(
            subset_score(&t, "x", &["nope".into()]),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            subset_score(&t, "x", &["a".into(), "a".into()]),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            dim_curve(&t, "x", 0.0),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            dim_curve(&t, "x", -1.0),
            Err(Error::InvalidConfig(_))
        ));
    }

    /// Indicator-form oracle: enumerate all 2^n sets of axes to FIX at the
    /// reference; d is n minus the largest feasible fixed set.
    fn oracle_d(
        envs: &[BTreeMap<SettingCoord, f64>],
        n: usize,
        reference: &SettingCoord,
        threshold: f64,
        pet: f64,
    ) -> usize {
        let mut best_fixed = None;
        for mask in 0u32..(1 << n) {
            let fixed: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
            let mut total = 0.0;
            let mut feasible = true;
            for env in envs {
                let best = env
                    .iter()
                    .filter(|(c, _)| fixed.iter().all(|&a| c.0[a] == reference.0[a]))
                    .map(|(_, &g)| g)
                    .fold(f64::NEG_INFINITY, f64::max);
                if best == f64::NEG_INFINITY {
                    feasible = false;
                    break;
                }
                total += best;
            }
            if !feasible {
                continue;
            }
            let score = total / envs.len() as f64;
            if score >= threshold * pet {
                best_fixed = Some(best_fixed.map_or(fixed.len(), |b: usize| b.max(fixed.len())));
            }
        }
        match best_fixed {
            Some(k) => n - k,
            None => n,
        }
    }

    #[test]
    fn matches_indicator_oracle_on_random_tables() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for case in 0..60 {
            let n = 1 + (case % 3);
            let dims: Vec<usize> = (0..n).map(|i| 2 + ((case + i) % 2)).collect();
            let n_envs = 1 + (case % 3);
            let envs: Vec<BTreeMap<SettingCoord, f64>> = (0..n_envs)
                .map(|_| {
                    dense_env(&dims, |_| 0.0)
                        .into_keys()
                        .map(|c| {
                            let g: f64 = rng.random_range(-0.5..1.5);
                            (c, g)
                        })
                        .collect()
                })
                .collect();
            let t = table(&dims, &envs);
            let curve = dim_curve(&t, "x", 0.95).unwrap();
            let (_, reference) = cross_env_tuned(&t, "x").unwrap();
            let expect = oracle_d(&envs, n, &reference, 0.95, curve.per_env_tuned);
            assert_eq!(curve.d, expect, "case {case}");
        }
    }

    proptest! {
        /// More freedom never hurts: the curve is non-decreasing in size.
        #[test]
        fn curve_is_monotone(seed in 0u64..500) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let dims = [2usize, 2, 2];
            let envs: Vec<BTreeMap<SettingCoord, f64>> = (0..3)
                .map(|_| {
                    dense_env(&dims, |_| 0.0)
                        .into_keys()
                        .map(|c| {
                            let g: f64 = rng.random_range(-1.0..1.0);
                            (c, g)
                        })
                        .collect()
                })
                .collect();
            let t = table(&dims, &envs);
            let curve = dim_curve(&t, "x", 0.95).unwrap();
            for w in curve.points.windows(2) {
                prop_assert!(w[1].score >= w[0].score - 1e-12);
            }
            prop_assert!(curve.d <= 3);
        }
    }
}
