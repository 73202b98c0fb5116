//! Acceptance suite: one test per headline guarantee, each printing a
//! [PASS] line with the quantity it pinned down. Oracles here are written
//! independently of the library code they check — enumeration loops and
//! closed-form values only.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hypersense::bootstrap::{bootstrap_metrics, BootstrapConfig};
use hypersense::data_model::{
    build_cells, load_runs, CellKey, PerfMetric, RunFormat, RunRecord, RunSet,
};
use hypersense::dimensionality::dim_curve;
use hypersense::plane::{classify_region, PlanePoint, Region};
use hypersense::scoring::{env_percentiles, normalize, ScoreTable};
use hypersense::sensitivity::{leave_one_out, sensitivity};
use hypersense::space::{AxisValue, HyperSpace, SettingCoord};
use hypersense::synthgen::{generate, EnvSpec, SynthSpec};
use hypersense::transforms::{symexp, symlog, zero_mean_normalize, PercentileScaler};

fn pass(msg: &str) {
    println!("[PASS] {msg}");
}

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// Full-data pipeline: cells -> bands -> normalized scores.
fn scores_of(runs: &RunSet) -> ScoreTable {
    let cells = build_cells(runs, 0.10).unwrap();
    let norms = env_percentiles(&cells, 5.0, 95.0).unwrap();
    normalize(&cells, &norms).unwrap()
}

fn load_fixture(name: &str) -> RunSet {
    load_runs(&fixture(name), RunFormat::Jsonl, PerfMetric::Auc, None).unwrap()
}

/// Relative closeness with an absolute floor of 1, so near-zero values are
/// compared absolutely.
fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(1.0)
}

fn num_axis(name: &str, levels: usize) -> (String, Vec<AxisValue>) {
    (
        name.to_string(),
        (0..levels).map(|v| AxisValue::Num(v as f64)).collect(),
    )
}

/// One-algorithm score table with every cell filled from the rng.
fn random_table(rng: &mut ChaCha8Rng, n_envs: usize, levels: &[usize]) -> ScoreTable {
    let axes = levels
        .iter()
        .enumerate()
        .map(|(i, &k)| num_axis(&format!("h{i}"), k))
        .collect();
    let space = HyperSpace::new(axes).unwrap();
    let mut gammas: BTreeMap<CellKey, f64> = BTreeMap::new();
    for e in 0..n_envs {
        for coord in space.settings() {
            gammas.insert(
                ("a".to_string(), format!("e{e}"), coord),
                rng.random_range(-1.0..2.0),
            );
        }
    }
    ScoreTable::from_gammas(space, gammas).unwrap()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

#[test]
fn criterion_01_two_by_two_end_to_end() {
    let started = Instant::now();
    let runs = load_fixture("fixture_2x2.jsonl");
    let scores = scores_of(&runs);

    // The fixture engineers both percentile bands to exactly (0, 1), so
    // the normalized table for ppo is these four literals bitwise.
    let table = [("e1", [1.0, 0.2]), ("e2", [0.3, 0.9])];
    let coords = [SettingCoord(vec![0, 0]), SettingCoord(vec![1, 1])];
    for (env, vals) in &table {
        for (coord, want) in coords.iter().zip(vals) {
            assert_eq!(scores.gamma("ppo", env, coord), Some(*want));
        }
    }

    // Independent oracle: enumerate the 2x2 table directly.
    let pet_oracle =
        (table[0].1.iter().fold(f64::MIN, |m, &v| m.max(v))
            + table[1].1.iter().fold(f64::MIN, |m, &v| m.max(v)))
            / 2.0;
    let cet_oracle = (0..2)
        .map(|s| (table[0].1[s] + table[1].1[s]) / 2.0)
        .fold(f64::MIN, f64::max);
    let phi_oracle = pet_oracle - cet_oracle;

    let report = sensitivity(&scores, "ppo").unwrap();
    assert_eq!(report.per_env_tuned, pet_oracle);
    assert_eq!(report.cross_env_tuned, cet_oracle);
    assert_eq!(report.phi, phi_oracle);
    assert!((report.per_env_tuned - 0.95).abs() <= 1e-12);
    assert!((report.cross_env_tuned - 0.65).abs() <= 1e-12);
    assert!((report.phi - 0.30).abs() <= 1e-12);

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    pass(&format!(
        "2x2 fixture end-to-end: per_env_tuned 0.95, cross_env_tuned 0.65, \
         phi 0.30 (=enumeration oracle bitwise) in {elapsed:?}"
    ));
}

#[test]
fn criterion_02_nonnegativity_and_single_env_collapse() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut single_env_cases = 0usize;
    for i in 0..1000 {
        // Every third table gets exactly one environment so the collapse
        // branch is exercised hundreds of times.
        let n_envs = if i % 3 == 0 {
            1
        } else {
            rng.random_range(2..=4)
        };
        let n_axes = rng.random_range(1..=3);
        let levels: Vec<usize> = (0..n_axes).map(|_| rng.random_range(1..=4)).collect();
        let scores = random_table(&mut rng, n_envs, &levels);
        let report = sensitivity(&scores, "a").unwrap();
        assert!(
            report.phi >= -1e-12,
            "table {i}: phi {} below -1e-12",
            report.phi
        );
        if n_envs == 1 {
            assert_eq!(report.phi, 0.0, "table {i}: single-env phi not zero");
            single_env_cases += 1;
        }
    }
    assert!(single_env_cases >= 300);
    pass(&format!(
        "1000 randomized tables: phi >= -1e-12 everywhere; \
         {single_env_cases} single-environment tables collapsed to phi == 0.0"
    ));
}

/// Random two-algorithm run set over a 2x3 grid, three environments,
/// three seeds per cell.
fn random_runset(seed: u64) -> RunSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = HyperSpace::new(vec![
        (
            "clip".into(),
            vec![AxisValue::Num(0.1), AxisValue::Num(0.2)],
        ),
        (
            "lr".into(),
            vec![
                AxisValue::Num(1e-4),
                AxisValue::Num(1e-3),
                AxisValue::Num(1e-2),
            ],
        ),
    ])
    .unwrap();
    let mut records = Vec::new();
    for alg in ["one", "two"] {
        for env in ["e1", "e2", "e3"] {
            for coord in space.settings() {
                for seed in 0..3u64 {
                    records.push(RunRecord {
                        algorithm: alg.into(),
                        environment: env.into(),
                        setting: coord.clone(),
                        seed,
                        perf: rng.random_range(0.0..10.0),
                        diverged: false,
                    });
                }
            }
        }
    }
    RunSet::from_records(space, PerfMetric::Auc, records).unwrap()
}

/// The same runs with per-environment performance mapped through a*x + b.
fn affine_runset(runs: &RunSet, params: &BTreeMap<String, (f64, f64)>) -> RunSet {
    let records = runs
        .records()
        .iter()
        .map(|r| {
            let (a, b) = params[&r.environment];
            RunRecord {
                perf: a * r.perf + b,
                ..r.clone()
            }
        })
        .collect();
    RunSet::from_records(runs.space().clone(), runs.metric(), records).unwrap()
}

#[test]
fn criterion_03_affine_invariance() {
    let gains = [0.01, 1.0, 100.0];
    for seed in 0..10u64 {
        let runs = random_runset(seed);
        let mut shift_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let params: BTreeMap<String, (f64, f64)> = runs
            .environments()
            .into_iter()
            .enumerate()
            .map(|(i, env)| {
                (
                    env,
                    (gains[i % gains.len()], shift_rng.random_range(-5.0..5.0)),
                )
            })
            .collect();
        let transformed = affine_runset(&runs, &params);

        let plain = scores_of(&runs);
        let mapped = scores_of(&transformed);
        for (key, g1) in plain.iter() {
            let g2 = mapped.gamma(&key.0, &key.1, &key.2).unwrap();
            assert!(close(g1, g2, 1e-9), "seed {seed} {key:?}: {g1} vs {g2}");
        }
        for alg in ["one", "two"] {
            let r1 = sensitivity(&plain, alg).unwrap();
            let r2 = sensitivity(&mapped, alg).unwrap();
            assert!(close(r1.phi, r2.phi, 1e-9), "seed {seed} {alg}: phi moved");
            let d1 = dim_curve(&plain, alg, 0.95).unwrap().d;
            let d2 = dim_curve(&mapped, alg, 0.95).unwrap().d;
            assert_eq!(d1, d2, "seed {seed} {alg}: d moved");
        }
    }
    pass(
        "10 randomized run sets: per-environment a*x+b (a in {0.01, 1, 100}) \
         left every gamma and phi within 1e-9 relative and every d unchanged",
    );
}

/// Independent effective-dimensionality oracle: enumerate every fix-mask
/// over the axes (bit set = axis pinned to the cross-environment winner),
/// count the largest feasible pinned set reaching the target, and return
/// axis count minus that. Falls back to the axis count when nothing
/// reaches the target.
fn oracle_d(scores: &ScoreTable, alg: &str, threshold: f64) -> usize {
    let space = scores.space();
    let envs = scores.environments();
    let n = space.axis_count();

    let best_in = |env: &str, mask: usize, pin: &SettingCoord| -> Option<f64> {
        let mut best = None;
        for coord in space.settings() {
            let agrees = (0..n).all(|i| mask & (1 << i) == 0 || coord.0[i] == pin.0[i]);
            if !agrees {
                continue;
            }
            if let Some(g) = scores.gamma(alg, env, &coord) {
                best = Some(best.map_or(g, |b: f64| b.max(g)));
            }
        }
        best
    };

    let pet = envs
        .iter()
        .map(|env| best_in(env, 0, &SettingCoord(vec![0; n])).unwrap())
        .sum::<f64>()
        / envs.len() as f64;

    // Cross-environment winner: ascending settings order, strict >.
    let mut h_star = None;
    let mut best_mean = f64::NEG_INFINITY;
    for coord in space.settings() {
        let mut sum = 0.0;
        let mut everywhere = true;
        for env in &envs {
            match scores.gamma(alg, env, &coord) {
                Some(g) => sum += g,
                None => {
                    everywhere = false;
                    break;
                }
            }
        }
        if everywhere {
            let mean = sum / envs.len() as f64;
            if mean > best_mean {
                best_mean = mean;
                h_star = Some(coord);
            }
        }
    }
    let h_star = h_star.expect("full tables always have an eligible setting");

    let target = threshold * pet;
    let mut most_pinned: Option<usize> = None;
    for mask in 0..(1usize << n) {
        let mut sum = 0.0;
        let mut feasible = true;
        for env in &envs {
            match best_in(env, mask, &h_star) {
                Some(b) => sum += b,
                None => {
                    feasible = false;
                    break;
                }
            }
        }
        if !feasible {
            continue;
        }
        if sum / envs.len() as f64 >= target {
            let pinned = mask.count_ones() as usize;
            if most_pinned.is_none_or(|m| pinned > m) {
                most_pinned = Some(pinned);
            }
        }
    }
    most_pinned.map_or(n, |m| n - m)
}

#[test]
fn criterion_04_dimensionality_dual_formulation() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for i in 0..200 {
        let n_envs = rng.random_range(1..=3);
        let n_axes = rng.random_range(1..=4);
        let levels: Vec<usize> = (0..n_axes).map(|_| rng.random_range(1..=3)).collect();
        let scores = random_table(&mut rng, n_envs, &levels);
        let d_search = dim_curve(&scores, "a", 0.95).unwrap().d;
        let d_masks = oracle_d(&scores, "a", 0.95);
        assert_eq!(d_search, d_masks, "instance {i} ({n_envs} envs, {levels:?})");
    }
    pass(
        "200 randomized instances (<=4 axes): subset-search d equals the \
         fix-mask enumeration oracle exactly",
    );
}

/// Three-axis, two-environment generator spec with irregular noiseless
/// surfaces; sigma and seed count are the knobs the tests turn.
fn recovery_spec(sigma: f64, seeds_per_cell: usize) -> SynthSpec {
    SynthSpec {
        algorithm: "synthetic".into(),
        space: HyperSpace::new(vec![
            num_axis("a", 2),
            num_axis("b", 3),
            num_axis("c", 2),
        ])
        .unwrap(),
        environments: vec![
            EnvSpec {
                id: "alpha".into(),
                scale: 1.5,
                offset: 2.0,
                sigma,
                surface: vec![
                    0.12, 0.93, 0.41, 0.55, 0.08, 0.77, 0.63, 0.29, 0.95, 0.17, 0.48, 0.82,
                ],
            },
            EnvSpec {
                id: "beta".into(),
                scale: 1.0,
                offset: 0.0,
                sigma,
                surface: vec![
                    0.66, 0.24, 0.88, 0.10, 0.52, 0.35, 0.71, 0.99, 0.05, 0.58, 0.44, 0.27,
                ],
            },
        ],
        seeds_per_cell,
        divergence: vec![],
    }
}

/// Two-axis spec used where generation volume matters more than surface
/// richness. True sensitivity is strongly positive: each environment
/// prefers a different corner.
fn small_spec(sigma: f64, seeds_per_cell: usize) -> SynthSpec {
    SynthSpec {
        algorithm: "synthetic".into(),
        space: HyperSpace::new(vec![num_axis("eta", 2), num_axis("mu", 2)]).unwrap(),
        environments: vec![
            EnvSpec {
                id: "alpha".into(),
                scale: 2.0,
                offset: 1.0,
                sigma,
                surface: vec![0.9, 0.1, 0.3, 0.8],
            },
            EnvSpec {
                id: "beta".into(),
                scale: 1.0,
                offset: 0.0,
                sigma,
                surface: vec![0.2, 0.7, 0.9, 0.1],
            },
        ],
        seeds_per_cell,
        divergence: vec![],
    }
}

fn pipeline_phi(runs: &RunSet) -> f64 {
    sensitivity(&scores_of(runs), "synthetic").unwrap().phi
}

#[test]
fn criterion_05_synthetic_recovery() {
    let started = Instant::now();

    // Noiseless: the pipeline must reproduce the generator's ground truth.
    let spec = recovery_spec(0.0, 3);
    let (runs, truth) = generate(&spec, 11).unwrap();
    let scores = scores_of(&runs);
    for (env, gammas) in &truth.gamma {
        for coord in spec.space.settings() {
            let got = scores.gamma("synthetic", env, &coord).unwrap();
            let want = gammas[spec.space.flat_index(&coord)];
            assert!(close(got, want, 1e-9), "{env} {coord:?}: {got} vs {want}");
        }
    }
    let report = sensitivity(&scores, "synthetic").unwrap();
    assert!(close(report.per_env_tuned, truth.per_env_tuned, 1e-9));
    assert!(close(report.cross_env_tuned, truth.cross_env_tuned, 1e-9));
    assert!(close(report.phi, truth.phi, 1e-9));
    let d = dim_curve(&scores, "synthetic", truth.threshold_fraction)
        .unwrap()
        .d;
    assert_eq!(d, truth.d);

    // Noisy: the error in phi must shrink as seeds per cell grow.
    let mut medians = Vec::new();
    for seeds_per_cell in [4usize, 64, 256] {
        let spec = small_spec(0.25, seeds_per_cell);
        let errs: Vec<f64> = (0..20u64)
            .map(|gen_seed| {
                let (runs, truth) = generate(&spec, gen_seed).unwrap();
                (pipeline_phi(&runs) - truth.phi).abs()
            })
            .collect();
        medians.push(median(errs));
    }
    assert!(
        medians[0] >= medians[1] && medians[1] >= medians[2],
        "medians not non-increasing: {medians:?}"
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}");
    pass(&format!(
        "noiseless synth matches ground truth (phi within 1e-9, d exact); \
         median |phi_est - phi_true| over 20 seeds fell {:.4} -> {:.4} -> {:.4} \
         as seeds per cell grew 4 -> 64 -> 256; total {elapsed:?}",
        medians[0], medians[1], medians[2]
    ));
}

#[test]
fn criterion_06_bootstrap_determinism_and_sanity() {
    let algs = vec!["synthetic".to_string()];

    // Identical seeds give byte-identical intervals at any parallelism.
    let (runs, _) = generate(&recovery_spec(0.25, 8), 42).unwrap();
    let cfg = BootstrapConfig {
        replicates: 300,
        alpha: 0.05,
        seed: 7,
        freeze_norms: false,
        div_threshold: 0.10,
        q_lo: 5.0,
        q_hi: 95.0,
    };
    let pool = |n| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
    };
    let on_one = pool(1).install(|| bootstrap_metrics(&runs, &algs, &cfg).unwrap());
    let on_four = pool(4).install(|| bootstrap_metrics(&runs, &algs, &cfg).unwrap());
    assert_eq!(
        serde_json::to_string(&on_one).unwrap(),
        serde_json::to_string(&on_four).unwrap()
    );

    // Constant per-cell data: every resample reproduces the estimate.
    let space = HyperSpace::new(vec![num_axis("h0", 2)]).unwrap();
    let mut records = Vec::new();
    for (env, perfs) in [("e1", [3.0, 1.0]), ("e2", [2.0, 5.0])] {
        for (si, perf) in perfs.into_iter().enumerate() {
            for seed in 0..4u64 {
                records.push(RunRecord {
                    algorithm: "synthetic".into(),
                    environment: env.into(),
                    setting: SettingCoord(vec![si]),
                    seed,
                    perf,
                    diverged: false,
                });
            }
        }
    }
    let constant = RunSet::from_records(space, PerfMetric::Auc, records).unwrap();
    let iv = &bootstrap_metrics(
        &constant,
        &algs,
        &BootstrapConfig {
            replicates: 200,
            ..cfg.clone()
        },
    )
    .unwrap()["synthetic"];
    assert_eq!(iv.sens_lo, iv.point.phi);
    assert_eq!(iv.sens_hi, iv.point.phi);
    assert_eq!(iv.perf_lo, iv.point.per_env_tuned);
    assert_eq!(iv.perf_hi, iv.point.per_env_tuned);

    // B=1000 on a synthetic fixture stays well under the time budget.
    let (meaty, _) = generate(&recovery_spec(0.25, 16), 5).unwrap();
    let started = Instant::now();
    bootstrap_metrics(
        &meaty,
        &algs,
        &BootstrapConfig {
            replicates: 1000,
            ..cfg.clone()
        },
    )
    .unwrap();
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");

    // The point estimate sits inside its own interval almost always.
    let mut covered = 0;
    for gen_seed in 0..100u64 {
        let (runs, _) = generate(&small_spec(0.25, 8), gen_seed).unwrap();
        let iv = &bootstrap_metrics(
            &runs,
            &algs,
            &BootstrapConfig {
                replicates: 1000,
                seed: gen_seed,
                ..cfg.clone()
            },
        )
        .unwrap()["synthetic"];
        let inside = iv.sens_lo <= iv.point.phi
            && iv.point.phi <= iv.sens_hi
            && iv.perf_lo <= iv.point.per_env_tuned
            && iv.point.per_env_tuned <= iv.perf_hi;
        if inside {
            covered += 1;
        }
    }
    assert!(covered >= 99, "covered only {covered}/100");

    pass(&format!(
        "bootstrap: 1 vs 4 workers byte-identical; constant data gave \
         zero-width intervals; B=1000 ran in {elapsed:?}; point inside its \
         own interval on {covered}/100 generator seeds"
    ));
}

#[test]
fn criterion_07_region_partition() {
    let origin = PlanePoint::new("ref", 0.0, 0.0);
    let at = |ds: f64, dp: f64| PlanePoint::new("p", ds, dp);
    let tol = 1e-12;

    // The seven predicates, restated independently of the implementation.
    let labels = |ds: f64, dp: f64| -> Vec<Region> {
        let mut hits = Vec::new();
        if ds.abs() <= tol && dp.abs() <= tol {
            hits.push(Region::Boundary);
        }
        if !(ds.abs() <= tol && dp.abs() <= tol) {
            if ds <= 0.0 && dp >= 0.0 {
                hits.push(Region::R1);
            }
            if ds > 0.0 && dp > ds {
                hits.push(Region::R2);
            }
            if ds < 0.0 && dp < 0.0 && dp > ds {
                hits.push(Region::R3);
            }
            if ds > 0.0 && 0.0 < dp && dp <= ds {
                hits.push(Region::R4);
            }
            if ds > 0.0 && dp <= 0.0 {
                hits.push(Region::R5);
            }
            if ds < 0.0 && dp <= ds {
                hits.push(Region::Unclassified);
            }
        }
        hits
    };

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut seen: BTreeMap<&'static str, usize> = BTreeMap::new();
    for _ in 0..10_000 {
        let ds = rng.random_range(-1.0..1.0);
        let dp = rng.random_range(-1.0..1.0);
        let hits = labels(ds, dp);
        assert_eq!(hits.len(), 1, "({ds}, {dp}) hit {hits:?}");
        let got = classify_region(&origin, &at(ds, dp), tol);
        assert_eq!(got, hits[0], "({ds}, {dp})");
        *seen.entry(got.label()).or_default() += 1;
    }
    // Uniform sampling over the square must reach every non-degenerate
    // region, or the partition check proved less than it claims.
    for region in [Region::R1, Region::R2, Region::R3, Region::R4, Region::R5] {
        assert!(seen.contains_key(region.label()), "never sampled {region}");
    }

    let canon = [
        ((-0.1, 0.1), Region::R1),
        ((0.1, 0.2), Region::R2),
        ((-0.2, -0.1), Region::R3),
        ((0.2, 0.1), Region::R4),
        ((0.1, -0.1), Region::R5),
    ];
    for ((ds, dp), want) in canon {
        assert_eq!(classify_region(&origin, &at(ds, dp), tol), want);
    }

    pass(&format!(
        "10000 random deltas: exactly one predicate fired each time and the \
         classifier agreed (coverage {seen:?}); all five canonical deltas \
         mapped to their regions"
    ));
}

#[test]
fn criterion_08_transform_suite() {
    // symexp inverts symlog across twelve decades, both signs.
    let mut checked = 0;
    for k in 0..=120 {
        let x = 1e-6 * 10f64.powf(k as f64 / 10.0);
        for v in [x, -x] {
            let back = symexp(symlog(v));
            assert!(
                (back - v).abs() <= 1e-9 * v.abs(),
                "roundtrip of {v} gave {back}"
            );
            checked += 1;
        }
    }

    // Scaling the whole stream by c leaves scaled advantages unchanged.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let batches: Vec<(Vec<f64>, Vec<f64>)> = (0..6)
        .map(|_| {
            (
                (0..20).map(|_| rng.random_range(-10.0..10.0)).collect(),
                (0..8).map(|_| rng.random_range(-3.0..3.0)).collect(),
            )
        })
        .collect();
    for c in [1e-3, 1e3] {
        let mut plain = PercentileScaler::new(0.99).unwrap();
        let mut scaled = PercentileScaler::new(0.99).unwrap();
        for (returns, advantages) in &batches {
            let a = plain.scale(returns, advantages).unwrap();
            let returns_c: Vec<f64> = returns.iter().map(|r| r * c).collect();
            let advantages_c: Vec<f64> = advantages.iter().map(|x| x * c).collect();
            let b = scaled.scale(&returns_c, &advantages_c).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!(close(*x, *y, 1e-12), "c={c}: {x} vs {y}");
            }
        }
    }

    // With the spread never below the bound, the bounded variant is the
    // plain variant, bit for bit.
    let bound = 0.5;
    let mut plain = PercentileScaler::new(0.99).unwrap();
    let mut bounded = PercentileScaler::with_lower_bound(0.99, bound).unwrap();
    for (returns, advantages) in &batches {
        // Spread the batch out so its percentile band dwarfs the bound.
        let wide: Vec<f64> = returns.iter().map(|r| r * 4.0).collect();
        let a = plain.scale(&wide, advantages).unwrap();
        let b = bounded.scale(&wide, advantages).unwrap();
        assert_eq!(a, b);
        let (lo, hi) = plain.band().unwrap();
        assert!(hi - lo >= bound, "band narrower than the bound");
    }

    // Minibatch normalization recenters to zero mean.
    for _ in 0..50 {
        let n = rng.random_range(2..=40);
        let batch: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let out = zero_mean_normalize(&batch, 1e-8).unwrap();
        let mean = out.iter().sum::<f64>() / out.len() as f64;
        assert!(mean.abs() <= 1e-12, "residual mean {mean}");
    }

    pass(&format!(
        "transforms: symexp(symlog(x)) within 1e-9 relative at {checked} \
         log-spaced points; percentile scaling invariant under stream \
         scaling by 1e-3 and 1e3; lower-bounded output identical to plain \
         when the spread clears the bound; 50 minibatches recentered to \
         |mean| <= 1e-12"
    ));
}

#[test]
fn criterion_09_divergence_filter_golden() {
    // Fresh binary run must reproduce the checked-in golden byte for byte.
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_hypersense"))
        .args(["ingest", "--runs"])
        .arg(fixture("divergence_filter.jsonl"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/ingest_divergence.json");
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        std::fs::read_to_string(golden).unwrap()
    );

    // And the filter itself: 1 diverged in 10 stays, 2 in 10 goes.
    let runs = load_fixture("divergence_filter.jsonl");
    let cells = build_cells(&runs, 0.10).unwrap();
    let cell = |i: usize| cells.get("ppo", "hopper", &SettingCoord(vec![i])).unwrap();
    assert_eq!((cell(0).n_runs, cell(0).n_diverged), (10, 1));
    assert!(cell(0).retained, "1/10 diverged must be retained");
    assert_eq!((cell(2).n_runs, cell(2).n_diverged), (10, 2));
    assert!(!cell(2).retained, "2/10 diverged must be dropped");
    assert!(cell(1).retained);
    assert_eq!(cells.retained_count(), 2);

    pass(
        "divergence filter: binary output matches the checked-in golden; \
         the 2-of-10 diverged cell was dropped and the 1-of-10 cell retained",
    );
}

#[test]
fn criterion_10_leave_one_out() {
    let scores = scores_of(&load_fixture("fixture_3env.jsonl"));
    let algs = vec!["ppo".to_string()];
    let full = sensitivity(&scores, "ppo").unwrap();
    assert!((full.phi - 0.8 / 3.0).abs() <= 1e-12);

    let dropped = leave_one_out(&scores, &algs).unwrap();
    let phi_without = |env: &str| dropped[env][0].phi;
    // Hand enumeration: dropping e1 leaves environments that agree on the
    // winner, so committing costs nothing there.
    assert_eq!(phi_without("e1"), 0.0);
    assert!((phi_without("e2") - 0.15).abs() <= 1e-12);
    assert!((phi_without("e3") - 0.30).abs() <= 1e-12);

    // Two environments: every drop leaves one environment, where tuning
    // per environment and committing coincide.
    let scores2 = scores_of(&load_fixture("fixture_2x2.jsonl"));
    let algs2 = vec!["filler".to_string(), "ppo".to_string()];
    for (env, reports) in leave_one_out(&scores2, &algs2).unwrap() {
        for r in reports {
            assert_eq!(r.phi, 0.0, "dropping {env}: {} phi not zero", r.algorithm);
        }
    }

    pass(
        "leave-one-out: 3-environment drops gave phi {0.0, 0.15, 0.30} as \
         hand-enumerated (full 0.2667); every 2-environment drop collapsed \
         to phi == 0.0",
    );
}
