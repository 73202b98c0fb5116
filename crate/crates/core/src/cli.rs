//! Command-line interface.
//!
//! Every analysis command prints one JSON envelope to stdout (see
//! [`crate::report`]). Paths and output destinations stay out of the
//! envelope so identical inputs give identical bytes wherever they live.
//! Exit codes: 0 success, 1 bad input or usage, 2 computation failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::bootstrap::{bootstrap_metrics, BootstrapConfig};
use crate::data_model::{
    build_cells, load_manifest, load_runs, CellTable, PerfMetric, RunFormat, RunSet,
};
use crate::dimensionality::dim_curve;
use crate::error::{Error, Result};
use crate::plane::{classify_region, render_plane, PlanePoint};
use crate::report::{envelope, file_digest, to_json_text};
use crate::scoring::{env_percentiles, normalize, EnvNorms, ScoreTable};
use crate::sensitivity::{leave_one_out, sensitivity, SensitivityReport};
use crate::space::{HyperSpace, SettingCoord};
use crate::synthgen::{generate, SynthSpec};
use crate::transforms;

#[derive(Debug, Parser)]
#[command(
    name = "hypersense",
    version,
    about = "Quantifies how much reported performance depends on per-environment hyperparameter tuning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a run file and summarize what it holds
    Ingest(IngestArgs),
    /// Compute normalized scores and per-environment bands
    Score(ScoreArgs),
    /// Compute tuning sensitivity per algorithm, optionally with bootstrap intervals
    Sensitivity(SensitivityArgs),
    /// Recompute sensitivity with each environment left out in turn
    Loo(LooArgs),
    /// Compute effective hyperparameter dimensionality per algorithm
    Dimensionality(DimArgs),
    /// Render a performance-sensitivity plane from saved sensitivity reports
    Plane(PlaneArgs),
    /// Generate synthetic runs with known ground truth
    Synth(SynthArgs),
    /// Numeric transform utilities
    Transforms(TransformsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Jsonl,
    Csv,
}

fn parse_metric(s: &str) -> std::result::Result<PerfMetric, String> {
    s.parse::<PerfMetric>().map_err(|e| e.to_string())
}

/// Flags shared by every command that reads run records.
#[derive(Debug, Args)]
struct InputArgs {
    /// Run records (.jsonl/.ndjson or .csv)
    #[arg(long)]
    runs: PathBuf,
    /// Grid manifest TOML; the grid is inferred from the data when omitted
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Input format; inferred from the file extension when omitted
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Performance metric: auc or final:<window>
    #[arg(long, default_value = "auc", value_parser = parse_metric)]
    metric: PerfMetric,
    /// Largest fraction of diverged runs a cell may carry and stay retained
    #[arg(long, default_value_t = 0.10)]
    div_threshold: f64,
    /// Lower percentile rank of the normalization band
    #[arg(long, default_value_t = 5.0)]
    q_lo: f64,
    /// Upper percentile rank of the normalization band
    #[arg(long, default_value_t = 95.0)]
    q_hi: f64,
}

struct Loaded {
    runs: RunSet,
    digest: String,
    cells: CellTable,
}

impl InputArgs {
    fn resolve_format(&self) -> Result<RunFormat> {
        match self.format {
            Some(FormatArg::Jsonl) => Ok(RunFormat::Jsonl),
            Some(FormatArg::Csv) => Ok(RunFormat::Csv),
            None => RunFormat::from_path(&self.runs).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "cannot infer a format from {}; pass --format",
                    self.runs.display()
                ))
            }),
        }
    }

    fn load(&self) -> Result<Loaded> {
        let format = self.resolve_format()?;
        let manifest = match &self.manifest {
            Some(p) => Some(load_manifest(p)?),
            None => None,
        };
        let runs = load_runs(&self.runs, format, self.metric, manifest.as_ref())?;
        let digest = file_digest(&self.runs)?;
        let cells = build_cells(&runs, self.div_threshold)?;
        Ok(Loaded { runs, digest, cells })
    }

    fn scores(&self, loaded: &Loaded) -> Result<(EnvNorms, ScoreTable)> {
        let norms = env_percentiles(&loaded.cells, self.q_lo, self.q_hi)?;
        let scores = normalize(&loaded.cells, &norms)?;
        Ok((norms, scores))
    }

    /// Analysis parameters only; no paths, so envelopes are
    /// location-independent.
    fn config_json(&self) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("metric".into(), Value::String(self.metric.to_string()));
        m.insert("div_threshold".into(), json!(self.div_threshold));
        m.insert("q_lo".into(), json!(self.q_lo));
        m.insert("q_hi".into(), json!(self.q_hi));
        m
    }
}

/// Picks which algorithms a command works on: the requested ones after an
/// existence check, or everything in the data.
fn select_algs(requested: &[String], runs: &RunSet) -> Result<Vec<String>> {
    let known = runs.algorithms();
    if requested.is_empty() {
        return Ok(known);
    }
    let mut algs = Vec::new();
    for alg in requested {
        if !known.contains(alg) {
            return Err(Error::InvalidConfig(format!(
                "unknown algorithm {alg:?}; the data holds {known:?}"
            )));
        }
        if !algs.contains(alg) {
            algs.push(alg.clone());
        }
    }
    Ok(algs)
}

fn resolve_coord(space: &HyperSpace, coord: &SettingCoord) -> Value {
    let mut values = Map::new();
    for (axis, &i) in space.axes().iter().zip(&coord.0) {
        values.insert(
            axis.name.clone(),
            serde_json::to_value(&axis.values[i]).expect("axis values are plain JSON"),
        );
    }
    json!({ "indices": coord.0, "values": values })
}

/// A sensitivity report with grid coordinates spelled out as axis values.
fn resolved_report(space: &HyperSpace, r: &SensitivityReport) -> Value {
    let per_env: Map<String, Value> = r
        .per_env_argmax
        .iter()
        .map(|(env, coord)| (env.clone(), resolve_coord(space, coord)))
        .collect();
    json!({
        "algorithm": r.algorithm,
        "per_env_tuned": r.per_env_tuned,
        "cross_env_tuned": r.cross_env_tuned,
        "phi": r.phi,
        "eligible_count": r.eligible_count,
        "environments": r.env_set,
        "cross_env_argmax": resolve_coord(space, &r.cross_env_argmax),
        "per_env_argmax": per_env,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[command(flatten)]
    input: InputArgs,
}

fn cmd_ingest(args: &IngestArgs) -> Result<String> {
    let loaded = args.input.load()?;
    let space = loaded.runs.space();
    let mut axes = Map::new();
    for axis in space.axes() {
        axes.insert(
            axis.name.clone(),
            serde_json::to_value(&axis.values).expect("axis values are plain JSON"),
        );
    }
    let mut map = envelope(
        "ingest",
        Value::Object(args.input.config_json()),
        Some(loaded.digest.clone()),
    );
    map.insert("n_runs".into(), json!(loaded.runs.len()));
    map.insert("n_diverged".into(), json!(loaded.runs.n_diverged()));
    map.insert("algorithms".into(), json!(loaded.runs.algorithms()));
    map.insert("environments".into(), json!(loaded.runs.environments()));
    map.insert("axes".into(), Value::Object(axes));
    map.insert("n_cells".into(), json!(loaded.cells.len()));
    map.insert("n_retained".into(), json!(loaded.cells.retained_count()));
    map.insert("cells_digest".into(), Value::String(loaded.cells.digest()));
    Ok(to_json_text(&map))
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Write the per-cell score table as CSV here
    #[arg(long)]
    csv_out: Option<PathBuf>,
    /// Write the per-environment normalization bands as JSON here
    #[arg(long)]
    norms_out: Option<PathBuf>,
}

fn scores_csv(scores: &ScoreTable) -> String {
    let space = scores.space();
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["algorithm".to_string(), "environment".to_string()];
    header.extend(space.axes().iter().map(|a| a.name.clone()));
    header.push("gamma".into());
    wtr.write_record(&header).expect("writing to memory");
    for ((alg, env, coord), gamma) in scores.iter() {
        let mut row = vec![alg.clone(), env.clone()];
        for (axis, &i) in space.axes().iter().zip(&coord.0) {
            row.push(axis.values[i].to_string());
        }
        row.push(gamma.to_string());
        wtr.write_record(&row).expect("writing to memory");
    }
    String::from_utf8(wtr.into_inner().expect("writing to memory")).expect("csv is utf-8")
}

fn cmd_score(args: &ScoreArgs) -> Result<String> {
    let loaded = args.input.load()?;
    let (norms, scores) = args.input.scores(&loaded)?;
    if let Some(path) = &args.csv_out {
        write_text(path, &scores_csv(&scores))?;
    }
    if let Some(path) = &args.norms_out {
        let mut text = serde_json::to_string_pretty(&norms)?;
        text.push('\n');
        write_text(path, &text)?;
    }
    let mut map = envelope(
        "score",
        Value::Object(args.input.config_json()),
        Some(loaded.digest.clone()),
    );
    map.insert("n_scores".into(), json!(scores.len()));
    map.insert("n_cells".into(), json!(loaded.cells.len()));
    map.insert("n_retained".into(), json!(loaded.cells.retained_count()));
    map.insert("norms".into(), serde_json::to_value(&norms)?);
    Ok(to_json_text(&map))
}

#[derive(Debug, Args)]
struct SensitivityArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Algorithm to report on; repeatable, default all
    #[arg(long = "alg")]
    algs: Vec<String>,
    /// Bootstrap replicates; 0 disables intervals
    #[arg(long, default_value_t = 0)]
    bootstrap: usize,
    /// Two-sided miscoverage of the intervals
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Master seed for the bootstrap
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Reuse the full-data normalization bands inside replicates
    #[arg(long)]
    freeze_norms: bool,
    /// Also write the envelope JSON here (the plane command reads it)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_sensitivity(args: &SensitivityArgs) -> Result<String> {
    let loaded = args.input.load()?;
    let (_, scores) = args.input.scores(&loaded)?;
    let algs = select_algs(&args.algs, &loaded.runs)?;

    let reports: Vec<Value> = algs
        .iter()
        .map(|alg| Ok(resolved_report(scores.space(), &sensitivity(&scores, alg)?)))
        .collect::<Result<_>>()?;

    let mut config = args.input.config_json();
    config.insert("bootstrap".into(), json!(args.bootstrap));
    if args.bootstrap > 0 {
        config.insert("alpha".into(), json!(args.alpha));
        config.insert("seed".into(), json!(args.seed));
        config.insert("freeze_norms".into(), json!(args.freeze_norms));
    }
    let mut map = envelope(
        "sensitivity",
        Value::Object(config),
        Some(loaded.digest.clone()),
    );
    map.insert("reports".into(), Value::Array(reports));
    if args.bootstrap > 0 {
        let cfg = BootstrapConfig {
            replicates: args.bootstrap,
            alpha: args.alpha,
            seed: args.seed,
            freeze_norms: args.freeze_norms,
            div_threshold: args.input.div_threshold,
            q_lo: args.input.q_lo,
            q_hi: args.input.q_hi,
        };
        let intervals = bootstrap_metrics(&loaded.runs, &algs, &cfg)?;
        map.insert("intervals".into(), serde_json::to_value(&intervals)?);
    }
    let text = to_json_text(&map);
    if let Some(path) = &args.out {
        write_text(path, &text)?;
    }
    Ok(text)
}

#[derive(Debug, Args)]
struct LooArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Algorithm to report on; repeatable, default all
    #[arg(long = "alg")]
    algs: Vec<String>,
}

fn cmd_loo(args: &LooArgs) -> Result<String> {
    let loaded = args.input.load()?;
    let (_, scores) = args.input.scores(&loaded)?;
    let algs = select_algs(&args.algs, &loaded.runs)?;

    let full: Vec<Value> = algs
        .iter()
        .map(|alg| Ok(resolved_report(scores.space(), &sensitivity(&scores, alg)?)))
        .collect::<Result<_>>()?;
    let dropped = leave_one_out(&scores, &algs)?;
    let dropped_json: Map<String, Value> = dropped
        .iter()
        .map(|(env, reports)| {
            let rows: Vec<Value> = reports
                .iter()
                .map(|r| resolved_report(scores.space(), r))
                .collect();
            (env.clone(), Value::Array(rows))
        })
        .collect();

    let mut map = envelope(
        "loo",
        Value::Object(args.input.config_json()),
        Some(loaded.digest.clone()),
    );
    map.insert("full".into(), Value::Array(full));
    map.insert("dropped".into(), Value::Object(dropped_json));
    Ok(to_json_text(&map))
}

#[derive(Debug, Args)]
struct DimArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Algorithm to report on; repeatable, default all
    #[arg(long = "alg")]
    algs: Vec<String>,
    /// Fraction of the per-environment tuned score a subset must reach
    #[arg(long, default_value_t = 0.95)]
    dim_threshold: f64,
}

fn cmd_dimensionality(args: &DimArgs) -> Result<String> {
    let loaded = args.input.load()?;
    let (_, scores) = args.input.scores(&loaded)?;
    let algs = select_algs(&args.algs, &loaded.runs)?;

    let curves: Vec<Value> = algs
        .iter()
        .map(|alg| {
            let curve = dim_curve(&scores, alg, args.dim_threshold)?;
            Ok(serde_json::to_value(&curve)?)
        })
        .collect::<Result<_>>()?;

    let mut config = args.input.config_json();
    config.insert("dim_threshold".into(), json!(args.dim_threshold));
    let mut map = envelope(
        "dimensionality",
        Value::Object(config),
        Some(loaded.digest.clone()),
    );
    map.insert("curves".into(), Value::Array(curves));
    Ok(to_json_text(&map))
}

#[derive(Debug, Args)]
struct PlaneArgs {
    /// Sensitivity envelope JSON (from sensitivity --out); repeatable
    #[arg(long = "reports", required = true)]
    reports: Vec<PathBuf>,
    /// Label of the reference point; default the alphabetically first
    #[arg(long = "ref")]
    reference: Option<String>,
    /// Half-width of the boundary box around the reference
    #[arg(long, default_value_t = 0.0)]
    tol: f64,
    /// Where to write the SVG
    #[arg(long)]
    out: PathBuf,
    /// Also write the classified points as CSV here
    #[arg(long)]
    points_csv: Option<PathBuf>,
}

/// Pulls plane points out of saved sensitivity envelopes. Labels are
/// algorithm names and must be unique across all the files.
fn points_from_reports(paths: &[PathBuf]) -> Result<Vec<PlanePoint>> {
    let mut points: Vec<PlanePoint> = Vec::new();
    for path in paths {
        let doc: Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let reports = doc
            .get("reports")
            .and_then(|v| v.as_array())
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "{} has no reports array; expected sensitivity output",
                    path.display()
                ))
            })?;
        for r in reports {
            let label = r
                .get("algorithm")
                .and_then(|v| v.as_str())
                .ok_or_else(|| {
                    Error::InvalidConfig(format!("{}: report without algorithm", path.display()))
                })?
                .to_string();
            let phi = r.get("phi").and_then(|v| v.as_f64());
            let perf = r.get("per_env_tuned").and_then(|v| v.as_f64());
            let (Some(phi), Some(perf)) = (phi, perf) else {
                return Err(Error::InvalidConfig(format!(
                    "{}: report {label} lacks numeric phi and per_env_tuned",
                    path.display()
                )));
            };
            if points.iter().any(|p| p.label == label) {
                return Err(Error::InvalidConfig(format!(
                    "two reports share the label {label:?}"
                )));
            }
            let mut point = PlanePoint::new(label, phi, perf);
            if let Some(iv) = doc
                .get("intervals")
                .and_then(|m| m.get(&point.label))
                .cloned()
            {
                point.interval = Some(serde_json::from_value(iv)?);
            }
            points.push(point);
        }
    }
    if points.is_empty() {
        return Err(Error::InvalidConfig("no points to plot".into()));
    }
    points.sort_by(|a, b| a.label.cmp(&b.label));
    Ok(points)
}

/// Machine-readable companion to the SVG. Region names match the JSON
/// envelope; interval columns stay empty for points without intervals.
fn points_csv(points: &[PlanePoint], reference: &PlanePoint, tol: f64) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record([
        "label", "phi", "per_env_tuned", "region", "sens_lo", "sens_hi", "perf_lo", "perf_hi",
    ])
    .expect("writing to memory");
    for p in points {
        let region = classify_region(reference, p, tol).label().to_lowercase();
        let mut row = vec![
            p.label.clone(),
            p.phi.to_string(),
            p.perf.to_string(),
            region,
        ];
        match &p.interval {
            Some(iv) => row.extend([
                iv.sens_lo.to_string(),
                iv.sens_hi.to_string(),
                iv.perf_lo.to_string(),
                iv.perf_hi.to_string(),
            ]),
            None => row.extend([String::new(), String::new(), String::new(), String::new()]),
        }
        wtr.write_record(&row).expect("writing to memory");
    }
    String::from_utf8(wtr.into_inner().expect("writing to memory")).expect("csv is utf-8")
}

fn cmd_plane(args: &PlaneArgs) -> Result<String> {
    if !(args.tol >= 0.0 && args.tol.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "tolerance must be non-negative, got {}",
            args.tol
        )));
    }
    let points = points_from_reports(&args.reports)?;
    let reference = match &args.reference {
        Some(label) => points
            .iter()
            .find(|p| &p.label == label)
            .ok_or_else(|| Error::InvalidConfig(format!("no point labeled {label:?}")))?
            .clone(),
        None => points[0].clone(),
    };
    render_plane(&points, &reference, &args.out)?;
    if let Some(path) = &args.points_csv {
        write_text(path, &points_csv(&points, &reference, args.tol))?;
    }

    let rows: Vec<Value> = points
        .iter()
        .map(|p| {
            json!({
                "label": p.label,
                "phi": p.phi,
                "per_env_tuned": p.perf,
                "region": classify_region(&reference, p, args.tol),
            })
        })
        .collect();
    let mut map = envelope(
        "plane",
        json!({ "ref": reference.label, "tol": args.tol }),
        None,
    );
    map.insert("points".into(), Value::Array(rows));
    Ok(to_json_text(&map))
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Generator spec TOML
    #[arg(long)]
    spec: PathBuf,
    /// Master seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the run records (JSONL)
    #[arg(long)]
    out: PathBuf,
    /// Where to write the full ground truth JSON
    #[arg(long)]
    truth_out: Option<PathBuf>,
}

/// Writes records in the same JSONL dialect the loaders read, so generated
/// data round-trips through every other command.
fn runs_jsonl(runs: &RunSet) -> String {
    let space = runs.space();
    let mut text = String::new();
    for r in runs.records() {
        let mut m = Map::new();
        m.insert("alg".into(), Value::String(r.algorithm.clone()));
        m.insert("env".into(), Value::String(r.environment.clone()));
        m.insert("seed".into(), json!(r.seed));
        for (axis, &i) in space.axes().iter().zip(&r.setting.0) {
            m.insert(
                format!("hp.{}", axis.name),
                serde_json::to_value(&axis.values[i]).expect("axis values are plain JSON"),
            );
        }
        let perf = if r.perf.is_finite() {
            json!(r.perf)
        } else if r.perf.is_nan() {
            Value::String("nan".into())
        } else if r.perf > 0.0 {
            Value::String("inf".into())
        } else {
            Value::String("-inf".into())
        };
        m.insert("perf".into(), perf);
        if r.diverged {
            m.insert("diverged".into(), Value::Bool(true));
        }
        text.push_str(&serde_json::to_string(&Value::Object(m)).expect("plain JSON"));
        text.push('\n');
    }
    text
}

fn cmd_synth(args: &SynthArgs) -> Result<String> {
    let spec = SynthSpec::load(&args.spec)?;
    let (runs, truth) = generate(&spec, args.seed)?;
    write_text(&args.out, &runs_jsonl(&runs))?;
    if let Some(path) = &args.truth_out {
        let mut text = serde_json::to_string_pretty(&truth)?;
        text.push('\n');
        write_text(path, &text)?;
    }
    let mut map = envelope(
        "synth",
        json!({ "seed": args.seed }),
        Some(file_digest(&args.spec)?),
    );
    map.insert("n_runs".into(), json!(runs.len()));
    map.insert("n_diverged".into(), json!(runs.n_diverged()));
    map.insert(
        "truth".into(),
        json!({
            "algorithm": truth.algorithm,
            "per_env_tuned": truth.per_env_tuned,
            "cross_env_tuned": truth.cross_env_tuned,
            "phi": truth.phi,
            "d": truth.d,
        }),
    );
    Ok(to_json_text(&map))
}

#[derive(Debug, Args)]
struct TransformsArgs {
    #[command(subcommand)]
    action: TransformsAction,
}

#[derive(Debug, Subcommand)]
enum TransformsAction {
    /// Run the built-in numeric checks and report PASS or FAIL per check
    Selfcheck,
}

fn selfchecks() -> Vec<(&'static str, std::result::Result<(), String>)> {
    let mut out: Vec<(&'static str, std::result::Result<(), String>)> = Vec::new();

    out.push((
        "symlog_roundtrip",
        (|| {
            let mut x = 1e-6;
            while x < 1e6 {
                for v in [x, -x] {
                    let back = transforms::symexp(transforms::symlog(v));
                    if (back - v).abs() > 1e-9 * v.abs().max(1.0) {
                        return Err(format!("roundtrip of {v} gave {back}"));
                    }
                }
                x *= 3.7;
            }
            Ok(())
        })(),
    ));

    out.push((
        "symlog_odd",
        (|| {
            for v in [0.5, 1.0, 7.25, 1e4] {
                if transforms::symlog(-v) != -transforms::symlog(v) {
                    return Err(format!("asymmetry at {v}"));
                }
            }
            Ok(())
        })(),
    ));

    out.push((
        "zero_mean_batch",
        (|| {
            let out = transforms::zero_mean_normalize(&[3.0, 5.0, 10.0, 2.0], 1e-8)
                .map_err(|e| e.to_string())?;
            let mean = out.iter().sum::<f64>() / out.len() as f64;
            if mean.abs() > 1e-12 {
                return Err(format!("residual mean {mean}"));
            }
            Ok(())
        })(),
    ));

    out.push((
        "streaming_moments",
        (|| {
            let xs: Vec<f64> = (0..100).map(|i| ((i * 37) % 19) as f64 - 9.0).collect();
            let mut m = transforms::RunningMoments::new(1e-8);
            for &x in &xs {
                m.update(x);
            }
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
            if (m.mean() - mean).abs() > 1e-10 || (m.variance() - var).abs() > 1e-10 {
                return Err(format!(
                    "streaming ({}, {}) vs two-pass ({mean}, {var})",
                    m.mean(),
                    m.variance()
                ));
            }
            Ok(())
        })(),
    ));

    out.push((
        "percentile_scaler_first_batch",
        (|| {
            let returns: Vec<f64> = (0..=100).map(f64::from).collect();
            let mut s = transforms::PercentileScaler::new(0.99).map_err(|e| e.to_string())?;
            let scaled = s.scale(&returns, &[9.0]).map_err(|e| e.to_string())?;
            if scaled != vec![0.1] {
                return Err(format!("expected [0.1], got {scaled:?}"));
            }
            if s.band() != Some((5.0, 95.0)) {
                return Err(format!("band {:?}", s.band()));
            }
            Ok(())
        })(),
    ));

    out.push((
        "percentile_scaler_scale_invariance",
        (|| {
            let returns: Vec<f64> = (0..40).map(|i| (i as f64).sin() * 10.0).collect();
            let adv = [1.0, -2.0, 0.5];
            let base = {
                let mut s = transforms::PercentileScaler::new(0.95).map_err(|e| e.to_string())?;
                s.scale(&returns, &adv).map_err(|e| e.to_string())?
            };
            let scaled_input = {
                let big: Vec<f64> = returns.iter().map(|r| r * 1e3).collect();
                let adv_big: Vec<f64> = adv.iter().map(|a| a * 1e3).collect();
                let mut s = transforms::PercentileScaler::new(0.95).map_err(|e| e.to_string())?;
                s.scale(&big, &adv_big).map_err(|e| e.to_string())?
            };
            for (a, b) in base.iter().zip(&scaled_input) {
                if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                    return Err(format!("{a} vs {b}"));
                }
            }
            Ok(())
        })(),
    ));

    out.push((
        "region_labels",
        (|| {
            use crate::plane::Region;
            let r = PlanePoint::new("ref", 0.4, 0.5);
            let cases = [
                ((-0.1, 0.1), Region::R1),
                ((0.1, 0.2), Region::R2),
                ((-0.2, -0.1), Region::R3),
                ((0.2, 0.1), Region::R4),
                ((0.1, -0.1), Region::R5),
            ];
            for ((ds, dp), want) in cases {
                let p = PlanePoint::new("p", r.phi + ds, r.perf + dp);
                let got = classify_region(&r, &p, 0.0);
                if got != want {
                    return Err(format!("deltas ({ds}, {dp}) gave {got}"));
                }
            }
            Ok(())
        })(),
    ));

    out
}

fn cmd_selfcheck() -> (String, i32) {
    let mut text = String::new();
    let mut code = 0;
    for (name, result) in selfchecks() {
        match result {
            Ok(()) => text.push_str(&format!("selfcheck {name}: PASS\n")),
            Err(msg) => {
                text.push_str(&format!("selfcheck {name}: FAIL ({msg})\n"));
                code = 2;
            }
        }
    }
    (text, code)
}

fn dispatch(cli: Cli) -> Result<i32> {
    let text = match &cli.command {
        Command::Ingest(a) => cmd_ingest(a)?,
        Command::Score(a) => cmd_score(a)?,
        Command::Sensitivity(a) => cmd_sensitivity(a)?,
        Command::Loo(a) => cmd_loo(a)?,
        Command::Dimensionality(a) => cmd_dimensionality(a)?,
        Command::Plane(a) => cmd_plane(a)?,
        Command::Synth(a) => cmd_synth(a)?,
        Command::Transforms(t) => match t.action {
            TransformsAction::Selfcheck => {
                let (text, code) = cmd_selfcheck();
                print!("{text}");
                return Ok(code);
            }
        },
    };
    print!("{text}");
    Ok(0)
}

/// Parses and runs one invocation, returning the process exit code.
/// Callable in-process, so tests exercise exactly what the binary does.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_class()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn help_and_version_exit_zero() {
        assert_eq!(run_command(["hypersense", "--help"]), 0);
        assert_eq!(run_command(["hypersense", "--version"]), 0);
        assert_eq!(run_command(["hypersense", "score", "--help"]), 0);
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_command(["hypersense"]), 1);
        assert_eq!(run_command(["hypersense", "nonsense"]), 1);
        assert_eq!(run_command(["hypersense", "score"]), 1); // missing --runs
        assert_eq!(
            run_command(["hypersense", "score", "--runs", "x.jsonl", "--metric", "nope"]),
            1
        );
    }

    #[test]
    fn metric_parser_accepts_both_forms() {
        assert_eq!(parse_metric("auc").unwrap(), PerfMetric::Auc);
        assert_eq!(
            parse_metric("final:10").unwrap(),
            PerfMetric::FinalReturn { window: 10 }
        );
        assert!(parse_metric("final:0").is_err());
        assert!(parse_metric("median").is_err());
    }

    #[test]
    fn missing_input_file_exits_one() {
        assert_eq!(
            run_command(["hypersense", "ingest", "--runs", "/nonexistent/r.jsonl"]),
            1
        );
    }

    #[test]
    fn unknown_extension_needs_explicit_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("runs.dat");
        std::fs::write(&path, "").unwrap();
        let p = path.to_str().unwrap();
        assert_eq!(run_command(["hypersense", "ingest", "--runs", p]), 1);
    }

    #[test]
    fn selfcheck_passes() {
        let (text, code) = cmd_selfcheck();
        assert_eq!(code, 0, "{text}");
        assert!(text.lines().all(|l| l.ends_with("PASS")), "{text}");
        assert!(text.lines().count() >= 5);
    }

    #[test]
    fn algorithm_selection_validates_names() {
        use crate::data_model::RunRecord;
        use crate::space::AxisValue;
        let space = HyperSpace::new(vec![("a".into(), vec![AxisValue::Num(0.0)])]).unwrap();
        let recs = vec![RunRecord {
            algorithm: "ppo".into(),
            environment: "e".into(),
            setting: SettingCoord(vec![0]),
            seed: 0,
            perf: 1.0,
            diverged: false,
        }];
        let runs = RunSet::from_records(space, PerfMetric::Auc, recs).unwrap();
        assert_eq!(select_algs(&[], &runs).unwrap(), vec!["ppo".to_string()]);
        assert_eq!(
            select_algs(&["ppo".into()], &runs).unwrap(),
            vec!["ppo".to_string()]
        );
        assert!(select_algs(&["sac".into()], &runs).is_err());
    }
}
