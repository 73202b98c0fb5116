//! Run records, performance metrics, and per-cell aggregation.
//!
//! The raw unit of data is one training run: an algorithm, an environment,
//! a grid coordinate, a seed, and an outcome (scalar or learning curve).
//! Outcomes collapse to a scalar through a [`PerfMetric`]. Runs sharing
//! (algorithm, environment, setting) form a cell; [`build_cells`] averages
//! each cell's non-diverged runs and drops cells whose divergence fraction
//! exceeds the threshold.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::space::{AxisValue, HyperSpace, SettingCoord};

/// How a learning curve collapses to one number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerfMetric {
    /// Mean over all curve entries.
    Auc,
    /// Sum of the last `window` entries. Deliberately a sum, not a mean:
    /// it weights late performance by how much of the run it covers.
    FinalReturn { window: usize },
}

impl PerfMetric {
    pub fn validate(&self) -> Result<()> {
        if let PerfMetric::FinalReturn { window: 0 } = self {
            return Err(Error::InvalidConfig(
                "final-return window must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

impl fmt::Display for PerfMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PerfMetric::Auc => write!(f, "auc"),
            PerfMetric::FinalReturn { window } => write!(f, "final:{window}"),
        }
    }
}

impl FromStr for PerfMetric {
    type Err = Error;

    /// Accepts `auc` or `final:<window>`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "auc" {
            return Ok(PerfMetric::Auc);
        }
        if let Some(w) = s.strip_prefix("final:") {
            let window: usize = w.parse().map_err(|_| {
                Error::InvalidConfig(format!("bad final-return window {w:?}"))
            })?;
            let m = PerfMetric::FinalReturn { window };
            m.validate()?;
            return Ok(m);
        }
        Err(Error::InvalidConfig(format!(
            "unknown metric {s:?}; expected auc or final:<window>"
        )))
    }
}

/// Raw outcome of one run.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Scalar(f64),
    Curve(Vec<f64>),
}

/// Collapses an outcome under a metric. Scalars pass through either metric
/// untouched; curves must be non-empty and at least `window` long.
pub fn perf_from_outcome(outcome: &Outcome, metric: PerfMetric) -> Result<f64> {
    metric.validate()?;
    match outcome {
        Outcome::Scalar(v) => Ok(*v),
        Outcome::Curve(c) if c.is_empty() => Err(Error::EmptyCurve),
        Outcome::Curve(c) => match metric {
            PerfMetric::Auc => Ok(c.iter().sum::<f64>() / c.len() as f64),
            PerfMetric::FinalReturn { window } => {
                if window > c.len() {
                    Err(Error::WindowTooLarge {
                        window,
                        len: c.len(),
                    })
                } else {
                    Ok(c[c.len() - window..].iter().sum())
                }
            }
        },
    }
}

/// One training run, already collapsed to a scalar performance.
/// Non-finite performance implies `diverged`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub environment: String,
    pub setting: SettingCoord,
    pub seed: u64,
    pub perf: f64,
    pub diverged: bool,
}

/// A validated collection of runs over one grid.
#[derive(Debug, Clone)]
pub struct RunSet {
    space: HyperSpace,
    metric: PerfMetric,
    records: Vec<RunRecord>,
}

impl RunSet {
    /// Validates coordinates, rejects duplicate (alg, env, setting, seed)
    /// keys, and forces `diverged` on non-finite performance.
    pub fn from_records(
        space: HyperSpace,
        metric: PerfMetric,
        records: Vec<RunRecord>,
    ) -> Result<Self> {
        metric.validate()?;
        let mut seen: BTreeSet<(String, String, SettingCoord, u64)> = BTreeSet::new();
        let mut records = records;
        for r in &mut records {
            if !space.contains(&r.setting) {
                return Err(Error::InvalidSpace(format!(
                    "setting {:?} is outside the {}-axis grid",
                    r.setting.0,
                    space.axis_count()
                )));
            }
            if !r.perf.is_finite() {
                r.diverged = true;
            }
            let key = (
                r.algorithm.clone(),
                r.environment.clone(),
                r.setting.clone(),
                r.seed,
            );
            if !seen.insert(key) {
                return Err(Error::DuplicateRun {
                    path: "<records>".into(),
                    line: 0,
                    alg: r.algorithm.clone(),
                    env: r.environment.clone(),
                    seed: r.seed,
                });
            }
        }
        Ok(RunSet {
            space,
            metric,
            records,
        })
    }

    pub fn space(&self) -> &HyperSpace {
        &self.space
    }

    pub fn metric(&self) -> PerfMetric {
        self.metric
    }

    pub fn records(&self) -> &[RunRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_diverged(&self) -> usize {
        self.records.iter().filter(|r| r.diverged).count()
    }

    pub fn algorithms(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.records.iter().map(|r| r.algorithm.as_str()).collect();
        set.into_iter().map(String::from).collect()
    }

    pub fn environments(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self
            .records
            .iter()
            .map(|r| r.environment.as_str())
            .collect();
        set.into_iter().map(String::from).collect()
    }
}

/// Input file format for run tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunFormat {
    Jsonl,
    Csv,
}

impl RunFormat {
    pub fn from_path(path: &Path) -> Option<RunFormat> {
        match path.extension()?.to_str()? {
            "jsonl" | "ndjson" => Some(RunFormat::Jsonl),
            "csv" => Some(RunFormat::Csv),
            _ => None,
        }
    }
}

struct RawRow {
    line: usize,
    alg: String,
    env: String,
    seed: u64,
    hp: BTreeMap<String, AxisValue>,
    outcome: Outcome,
    diverged: bool,
}

fn malformed(path: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::MalformedRow {
        path: path.to_string(),
        line,
        msg: msg.into(),
    }
}

/// Numbers stay numbers; strings that parse as finite floats become
/// numbers too (CSV offers nothing else); everything left is text.
pub(crate) fn axis_value_from_str(s: &str) -> AxisValue {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => AxisValue::Num(v),
        _ => AxisValue::Text(s.to_string()),
    }
}

fn axis_value_from_json(v: &serde_json::Value) -> Option<AxisValue> {
    match v {
        serde_json::Value::Number(n) => n.as_f64().map(AxisValue::Num),
        serde_json::Value::String(s) => Some(axis_value_from_str(s)),
        _ => None,
    }
}

/// JSON has no Infinity literal, so performance values may arrive as
/// strings like "inf" or "nan".
fn f64_from_json(v: &serde_json::Value) -> Option<f64> {
    match v {
        serde_json::Value::Number(n) => n.as_f64(),
        serde_json::Value::String(s) => s.trim().parse::<f64>().ok(),
        _ => None,
    }
}

fn parse_jsonl<R: BufRead>(reader: R, path: &str) -> Result<Vec<RawRow>> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| malformed(path, lineno, format!("invalid json: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| malformed(path, lineno, "row is not a json object"))?;

        let alg = obj
            .get("alg")
            .and_then(|v| v.as_str())
            .ok_or_else(|| malformed(path, lineno, "missing string field alg"))?
            .to_string();
        let env = obj
            .get("env")
            .and_then(|v| v.as_str())
            .ok_or_else(|| malformed(path, lineno, "missing string field env"))?
            .to_string();
        let seed = obj
            .get("seed")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| malformed(path, lineno, "missing non-negative integer field seed"))?;

        let mut hp = BTreeMap::new();
        for (k, v) in obj {
            if let Some(axis) = k.strip_prefix("hp.") {
                if axis.is_empty() {
                    return Err(malformed(path, lineno, "empty axis name in hp. column"));
                }
                let av = axis_value_from_json(v).ok_or_else(|| {
                    malformed(path, lineno, format!("axis {axis} has non-scalar value"))
                })?;
                hp.insert(axis.to_string(), av);
            }
        }
        if hp.is_empty() {
            return Err(malformed(path, lineno, "row declares no hp.<axis> fields"));
        }

        let perf = obj.get("perf");
        let curve = obj.get("curve");
        let outcome = match (perf, curve) {
            (Some(_), Some(_)) => {
                return Err(malformed(path, lineno, "row has both perf and curve"));
            }
            (None, None) => {
                return Err(malformed(path, lineno, "row has neither perf nor curve"));
            }
            (Some(p), None) => Outcome::Scalar(f64_from_json(p).ok_or_else(|| {
                malformed(path, lineno, "perf is not a number")
            })?),
            (None, Some(c)) => {
                let arr = c
                    .as_array()
                    .ok_or_else(|| malformed(path, lineno, "curve is not an array"))?;
                let mut points = Vec::with_capacity(arr.len());
                for v in arr {
                    points.push(f64_from_json(v).ok_or_else(|| {
                        malformed(path, lineno, "curve entry is not a number")
                    })?);
                }
                Outcome::Curve(points)
            }
        };

        let diverged = match obj.get("diverged") {
            None => false,
            Some(serde_json::Value::Bool(b)) => *b,
            Some(_) => return Err(malformed(path, lineno, "diverged is not a boolean")),
        };

        rows.push(RawRow {
            line: lineno,
            alg,
            env,
            seed,
            hp,
            outcome,
            diverged,
        });
    }
    Ok(rows)
}

fn parse_bool_cell(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "" | "0" | "false" => Some(false),
        "1" | "true" => Some(true),
        _ => None,
    }
}

fn parse_csv<R: std::io::Read>(reader: R, path: &str) -> Result<Vec<RawRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);

    if col("curve").is_some() {
        return Err(malformed(
            path,
            1,
            "csv runs cannot carry curves; use jsonl or pre-collapsed perf",
        ));
    }
    let alg_col = col("alg").ok_or_else(|| malformed(path, 1, "missing column alg"))?;
    let env_col = col("env").ok_or_else(|| malformed(path, 1, "missing column env"))?;
    let seed_col = col("seed").ok_or_else(|| malformed(path, 1, "missing column seed"))?;
    let perf_col = col("perf").ok_or_else(|| malformed(path, 1, "missing column perf"))?;
    let div_col = col("diverged");
    let hp_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.strip_prefix("hp.").map(|a| (i, a.to_string())))
        .collect();
    if hp_cols.is_empty() {
        return Err(malformed(path, 1, "no hp.<axis> columns declared"));
    }
    for (_, a) in &hp_cols {
        if a.is_empty() {
            return Err(malformed(path, 1, "empty axis name in hp. column"));
        }
    }

    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let lineno = i + 2; // header is line 1
        let record = record?;
        let field = |idx: usize| -> Result<&str> {
            record
                .get(idx)
                .ok_or_else(|| malformed(path, lineno, "short row"))
        };
        let seed_text = field(seed_col)?;
        let seed: u64 = seed_text.trim().parse().map_err(|_| {
            malformed(path, lineno, format!("bad seed {seed_text:?}"))
        })?;
        let perf_text = field(perf_col)?;
        let perf: f64 = perf_text.trim().parse().map_err(|_| {
            malformed(path, lineno, format!("bad perf {perf_text:?}"))
        })?;
        let diverged = match div_col {
            None => false,
            Some(c) => parse_bool_cell(field(c)?).ok_or_else(|| {
                malformed(path, lineno, "diverged must be true/false/1/0/empty")
            })?,
        };
        let mut hp = BTreeMap::new();
        for (idx, axis) in &hp_cols {
            hp.insert(axis.clone(), axis_value_from_str(field(*idx)?));
        }
        rows.push(RawRow {
            line: lineno,
            alg: field(alg_col)?.to_string(),
            env: field(env_col)?.to_string(),
            seed,
            hp,
            outcome: Outcome::Scalar(perf),
            diverged,
        });
    }
    Ok(rows)
}

fn rows_to_runset(
    rows: Vec<RawRow>,
    metric: PerfMetric,
    manifest: Option<&HyperSpace>,
    path: &str,
) -> Result<RunSet> {
    if rows.is_empty() {
        return Err(Error::EmptyRunSet);
    }

    // All rows must agree on the axis set; the first row is the reference.
    let axis_names: BTreeSet<&String> = rows[0].hp.keys().collect();
    for row in &rows[1..] {
        let names: BTreeSet<&String> = row.hp.keys().collect();
        if names != axis_names {
            return Err(malformed(
                path,
                row.line,
                "hp.<axis> fields differ from the first row",
            ));
        }
    }

    let space = match manifest {
        Some(m) => {
            let declared: BTreeSet<&String> =
                m.axes().iter().map(|a| &a.name).collect();
            if declared != axis_names {
                return Err(malformed(
                    path,
                    rows[0].line,
                    format!(
                        "manifest declares axes {:?} but rows carry {:?}",
                        declared.iter().collect::<Vec<_>>(),
                        axis_names.iter().collect::<Vec<_>>()
                    ),
                ));
            }
            m.clone()
        }
        None => {
            let mut values: BTreeMap<&String, BTreeSet<AxisValue>> = BTreeMap::new();
            for row in &rows {
                for (axis, v) in &row.hp {
                    values.entry(axis).or_default().insert(v.clone());
                }
            }
            HyperSpace::new(
                values
                    .into_iter()
                    .map(|(name, vals)| (name.clone(), vals.into_iter().collect()))
                    .collect(),
            )?
        }
    };

    let mut seen: BTreeSet<(String, String, SettingCoord, u64)> = BTreeSet::new();
    let mut records = Vec::with_capacity(rows.len());
    for row in rows {
        let setting = space.coord_of(&row.hp).map_err(|e| match e {
            Error::OffGridValue { axis, value, .. } => Error::OffGridValue {
                path: path.to_string(),
                line: row.line,
                axis,
                value,
            },
            other => other,
        })?;
        let perf = perf_from_outcome(&row.outcome, metric)?;
        let diverged = row.diverged || !perf.is_finite();
        let key = (row.alg.clone(), row.env.clone(), setting.clone(), row.seed);
        if !seen.insert(key) {
            return Err(Error::DuplicateRun {
                path: path.to_string(),
                line: row.line,
                alg: row.alg,
                env: row.env,
                seed: row.seed,
            });
        }
        records.push(RunRecord {
            algorithm: row.alg,
            environment: row.env,
            setting,
            seed: row.seed,
            perf,
            diverged,
        });
    }
    RunSet::from_records(space, metric, records)
}

/// Parses runs from an open reader. `path_label` only decorates errors.
pub fn read_runs<R: BufRead>(
    reader: R,
    format: RunFormat,
    metric: PerfMetric,
    manifest: Option<&HyperSpace>,
    path_label: &str,
) -> Result<RunSet> {
    metric.validate()?;
    let rows = match format {
        RunFormat::Jsonl => parse_jsonl(reader, path_label)?,
        RunFormat::Csv => parse_csv(reader, path_label)?,
    };
    rows_to_runset(rows, metric, manifest, path_label)
}

/// Loads a run table from disk. Without a manifest the grid is inferred
/// from the values present; with one, every value must sit on the declared
/// grid.
pub fn load_runs(
    path: &Path,
    format: RunFormat,
    metric: PerfMetric,
    manifest: Option<&HyperSpace>,
) -> Result<RunSet> {
    let file = File::open(path)?;
    read_runs(
        BufReader::new(file),
        format,
        metric,
        manifest,
        &path.display().to_string(),
    )
}

/// Parses a grid manifest:
///
/// ```toml
/// [axes]
/// lambda = [0.1, 0.3, 0.5, 0.7, 0.9]
/// tau = [0.001, 0.01, 0.1, 1.0, 10.0]
/// ```
pub fn manifest_from_toml(text: &str) -> Result<HyperSpace> {
    let doc: toml::Table = text.parse()?;
    let axes = doc
        .get("axes")
        .and_then(|v| v.as_table())
        .ok_or_else(|| Error::InvalidSpace("manifest has no [axes] table".into()))?;
    let mut pairs = Vec::with_capacity(axes.len());
    for (name, v) in axes {
        let arr = v.as_array().ok_or_else(|| {
            Error::InvalidSpace(format!("axis {name} must be an array of values"))
        })?;
        let mut values = Vec::with_capacity(arr.len());
        for item in arr {
            values.push(axis_value_from_toml(name, item)?);
        }
        pairs.push((name.clone(), values));
    }
    HyperSpace::new(pairs)
}

pub(crate) fn axis_value_from_toml(axis: &str, v: &toml::Value) -> Result<AxisValue> {
    match v {
        toml::Value::Integer(i) => Ok(AxisValue::Num(*i as f64)),
        toml::Value::Float(f) => Ok(AxisValue::Num(*f)),
        toml::Value::String(s) => Ok(axis_value_from_str(s)),
        other => Err(Error::InvalidSpace(format!(
            "axis {axis} has unsupported value {other}"
        ))),
    }
}

pub fn load_manifest(path: &Path) -> Result<HyperSpace> {
    manifest_from_toml(&std::fs::read_to_string(path)?)
}

/// One (algorithm, environment, setting) aggregate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub n_runs: usize,
    pub n_diverged: usize,
    /// Mean performance over non-diverged runs; `None` when every run
    /// diverged.
    pub mean_perf: Option<f64>,
    /// False when the divergence fraction exceeded the threshold or no run
    /// survived.
    pub retained: bool,
}

pub type CellKey = (String, String, SettingCoord);

/// All cells for one run set, with the divergence threshold baked in.
#[derive(Debug, Clone, PartialEq)]
pub struct CellTable {
    space: HyperSpace,
    threshold: f64,
    cells: BTreeMap<CellKey, Cell>,
}

/// Groups runs into cells, averages survivors, applies the divergence
/// filter. A cell is retained iff at least one run survived and
/// `n_diverged / n_runs <= threshold`; the comparison is non-strict, so a
/// fraction exactly at the threshold survives.
pub fn build_cells(runs: &RunSet, threshold: f64) -> Result<CellTable> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidConfig(format!(
            "divergence threshold must lie in [0, 1], got {threshold}"
        )));
    }
    if runs.is_empty() {
        return Err(Error::EmptyRunSet);
    }

    let mut grouped: BTreeMap<CellKey, (Vec<f64>, usize, usize)> = BTreeMap::new();
    for r in runs.records() {
        let key = (
            r.algorithm.clone(),
            r.environment.clone(),
            r.setting.clone(),
        );
        let entry = grouped.entry(key).or_insert((Vec::new(), 0, 0));
        entry.1 += 1;
        if r.diverged {
            entry.2 += 1;
        } else {
            entry.0.push(r.perf);
        }
    }

    let mut cells = BTreeMap::new();
    for (key, (mut survivors, n_runs, n_diverged)) in grouped {
        // Summing in sorted order makes the mean independent of record
        // order in the input file.
        survivors.sort_by(|a, b| a.partial_cmp(b).expect("survivor perfs are finite"));
        let mean_perf = if survivors.is_empty() {
            None
        } else {
            Some(survivors.iter().sum::<f64>() / survivors.len() as f64)
        };
        let frac = n_diverged as f64 / n_runs as f64;
        let retained = !survivors.is_empty() && frac <= threshold;
        cells.insert(
            key,
            Cell {
                n_runs,
                n_diverged,
                mean_perf,
                retained,
            },
        );
    }

    Ok(CellTable {
        space: runs.space().clone(),
        threshold,
        cells,
    })
}

impl CellTable {
    pub(crate) fn from_parts(
        space: HyperSpace,
        threshold: f64,
        cells: BTreeMap<CellKey, Cell>,
    ) -> Self {
        CellTable {
            space,
            threshold,
            cells,
        }
    }

    pub fn space(&self) -> &HyperSpace {
        &self.space
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CellKey, &Cell)> {
        self.cells.iter()
    }

    pub fn get(&self, alg: &str, env: &str, setting: &SettingCoord) -> Option<&Cell> {
        // Key by owned strings to keep BTreeMap lookups simple; tables are
        // small enough that the clone never shows up in profiles.
        self.cells
            .get(&(alg.to_string(), env.to_string(), setting.clone()))
    }

    pub fn environments(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.cells.keys().map(|(_, e, _)| e.as_str()).collect();
        set.into_iter().map(String::from).collect()
    }

    pub fn algorithms(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.cells.keys().map(|(a, _, _)| a.as_str()).collect();
        set.into_iter().map(String::from).collect()
    }

    pub fn retained_count(&self) -> usize {
        self.cells.values().filter(|c| c.retained).count()
    }

    /// Means of retained cells in one environment, across every algorithm
    /// and setting, in key order. This is the pool the percentile band is
    /// estimated from.
    pub fn retained_means(&self, env: &str) -> Vec<f64> {
        self.cells
            .iter()
            .filter(|((_, e, _), c)| e == env && c.retained)
            .map(|(_, c)| c.mean_perf.expect("retained cells have a mean"))
            .collect()
    }

    /// Content hash covering the grid, the threshold, and every cell.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"cells-v1\n");
        h.update(self.threshold.to_bits().to_le_bytes());
        for axis in self.space.axes() {
            h.update(axis.name.as_bytes());
            h.update([0x1f]);
            for v in &axis.values {
                h.update(v.to_string().as_bytes());
                h.update([0x1e]);
            }
            h.update([0x0a]);
        }
        for ((alg, env, coord), cell) in &self.cells {
            h.update(alg.as_bytes());
            h.update([0x1f]);
            h.update(env.as_bytes());
            h.update([0x1f]);
            for &i in &coord.0 {
                h.update((i as u64).to_le_bytes());
            }
            h.update([0x1f]);
            h.update((cell.n_runs as u64).to_le_bytes());
            h.update((cell.n_diverged as u64).to_le_bytes());
            h.update(
                cell.mean_perf
                    .map(|m| m.to_bits())
                    .unwrap_or(u64::MAX)
                    .to_le_bytes(),
            );
            h.update([cell.retained as u8]);
            h.update([0x0a]);
        }
        let out = h.finalize();
        let mut hex = String::with_capacity(64);
        for b in out {
            hex.push_str(&format!("{b:02x}"));
        }
        hex
    }
}
