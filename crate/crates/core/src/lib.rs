//! Quantifies how much a learning algorithm's reported performance
//! depends on per-environment hyperparameter tuning.
//!
//! The pipeline: load per-run results over a hyperparameter grid
//! ([`data_model`]), drop cells with too many diverged runs, normalize
//! cell means into each environment's percentile band ([`scoring`]),
//! then compare tuning per environment against committing to one setting
//! everywhere ([`sensitivity`]). [`dimensionality`] reports how many
//! axes that tuning actually needs, [`bootstrap`] puts seed-resampling
//! intervals on the estimates, and [`plane`] renders algorithms on the
//! performance-sensitivity plane. [`synthgen`] fabricates grids with
//! known answers, and [`transforms`] holds the streaming normalization
//! utilities whose scale-invariance motivates the whole exercise.
//!
//! Everything is deterministic: the same inputs, seeds, and thread
//! counts give byte-identical outputs.

pub mod bootstrap;
pub mod cli;
pub mod data_model;
pub mod dimensionality;
pub mod error;
pub mod plane;
pub mod report;
pub mod scoring;
pub mod sensitivity;
pub mod space;
pub mod synthgen;
pub mod transforms;

pub use bootstrap::{bootstrap_metrics, BootstrapConfig, IntervalPair};
pub use data_model::{
    build_cells, load_manifest, load_runs, CellTable, PerfMetric, RunFormat, RunRecord, RunSet,
};
pub use dimensionality::{dim_curve, effective_dimensionality, DimCurve, DimPoint};
pub use error::{Error, Result};
pub use plane::{classify_region, plane_svg, render_plane, PlanePoint, Region};
pub use scoring::{env_percentiles, normalize, EnvNorm, EnvNorms, ScoreTable};
pub use sensitivity::{leave_one_out, sensitivity, SensitivityReport};
pub use space::{Axis, AxisValue, HyperSpace, SettingCoord};
pub use synthgen::{generate, oracle_metrics, GroundTruth, SynthSpec};
