//! Experiment configuration files.
//!
//! A file holds the `[system]`, `[geometry]` and `[solver]` sections of
//! the core configuration plus an `[experiment]` section. Every section is
//! optional and every key defaults; unknown keys are rejected.

use std::path::{Path, PathBuf};

use irsbeam::{ConfigDraft, ConfigErrors, SystemConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "IRSBEAM_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Grid of total transmit powers in dBm.
    PowerSweep,
    /// Grid of surface counts `L`.
    IrsCountSweep,
    /// Grid of elements per surface `M`.
    IrsSizeSweep,
    /// Grid of user counts `K`; writes per-iteration traces.
    ConvergenceTrace,
    /// Grid of elements per surface `M`, always with the baseline.
    BaselineCompare,
}

impl ExperimentKind {
    pub fn id(self) -> &'static str {
        match self {
            ExperimentKind::PowerSweep => "power_sweep",
            ExperimentKind::IrsCountSweep => "irs_count",
            ExperimentKind::IrsSizeSweep => "irs_size",
            ExperimentKind::ConvergenceTrace => "convergence",
            ExperimentKind::BaselineCompare => "baseline_compare",
        }
    }

    pub fn x_label(self) -> &'static str {
        match self {
            ExperimentKind::PowerSweep => "P (dBm)",
            ExperimentKind::IrsCountSweep => "L",
            ExperimentKind::IrsSizeSweep | ExperimentKind::BaselineCompare => "M",
            ExperimentKind::ConvergenceTrace => "K",
        }
    }

    fn default_grid(self) -> Vec<f64> {
        match self {
            ExperimentKind::PowerSweep => vec![10.0, 20.0, 30.0],
            ExperimentKind::IrsCountSweep => vec![1.0, 2.0, 4.0, 8.0],
            ExperimentKind::IrsSizeSweep | ExperimentKind::BaselineCompare => vec![20.0, 60.0, 120.0],
            ExperimentKind::ConvergenceTrace => vec![2.0, 4.0, 6.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    /// Sweep values; empty means the kind's default grid.
    pub grid: Vec<f64>,
    pub trials: usize,
    /// Extra series over user counts, one per entry (surface-count sweeps).
    pub users: Option<Vec<usize>>,
    pub baseline: bool,
    pub baseline_draws: usize,
    /// Fill the `ms` column with wall-clock times. Off keeps outputs reproducible byte for byte.
    pub record_timing: bool,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::PowerSweep,
            grid: Vec::new(),
            trials: 1,
            users: None,
            baseline: false,
            baseline_draws: 50,
            record_timing: false,
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub system: irsbeam::model::SystemParams,
    pub geometry: irsbeam::model::GeometryParams,
    pub solver: irsbeam::model::SolverParams,
    pub experiment: Option<ExperimentSection>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn draft(&self) -> ConfigDraft {
        ConfigDraft {
            system: self.system.clone(),
            geometry: self.geometry.clone(),
            solver: self.solver.clone(),
        }
    }
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub grid: Vec<f64>,
    pub trials: usize,
    pub users: Option<Vec<usize>>,
    pub baseline: bool,
    pub baseline_draws: usize,
    pub record_timing: bool,
    pub base: SystemConfig,
    pub output_dir: PathBuf,
}

/// Command-line adjustments applied on top of a file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub kind: Option<ExperimentKind>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    /// Validates a file, then applies `overrides`. The output directory is
    /// taken from the override, then [`OUTPUT_DIR_ENV`], then the file, then `results`.
    pub fn from_file(file: &ConfigFile, overrides: &Overrides) -> Result<Self, CliError> {
        let mut errs = ConfigErrors::default();
        let mut section = file.experiment.clone().unwrap_or_default();
        if let Some(kind) = overrides.kind {
            if file.experiment.is_some() && section.kind != kind {
                errs.push(
                    "experiment.kind",
                    format!("this command runs {} but the file configures {}", kind.id(), section.kind.id()),
                );
            }
            if file.experiment.is_none() && kind == ExperimentKind::BaselineCompare {
                section.trials = 20;
            }
            section.kind = kind;
        }
        if let Some(t) = overrides.trials {
            section.trials = t;
        }
        let mut draft = file.draft();
        if let Some(seed) = overrides.seed {
            draft.system.seed = seed;
        }

        let grid = if section.grid.is_empty() {
            section.kind.default_grid()
        } else {
            section.grid.clone()
        };
        if section.trials == 0 {
            errs.push("experiment.trials", "must be ≥ 1");
        }
        if section.baseline_draws == 0 {
            errs.push("experiment.baseline_draws", "must be ≥ 1");
        }
        check_grid(section.kind, &grid, &mut errs);
        if let Some(users) = &section.users {
            if section.kind != ExperimentKind::IrsCountSweep {
                errs.push("experiment.users", "only applies to irs_count_sweep");
            }
            if users.is_empty() || users.contains(&0) {
                errs.push("experiment.users", "must be a non-empty list of positive counts");
            }
        }

        let base = match draft.validate() {
            Ok(cfg) => Some(cfg),
            Err(e) => {
                errs.0.extend(e.0);
                None
            }
        };
        // Each grid point must also yield a valid configuration.
        if let Some(cfg) = &base {
            for series in series_users(section.kind, section.users.as_deref()) {
                for &x in &grid {
                    if let Err(e) = point_config(cfg, section.kind, x, series) {
                        errs.0.extend(e.0);
                    }
                }
            }
        }
        if !errs.is_empty() {
            return Err(CliError::Config(errs));
        }

        let output_dir = overrides
            .output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .or(section.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("results"));
        Ok(Self {
            kind: section.kind,
            grid,
            trials: section.trials,
            users: section.users,
            baseline: section.baseline || section.kind == ExperimentKind::BaselineCompare,
            baseline_draws: section.baseline_draws,
            record_timing: section.record_timing,
            base: base.expect("validated"),
            output_dir,
        })
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        Self::from_file(&ConfigFile::load(path)?, overrides)
    }
}

fn check_grid(kind: ExperimentKind, grid: &[f64], errs: &mut ConfigErrors) {
    if grid.is_empty() {
        errs.push("experiment.grid", "must not be empty");
    }
    for &x in grid {
        if !x.is_finite() {
            errs.push("experiment.grid", format!("{x} is not finite"));
        } else if kind != ExperimentKind::PowerSweep && !(x >= 1.0 && x.fract() == 0.0) {
            errs.push("experiment.grid", format!("{x} must be a positive integer for {}", kind.id()));
        }
    }
}

/// User counts of every series; `None` means the base configuration's own.
pub(crate) fn series_users(kind: ExperimentKind, users: Option<&[usize]>) -> Vec<Option<usize>> {
    match (kind, users) {
        (ExperimentKind::IrsCountSweep, Some(u)) => u.iter().map(|&k| Some(k)).collect(),
        _ => vec![None],
    }
}

/// Most-square factorization `M = rows * cols` with `rows <= cols`.
pub fn irs_shape(m: usize) -> (usize, usize) {
    let mut rows = (m as f64).sqrt() as usize;
    while rows > 1 && !m.is_multiple_of(rows) {
        rows -= 1;
    }
    let rows = rows.max(1);
    (rows, m / rows)
}

/// Configuration at sweep value `x`, optionally with `users` users.
pub fn point_config(base: &SystemConfig, kind: ExperimentKind, x: f64, users: Option<usize>) -> Result<SystemConfig, ConfigErrors> {
    let mut d = base.to_draft();
    match kind {
        ExperimentKind::PowerSweep => d.system.total_power_dbm = x,
        ExperimentKind::IrsCountSweep => d.system.n_irs = x as usize,
        ExperimentKind::IrsSizeSweep | ExperimentKind::BaselineCompare => {
            let (rows, cols) = irs_shape(x as usize);
            d.system.irs_rows = rows;
            d.system.irs_cols = cols;
        }
        ExperimentKind::ConvergenceTrace => d.system.n_users = x as usize,
    }
    if let Some(k) = users {
        d.system.n_users = k;
    }
    // Per-user weights only fit the base user count.
    if d.system.n_users != base.n_users() {
        d.system.weights = None;
    }
    d.validate()
}
