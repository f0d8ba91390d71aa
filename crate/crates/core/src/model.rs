//! Shared domain types: system configuration, unit conversions, and the
//! three feasible blocks of the optimization (phases, beams, powers).
//!
//! Configuration is written in user-facing units (dBm, dB) through
//! [`ConfigDraft`] and becomes an immutable [`SystemConfig`] with linear
//! quantities after [`validate_config`].

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigErrors, Error, Result};

pub type C64 = Complex64;

/// Unit-modulus tolerance for [`PhaseVector`].
pub const UNIT_MODULUS_TOL: f64 = 1e-12;
/// Row-norm tolerance for [`BeamMatrix`].
pub const UNIT_ROW_TOL: f64 = 1e-12;
/// Relative slack on the power budget.
pub const BUDGET_RTOL: f64 = 1e-12;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts * 1e3).log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Which block is updated first inside one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageOrder {
    /// theta, then W, then p.
    #[default]
    BeamformingFirst,
    /// p, then theta, then W.
    PowerFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    pub n_bs_antennas: usize,
    pub irs_rows: usize,
    pub irs_cols: usize,
    pub n_irs: usize,
    pub n_users: usize,
    pub total_power_dbm: f64,
    pub noise_power_dbm: f64,
    /// Per-user weights; `None` means all ones.
    pub weights: Option<Vec<f64>>,
    pub path_loss_alpha_db: f64,
    pub path_loss_beta: f64,
    /// Variance of the log-normal shadowing term, in dB².
    pub shadowing_var_db2: f64,
    pub seed: u64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            n_bs_antennas: 32,
            irs_rows: 4,
            irs_cols: 5,
            n_irs: 2,
            n_users: 2,
            total_power_dbm: 30.0,
            noise_power_dbm: -85.0,
            weights: None,
            path_loss_alpha_db: 61.4,
            path_loss_beta: 20.0,
            shadowing_var_db2: 0.0,
            seed: 1,
        }
    }
}

/// 2-D deployment layout, in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryParams {
    /// Horizontal BS to first-IRS distance.
    pub irs_first_m: f64,
    /// Horizontal position of the last IRS when more than one is deployed.
    pub irs_last_m: f64,
    /// Vertical offset of the IRS line from the BS/user line.
    pub irs_vertical_m: f64,
    pub user_first_m: f64,
    pub user_spacing_m: f64,
}

impl Default for GeometryParams {
    fn default() -> Self {
        Self {
            irs_first_m: 11.0,
            irs_last_m: 50.0,
            irs_vertical_m: 1.0,
            user_first_m: 5.0,
            user_spacing_m: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    /// Stop threshold of the phase loop (bits/s/Hz).
    pub theta_tol: f64,
    /// Stop threshold of the beamformer loop (bits/s/Hz).
    pub w_tol: f64,
    /// Stop threshold of the outer alternating loop (bits/s/Hz).
    pub outer_tol: f64,
    pub max_inner_iters: usize,
    pub max_outer_iters: usize,
    pub armijo_initial_step: f64,
    pub armijo_shrink: f64,
    pub armijo_sigma: f64,
    pub armijo_max_backtracks: usize,
    pub pr_plus: bool,
    pub power_tol: f64,
    pub max_power_rounds: usize,
    pub stage_order: StageOrder,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            theta_tol: 1e-4,
            w_tol: 1e-4,
            outer_tol: 1e-3,
            max_inner_iters: 500,
            max_outer_iters: 50,
            armijo_initial_step: 1.0,
            armijo_shrink: 0.5,
            armijo_sigma: 1e-4,
            armijo_max_backtracks: 50,
            pr_plus: true,
            power_tol: 1e-7,
            max_power_rounds: 100,
            stage_order: StageOrder::BeamformingFirst,
        }
    }
}

/// Unvalidated configuration in user-facing units.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigDraft {
    pub system: SystemParams,
    pub geometry: GeometryParams,
    pub solver: SolverParams,
}

impl ConfigDraft {
    pub fn validate(self) -> std::result::Result<SystemConfig, ConfigErrors> {
        validate_config(self)
    }
}

/// Validated, immutable configuration. Powers are stored in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    draft: ConfigDraft,
    total_power: f64,
    noise_power: f64,
    weights: Vec<f64>,
}

impl SystemConfig {
    pub fn n_bs_antennas(&self) -> usize {
        self.draft.system.n_bs_antennas
    }
    pub fn irs_rows(&self) -> usize {
        self.draft.system.irs_rows
    }
    pub fn irs_cols(&self) -> usize {
        self.draft.system.irs_cols
    }
    /// Elements per IRS.
    pub fn irs_elements(&self) -> usize {
        self.irs_rows() * self.irs_cols()
    }
    pub fn n_irs(&self) -> usize {
        self.draft.system.n_irs
    }
    pub fn n_users(&self) -> usize {
        self.draft.system.n_users
    }
    /// Length of the stacked phase vector, `L * M`.
    pub fn theta_len(&self) -> usize {
        self.n_irs() * self.irs_elements()
    }
    /// Total power budget in watts.
    pub fn total_power(&self) -> f64 {
        self.total_power
    }
    /// Noise power in watts.
    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn path_loss_alpha_db(&self) -> f64 {
        self.draft.system.path_loss_alpha_db
    }
    pub fn path_loss_beta(&self) -> f64 {
        self.draft.system.path_loss_beta
    }
    pub fn shadowing_var_db2(&self) -> f64 {
        self.draft.system.shadowing_var_db2
    }
    pub fn seed(&self) -> u64 {
        self.draft.system.seed
    }
    pub fn geometry(&self) -> &GeometryParams {
        &self.draft.geometry
    }
    pub fn solver(&self) -> &SolverParams {
        &self.draft.solver
    }
    /// The draft this config was validated from; edit and re-validate to derive variants.
    pub fn draft(&self) -> &ConfigDraft {
        &self.draft
    }
    pub fn to_draft(&self) -> ConfigDraft {
        self.draft.clone()
    }
}

fn check_positive_count(errs: &mut ConfigErrors, field: &'static str, value: usize) {
    if value < 1 {
        errs.push(field, format!("{field} must be ≥ 1"));
    }
}

fn check_positive_real(errs: &mut ConfigErrors, field: &'static str, value: f64) {
    if !(value.is_finite() && value > 0.0) {
        errs.push(field, format!("{field} must be a positive finite number, got {value}"));
    }
}

fn convert_dbm(errs: &mut ConfigErrors, field: &'static str, dbm: f64) -> f64 {
    if !dbm.is_finite() {
        errs.push(field, format!("{field} must be finite, got {dbm}"));
        return f64::NAN;
    }
    let watts = dbm_to_watts(dbm);
    if !watts.is_finite() {
        errs.push(field, format!("{field} = {dbm} dBm overflows when converted to watts"));
    } else if watts <= 0.0 {
        errs.push(field, format!("{field} = {dbm} dBm underflows to zero watts"));
    }
    watts
}

/// Checks every invariant of the draft and converts it to linear units.
/// All violations are collected, not only the first.
pub fn validate_config(draft: ConfigDraft) -> std::result::Result<SystemConfig, ConfigErrors> {
    let mut errs = ConfigErrors::default();
    let s = &draft.system;
    check_positive_count(&mut errs, "n_bs_antennas", s.n_bs_antennas);
    check_positive_count(&mut errs, "irs_rows", s.irs_rows);
    check_positive_count(&mut errs, "irs_cols", s.irs_cols);
    check_positive_count(&mut errs, "n_irs", s.n_irs);
    check_positive_count(&mut errs, "n_users", s.n_users);

    let total_power = convert_dbm(&mut errs, "total_power_dbm", s.total_power_dbm);
    let noise_power = convert_dbm(&mut errs, "noise_power_dbm", s.noise_power_dbm);

    let weights = match &s.weights {
        None => vec![1.0; s.n_users],
        Some(w) => {
            if w.len() != s.n_users {
                errs.push(
                    "weights",
                    format!("expected {} weights (one per user), got {}", s.n_users, w.len()),
                );
            }
            if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                errs.push("weights", "weights must be finite and nonnegative");
            }
            w.clone()
        }
    };
    if s.n_users >= 1 && !weights.iter().any(|&x| x > 0.0) {
        errs.push("weights", "at least one positive weight is required");
    }

    if !s.path_loss_alpha_db.is_finite() {
        errs.push("path_loss_alpha_db", "must be finite");
    }
    if !s.path_loss_beta.is_finite() || s.path_loss_beta < 0.0 {
        errs.push("path_loss_beta", "must be finite and nonnegative");
    }
    if !s.shadowing_var_db2.is_finite() || s.shadowing_var_db2 < 0.0 {
        errs.push("shadowing_var_db2", "must be finite and nonnegative");
    }

    let g = &draft.geometry;
    for (field, v) in [
        ("irs_first_m", g.irs_first_m),
        ("irs_last_m", g.irs_last_m),
        ("irs_vertical_m", g.irs_vertical_m),
        ("user_first_m", g.user_first_m),
        ("user_spacing_m", g.user_spacing_m),
    ] {
        if !v.is_finite() {
            errs.push(field, format!("{field} must be finite"));
        }
    }
    if s.n_irs > 1 && g.irs_last_m <= g.irs_first_m {
        errs.push("irs_last_m", "must exceed irs_first_m when more than one IRS is deployed");
    }
    if s.n_users > 1 && g.user_spacing_m <= 0.0 {
        errs.push("user_spacing_m", "must be positive when more than one user is served");
    }

    let v = &draft.solver;
    check_positive_real(&mut errs, "theta_tol", v.theta_tol);
    check_positive_real(&mut errs, "w_tol", v.w_tol);
    check_positive_real(&mut errs, "outer_tol", v.outer_tol);
    check_positive_real(&mut errs, "power_tol", v.power_tol);
    check_positive_real(&mut errs, "armijo_initial_step", v.armijo_initial_step);
    check_positive_count(&mut errs, "max_inner_iters", v.max_inner_iters);
    check_positive_count(&mut errs, "max_outer_iters", v.max_outer_iters);
    check_positive_count(&mut errs, "armijo_max_backtracks", v.armijo_max_backtracks);
    check_positive_count(&mut errs, "max_power_rounds", v.max_power_rounds);
    if !(v.armijo_shrink > 0.0 && v.armijo_shrink < 1.0) {
        errs.push("armijo_shrink", "must lie in (0, 1)");
    }
    if !(v.armijo_sigma > 0.0 && v.armijo_sigma < 1.0) {
        errs.push("armijo_sigma", "must lie in (0, 1)");
    }

    if !errs.is_empty() {
        return Err(errs);
    }
    Ok(SystemConfig {
        draft,
        total_power,
        noise_power,
        weights,
    })
}

/// Stacked passive beamformer: `L * M` unit-modulus entries.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector(Array1<C64>);

impl PhaseVector {
    pub fn new(theta: Array1<C64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::Infeasible {
                what: "phase vector",
                detail: "empty".into(),
            });
        }
        if let Some((i, z)) = theta
            .iter()
            .enumerate()
            .find(|(_, z)| !((z.norm() - 1.0).abs() <= UNIT_MODULUS_TOL))
        {
            return Err(Error::Infeasible {
                what: "phase vector",
                detail: format!("|theta[{i}]| = {} is not unit modulus", z.norm()),
            });
        }
        Ok(Self(theta))
    }

    pub fn from_angles(angles: &[f64]) -> Result<Self> {
        Self::new(angles.iter().map(|&a| C64::from_polar(1.0, a)).collect())
    }

    /// All phases zero.
    pub fn ones(len: usize) -> Result<Self> {
        Self::new(Array1::from_elem(len, C64::new(1.0, 0.0)))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_array(&self) -> &Array1<C64> {
        &self.0
    }

    pub fn into_inner(self) -> Array1<C64> {
        self.0
    }
}

/// Active beamformer `W` (K x N); row k is `w_k^H` and has unit norm.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamMatrix(Array2<C64>);

impl BeamMatrix {
    pub fn new(w: Array2<C64>) -> Result<Self> {
        if w.nrows() == 0 || w.ncols() == 0 {
            return Err(Error::Infeasible {
                what: "beam matrix",
                detail: format!("shape {:?} has an empty axis", w.dim()),
            });
        }
        for (k, row) in w.rows().into_iter().enumerate() {
            let norm = row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if !((norm - 1.0).abs() <= UNIT_ROW_TOL) {
                return Err(Error::Infeasible {
                    what: "beam matrix",
                    detail: format!("row {k} has norm {norm}"),
                });
            }
        }
        Ok(Self(w))
    }

    /// Normalizes every row; fails if a row is zero.
    pub fn from_unnormalized(mut w: Array2<C64>) -> Result<Self> {
        for (k, mut row) in w.rows_mut().into_iter().enumerate() {
            let norm = row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::Infeasible {
                    what: "beam matrix",
                    detail: format!("row {k} cannot be normalized (norm {norm})"),
                });
            }
            row.mapv_inplace(|z| z / norm);
        }
        Self::new(w)
    }

    pub fn n_users(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_antennas(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_array(&self) -> &Array2<C64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<C64> {
        self.0
    }
}

/// Per-user transmit powers in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerVector(Array1<f64>);

impl PowerVector {
    /// Accepts `p` iff every entry is positive and the sum respects `budget`.
    pub fn new(p: Array1<f64>, budget: f64) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::Infeasible {
                what: "power vector",
                detail: "empty".into(),
            });
        }
        if let Some((k, v)) = p.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Infeasible {
                what: "power vector",
                detail: format!("p[{k}] = {v} is not strictly positive"),
            });
        }
        let total: f64 = p.sum();
        if total > budget * (1.0 + BUDGET_RTOL) {
            return Err(Error::Infeasible {
                what: "power vector",
                detail: format!("total {total} exceeds budget {budget}"),
            });
        }
        Ok(Self(p))
    }

    /// Equal split `P / K`.
    pub fn uniform(n_users: usize, budget: f64) -> Result<Self> {
        Self::new(Array1::from_elem(n_users, budget / n_users as f64), budget)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_array(&self) -> &Array1<f64> {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.sum()
    }
}
