//! Random instances for tests and benchmarks.
//!
//! Channels built here keep the LOS rank-one structure but use gains whose
//! SINRs land in a moderate range, which exercises the nonlinear part of
//! the rate expressions more than the deployment path loss does.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::{bs_irs_channel, irs_user_channel, ChannelSet};
use crate::model::{BeamMatrix, ConfigDraft, PhaseVector, PowerVector, SystemConfig, C64};

/// Config with the given sizes and otherwise default parameters.
pub fn small_config(n_irs: usize, irs_rows: usize, irs_cols: usize, n_users: usize, n_antennas: usize) -> SystemConfig {
    let mut d = ConfigDraft::default();
    d.system.n_irs = n_irs;
    d.system.irs_rows = irs_rows;
    d.system.irs_cols = irs_cols;
    d.system.n_users = n_users;
    d.system.n_bs_antennas = n_antennas;
    d.validate().expect("fixture config is valid")
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

fn random_angle<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)
}

/// Rank-one channels with random angles and gains in `[1e-4, 1e-3]`.
pub fn random_channels(cfg: &SystemConfig, seed: u64) -> ChannelSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mx, my, n) = (cfg.irs_rows(), cfg.irs_cols(), cfg.n_bs_antennas());
    let mut g = Vec::new();
    let mut gammas = Vec::new();
    let mut h = Vec::new();
    let mut rhos = Vec::new();
    for _ in 0..cfg.n_irs() {
        let gamma = C64::from_polar(log_uniform(&mut rng, 1e-4, 1e-3), random_angle(&mut rng));
        let (a, b, c) = (random_angle(&mut rng), random_angle(&mut rng), random_angle(&mut rng));
        g.push(bs_irs_channel(gamma, a, b, c, mx, my, n));
        gammas.push(gamma);
        let mut hs = Vec::new();
        let mut rs = Vec::new();
        for _ in 0..cfg.n_users() {
            let rho = C64::from_polar(log_uniform(&mut rng, 1e-4, 1e-3), random_angle(&mut rng));
            let (a, b) = (random_angle(&mut rng), random_angle(&mut rng));
            hs.push(irs_user_channel(rho, a, b, mx, my));
            rs.push(rho);
        }
        h.push(hs);
        rhos.push(rs);
    }
    ChannelSet::new(g, h, gammas, rhos, None).expect("fixture channels are structured")
}

pub fn random_phases<R: Rng + ?Sized>(len: usize, rng: &mut R) -> PhaseVector {
    let angles: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    PhaseVector::from_angles(&angles).expect("unit modulus by construction")
}

pub fn random_complex_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<C64> {
    Array2::from_shape_fn((rows, cols), |_| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    })
}

pub fn random_complex_vector<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Array1<C64> {
    Array1::from_shape_fn(len, |_| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    })
}

pub fn random_beams<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> BeamMatrix {
    BeamMatrix::from_unnormalized(random_complex_matrix(rows, cols, rng)).expect("nonzero rows almost surely")
}

/// Strictly positive powers spending a random share in `[0.3, 1]` of the budget.
pub fn random_powers<R: Rng + ?Sized>(n_users: usize, budget: f64, rng: &mut R) -> PowerVector {
    let raw: Vec<f64> = (0..n_users).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let share = rng.random_range(0.3..1.0);
    PowerVector::new(Array1::from(raw).mapv(|x| x / total * budget * share), budget).expect("within budget")
}

pub fn random_feasible<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> (PhaseVector, BeamMatrix, PowerVector) {
    (
        random_phases(cfg.theta_len(), rng),
        random_beams(cfg.n_users(), cfg.n_bs_antennas(), rng),
        random_powers(cfg.n_users(), cfg.total_power(), rng),
    )
}
