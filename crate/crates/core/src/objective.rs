//! Weighted sum-rate and its Wirtinger gradients.
//!
//! With `A[k][i] = v_k^H w_i`, `T_k = sum_i |A[k][i]|^2 p_i + sigma^2` and
//! `I_k = T_k - |A[k][k]|^2 p_k`, the objective is
//! `f = sum_k omega_k (log2 T_k - log2 I_k)`. Writing
//! `c[k][i] = omega_k p_i (1/T_k - [i != k]/I_k) / ln 2`, the conjugate
//! derivatives are
//!
//! * `df/dtheta* = sum_{k,i} c[k][i] A[k][i] conj(b_{k,i})` where `A[k][i] = theta^T b_{k,i}`;
//! * row `i` of `df/dW*` is `sum_k c[k][i] conj(A[k][i]) v_k^H`.

use std::f64::consts::LN_2;

use ndarray::{Array, Array1, Array2, Dimension};

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::model::{BeamMatrix, PhaseVector, PowerVector, SystemConfig, C64};

/// Rows `v_k^H` (K x N) of the end-to-end channel for a fixed phase vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannels {
    rows: Array2<C64>,
}

impl EffectiveChannels {
    /// Wraps precomputed rows `v_k^H`.
    pub fn from_rows(rows: Array2<C64>) -> Self {
        Self { rows }
    }

    pub fn rows(&self) -> &Array2<C64> {
        &self.rows
    }

    pub fn n_users(&self) -> usize {
        self.rows.nrows()
    }

    /// `v_k^H w_i` for all pairs, shape K x K.
    pub fn cross_gains(&self, w: &BeamMatrix) -> Result<Array2<C64>> {
        if w.as_array().dim() != self.rows.dim() {
            return Err(Error::dim(
                "beam matrix",
                format!("{:?}", self.rows.dim()),
                format!("{:?}", w.as_array().dim()),
            ));
        }
        Ok(cross_gains(&self.rows, w.as_array()))
    }
}

/// `A = U W^H` i.e. `A[k][i] = sum_n U[k][n] conj(W[i][n])`.
fn cross_gains(u: &Array2<C64>, w: &Array2<C64>) -> Array2<C64> {
    let wh = w.t().mapv(|z| z.conj());
    u.dot(&wh)
}

fn check_theta(ch: &ChannelSet, theta: &Array1<C64>) -> Result<()> {
    if theta.len() != ch.theta_len() {
        return Err(Error::dim("phase vector", ch.theta_len(), theta.len()));
    }
    Ok(())
}

fn check_beam(ch: &ChannelSet, w: &Array2<C64>) -> Result<()> {
    let expected = (ch.n_users(), ch.n_antennas());
    if w.dim() != expected {
        return Err(Error::dim("beam matrix", format!("{expected:?}"), format!("{:?}", w.dim())));
    }
    Ok(())
}

fn check_power(k: usize, p: &Array1<f64>) -> Result<()> {
    if p.len() != k {
        return Err(Error::dim("power vector", k, p.len()));
    }
    Ok(())
}

fn effective_rows(ch: &ChannelSet, theta: &Array1<C64>) -> Array2<C64> {
    let (k, n) = (ch.n_users(), ch.n_antennas());
    let mut rows = Array2::<C64>::zeros((k, n));
    for ki in 0..k {
        rows.row_mut(ki).assign(&theta.dot(ch.cascade(ki)));
    }
    rows
}

/// `v_k^H = sum_l h_{l,k}^H diag(theta_l) G_l`, evaluated as `theta^T C_k`.
pub fn effective_channels(ch: &ChannelSet, theta: &PhaseVector) -> Result<EffectiveChannels> {
    check_theta(ch, theta.as_array())?;
    Ok(EffectiveChannels {
        rows: effective_rows(ch, theta.as_array()),
    })
}

/// Noise and weights pulled from a config.
#[derive(Debug, Clone, PartialEq)]
pub struct RateParams {
    pub weights: Vec<f64>,
    pub noise_power: f64,
}

impl RateParams {
    pub fn from_config(cfg: &SystemConfig) -> Self {
        Self {
            weights: cfg.weights().to_vec(),
            noise_power: cfg.noise_power(),
        }
    }
}

/// Per-user totals `T_k`, interference-plus-noise `I_k`, and the value.
struct RateTerms {
    total: Vec<f64>,
    interference: Vec<f64>,
    value: f64,
}

fn rate_terms(a: &Array2<C64>, p: &Array1<f64>, params: &RateParams) -> RateTerms {
    let k = a.nrows();
    let mut total = Vec::with_capacity(k);
    let mut interference = Vec::with_capacity(k);
    let mut value = 0.0;
    for ki in 0..k {
        let mut rest = params.noise_power;
        for i in (0..k).filter(|&i| i != ki) {
            rest += a[[ki, i]].norm_sqr() * p[i];
        }
        let signal = a[[ki, ki]].norm_sqr() * p[ki];
        value += params.weights[ki] * (signal / rest).ln_1p() / LN_2;
        total.push(rest + signal);
        interference.push(rest);
    }
    RateTerms {
        total,
        interference,
        value,
    }
}

/// `c[k][i] = omega_k p_i (1/T_k - [i != k]/I_k) / ln 2`.
fn gradient_coefficients(terms: &RateTerms, p: &Array1<f64>, params: &RateParams) -> Array2<f64> {
    let k = p.len();
    Array2::from_shape_fn((k, k), |(ki, i)| {
        let mut c = 1.0 / terms.total[ki];
        if i != ki {
            c -= 1.0 / terms.interference[ki];
        }
        params.weights[ki] * p[i] * c / LN_2
    })
}

pub fn sinr(eff: &EffectiveChannels, w: &BeamMatrix, p: &PowerVector, sigma2: f64) -> Result<Array1<f64>> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise power must be positive, got {sigma2}")));
    }
    let a = eff.cross_gains(w)?;
    check_power(eff.n_users(), p.as_array())?;
    let p = p.as_array();
    let k = p.len();
    Ok(Array1::from_shape_fn(k, |ki| {
        let signal = a[[ki, ki]].norm_sqr() * p[ki];
        let interf: f64 = (0..k).filter(|&i| i != ki).map(|i| a[[ki, i]].norm_sqr() * p[i]).sum();
        signal / (interf + sigma2)
    }))
}

/// `sum_k omega_k log2(1 + SINR_k)` in bits/s/Hz.
pub fn weighted_sum_rate(
    theta: &PhaseVector,
    w: &BeamMatrix,
    p: &PowerVector,
    ch: &ChannelSet,
    cfg: &SystemConfig,
) -> Result<f64> {
    let eff = effective_channels(ch, theta)?;
    let s = sinr(&eff, w, p, cfg.noise_power())?;
    Ok(s.iter().zip(cfg.weights()).map(|(s, wk)| wk * s.ln_1p() / LN_2).sum())
}

/// The phase subproblem with `W` and `p` frozen.
///
/// Precomputes `B_k = C_k W^H` (LM x K) so that `A[k][i] = theta^T B_k[:, i]`.
#[derive(Debug, Clone)]
pub struct PhaseObjective {
    b: Vec<Array2<C64>>,
    power: Array1<f64>,
    params: RateParams,
}

impl PhaseObjective {
    pub fn new(ch: &ChannelSet, w: &BeamMatrix, p: &PowerVector, params: RateParams) -> Result<Self> {
        check_beam(ch, w.as_array())?;
        check_power(ch.n_users(), p.as_array())?;
        let wh = w.as_array().t().mapv(|z| z.conj());
        let b = (0..ch.n_users()).map(|k| ch.cascade(k).dot(&wh)).collect();
        Ok(Self {
            b,
            power: p.as_array().clone(),
            params,
        })
    }

    pub fn theta_len(&self) -> usize {
        self.b[0].nrows()
    }

    fn gains(&self, theta: &Array1<C64>) -> Array2<C64> {
        let k = self.b.len();
        let mut a = Array2::<C64>::zeros((k, k));
        for (ki, bk) in self.b.iter().enumerate() {
            a.row_mut(ki).assign(&theta.dot(bk));
        }
        a
    }

    pub fn value(&self, theta: &Array1<C64>) -> f64 {
        rate_terms(&self.gains(theta), &self.power, &self.params).value
    }

    /// Wirtinger gradient `df/dtheta*`.
    pub fn gradient(&self, theta: &Array1<C64>) -> Array1<C64> {
        let a = self.gains(theta);
        let terms = rate_terms(&a, &self.power, &self.params);
        let c = gradient_coefficients(&terms, &self.power, &self.params);
        let k = self.b.len();
        // grad = sum_k conj(B_k) * (c[k] ∘ A[k]) with the K-vector as weights.
        let mut grad = Array1::<C64>::zeros(theta.len());
        for ki in 0..k {
            let coef: Array1<C64> = (0..k).map(|i| a[[ki, i]] * c[[ki, i]]).collect();
            let bk = &self.b[ki];
            for (m, row) in bk.rows().into_iter().enumerate() {
                let s: C64 = row.iter().zip(coef.iter()).map(|(b, q)| b.conj() * q).sum();
                grad[m] += s;
            }
        }
        grad
    }
}

/// The beamformer subproblem with `theta` and `p` frozen.
#[derive(Debug, Clone)]
pub struct BeamObjective {
    rows: Array2<C64>,
    power: Array1<f64>,
    params: RateParams,
}

impl BeamObjective {
    pub fn new(ch: &ChannelSet, theta: &PhaseVector, p: &PowerVector, params: RateParams) -> Result<Self> {
        let eff = effective_channels(ch, theta)?;
        Self::from_effective(&eff, p, params)
    }

    pub fn from_effective(eff: &EffectiveChannels, p: &PowerVector, params: RateParams) -> Result<Self> {
        check_power(eff.n_users(), p.as_array())?;
        Ok(Self {
            rows: eff.rows.clone(),
            power: p.as_array().clone(),
            params,
        })
    }

    pub fn value(&self, w: &Array2<C64>) -> f64 {
        rate_terms(&cross_gains(&self.rows, w), &self.power, &self.params).value
    }

    /// Wirtinger gradient `df/dW*`, shape K x N.
    pub fn gradient(&self, w: &Array2<C64>) -> Array2<C64> {
        let a = cross_gains(&self.rows, w);
        let terms = rate_terms(&a, &self.power, &self.params);
        let c = gradient_coefficients(&terms, &self.power, &self.params);
        // Row i = sum_k c[k][i] conj(A[k][i]) U[k].
        let k = a.nrows();
        let mix = Array2::from_shape_fn((k, k), |(i, ki)| a[[ki, i]].conj() * c[[ki, i]]);
        mix.dot(&self.rows)
    }
}

pub fn grad_theta(
    theta: &PhaseVector,
    w: &BeamMatrix,
    p: &PowerVector,
    ch: &ChannelSet,
    cfg: &SystemConfig,
) -> Result<Array1<C64>> {
    check_theta(ch, theta.as_array())?;
    let obj = PhaseObjective::new(ch, w, p, RateParams::from_config(cfg))?;
    Ok(obj.gradient(theta.as_array()))
}

pub fn grad_w(
    theta: &PhaseVector,
    w: &BeamMatrix,
    p: &PowerVector,
    ch: &ChannelSet,
    cfg: &SystemConfig,
) -> Result<Array2<C64>> {
    check_beam(ch, w.as_array())?;
    let obj = BeamObjective::new(ch, theta, p, RateParams::from_config(cfg))?;
    Ok(obj.gradient(w.as_array()))
}

/// Central-difference Wirtinger gradient
/// `df/dx* = (df/dRe x + j df/dIm x) / 2`, one coordinate at a time.
pub fn fd_gradient<D, F>(f: F, x: &Array<C64, D>, h: f64) -> Array<C64, D>
where
    D: Dimension,
    F: Fn(&Array<C64, D>) -> f64,
{
    let mut probe = x.as_standard_layout().into_owned();
    let mut out = Array::<C64, D>::zeros(x.raw_dim());
    for idx in 0..x.len() {
        let orig = probe.as_slice().expect("standard layout")[idx];
        let mut eval = |delta: C64| {
            probe.as_slice_mut().expect("standard layout")[idx] = orig + delta;
            f(&probe)
        };
        let d_re = (eval(C64::new(h, 0.0)) - eval(C64::new(-h, 0.0))) / (2.0 * h);
        let d_im = (eval(C64::new(0.0, h)) - eval(C64::new(0.0, -h))) / (2.0 * h);
        probe.as_slice_mut().expect("standard layout")[idx] = orig;
        out.as_slice_mut().expect("standard layout")[idx] = C64::new(d_re, d_im) * 0.5;
    }
    out
}
