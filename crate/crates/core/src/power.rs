//! Power allocation for fixed beamformers.
//!
//! For each user the rate is `log2(T_k(p)) - log2(I_k(p))` with posynomials
//! `T_k = sigma^2 + sum_i c_ki p_i` (all links) and `I_k = T_k - a_k p_k`.
//! Around an iterate `p̄`, `T_k` is bounded below by its best local monomial
//! `prod_j (u_j(p) / l_j)^{l_j}` with `l_j = u_j(p̄) / T_k(p̄)`. In log-power
//! variables `y = ln p` the resulting surrogate is affine minus a sum of
//! log-sum-exp terms, hence concave, and it touches the true objective at
//! `p̄`. Maximizing it repeatedly gives a monotone sequence.

use std::f64::consts::LN_2;

use ndarray::{Array1, Array2};

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::model::{BeamMatrix, PhaseVector, PowerVector, SystemConfig, BUDGET_RTOL};
use crate::objective::effective_channels;

/// Lower bound on every power, relative to the budget.
pub const POWER_FLOOR_REL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSubproblem {
    /// `a_k = |v_k^H w_k|^2`.
    signal: Array1<f64>,
    /// `b[k][i] = |v_k^H w_i|^2` off the diagonal; the diagonal is zero.
    cross: Array2<f64>,
    noise: f64,
    weights: Vec<f64>,
    budget: f64,
}

impl PowerSubproblem {
    pub fn new(signal: Array1<f64>, mut cross: Array2<f64>, noise: f64, weights: Vec<f64>, budget: f64) -> Result<Self> {
        let k = signal.len();
        if k == 0 || cross.dim() != (k, k) || weights.len() != k {
            return Err(Error::dim("power subproblem", k, format!("{:?} / {}", cross.dim(), weights.len())));
        }
        if signal.iter().chain(cross.iter()).any(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidArgument("channel gains must be finite and nonnegative".into()));
        }
        if !(noise > 0.0 && noise.is_finite()) || !(budget > 0.0 && budget.is_finite()) {
            return Err(Error::InvalidArgument("noise and budget must be positive".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
        }
        for i in 0..k {
            cross[[i, i]] = 0.0;
        }
        Ok(Self {
            signal,
            cross,
            noise,
            weights,
            budget,
        })
    }

    pub fn n_users(&self) -> usize {
        self.signal.len()
    }
    pub fn signal(&self) -> &Array1<f64> {
        &self.signal
    }
    pub fn cross(&self) -> &Array2<f64> {
        &self.cross
    }
    pub fn noise(&self) -> f64 {
        self.noise
    }
    pub fn budget(&self) -> f64 {
        self.budget
    }
    pub fn floor(&self) -> f64 {
        POWER_FLOOR_REL * self.budget
    }

    /// `c_ki`: signal gain on the diagonal, cross gains elsewhere.
    fn link(&self, k: usize, i: usize) -> f64 {
        if k == i {
            self.signal[k]
        } else {
            self.cross[[k, i]]
        }
    }

    fn interference(&self, k: usize, p: &[f64]) -> f64 {
        self.noise + (0..p.len()).filter(|&i| i != k).map(|i| self.cross[[k, i]] * p[i]).sum::<f64>()
    }

    /// Weighted sum-rate in bits/s/Hz at powers `p`.
    pub fn objective(&self, p: &[f64]) -> f64 {
        (0..self.n_users())
            .map(|k| self.weights[k] * (self.signal[k] * p[k] / self.interference(k, p)).ln_1p() / LN_2)
            .sum()
    }

    pub fn gradient(&self, p: &[f64]) -> Vec<f64> {
        let k_users = self.n_users();
        let mut grad = vec![0.0; k_users];
        for k in 0..k_users {
            let interf = self.interference(k, p);
            let total = interf + self.signal[k] * p[k];
            let wk = self.weights[k] / LN_2;
            for (j, g) in grad.iter_mut().enumerate() {
                let c = self.link(k, j);
                let mut d = c / total;
                if j != k {
                    d -= c / interf;
                }
                *g += wk * d;
            }
        }
        grad
    }

    fn check_start(&self, p0: &PowerVector) -> Result<()> {
        if p0.len() != self.n_users() {
            return Err(Error::dim("initial powers", self.n_users(), p0.len()));
        }
        if p0.as_array().iter().any(|p| !(*p > 0.0)) {
            return Err(Error::InvalidArgument("initial powers must be strictly positive".into()));
        }
        if p0.total() > self.budget * (1.0 + BUDGET_RTOL) {
            return Err(Error::InvalidArgument("initial powers exceed the budget".into()));
        }
        Ok(())
    }

    fn to_power_vector(&self, p: &[f64]) -> Result<PowerVector> {
        PowerVector::new(Array1::from(p.to_vec()), self.budget)
    }

    /// Projected-gradient stationarity measure, relative to the budget.
    pub fn kkt_residual(&self, p: &[f64]) -> f64 {
        let g = self.gradient(p);
        let scale = g.iter().fold(0.0, |a: f64, x| a.max(x.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let t = self.budget / scale;
        let moved: Vec<f64> = p.iter().zip(&g).map(|(p, g)| p + t * g).collect();
        let proj = project_capped(&moved, self.budget, self.floor());
        p.iter().zip(&proj).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / self.budget
    }
}

/// Gains of the power subproblem at fixed `theta`, `W`.
pub fn extract_subproblem(theta: &PhaseVector, w: &BeamMatrix, ch: &ChannelSet, cfg: &SystemConfig) -> Result<PowerSubproblem> {
    let eff = effective_channels(ch, theta)?;
    let a = eff.cross_gains(w)?;
    let k = a.nrows();
    let signal = Array1::from_shape_fn(k, |i| a[[i, i]].norm_sqr());
    let cross = Array2::from_shape_fn((k, k), |(ki, i)| if ki == i { 0.0 } else { a[[ki, i]].norm_sqr() });
    PowerSubproblem::new(signal, cross, cfg.noise_power(), cfg.weights().to_vec(), cfg.total_power())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerMethod {
    Condensation,
    ProjectedGradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub power: PowerVector,
    pub objective: f64,
    /// Condensation rounds or gradient iterations.
    pub iterations: usize,
    pub kkt_residual: f64,
    pub method: PowerMethod,
}

/// Euclidean projection onto `{p : p_i >= floor, sum p <= budget}`.
fn project_capped(x: &[f64], budget: f64, floor: f64) -> Vec<f64> {
    let clipped: Vec<f64> = x.iter().map(|v| v.max(floor)).collect();
    if clipped.iter().sum::<f64>() <= budget {
        return clipped;
    }
    // Find tau with sum max(x_i - tau, floor) = budget by bisection, then
    // recompute tau exactly on the active set.
    let (mut lo, mut hi) = (0.0, x.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b)) - floor);
    let spent = |tau: f64| x.iter().map(|v| (v - tau).max(floor)).sum::<f64>();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if spent(mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let active: Vec<usize> = (0..x.len()).filter(|&i| x[i] - hi > floor).collect();
    if active.is_empty() {
        return vec![budget / x.len() as f64; x.len()];
    }
    let floored = (x.len() - active.len()) as f64 * floor;
    let tau = (active.iter().map(|&i| x[i]).sum::<f64>() - (budget - floored)) / active.len() as f64;
    let mut out: Vec<f64> = x.iter().map(|v| (v - tau).max(floor)).collect();
    let total: f64 = out.iter().sum();
    if total > budget {
        let s = budget / total;
        out.iter_mut().for_each(|v| *v = (*v * s).max(floor));
    }
    out
}

/// Uniform rescale onto the budget. Scaling all powers up never lowers any SINR.
fn fill_budget(p: &mut [f64], budget: f64) {
    let total: f64 = p.iter().sum();
    if total > 0.0 {
        p.iter_mut().for_each(|v| *v = budget * (*v / total));
    }
}

/// Concave surrogate in `y = ln p` around a linearization point.
struct Surrogate<'a> {
    sub: &'a PowerSubproblem,
    /// Monomial exponents `l[k][i]` of the condensed `T_k`.
    exponents: Array2<f64>,
}

impl<'a> Surrogate<'a> {
    fn at(sub: &'a PowerSubproblem, p_bar: &[f64]) -> Self {
        let k = sub.n_users();
        let mut exponents = Array2::zeros((k, k));
        for ki in 0..k {
            let total = sub.interference(ki, p_bar) + sub.signal[ki] * p_bar[ki];
            for i in 0..k {
                exponents[[ki, i]] = sub.link(ki, i) * p_bar[i] / total;
            }
        }
        Self { sub, exponents }
    }

    fn value(&self, y: &[f64], p: &[f64]) -> f64 {
        let k = y.len();
        let mut value = 0.0;
        for ki in 0..k {
            let wk = self.sub.weights[ki] / LN_2;
            if wk == 0.0 {
                continue;
            }
            let affine: f64 = (0..k).map(|i| self.exponents[[ki, i]] * y[i]).sum();
            value += wk * (affine - self.sub.interference(ki, p).ln());
        }
        value
    }

    /// Surrogate value up to an additive constant, with gradient and Hessian.
    fn eval(&self, y: &[f64]) -> (f64, Vec<f64>, Array2<f64>) {
        let k = y.len();
        let p: Vec<f64> = y.iter().map(|v| v.exp()).collect();
        let mut value = 0.0;
        let mut grad = vec![0.0; k];
        let mut hess = Array2::zeros((k, k));
        for ki in 0..k {
            let wk = self.sub.weights[ki] / LN_2;
            if wk == 0.0 {
                continue;
            }
            let interf = self.sub.interference(ki, &p);
            let share: Vec<f64> = (0..k)
                .map(|i| if i == ki { 0.0 } else { self.sub.cross[[ki, i]] * p[i] / interf })
                .collect();
            let affine: f64 = (0..k).map(|i| self.exponents[[ki, i]] * y[i]).sum();
            value += wk * (affine - interf.ln());
            for i in 0..k {
                grad[i] += wk * (self.exponents[[ki, i]] - share[i]);
                for j in 0..k {
                    let d = if i == j { share[i] } else { 0.0 };
                    hess[[i, j]] -= wk * (d - share[i] * share[j]);
                }
            }
        }
        (value, grad, hess)
    }
}

/// Cholesky solve of `A x = b` for symmetric positive definite `A`.
fn solve_spd(a: &Array2<f64>, b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for r in 0..j {
                s -= l[[i, r]] * l[[j, r]];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    let mut z = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|r| l[[i, r]] * z[r]).sum();
        z[i] = (b[i] - s) / l[[i, i]];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|r| l[[r, i]] * x[r]).sum();
        x[i] = (z[i] - s) / l[[i, i]];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Barrier objective `s(y) + mu * (ln(P - sum e^y) + sum ln(e^y - floor))`.
fn barrier_value(s: &Surrogate<'_>, y: &[f64], mu: f64) -> Option<f64> {
    let floor = s.sub.floor();
    let p: Vec<f64> = y.iter().map(|v| v.exp()).collect();
    let slack = s.sub.budget - p.iter().sum::<f64>();
    if !(slack > 0.0) || p.iter().any(|v| !(*v > floor)) {
        return None;
    }
    let gaps: f64 = p.iter().map(|v| (v - floor).ln()).sum();
    Some(s.value(y, &p) + mu * (slack.ln() + gaps))
}

fn barrier_eval(s: &Surrogate<'_>, y: &[f64], mu: f64) -> Option<(f64, Vec<f64>, Array2<f64>)> {
    let budget = s.sub.budget;
    let floor = s.sub.floor();
    let p: Vec<f64> = y.iter().map(|v| v.exp()).collect();
    let slack = budget - p.iter().sum::<f64>();
    if !(slack > 0.0) || p.iter().any(|v| !(*v > floor)) {
        return None;
    }
    let (mut value, mut grad, mut hess) = s.eval(y);
    value += mu * slack.ln();
    for i in 0..y.len() {
        let gap = p[i] - floor;
        value += mu * gap.ln();
        grad[i] += mu * (-p[i] / slack + p[i] / gap);
        hess[[i, i]] -= mu * (p[i] / slack + floor * p[i] / (gap * gap));
        for j in 0..y.len() {
            hess[[i, j]] -= mu * p[i] * p[j] / (slack * slack);
        }
    }
    Some((value, grad, hess))
}

/// Maximizes the condensed surrogate over the feasible set by a sequence
/// of damped Newton solves on the log-barrier problem. Returns powers.
fn maximize_surrogate(s: &Surrogate<'_>, start: &[f64], mu0: f64) -> Option<Vec<f64>> {
    let k = start.len();
    let mut y: Vec<f64> = start.iter().map(|v| v.ln()).collect();
    let mut mu = mu0;
    while mu * (k as f64 + 1.0) > 1e-11 {
        for _ in 0..50 {
            let (value, grad, hess) = barrier_eval(s, &y, mu)?;
            let neg = hess.mapv(|v| -v);
            let step = solve_spd(&neg, &grad)?;
            let decrement: f64 = grad.iter().zip(&step).map(|(g, d)| g * d).sum();
            if decrement < 0.0 || !decrement.is_finite() {
                return None;
            }
            if decrement / 2.0 < 1e-14 {
                break;
            }
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = y.iter().zip(&step).map(|(y, d)| y + t * d).collect();
                if let Some(v) = barrier_value(s, &trial, mu) {
                    if v >= value + 0.25 * t * decrement {
                        y = trial;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        mu *= 0.1;
    }
    Some(y.iter().map(|v| v.exp()).collect())
}

/// Initial barrier weight once the iterate is already near a surrogate optimum.
const WARM_MU: f64 = 1e-4;

/// Pulls `p` strictly inside the feasible set.
fn interior(p: &[f64], budget: f64) -> Vec<f64> {
    let floor = POWER_FLOOR_REL * budget;
    p.iter().map(|v| ((1.0 - 1e-6) * v).max(2.0 * floor)).collect()
}

/// Successive condensation from several starts (`p0`, the equal split, each
/// single-user vertex and each leave-one-out split), keeping the best
/// result. Falls back to [`allocate_power_pg`] if an inner solve fails.
pub fn allocate_power_gp(sub: &PowerSubproblem, p0: &PowerVector, tol: f64) -> Result<PowerAllocation> {
    allocate_power_gp_rounds(sub, p0, tol, 100)
}

pub fn allocate_power_gp_rounds(sub: &PowerSubproblem, p0: &PowerVector, tol: f64, max_rounds: usize) -> Result<PowerAllocation> {
    sub.check_start(p0)?;
    // Screen every start with a loose tolerance, then refine the best one.
    let (screen_tol, screen_rounds) = (tol.max(1e-4), max_rounds.min(10));
    let mut best = condense(sub, p0, screen_tol, screen_rounds)?;
    for start in start_points(sub.n_users(), sub.budget) {
        let out = condense(sub, &start, screen_tol, screen_rounds)?;
        if out.objective > best.objective {
            best = out;
        }
    }
    let screened = best.iterations;
    let mut refined = condense(sub, &best.power, tol, max_rounds)?;
    refined.iterations += screened;
    Ok(refined)
}

fn start_points(k: usize, budget: f64) -> Vec<PowerVector> {
    if k == 1 {
        return Vec::new();
    }
    let low = 1e-3;
    let mut starts = vec![vec![1.0 / k as f64; k]];
    for i in 0..k {
        let mut v = vec![low; k];
        v[i] = 1.0 - low * (k - 1) as f64;
        starts.push(v);
    }
    if k == 3 {
        for i in 0..k {
            let mut v = vec![(1.0 - low) / (k - 1) as f64; k];
            v[i] = low;
            starts.push(v);
        }
    }
    starts
        .into_iter()
        .map(|v| PowerVector::new(Array1::from(v).mapv(|x| x * budget * (1.0 - 1e-9)), budget).expect("within budget"))
        .collect()
}

/// Successive condensation from `p0` until the true objective improves by
/// less than `tol`; every round is non-decreasing.
pub fn condense(sub: &PowerSubproblem, p0: &PowerVector, tol: f64, max_rounds: usize) -> Result<PowerAllocation> {
    sub.check_start(p0)?;
    let budget = sub.budget;
    let mut p: Vec<f64> = p0.as_array().to_vec();
    let mut f = sub.objective(&p);
    let mut rounds = 0;
    while rounds < max_rounds {
        rounds += 1;
        let surrogate = Surrogate::at(sub, &p);
        let mu0 = if rounds == 1 { 1.0 } else { WARM_MU };
        let Some(mut next) = maximize_surrogate(&surrogate, &interior(&p, budget), mu0) else {
            return allocate_power_pg(sub, p0, tol);
        };
        fill_budget(&mut next, budget);
        let f_next = sub.objective(&next);
        if !(f_next >= f) {
            break;
        }
        let gain = f_next - f;
        p = next;
        f = f_next;
        if gain < tol {
            break;
        }
    }
    Ok(PowerAllocation {
        power: sub.to_power_vector(&p)?,
        objective: f,
        iterations: rounds,
        kkt_residual: sub.kkt_residual(&p),
        method: PowerMethod::Condensation,
    })
}

/// Projected gradient ascent on `{p >= floor, sum p <= P}` with backtracking.
pub fn allocate_power_pg(sub: &PowerSubproblem, p0: &PowerVector, tol: f64) -> Result<PowerAllocation> {
    sub.check_start(p0)?;
    let (budget, floor) = (sub.budget, sub.floor());
    let mut p = project_capped(p0.as_array().as_slice().expect("contiguous"), budget, floor);
    let mut f = sub.objective(&p);
    let mut step = f64::NAN;
    let mut iterations = 0;
    for _ in 0..10_000 {
        iterations += 1;
        let g = sub.gradient(&p);
        let scale = g.iter().fold(0.0, |a: f64, x| a.max(x.abs()));
        if scale == 0.0 {
            break;
        }
        if !step.is_finite() {
            step = budget / scale;
        }
        let mut t = step * 2.0;
        let mut moved = None;
        for _ in 0..80 {
            let trial: Vec<f64> = p.iter().zip(&g).map(|(p, g)| p + t * g).collect();
            let q = project_capped(&trial, budget, floor);
            let ascent: f64 = q.iter().zip(&p).zip(&g).map(|((q, p), g)| (q - p) * g).sum();
            let fq = sub.objective(&q);
            if fq >= f + 1e-4 * ascent && fq >= f {
                moved = Some((q, fq));
                break;
            }
            t *= 0.5;
        }
        let Some((q, fq)) = moved else { break };
        step = t;
        let gain = fq - f;
        p = q;
        f = fq;
        if gain < tol && sub.kkt_residual(&p) < 1e-6 {
            break;
        }
    }
    Ok(PowerAllocation {
        power: sub.to_power_vector(&p)?,
        objective: f,
        iterations,
        kkt_residual: sub.kkt_residual(&p),
        method: PowerMethod::ProjectedGradient,
    })
}

/// Brute-force maximizer over `{p_i = n_i P / resolution, sum n_i <= resolution}`
/// (zero entries lifted to the floor). First maximum in lexicographic order wins.
pub fn power_oracle(sub: &PowerSubproblem, resolution: usize) -> Result<PowerVector> {
    let k = sub.n_users();
    if k > 3 {
        return Err(Error::InvalidArgument(format!("grid oracle supports K ≤ 3, got {k}")));
    }
    if resolution == 0 {
        return Err(Error::InvalidArgument("grid resolution must be ≥ 1".into()));
    }
    let unit = sub.budget / resolution as f64;
    let floor = sub.floor();
    let mut counts = vec![0usize; k];
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut p = vec![0.0; k];
    loop {
        for (pi, n) in p.iter_mut().zip(&counts) {
            *pi = (*n as f64 * unit).max(floor);
        }
        let total: f64 = p.iter().sum();
        if total > sub.budget {
            p.iter_mut().for_each(|v| *v *= sub.budget / total);
        }
        let f = sub.objective(&p);
        if best.as_ref().is_none_or(|(bf, _)| f > *bf) {
            best = Some((f, p.clone()));
        }
        // Next composition in lexicographic order with sum <= resolution.
        let mut idx = k;
        loop {
            if idx == 0 {
                let (_, bp) = best.expect("grid is non-empty");
                return sub.to_power_vector(&bp);
            }
            idx -= 1;
            let used: usize = counts[..idx].iter().sum();
            if used + counts[idx] < resolution {
                counts[idx] += 1;
                counts[idx + 1..].iter_mut().for_each(|c| *c = 0);
                break;
            }
        }
    }
}
