//! Alternating optimization of the phases, beamformers and powers, plus the
//! random-beamforming baseline.

use std::fmt::Write as _;

use ndarray::Array2;
use rand::Rng;

use crate::channel::ChannelSet;
use crate::error::Result;
use crate::fixtures::{random_complex_vector, random_phases};
use crate::manifold::{Circle, Manifold, Oblique};
use crate::model::{BeamMatrix, PhaseVector, PowerVector, StageOrder, SystemConfig, C64};
use crate::objective::{effective_channels, weighted_sum_rate, BeamObjective, EffectiveChannels, PhaseObjective, RateParams};
use crate::power::{allocate_power_gp_rounds, extract_subproblem};
use crate::rcg::{rcg_maximize, RcgOptions};

/// Slack allowed when checking that a stage did not lower the objective.
pub const MONOTONE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct InitPoint {
    pub theta: PhaseVector,
    pub w: BeamMatrix,
    pub p: PowerVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Phase,
    Beam,
    Power,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Phase => "theta",
            Stage::Beam => "w",
            Stage::Power => "p",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub stage: Stage,
    pub before: f64,
    pub after: f64,
    pub inner_iters: usize,
    /// The stage lowered the objective and its output was discarded.
    pub reverted: bool,
}

impl StageRecord {
    pub fn delta(&self) -> f64 {
        self.after - self.before
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterRecord {
    pub iteration: usize,
    pub objective: f64,
    pub stages: Vec<StageRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Outer change dropped below the tolerance.
    Converged,
    MaxOuterIterations,
    /// Best of a number of random draws; no optimization took place.
    Baseline { draws: usize },
}

/// Riemannian gradient norms of both beamforming blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stationarity {
    pub theta_initial: f64,
    pub theta_final: f64,
    pub w_initial: f64,
    pub w_final: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub theta: PhaseVector,
    pub w: BeamMatrix,
    pub p: PowerVector,
    pub objective: f64,
    pub initial_objective: f64,
    pub trace: Vec<OuterRecord>,
    pub termination: Termination,
    pub stationarity: Option<Stationarity>,
}

impl Solution {
    pub fn outer_iterations(&self) -> usize {
        self.trace.len()
    }

    /// Objective before the first iteration followed by one value per iteration.
    pub fn objective_trace(&self) -> Vec<f64> {
        std::iter::once(self.initial_objective)
            .chain(self.trace.iter().map(|r| r.objective))
            .collect()
    }

    pub fn is_monotone(&self) -> bool {
        self.objective_trace().windows(2).all(|w| w[1] >= w[0] - MONOTONE_TOL)
            && self
                .trace
                .iter()
                .flat_map(|r| &r.stages)
                .all(|s| s.after >= s.before - MONOTONE_TOL)
    }

    /// One row per outer iteration, with per-stage deltas and inner counts.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,objective,d_theta,d_w,d_p,iters_theta,iters_w,iters_p\n");
        writeln!(out, "0,{},,,,,,", self.initial_objective).unwrap();
        for r in &self.trace {
            let find = |s: Stage| r.stages.iter().find(|x| x.stage == s);
            write!(out, "{},{}", r.iteration, r.objective).unwrap();
            for s in [Stage::Phase, Stage::Beam, Stage::Power] {
                match find(s) {
                    Some(x) => write!(out, ",{}", x.delta()).unwrap(),
                    None => out.push(','),
                }
            }
            for s in [Stage::Phase, Stage::Beam, Stage::Power] {
                match find(s) {
                    Some(x) => write!(out, ",{}", x.inner_iters).unwrap(),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Row `k` is `v_k^H / |v_k|`, so user `k`'s beam is its own channel direction.
/// A zero channel row is replaced by a random unit row.
pub fn matched_filter<R: Rng + ?Sized>(eff: &EffectiveChannels, rng: &mut R) -> BeamMatrix {
    let rows = eff.rows();
    let mut w = Array2::<C64>::zeros(rows.dim());
    for (k, row) in rows.rows().into_iter().enumerate() {
        let scale = row.iter().fold(0.0, |a: f64, z| a.max(z.norm()));
        let src = if scale > 0.0 && scale.is_finite() {
            row.mapv(|z| z / scale)
        } else {
            random_complex_vector(rows.ncols(), rng)
        };
        w.row_mut(k).assign(&src);
    }
    BeamMatrix::from_unnormalized(w).expect("rows are nonzero")
}

/// Uniform random phases, matched-filter beams and an equal power split.
pub fn init_point<R: Rng + ?Sized>(cfg: &SystemConfig, ch: &ChannelSet, rng: &mut R) -> Result<InitPoint> {
    let theta = random_phases(ch.theta_len(), rng);
    let eff = effective_channels(ch, &theta)?;
    let w = matched_filter(&eff, rng);
    let p = PowerVector::uniform(cfg.n_users(), cfg.total_power())?;
    Ok(InitPoint { theta, w, p })
}

struct State {
    theta: PhaseVector,
    w: BeamMatrix,
    p: PowerVector,
    f: f64,
}

fn phase_stage(st: &State, ch: &ChannelSet, params: &RateParams, opts: &RcgOptions) -> Result<(PhaseVector, usize)> {
    let obj = PhaseObjective::new(ch, &st.w, &st.p, params.clone())?;
    let m = Circle::new(ch.theta_len())?;
    let (x, trace) = rcg_maximize(&m, |t| obj.value(t), |t| obj.gradient(t), st.theta.as_array(), opts)?;
    Ok((PhaseVector::new(x)?, trace.iterations()))
}

fn beam_stage(st: &State, ch: &ChannelSet, params: &RateParams, opts: &RcgOptions) -> Result<(BeamMatrix, usize)> {
    let obj = BeamObjective::new(ch, &st.theta, &st.p, params.clone())?;
    let m = Oblique::new(ch.n_users(), ch.n_antennas())?;
    let (x, trace) = rcg_maximize(&m, |w| obj.value(w), |w| obj.gradient(w), st.w.as_array(), opts)?;
    Ok((BeamMatrix::new(x)?, trace.iterations()))
}

fn power_stage(st: &State, ch: &ChannelSet, cfg: &SystemConfig) -> Result<(PowerVector, usize)> {
    let sub = extract_subproblem(&st.theta, &st.w, ch, cfg)?;
    let s = cfg.solver();
    let out = allocate_power_gp_rounds(&sub, &st.p, s.power_tol, s.max_power_rounds)?;
    Ok((out.power, out.iterations))
}

/// Riemannian gradient norms of the phase and beam blocks at a point.
pub fn block_gradient_norms(theta: &PhaseVector, w: &BeamMatrix, p: &PowerVector, ch: &ChannelSet, cfg: &SystemConfig) -> Result<(f64, f64)> {
    let params = RateParams::from_config(cfg);
    let po = PhaseObjective::new(ch, w, p, params.clone())?;
    let circle = Circle::new(ch.theta_len())?;
    let gt = circle.project(theta.as_array(), &po.gradient(theta.as_array()))?;
    let bo = BeamObjective::new(ch, theta, p, params)?;
    let oblique = Oblique::new(ch.n_users(), ch.n_antennas())?;
    let gw = oblique.project(w.as_array(), &bo.gradient(w.as_array()))?;
    Ok((circle.norm(&gt), oblique.norm(&gw)))
}

/// Alternates phase, beam and power updates from `init` until the outer
/// objective changes by less than the outer tolerance.
pub fn solve(cfg: &SystemConfig, ch: &ChannelSet, init: InitPoint) -> Result<Solution> {
    let s = cfg.solver();
    let params = RateParams::from_config(cfg);
    let theta_opts = RcgOptions::from_solver(s, s.theta_tol);
    let w_opts = RcgOptions::from_solver(s, s.w_tol);
    let order: [Stage; 3] = match s.stage_order {
        StageOrder::BeamformingFirst => [Stage::Phase, Stage::Beam, Stage::Power],
        StageOrder::PowerFirst => [Stage::Power, Stage::Phase, Stage::Beam],
    };

    let InitPoint { theta, w, p } = init;
    let f = weighted_sum_rate(&theta, &w, &p, ch, cfg)?;
    let (theta_initial, w_initial) = block_gradient_norms(&theta, &w, &p, ch, cfg)?;
    let mut st = State { theta, w, p, f };
    let initial_objective = f;
    let mut trace = Vec::new();
    let mut termination = Termination::MaxOuterIterations;

    for iteration in 1..=s.max_outer_iters {
        let f_prev = st.f;
        let mut stages = Vec::with_capacity(3);
        for stage in order {
            let before = st.f;
            let (candidate, inner_iters) = match stage {
                Stage::Phase => {
                    let (theta, n) = phase_stage(&st, ch, &params, &theta_opts)?;
                    (State { theta, w: st.w.clone(), p: st.p.clone(), f: 0.0 }, n)
                }
                Stage::Beam => {
                    let (w, n) = beam_stage(&st, ch, &params, &w_opts)?;
                    (State { theta: st.theta.clone(), w, p: st.p.clone(), f: 0.0 }, n)
                }
                Stage::Power => {
                    let (p, n) = power_stage(&st, ch, cfg)?;
                    (State { theta: st.theta.clone(), w: st.w.clone(), p, f: 0.0 }, n)
                }
            };
            let after = weighted_sum_rate(&candidate.theta, &candidate.w, &candidate.p, ch, cfg)?;
            let reverted = after < before - MONOTONE_TOL;
            if !reverted {
                st = State { f: after, ..candidate };
            }
            stages.push(StageRecord {
                stage,
                before,
                after: st.f,
                inner_iters,
                reverted,
            });
        }
        trace.push(OuterRecord {
            iteration,
            objective: st.f,
            stages,
        });
        if (st.f - f_prev).abs() < s.outer_tol {
            termination = Termination::Converged;
            break;
        }
    }

    let (theta_final, w_final) = block_gradient_norms(&st.theta, &st.w, &st.p, ch, cfg)?;
    Ok(Solution {
        theta: st.theta,
        w: st.w,
        p: st.p,
        objective: st.f,
        initial_objective,
        trace,
        termination,
        stationarity: Some(Stationarity {
            theta_initial,
            theta_final,
            w_initial,
            w_final,
        }),
    })
}

/// [`init_point`] followed by [`solve`].
pub fn solve_seeded<R: Rng + ?Sized>(cfg: &SystemConfig, ch: &ChannelSet, rng: &mut R) -> Result<Solution> {
    let init = init_point(cfg, ch, rng)?;
    solve(cfg, ch, init)
}

/// Best of `draws` candidates, each with uniform random phases, matched-filter
/// beams and an equal power split. Earlier candidates win ties.
pub fn random_baseline<R: Rng + ?Sized>(cfg: &SystemConfig, ch: &ChannelSet, draws: usize, rng: &mut R) -> Result<Solution> {
    if draws == 0 {
        return Err(crate::error::Error::InvalidArgument("baseline needs at least one draw".into()));
    }
    let mut best: Option<(f64, InitPoint)> = None;
    for _ in 0..draws {
        let cand = init_point(cfg, ch, rng)?;
        let f = weighted_sum_rate(&cand.theta, &cand.w, &cand.p, ch, cfg)?;
        if best.as_ref().is_none_or(|(bf, _)| f > *bf) {
            best = Some((f, cand));
        }
    }
    let (objective, InitPoint { theta, w, p }) = best.expect("draws >= 1");
    Ok(Solution {
        theta,
        w,
        p,
        objective,
        initial_objective: objective,
        trace: Vec::new(),
        termination: Termination::Baseline { draws },
        stationarity: None,
    })
}
