//! Riemannian conjugate-gradient ascent with Polak-Ribière directions,
//! projection as vector transport, and Armijo backtracking.

use std::fmt::Write as _;

use ndarray::Array;

use crate::error::{Error, Result};
use crate::manifold::{ambient_inner, Manifold};
use crate::model::{SolverParams, C64};

/// How the first Armijo trial step is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepScaling {
    /// Trial steps `initial_step * shrink^m`.
    Absolute,
    /// Trial steps `initial_step / s * shrink^m`, where `s` is the largest
    /// entry (circle) or row (oblique) magnitude of the direction, so the
    /// first trial moves the most-affected coordinate by about `initial_step`.
    #[default]
    LargestEntry,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RcgOptions {
    pub initial_step: f64,
    pub shrink: f64,
    /// Sufficient-increase coefficient.
    pub sigma: f64,
    pub max_backtracks: usize,
    /// Stop once `|f_{t+1} - f_t| < tolerance`.
    pub tolerance: f64,
    pub max_iters: usize,
    pub pr_plus: bool,
    /// Stop once the Riemannian gradient norm drops to this value.
    pub grad_tol: f64,
    pub step_scaling: StepScaling,
}

impl Default for RcgOptions {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            shrink: 0.5,
            sigma: 1e-4,
            max_backtracks: 50,
            tolerance: 1e-4,
            max_iters: 500,
            pr_plus: true,
            grad_tol: 1e-12,
            step_scaling: StepScaling::LargestEntry,
        }
    }
}

impl RcgOptions {
    /// Options of one beamforming block with inner tolerance `tolerance`.
    pub fn from_solver(s: &SolverParams, tolerance: f64) -> Self {
        Self {
            initial_step: s.armijo_initial_step,
            shrink: s.armijo_shrink,
            sigma: s.armijo_sigma,
            max_backtracks: s.armijo_max_backtracks,
            tolerance,
            max_iters: s.max_inner_iters,
            pr_plus: s.pr_plus,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.initial_step > 0.0
            && self.initial_step.is_finite()
            && self.shrink > 0.0
            && self.shrink < 1.0
            && self.sigma > 0.0
            && self.sigma < 1.0
            && self.max_backtracks >= 1
            && self.tolerance > 0.0
            && self.max_iters >= 1
            && self.grad_tol >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid RCG options: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub lambda: f64,
    pub backtracks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Objective change fell below the tolerance.
    Converged,
    /// Riemannian gradient vanished.
    Stationary,
    MaxIterations,
    /// Armijo exhausted its backtracking budget.
    Stagnated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RcgTrace {
    pub initial_objective: f64,
    pub initial_grad_norm: f64,
    pub records: Vec<IterationRecord>,
    pub stop: StopReason,
}

impl RcgTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_objective(&self) -> f64 {
        self.records.last().map_or(self.initial_objective, |r| r.objective)
    }

    pub fn final_grad_norm(&self) -> f64 {
        self.records.last().map_or(self.initial_grad_norm, |r| r.grad_norm)
    }

    /// Objective never decreases along the trace.
    pub fn is_monotone(&self) -> bool {
        let mut last = self.initial_objective;
        self.records.iter().all(|r| {
            let ok = r.objective >= last;
            last = r.objective;
            ok
        })
    }

    /// `iteration,objective,grad_norm,step,lambda,backtracks` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,objective,grad_norm,step,lambda,backtracks\n");
        let _ = writeln!(out, "0,{},{},0,0,0", self.initial_objective, self.initial_grad_norm);
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.iteration, r.objective, r.grad_norm, r.step, r.lambda, r.backtracks
            );
        }
        out
    }
}

/// `<g_new, g_new - g_old> / ||g_old||^2`, clamped at zero with `pr_plus`.
/// A vanishing `g_old` yields zero (steepest-ascent restart).
pub fn polak_ribiere<D: ndarray::Dimension>(
    g_new: &Array<C64, D>,
    g_old_transported: &Array<C64, D>,
    pr_plus: bool,
) -> f64 {
    let denom = ambient_inner(g_old_transported, g_old_transported);
    if !(denom > 0.0) {
        return 0.0;
    }
    let lambda = (ambient_inner(g_new, g_new) - ambient_inner(g_new, g_old_transported)) / denom;
    if pr_plus {
        lambda.max(0.0)
    } else {
        lambda
    }
}

/// `g_new + lambda * P_x(d_old)`, reset to `g_new` unless it is an ascent direction.
pub fn conjugate_direction<M: Manifold>(
    manifold: &M,
    x: &Array<C64, M::Dim>,
    g_new: &Array<C64, M::Dim>,
    d_old: &Array<C64, M::Dim>,
    lambda: f64,
) -> Result<Array<C64, M::Dim>> {
    if lambda == 0.0 {
        return Ok(g_new.clone());
    }
    let transported = manifold.project(x, d_old)?;
    let d = g_new + &(transported * C64::new(lambda, 0.0));
    if manifold.inner(&d, g_new) <= 0.0 {
        Ok(g_new.clone())
    } else {
        Ok(d)
    }
}

#[derive(Debug, Clone)]
pub struct ArmijoOutcome<D: ndarray::Dimension> {
    pub step: f64,
    pub point: Array<C64, D>,
    pub value: f64,
    pub backtracks: usize,
    /// No trial step satisfied the condition; `point` is the input point.
    pub stagnated: bool,
}

/// Backtracking search for the largest `alpha = alpha0 * shrink^m` with
/// `f(Ret_x(alpha d)) >= f(x) + sigma * alpha * <grad, d>`.
///
/// Degenerate retractions count as rejected trials.
pub fn armijo_search<M, F>(
    manifold: &M,
    f: &F,
    x: &Array<C64, M::Dim>,
    fx: f64,
    grad: &Array<C64, M::Dim>,
    d: &Array<C64, M::Dim>,
    opts: &RcgOptions,
) -> Result<ArmijoOutcome<M::Dim>>
where
    M: Manifold,
    F: Fn(&Array<C64, M::Dim>) -> f64,
{
    let slope = manifold.inner(grad, d);
    if !(slope > 0.0) {
        return Err(Error::NotAscent { slope });
    }
    let mut alpha = match opts.step_scaling {
        StepScaling::Absolute => opts.initial_step,
        StepScaling::LargestEntry => opts.initial_step / manifold.step_scale(d),
    };
    for m in 0..=opts.max_backtracks {
        match manifold.retract(x, d, alpha) {
            Ok(candidate) => {
                let value = f(&candidate);
                if value >= fx + opts.sigma * alpha * slope {
                    return Ok(ArmijoOutcome {
                        step: alpha,
                        point: candidate,
                        value,
                        backtracks: m,
                        stagnated: false,
                    });
                }
            }
            Err(Error::DegenerateRetraction { .. }) => {}
            Err(e) => return Err(e),
        }
        alpha *= opts.shrink;
    }
    Ok(ArmijoOutcome {
        step: 0.0,
        point: x.clone(),
        value: fx,
        backtracks: opts.max_backtracks,
        stagnated: true,
    })
}

/// Maximizes `f` over `manifold` from `x0`.
///
/// `euclid_grad` returns the ambient gradient; the Riemannian gradient is
/// its tangent projection. The returned point always satisfies
/// `f(x_star) >= f(x0)`.
pub fn rcg_maximize<M, F, G>(
    manifold: &M,
    f: F,
    euclid_grad: G,
    x0: &Array<C64, M::Dim>,
    opts: &RcgOptions,
) -> Result<(Array<C64, M::Dim>, RcgTrace)>
where
    M: Manifold,
    F: Fn(&Array<C64, M::Dim>) -> f64,
    G: Fn(&Array<C64, M::Dim>) -> Array<C64, M::Dim>,
{
    opts.validate()?;
    manifold.check_point(x0)?;

    let mut x = x0.clone();
    let mut fx = f(&x);
    let mut g = manifold.project(&x, &euclid_grad(&x))?;
    let mut gnorm = manifold.norm(&g);
    let mut d = g.clone();
    let mut trace = RcgTrace {
        initial_objective: fx,
        initial_grad_norm: gnorm,
        records: Vec::new(),
        stop: StopReason::MaxIterations,
    };

    if gnorm <= opts.grad_tol {
        trace.records.push(IterationRecord {
            iteration: 1,
            objective: fx,
            grad_norm: gnorm,
            step: 0.0,
            lambda: 0.0,
            backtracks: 0,
        });
        trace.stop = StopReason::Stationary;
        return Ok((x, trace));
    }

    for iteration in 1..=opts.max_iters {
        let arm = armijo_search(manifold, &f, &x, fx, &g, &d, opts)?;
        if arm.stagnated {
            trace.records.push(IterationRecord {
                iteration,
                objective: fx,
                grad_norm: gnorm,
                step: 0.0,
                lambda: 0.0,
                backtracks: arm.backtracks,
            });
            trace.stop = StopReason::Stagnated;
            break;
        }
        let x_new = arm.point;
        let f_new = arm.value;
        let g_new = manifold.project(&x_new, &euclid_grad(&x_new))?;
        let g_old = manifold.project(&x_new, &g)?;
        let lambda = polak_ribiere(&g_new, &g_old, opts.pr_plus);
        let d_new = conjugate_direction(manifold, &x_new, &g_new, &d, lambda)?;
        let g_new_norm = manifold.norm(&g_new);
        trace.records.push(IterationRecord {
            iteration,
            objective: f_new,
            grad_norm: g_new_norm,
            step: arm.step,
            lambda,
            backtracks: arm.backtracks,
        });

        let delta = f_new - fx;
        x = x_new;
        fx = f_new;
        g = g_new;
        gnorm = g_new_norm;
        d = d_new;

        if gnorm <= opts.grad_tol {
            trace.stop = StopReason::Stationary;
            break;
        }
        if delta.abs() < opts.tolerance {
            trace.stop = StopReason::Converged;
            break;
        }
    }
    Ok((x, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{random_complex_vector, random_phases};
    use crate::manifold::Circle;
    use ndarray::Array1;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn pr_examples() {
        let g = Array1::from(vec![c(1.0, 2.0), c(-0.5, 0.1)]);
        assert_eq!(polak_ribiere(&g, &g, false), 0.0);

        let a = Array1::from(vec![c(3.0, 0.0), c(0.0, 0.0)]);
        let b = Array1::from(vec![c(0.0, 0.0), c(0.0, 2.0)]);
        let l = polak_ribiere(&a, &b, false);
        assert!((l - 9.0 / 4.0).abs() < 1e-15);

        // <a, a - 4a> / |4a|^2 < 0
        let big = a.mapv(|z| z * 4.0);
        assert!(polak_ribiere(&a, &big, false) < 0.0);
        assert_eq!(polak_ribiere(&a, &big, true), 0.0);

        let zero = Array1::<C64>::zeros(2);
        assert_eq!(polak_ribiere(&a, &zero, false), 0.0);
    }

    #[test]
    fn conjugate_direction_examples() {
        let m = Circle::new(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_phases(3, &mut rng).into_inner();
        let g = m.project(&x, &random_complex_vector(3, &mut rng)).unwrap();
        let d_old = random_complex_vector(3, &mut rng);
        assert_eq!(conjugate_direction(&m, &x, &g, &d_old, 0.0).unwrap(), g);

        let radial = x.mapv(|t| t * 2.5);
        let d = conjugate_direction(&m, &x, &g, &radial, 0.7).unwrap();
        assert!(d.iter().zip(g.iter()).all(|(a, b)| (a - b).norm() < 1e-14));

        for _ in 0..200 {
            let g = m.project(&x, &random_complex_vector(3, &mut rng)).unwrap();
            let d_old = random_complex_vector(3, &mut rng);
            let lambda = rand::Rng::random_range(&mut rng, -5.0..5.0);
            let d = conjugate_direction(&m, &x, &g, &d_old, lambda).unwrap();
            assert!(m.inner(&d, &g) > 0.0);
        }
    }

    fn linear(c: &Array1<C64>) -> impl Fn(&Array1<C64>) -> f64 + '_ {
        move |x: &Array1<C64>| c.iter().zip(x.iter()).map(|(c, x)| (c.conj() * x).re).sum()
    }

    #[test]
    fn armijo_rejects_descent_direction() {
        let m = Circle::new(2).unwrap();
        let cvec = Array1::from(vec![c(1.0, 0.0), c(0.0, 1.0)]);
        let x = Array1::from(vec![c(0.0, 1.0), c(1.0, 0.0)]);
        let g = m.project(&x, &cvec.mapv(|z| z * 0.5)).unwrap();
        let d = g.mapv(|z| -z);
        let f = linear(&cvec);
        let r = armijo_search(&m, &f, &x, f(&x), &g, &d, &RcgOptions::default());
        assert!(matches!(r, Err(Error::NotAscent { .. })));
    }

    #[test]
    fn armijo_accepts_small_first_step_and_increases() {
        let m = Circle::new(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cvec = random_complex_vector(4, &mut rng);
        let f = linear(&cvec);
        let x = random_phases(4, &mut rng).into_inner();
        let g = m.project(&x, &cvec.mapv(|z| z * 0.5)).unwrap();
        let opts = RcgOptions {
            initial_step: 1e-3,
            step_scaling: StepScaling::Absolute,
            ..RcgOptions::default()
        };
        let out = armijo_search(&m, &f, &x, f(&x), &g, &g, &opts).unwrap();
        assert_eq!(out.backtracks, 0);
        assert!(out.value >= f(&x));

        let out = armijo_search(&m, &f, &x, f(&x), &g, &g, &RcgOptions::default()).unwrap();
        assert!(!out.stagnated && out.value >= f(&x));
    }

    #[test]
    fn stationary_start_returns_after_one_iteration() {
        let m = Circle::new(3).unwrap();
        let cvec = Array1::from(vec![c(2.0, 0.0), c(0.0, 1.0), c(-1.0, 1.0)]);
        let opt: Array1<C64> = cvec.mapv(|z| z / z.norm());
        let f = linear(&cvec);
        let (x, trace) = rcg_maximize(&m, &f, |_: &Array1<C64>| cvec.mapv(|z| z * 0.5), &opt, &RcgOptions::default()).unwrap();
        assert_eq!(trace.stop, StopReason::Stationary);
        assert_eq!(trace.iterations(), 1);
        assert_eq!(x, opt);
    }

    #[test]
    fn linear_functional_reaches_closed_form_maximizer() {
        let m = Circle::new(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cvec: Array1<C64> = (0..8).map(|i| C64::from_polar(0.5 + i as f64, i as f64 * 0.9)).collect();
        let f = linear(&cvec);
        let x0 = random_phases(8, &mut rng).into_inner();
        let opts = RcgOptions {
            tolerance: 1e-15,
            grad_tol: 1e-8,
            max_iters: 200,
            ..RcgOptions::default()
        };
        let (x, trace) = rcg_maximize(&m, &f, |_: &Array1<C64>| cvec.mapv(|z| z * 0.5), &x0, &opts).unwrap();
        assert!(trace.is_monotone());
        assert!(trace.final_grad_norm() < 1e-6);
        for (xi, ci) in x.iter().zip(cvec.iter()) {
            assert!((xi - ci / ci.norm()).norm() < 1e-6);
        }
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let trace = RcgTrace {
            initial_objective: 1.0,
            initial_grad_norm: 2.0,
            records: vec![IterationRecord {
                iteration: 1,
                objective: 1.5,
                grad_norm: 0.5,
                step: 0.25,
                lambda: 0.1,
                backtracks: 2,
            }],
            stop: StopReason::Converged,
        };
        let csv = trace.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "iteration,objective,grad_norm,step,lambda,backtracks");
        assert_eq!(lines[2], "1,1.5,0.5,0.25,0.1,2");
    }
}
