//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use irsbeam::driver::{solve_seeded, Termination};
use irsbeam::fixtures::{random_beams, random_channels, random_complex_matrix, random_complex_vector, random_feasible, random_phases, small_config};
use irsbeam::manifold::{ambient_inner, Circle, Manifold, Oblique};
use irsbeam::model::{BeamMatrix, ConfigDraft, PhaseVector};
use irsbeam::objective::{fd_gradient, grad_theta, grad_w, BeamObjective, PhaseObjective, RateParams};
use irsbeam::power::{allocate_power_gp, power_oracle, PowerSubproblem};
use irsbeam::rcg::{rcg_maximize, RcgOptions};
use irsbeam::{sample_scenario, PowerVector, C64};
use irsbeam_cli::records::summarize;
use irsbeam_cli::{run_experiment, ConfigFile, ExperimentSpec, Overrides, ResultRecord};
use ndarray::{Array, Array1, Array2, Dimension};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn rel_err<D: Dimension>(a: &Array<C64, D>, b: &Array<C64, D>) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum::<f64>().sqrt();
    num / den
}

fn max_diff<D: Dimension>(a: &Array<C64, D>, b: &Array<C64, D>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn gradient_correctness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let shapes = [(1, 1), (1, 2), (2, 2), (2, 3), (2, 4)];
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for k in 1..=4 {
        for l in 1..=2 {
            for &(mx, my) in &shapes {
                for n in [1, 3, 8] {
                    let cfg = small_config(l, mx, my, k, n);
                    let ch = random_channels(&cfg, rng.random());
                    let (theta, w, p) = random_feasible(&cfg, &mut rng);
                    let params = RateParams::from_config(&cfg);
                    let po = PhaseObjective::new(&ch, &w, &p, params.clone()).unwrap();
                    let bo = BeamObjective::new(&ch, &theta, &p, params).unwrap();
                    let ft = fd_gradient(|t| po.value(t), theta.as_array(), 1e-5);
                    let fw = fd_gradient(|x| bo.value(x), w.as_array(), 1e-5);
                    let gt = grad_theta(&theta, &w, &p, &ch, &cfg).unwrap();
                    let gw = grad_w(&theta, &w, &p, &ch, &cfg).unwrap();
                    worst = worst.max(rel_err(&gt, &ft)).max(rel_err(&gw, &fw));
                    count += 1;
                }
            }
        }
    }
    verdict(count >= 100 && worst < 1e-6, format!("{count} instances, worst relative error {worst:.2e} (limit 1e-6)"))
}

/// Idempotence, tangency, orthogonality of the removed part, feasibility of
/// retractions and the second-order retraction error at `t = 1e-3, 1e-4`.
fn check_manifold<M: Manifold>(m: &M, x: &Array<C64, M::Dim>, g: &Array<C64, M::Dim>, h: &Array<C64, M::Dim>, feasible: impl Fn(Array<C64, M::Dim>) -> bool) -> Result<(), String> {
    let v = m.project(x, g).unwrap();
    let scale = 1.0 + m.norm(g);
    if max_diff(&m.project(x, &v).unwrap(), &v) > 1e-12 * scale {
        return Err("projection not idempotent".into());
    }
    if !m.is_tangent(x, &v, 1e-12 * scale) {
        return Err("projection not tangent".into());
    }
    let w = m.project(x, h).unwrap();
    let radial = g - &v;
    if ambient_inner(&radial, &w).abs() > 1e-12 * (1.0 + m.norm(g) * m.norm(&w)) {
        return Err("removed component not orthogonal to the tangent space".into());
    }
    for t in [1e-4, 1e-3, 0.1, 1.0, 10.0] {
        if !feasible(m.retract(x, &v, t).unwrap()) {
            return Err(format!("retraction infeasible at t = {t}"));
        }
    }
    let err = |t: f64| max_diff(&m.retract(x, &v, t).unwrap(), &(x + &v.mapv(|z| z * t)));
    let vmax = m.step_scale(&v).powi(2);
    let (e3, e4) = (err(1e-3), err(1e-4));
    if e3 > 1e-6 * vmax + 1e-13 || e4 > 1e-8 * vmax + 1e-13 || e4 > e3 / 50.0 + 1e-13 {
        return Err(format!("retraction error not second order: {e3:e} at 1e-3, {e4:e} at 1e-4"));
    }
    Ok(())
}

fn manifold_axioms() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..1000 {
        let dim = rng.random_range(1..32);
        let circle = Circle::new(dim).unwrap();
        let x = random_phases(dim, &mut rng).into_inner();
        let (g, h) = (random_complex_vector(dim, &mut rng), random_complex_vector(dim, &mut rng));
        if let Err(e) = check_manifold(&circle, &x, &g, &h, |r| PhaseVector::new(r).is_ok()) {
            return verdict(false, format!("circle case {case}: {e}"));
        }
        let (rows, cols) = (rng.random_range(1..7), rng.random_range(1..16));
        let oblique = Oblique::new(rows, cols).unwrap();
        let x = random_beams(rows, cols, &mut rng).into_inner();
        let (g, h) = (random_complex_matrix(rows, cols, &mut rng), random_complex_matrix(rows, cols, &mut rng));
        if let Err(e) = check_manifold(&oblique, &x, &g, &h, |r| BeamMatrix::new(r).is_ok()) {
            return verdict(false, format!("oblique case {case}: {e}"));
        }
    }
    verdict(true, "1000 circle and 1000 oblique cases")
}

fn rcg_linear_functional() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dim = 16;
    let c = random_complex_vector(dim, &mut rng);
    let f = |t: &Array1<C64>| c.iter().zip(t).map(|(c, t)| (c.conj() * t).re).sum::<f64>();
    let grad = |_: &Array1<C64>| c.mapv(|z| z * 0.5);
    let opts = RcgOptions {
        max_iters: 200,
        tolerance: 1e-15,
        grad_tol: 1e-9,
        ..RcgOptions::default()
    };
    let circle = Circle::new(dim).unwrap();
    let x0 = random_phases(dim, &mut rng).into_inner();
    let (x, trace) = rcg_maximize(&circle, f, grad, &x0, &opts).unwrap();
    let target: Array1<C64> = c.mapv(|z| z / z.norm());
    let dist = max_diff(&x, &target);
    let gnorm = trace.final_grad_norm();
    verdict(
        gnorm < 1e-6 && dist < 1e-6 && trace.iterations() <= 200,
        format!("{} iterations, final gradient norm {gnorm:.2e}, distance to maximizer {dist:.2e}", trace.iterations()),
    )
}

fn power_optimality() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = f64::INFINITY;
    for case in 0..50 {
        let k = 1 + case % 3;
        let signal = Array1::from_shape_fn(k, |_| 10f64.powf(rng.random_range(-1.0..2.0)));
        let cross = Array2::from_shape_fn((k, k), |_| 10f64.powf(rng.random_range(-2.0..1.5)));
        let weights = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
        let budget = 10f64.powf(rng.random_range(-1.0..1.0));
        let sub = PowerSubproblem::new(signal, cross, 1.0, weights, budget).unwrap();
        let p0 = PowerVector::uniform(k, budget).unwrap();
        let gp = allocate_power_gp(&sub, &p0, 1e-9).unwrap();
        if k == 1 && gp.power.as_array()[0] != budget {
            return verdict(false, format!("single user got {} of budget {budget}", gp.power.as_array()[0]));
        }
        let grid = power_oracle(&sub, 200).unwrap();
        let reference = sub.objective(grid.as_array().as_slice().unwrap());
        worst = worst.min(gp.objective - reference);
    }
    verdict(worst >= -1e-3, format!("50 subproblems, worst margin over the grid optimum {worst:.2e} bits (limit -1e-3); K=1 gives p = P"))
}

fn convergence() -> Verdict {
    let mut details = Vec::new();
    let mut pass = true;
    for k in [2, 4, 6] {
        let t = Instant::now();
        let mut d = ConfigDraft::default();
        d.system.n_bs_antennas = 20;
        d.system.irs_rows = 4;
        d.system.irs_cols = 5;
        d.system.n_irs = 2;
        d.system.n_users = k;
        d.solver.outer_tol = 1e-3;
        let cfg = d.validate().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed());
        let (_, ch) = sample_scenario(&cfg, &mut rng).unwrap();
        let sol = solve_seeded(&cfg, &ch, &mut rng).unwrap();
        let elapsed = t.elapsed();
        let ok = sol.is_monotone() && sol.termination == Termination::Converged && sol.outer_iterations() <= 10 && elapsed < Duration::from_secs(60);
        pass &= ok;
        details.push(format!("K={k}: {} iterations, {:.4} bits, {:.2} s", sol.outer_iterations(), sol.objective, elapsed.as_secs_f64()));
    }
    verdict(pass, details.join("; "))
}

fn run_toml(text: &str, dir: &Path) -> Vec<ResultRecord> {
    let file = ConfigFile::parse(text).unwrap();
    let o = Overrides {
        output_dir: Some(dir.to_path_buf()),
        ..Overrides::default()
    };
    let spec = ExperimentSpec::from_file(&file, &o).unwrap();
    let out = run_experiment(&spec).unwrap();
    assert!(out.failures.is_empty(), "failed trials: {:?}", out.failures);
    out.records
}

/// Non-decreasing means along x, allowing one adjacent drop no larger than
/// the larger std of the two points.
fn upward(series: &[(f64, f64, f64)]) -> Result<usize, String> {
    let mut drops = 0;
    for w in series.windows(2) {
        let ((x0, m0, s0), (x1, m1, s1)) = (w[0], w[1]);
        if m1 < m0 {
            if m0 - m1 > s0.max(s1) {
                return Err(format!("drop of {:.3e} from x={x0} to x={x1} exceeds one std", m0 - m1));
            }
            drops += 1;
        }
    }
    if drops > 1 {
        return Err(format!("{drops} adjacent drops"));
    }
    Ok(drops)
}

fn series_of(records: &[ResultRecord]) -> BTreeMap<String, Vec<(f64, f64, f64)>> {
    let mut out: BTreeMap<String, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for s in summarize(records) {
        out.entry(s.experiment).or_default().push((s.x, s.mean.unwrap(), s.std.unwrap()));
    }
    for v in out.values_mut() {
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    out
}

const POWER_SWEEP: &str = r#"
[system]
n_bs_antennas = 32
irs_rows = 4
irs_cols = 5
n_irs = 2
n_users = 2
seed = 11

[experiment]
kind = "power_sweep"
grid = [10.0, 20.0, 30.0]
trials = 20
"#;

const IRS_COUNT_SWEEP: &str = r#"
[system]
n_bs_antennas = 32
irs_rows = 4
irs_cols = 5
seed = 12

[experiment]
kind = "irs_count_sweep"
grid = [1.0, 2.0, 4.0, 8.0]
users = [2, 4, 6]
trials = 20
"#;

const BASELINE_COMPARE: &str = r#"
[system]
n_bs_antennas = 32
n_irs = 2
n_users = 6
seed = 13

[experiment]
kind = "baseline_compare"
grid = [20.0, 60.0, 120.0]
trials = 20
baseline_draws = 50
"#;

fn describe(series: &[(f64, f64, f64)]) -> String {
    series.iter().map(|(x, m, s)| format!("{x}:{m:.4}±{s:.1e}")).collect::<Vec<_>>().join(" ")
}

fn trends() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let mut details = Vec::new();
    let mut pass = true;
    for (name, text) in [("P", POWER_SWEEP), ("L", IRS_COUNT_SWEEP)] {
        let records = run_toml(text, tmp.path());
        for (id, series) in series_of(&records) {
            match upward(&series) {
                Ok(drops) => details.push(format!("{id} over {name} [{}] ({drops} tolerated drops)", describe(&series))),
                Err(e) => {
                    pass = false;
                    details.push(format!("{id} over {name}: {e} [{}]", describe(&series)));
                }
            }
        }
    }
    verdict(pass, details.join("; "))
}

fn baseline_ordering() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let records = run_toml(BASELINE_COMPARE, tmp.path());
    let mut pass = true;
    let mut details = Vec::new();
    for s in summarize(&records) {
        let (m, b) = (s.mean.unwrap(), s.baseline_mean.unwrap());
        pass &= s.n >= 20 && m > b;
        details.push(format!("M={}: {m:.4} vs {b:.4} over {} trials", s.x, s.n));
    }
    verdict(pass, details.join("; "))
}

fn hash_dir(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = std::fs::read(&path).unwrap();
                let digest = Sha256::digest(&bytes);
                let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
                out.insert(path.strip_prefix(dir).unwrap().display().to_string(), hex);
            }
        }
    }
    out
}

fn determinism() -> Verdict {
    let kinds = [
        ("power_sweep", "grid = [10.0, 30.0]"),
        ("irs_count_sweep", "grid = [1.0, 2.0]\nusers = [2, 3]"),
        ("irs_size_sweep", "grid = [4.0, 6.0]"),
        ("convergence_trace", "grid = [2.0, 3.0]"),
        ("baseline_compare", "grid = [4.0, 9.0]\nbaseline_draws = 5"),
    ];
    let mut files = 0;
    for (kind, extra) in kinds {
        let text = format!("[system]\nn_bs_antennas = 6\nseed = 21\n[experiment]\nkind = \"{kind}\"\ntrials = 3\n{extra}\n");
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_toml(&text, a.path());
        run_toml(&text, b.path());
        let (ha, hb) = (hash_dir(a.path()), hash_dir(b.path()));
        if ha != hb || ha.is_empty() {
            return verdict(false, format!("{kind}: outputs differ between runs"));
        }
        files += ha.len();
    }
    verdict(true, format!("5 experiment kinds, {files} files byte-identical across two runs"))
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 8] = [
        ("gradient correctness", gradient_correctness),
        ("manifold axioms", manifold_axioms),
        ("rcg on a linear functional", rcg_linear_functional),
        ("power allocation optimality", power_optimality),
        ("alternating optimization monotonicity and convergence", convergence),
        ("sum-rate trends in transmit power and surface count", trends),
        ("ordering against random beamforming", baseline_ordering),
        ("end-to-end determinism", determinism),
    ];
    let limits = [Some(30.0), Some(10.0), None, None, None, None, None, None];
    let mut failed = 0;
    for (i, ((name, run), limit)) in criteria.into_iter().zip(limits).enumerate() {
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| verdict(false, "panicked"));
        let secs = start.elapsed().as_secs_f64();
        let in_time = limit.is_none_or(|l| secs < l);
        let pass = v.pass && in_time;
        failed += usize::from(!pass);
        let timing = match limit {
            Some(l) => format!("{secs:.2} s, limit {l} s"),
            None => format!("{secs:.2} s"),
        };
        println!("{} criterion {} [PRIMARY] {name}: {} ({timing})", if pass { "PASS" } else { "FAIL" }, i + 1, v.detail);
    }
    println!("{} of 8 criteria passed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
