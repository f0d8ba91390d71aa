//! Seeded sweeps over a grid of scenario parameters.

use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use irsbeam::{random_baseline, sample_scenario, solve_seeded, Solution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{point_config, series_users, ExperimentKind, ExperimentSpec};
use crate::error::CliError;
use crate::plot::emit_plot_data;
use crate::records::{mean_std, summarize, summary_csv, to_csv, ResultRecord};

/// Seed of one trial: the base seed with the point index in the high word.
pub fn trial_seed(base: u64, point: usize, trial: usize) -> u64 {
    base ^ ((point as u64) << 32) ^ trial as u64
}

/// One `(series, grid value)` pair.
#[derive(Debug, Clone)]
struct Point {
    experiment: String,
    x: f64,
    users: Option<usize>,
}

fn points(spec: &ExperimentSpec) -> Vec<Point> {
    let series = series_users(spec.kind, spec.users.as_deref());
    let mut out = Vec::new();
    for users in series {
        let experiment = match users {
            Some(k) => format!("{}_k{k}", spec.kind.id()),
            None => spec.kind.id().to_string(),
        };
        for &x in &spec.grid {
            out.push(Point {
                experiment: experiment.clone(),
                x,
                users,
            });
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub record: ResultRecord,
    /// Objective before the first outer iteration and after each one.
    pub trace: Vec<f64>,
    pub trace_csv: Option<String>,
    pub error: Option<String>,
}

fn run_trial(spec: &ExperimentSpec, point: &Point, seed: u64) -> Result<(Solution, Option<f64>, f64), String> {
    let cfg = point_config(&spec.base, spec.kind, point.x, point.users).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = Instant::now();
    let (_, ch) = sample_scenario(&cfg, &mut rng).map_err(|e| e.to_string())?;
    let sol = solve_seeded(&cfg, &ch, &mut rng).map_err(|e| e.to_string())?;
    let baseline = if spec.baseline {
        Some(random_baseline(&cfg, &ch, spec.baseline_draws, &mut rng).map_err(|e| e.to_string())?.objective)
    } else {
        None
    };
    Ok((sol, baseline, start.elapsed().as_secs_f64() * 1e3))
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "panic".into())
}

/// Runs every trial of every grid point, in parallel, returning outcomes
/// ordered by (point, trial). A trial that errors or panics becomes a failed row.
pub fn run_trials(spec: &ExperimentSpec) -> Vec<TrialOutcome> {
    let pts = points(spec);
    let jobs: Vec<(usize, usize)> = (0..pts.len()).flat_map(|p| (0..spec.trials).map(move |t| (p, t))).collect();
    jobs.into_par_iter()
        .map(|(p, t)| {
            let point = &pts[p];
            let seed = trial_seed(spec.base.seed(), p, t);
            let result = catch_unwind(AssertUnwindSafe(|| run_trial(spec, point, seed)))
                .unwrap_or_else(|payload| Err(panic_message(payload)));
            let mut record = ResultRecord {
                experiment: point.experiment.clone(),
                x: point.x,
                seed,
                objective: None,
                baseline: None,
                outer_iters: 0,
                ms: None,
            };
            match result {
                Ok((sol, baseline, ms)) => {
                    record.objective = Some(sol.objective);
                    record.baseline = baseline;
                    record.outer_iters = sol.outer_iterations();
                    record.ms = spec.record_timing.then_some(ms);
                    let trace_csv = (spec.kind == ExperimentKind::ConvergenceTrace).then(|| sol.trace_csv());
                    TrialOutcome {
                        record,
                        trace: sol.objective_trace(),
                        trace_csv,
                        error: None,
                    }
                }
                Err(e) => TrialOutcome {
                    record,
                    trace: Vec::new(),
                    trace_csv: None,
                    error: Some(e),
                },
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<ResultRecord>,
    pub files: Vec<PathBuf>,
    /// `(seed, message)` of each failed trial.
    pub failures: Vec<(u64, String)>,
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(format!("cannot write {}", path.display()), e))
}

fn fmt_x(x: f64) -> String {
    x.to_string().replace('.', "p").replace('-', "m")
}

/// Mean and std of the objective per outer iteration; shorter traces are
/// held at their final value.
fn iteration_series(traces: &[&Vec<f64>]) -> String {
    let len = traces.iter().map(|t| t.len()).max().unwrap_or(0);
    let mut out = String::from("# iteration mean std\n");
    for i in 0..len {
        let vals: Vec<f64> = traces.iter().filter(|t| !t.is_empty()).map(|t| t[i.min(t.len() - 1)]).collect();
        if let Some((m, s)) = mean_std(&vals) {
            writeln!(out, "{i} {m} {s}").unwrap();
        }
    }
    out
}

/// Runs `spec` and writes the results table, the summary, plot data and
/// (for convergence runs) per-trial traces into the output directory.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput, CliError> {
    let dir = &spec.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create {}", dir.display()), e))?;
    let outcomes = run_trials(spec);
    let records: Vec<ResultRecord> = outcomes.iter().map(|o| o.record.clone()).collect();
    let failures = outcomes
        .iter()
        .filter_map(|o| o.error.clone().map(|e| (o.record.seed, e)))
        .collect();

    let id = spec.kind.id();
    let mut files = Vec::new();
    let results = dir.join(format!("{id}.csv"));
    write_file(&results, &to_csv(&records))?;
    files.push(results);
    let summary = dir.join(format!("{id}_summary.csv"));
    write_file(&summary, &summary_csv(&summarize(&records)))?;
    files.push(summary);

    if spec.kind == ExperimentKind::ConvergenceTrace {
        let traces = dir.join("traces");
        std::fs::create_dir_all(&traces).map_err(|e| CliError::io(format!("cannot create {}", traces.display()), e))?;
        for (i, o) in outcomes.iter().enumerate() {
            if let Some(csv) = &o.trace_csv {
                let path = traces.join(format!("{}_x{}_trial{}.csv", o.record.experiment, fmt_x(o.record.x), i % spec.trials));
                write_file(&path, csv)?;
                files.push(path);
            }
        }
        let mut plots = Vec::new();
        for chunk in outcomes.chunks(spec.trials) {
            let first = &chunk[0].record;
            let series: Vec<&Vec<f64>> = chunk.iter().map(|o| &o.trace).collect();
            let name = format!("{}_iterations_x{}.dat", first.experiment, fmt_x(first.x));
            let path = dir.join(&name);
            write_file(&path, &iteration_series(&series))?;
            files.push(path);
            plots.push(format!("\"{name}\" using 1:2 with linespoints title \"{} = {}\"", spec.kind.x_label(), first.x));
        }
        let gp = format!(
            "set xlabel \"outer iteration\"\nset ylabel \"sum rate (bits/s/Hz)\"\nset key right bottom\nplot {}\n",
            plots.join(", \\\n     ")
        );
        let script = dir.join(format!("{id}_iterations.gp"));
        write_file(&script, &gp)?;
        files.push(script);
    }

    if records.iter().any(|r| !r.failed()) {
        files.extend(emit_plot_data(&records, spec.kind, dir)?);
    }
    Ok(ExperimentOutput {
        records,
        files,
        failures,
    })
}
