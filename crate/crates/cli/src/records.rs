//! Result rows and their comma-separated form.

use std::fmt::Write as _;

use crate::error::CliError;

pub const RESULTS_HEADER: &str = "experiment,x,seed,objective,baseline,outer_iters,ms";

/// One trial of one grid point. A failed trial has no objective and zero iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub experiment: String,
    pub x: f64,
    pub seed: u64,
    pub objective: Option<f64>,
    pub baseline: Option<f64>,
    pub outer_iters: usize,
    pub ms: Option<f64>,
}

impl ResultRecord {
    pub fn failed(&self) -> bool {
        self.objective.is_none()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Header plus one line per record. Floats use the shortest representation
/// that parses back to the same value.
pub fn to_csv(records: &[ResultRecord]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.experiment,
            r.x,
            r.seed,
            opt(r.objective),
            opt(r.baseline),
            r.outer_iters,
            opt(r.ms)
        )
        .unwrap();
    }
    out
}

fn parse_opt(field: &str, line: usize) -> Result<Option<f64>, CliError> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| CliError::Runtime(format!("line {line}: bad number {field:?}")))
}

pub fn parse_csv(text: &str) -> Result<Vec<ResultRecord>, CliError> {
    let mut lines = text.lines();
    if lines.next() != Some(RESULTS_HEADER) {
        return Err(CliError::Runtime("results file has an unexpected header".into()));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(CliError::Runtime(format!("line {n}: expected 7 fields, got {}", f.len())));
        }
        let bad = |what: &str| CliError::Runtime(format!("line {n}: bad {what}"));
        out.push(ResultRecord {
            experiment: f[0].to_string(),
            x: f[1].parse().map_err(|_| bad("x"))?,
            seed: f[2].parse().map_err(|_| bad("seed"))?,
            objective: parse_opt(f[3], n)?,
            baseline: parse_opt(f[4], n)?,
            outer_iters: f[5].parse().map_err(|_| bad("outer_iters"))?,
            ms: parse_opt(f[6], n)?,
        });
    }
    Ok(out)
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some((mean, std))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub experiment: String,
    pub x: f64,
    pub n: usize,
    pub failed: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub baseline_mean: Option<f64>,
    pub baseline_std: Option<f64>,
}

/// Groups consecutive records by `(experiment, x)` in first-seen order.
pub fn summarize(records: &[ResultRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, f64)> = Vec::new();
    for r in records {
        if !keys.iter().any(|(e, x)| *e == r.experiment && *x == r.x) {
            keys.push((r.experiment.clone(), r.x));
        }
    }
    keys.into_iter()
        .map(|(experiment, x)| {
            let group: Vec<&ResultRecord> = records.iter().filter(|r| r.experiment == experiment && r.x == x).collect();
            let obj: Vec<f64> = group.iter().filter_map(|r| r.objective).collect();
            let base: Vec<f64> = group.iter().filter_map(|r| r.baseline).collect();
            let (mean, std) = mean_std(&obj).unzip();
            let (baseline_mean, baseline_std) = mean_std(&base).unzip();
            SummaryRow {
                experiment,
                x,
                n: obj.len(),
                failed: group.len() - obj.len(),
                mean,
                std,
                baseline_mean,
                baseline_std,
            }
        })
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("experiment,x,n,failed,mean,std,baseline_mean,baseline_std\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.experiment,
            r.x,
            r.n,
            r.failed,
            opt(r.mean),
            opt(r.std),
            opt(r.baseline_mean),
            opt(r.baseline_std)
        )
        .unwrap();
    }
    out
}
