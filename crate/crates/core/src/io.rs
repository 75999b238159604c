//! File formats: trajectory and per-iteration CSVs, run summaries, timing
//! tables, and JSON loaders for solver configs and scenarios.
//!
//! Floats are written in Rust's shortest round-trip decimal form, so a value
//! read back is bitwise equal to the value written.

use std::fs::File;
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenarios::{CyclicityReport, ScenarioFile};
use crate::solver::{IterationReport, MapOutcome, Mode, SolveOutcome, SolverConfig, Trajectory};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn create(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(io_err(path))?;
    Ok(csv::Writer::from_writer(file))
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(io_err(path))?;
    Ok(csv::Reader::from_reader(file))
}

fn num(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::MalformedCsv(format!("{what}: `{s}` is not a number")))
}

/// Writes `t,q1..qm`, one row per timestep, `t` being the step index.
pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = create(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=traj.dof()).map(|j| format!("q{j}")));
    w.write_record(&header)?;
    for t in 0..traj.n() {
        let mut row = vec![t.to_string()];
        row.extend(traj.q.row(t).iter().map(|x| x.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_trajectory(path: &Path, dt: f64) -> Result<Trajectory> {
    let mut r = open(path)?;
    let header = r.headers()?.clone();
    let m = header.len().saturating_sub(1);
    if header.get(0) != Some("t") || m == 0 {
        return Err(Error::MalformedCsv(format!(
            "{}: expected header `t,q1..qm`",
            path.display()
        )));
    }
    let mut values = Vec::new();
    let mut n = 0;
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != m + 1 {
            return Err(Error::MalformedCsv(format!(
                "{}: row {n} has {} fields, expected {}",
                path.display(),
                rec.len(),
                m + 1
            )));
        }
        for j in 1..=m {
            values.push(num(&rec[j], &header[j])?);
        }
        n += 1;
    }
    Ok(Trajectory {
        q: DMatrix::from_row_slice(n, m, &values),
        dt,
    })
}

const RESIDUAL_HEADER: [&str; 6] = [
    "iteration",
    "proj_res_v",
    "proj_res_w",
    "task_res",
    "cost",
    "wall_ms",
];

pub fn write_residuals(path: &Path, reports: &[IterationReport]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(RESIDUAL_HEADER)?;
    for r in reports {
        w.write_record([
            r.iteration.to_string(),
            r.proj_residual_v.to_string(),
            r.proj_residual_w.to_string(),
            r.task_residual.to_string(),
            r.cost.to_string(),
            r.wall_ms.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_residuals(path: &Path) -> Result<Vec<IterationReport>> {
    let mut r = open(path)?;
    if r.headers()?.iter().ne(RESIDUAL_HEADER) {
        return Err(Error::MalformedCsv(format!(
            "{}: expected header `{}`",
            path.display(),
            RESIDUAL_HEADER.join(",")
        )));
    }
    r.records()
        .map(|rec| {
            let rec = rec?;
            let f = |i: usize| num(&rec[i], RESIDUAL_HEADER[i]);
            Ok(IterationReport {
                iteration: rec[0]
                    .parse()
                    .map_err(|_| Error::MalformedCsv(format!("iteration: `{}`", &rec[0])))?,
                proj_residual_v: f(1)?,
                proj_residual_w: f(2)?,
                task_residual: f(3)?,
                cost: f(4)?,
                wall_ms: f(5)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub n: usize,
    pub mode: Mode,
    pub iterations: usize,
    pub converged: bool,
    pub task_residual: f64,
    pub proj_residual_v: f64,
    pub proj_residual_w: f64,
    pub cost: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cyclicity: Option<CyclicityReport>,
    pub wall_ms: f64,
}

impl RunSummary {
    /// Summary of `outcome`; residuals and cost are those of the last report.
    pub fn from_outcome(
        scenario: &str,
        config: &SolverConfig,
        outcome: &SolveOutcome,
        cyclicity: Option<CyclicityReport>,
    ) -> Self {
        let last = outcome.last_report().copied().unwrap_or(IterationReport {
            iteration: 0,
            proj_residual_v: f64::NAN,
            proj_residual_w: f64::NAN,
            task_residual: f64::NAN,
            cost: f64::NAN,
            wall_ms: 0.0,
        });
        Self {
            scenario: scenario.to_string(),
            n: config.n,
            mode: config.mode,
            iterations: outcome.iterations(),
            converged: outcome.converged,
            task_residual: last.task_residual,
            proj_residual_v: last.proj_residual_v,
            proj_residual_w: last.proj_residual_w,
            cost: last.cost,
            cyclicity,
            wall_ms: last.wall_ms,
        }
    }
}

pub fn write_summary(path: &Path, summary: &RunSummary) -> Result<()> {
    let text = serde_json::to_string_pretty(summary).map_err(|source| Error::Json {
        path: path.display().to_string(),
        source,
    })?;
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

pub fn read_summary(path: &Path) -> Result<RunSummary> {
    load_json(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub scenario: String,
    pub n: usize,
    pub mode: Mode,
    /// Median over repeats.
    pub wall_ms: f64,
    pub iterations: usize,
    pub converged: bool,
    pub task_residual: f64,
    pub proj_residual_v: f64,
    pub proj_residual_w: f64,
}

pub fn write_timing(path: &Path, rows: &[TimingRow]) -> Result<()> {
    let mut w = create(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record([
            "scenario",
            "n",
            "mode",
            "wall_ms",
            "iterations",
            "converged",
            "task_residual",
            "proj_residual_v",
            "proj_residual_w",
        ])?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_timing(path: &Path) -> Result<Vec<TimingRow>> {
    let mut r = open(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Writes the alternating-projection demo: `map_residuals.csv` with one
/// residual column per initial guess, and `map_path.csv` with every
/// `(v, w, q)` iterate for plotting.
pub fn write_map_demo(dir: &Path, runs: &[(f64, MapOutcome)]) -> Result<()> {
    let res_path = dir.join("map_residuals.csv");
    let mut w = create(&res_path)?;
    let mut header = vec!["iteration".to_string()];
    header.extend(runs.iter().map(|(q0, _)| format!("residual_q0={q0}")));
    w.write_record(&header)?;
    let longest = runs.iter().map(|(_, o)| o.reports.len()).max().unwrap_or(0);
    for k in 0..longest {
        let mut row = vec![k.to_string()];
        row.extend(runs.iter().map(|(_, o)| {
            o.reports
                .get(k)
                .map_or_else(String::new, |r| r.proj_residual.to_string())
        }));
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err(&res_path))?;

    let path_path = dir.join("map_path.csv");
    let mut w = create(&path_path)?;
    w.write_record(["q0", "iteration", "v", "w", "q"])?;
    for (q0, outcome) in runs {
        for (k, it) in outcome.path.iter().enumerate() {
            w.write_record([
                q0.to_string(),
                k.to_string(),
                it.v[0][0].to_string(),
                it.w[0][0].to_string(),
                it.q[0][0].to_string(),
            ])?;
        }
    }
    w.flush().map_err(io_err(&path_path))
}

/// Parses a JSON file. Type and unknown-field errors name the offending
/// field path.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_json(&text, &path.display().to_string())
}

pub fn parse_json<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let source = e.into_inner();
        if source.is_data() && field != "." {
            Error::InvalidConfig {
                field,
                reason: format!("{source} ({origin})"),
            }
        } else {
            Error::Json {
                path: origin.to_string(),
                source,
            }
        }
    })
}

/// Loads and validates a solver config.
pub fn load_solver_config(path: &Path) -> Result<SolverConfig> {
    let config: SolverConfig = load_json(path)?;
    config.validate()?;
    Ok(config)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioFile> {
    load_json(path)
}
