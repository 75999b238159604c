//! `tcopt`: run the benchmark applications, the alternating-projection demo,
//! and timing sweeps.
//!
//! Exit codes: 0 converged, 1 usage or configuration error, 2 not converged.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use tcopt::io::{
    load_scenario, load_solver_config, write_map_demo, write_residuals, write_summary,
    write_timing, write_trajectory, RunSummary, TimingRow,
};
use tcopt::scenarios::{build_application, cyclicity_gap, AppId, Scenario, ScenarioFile};
use tcopt::nalgebra::DVector;
use tcopt::solver::{
    map_feasibility, solve, toy_problem, MapConfig, Mode, Problem, ProjectionNorm, SolveOutcome,
    SolverConfig,
};

#[derive(Parser)]
#[command(name = "tcopt", version, about = "Task-constrained trajectory optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario and write trajectory.csv, residuals.csv and summary.json.
    Solve(SolveArgs),
    /// Run alternating projections on sin(q) + cos(q) = 0.366, |q| <= 1.
    DemoMap(DemoArgs),
    /// Time scenarios over a list of horizons and write timing.csv.
    Benchmark(BenchArgs),
}

#[derive(Args, Clone)]
struct SolverFlags {
    /// Solver config JSON; unset fields keep their defaults.
    #[arg(long)]
    solver_config: Option<PathBuf>,
    /// Grid spacing in seconds.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Worker threads; 0 lets the runtime decide.
    #[arg(long, env = "TCOPT_THREADS")]
    threads: Option<usize>,
}

#[derive(Args)]
struct SolveArgs {
    /// Scenario JSON file, or a bare application id (app1..app5).
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    mode: Option<Mode>,
    #[command(flatten)]
    solver: SolverFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long, default_value = "demo_map")]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
}

#[derive(Args)]
struct BenchArgs {
    /// Scenario files or application ids.
    #[arg(long, value_delimiter = ',', default_value = "app1")]
    scenario: Vec<String>,
    /// Horizons to time.
    #[arg(long, value_delimiter = ',', default_value = "25,50,100")]
    n: Vec<usize>,
    /// Restrict to one mode; both are timed otherwise.
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[command(flatten)]
    solver: SolverFlags,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Failure carrying its exit code.
struct Failure(u8, String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(1, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Solve(a) => run_solve(a),
        Command::DemoMap(a) => run_demo_map(a),
        Command::Benchmark(a) => run_benchmark(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn scenario_file(arg: &str) -> Result<ScenarioFile, Failure> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Ok(id) = arg.parse::<AppId>() {
            return Ok(ScenarioFile {
                id,
                overrides: Default::default(),
            });
        }
    }
    Ok(load_scenario(path)?)
}

fn base_config(flags: &SolverFlags) -> Result<SolverConfig, Failure> {
    let mut cfg = match &flags.solver_config {
        Some(p) => load_solver_config(p)?,
        None => SolverConfig::default(),
    };
    if let Some(k) = flags.max_iter {
        cfg.max_iter = k;
    }
    if let Some(t) = flags.threads {
        cfg.worker_count = t;
    }
    Ok(cfg)
}

fn prepare(
    file: &ScenarioFile,
    n: Option<usize>,
    mode: Option<Mode>,
    flags: &SolverFlags,
) -> Result<(Scenario, Problem, SolverConfig), Failure> {
    let mut overrides = file.overrides.clone();
    if n.is_some() {
        overrides.n = n;
    }
    if flags.dt.is_some() {
        overrides.dt = flags.dt;
    }
    let scenario = build_application(file.id, &overrides)?;
    let problem = scenario.problem()?;
    let mut cfg = scenario.solver_config(&base_config(flags)?);
    if let Some(m) = mode {
        cfg.mode = m;
    }
    cfg.validate()?;
    Ok((scenario, problem, cfg))
}

fn summarize(scenario: &Scenario, cfg: &SolverConfig, out: &SolveOutcome) -> RunSummary {
    let cyc = scenario.cyclic.then(|| cyclicity_gap(&out.trajectory));
    RunSummary::from_outcome(&scenario.id.to_string(), cfg, out, cyc)
}

fn run_solve(args: SolveArgs) -> Result<u8, Failure> {
    let file = scenario_file(&args.scenario)?;
    let (scenario, problem, cfg) = prepare(&file, args.n, args.mode, &args.solver)?;
    let outcome = solve(&problem, &cfg)?;
    std::fs::create_dir_all(&args.out)?;
    write_trajectory(&args.out.join("trajectory.csv"), &outcome.trajectory)?;
    write_residuals(&args.out.join("residuals.csv"), &outcome.reports)?;
    let summary = summarize(&scenario, &cfg, &outcome);
    write_summary(&args.out.join("summary.json"), &summary)?;
    println!(
        "{} n={} mode={} iterations={} converged={} task={:.3e} cost={:.4e}",
        summary.scenario,
        summary.n,
        summary.mode,
        summary.iterations,
        summary.converged,
        summary.task_residual,
        summary.cost
    );
    Ok(if outcome.converged { 0 } else { 2 })
}

fn run_demo_map(args: DemoArgs) -> Result<u8, Failure> {
    let problem = toy_problem(0.366)?;
    let cfg = MapConfig {
        max_iter: args.max_iter,
        norm: ProjectionNorm::L1,
        record_path: true,
        ..MapConfig::default()
    };
    let mut runs = Vec::new();
    for q0 in [0.9, -1.0] {
        let start = Instant::now();
        let out = map_feasibility(&problem, &[DVector::from_element(1, q0)], &cfg)?;
        println!(
            "q0={q0} iterations={} converged={} q={:.6} residual={:.3e} ({:.2} ms)",
            out.reports.len(),
            out.converged,
            out.trajectory.q[(0, 0)],
            out.reports.last().map_or(f64::NAN, |r| r.proj_residual),
            start.elapsed().as_secs_f64() * 1e3
        );
        runs.push((q0, out));
    }
    std::fs::create_dir_all(&args.out)?;
    write_map_demo(&args.out, &runs)?;
    Ok(if runs.iter().all(|(_, o)| o.converged) { 0 } else { 2 })
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let k = xs.len();
    if k % 2 == 1 {
        xs[k / 2]
    } else {
        0.5 * (xs[k / 2 - 1] + xs[k / 2])
    }
}

fn run_benchmark(args: BenchArgs) -> Result<u8, Failure> {
    if args.repeats == 0 {
        return Err(Failure(1, "--repeats must be at least 1".into()));
    }
    let modes = match args.mode {
        Some(m) => vec![m],
        None => vec![Mode::Coupled, Mode::Distributive],
    };
    let mut rows = Vec::new();
    for s in &args.scenario {
        let file = scenario_file(s)?;
        for &n in &args.n {
            for &mode in &modes {
                let (scenario, problem, cfg) = prepare(&file, Some(n), Some(mode), &args.solver)?;
                let mut times = Vec::with_capacity(args.repeats);
                let mut last = None;
                for _ in 0..args.repeats {
                    let start = Instant::now();
                    let out = solve(&problem, &cfg)?;
                    times.push(start.elapsed().as_secs_f64() * 1e3);
                    last = Some(out);
                }
                let out = last.expect("at least one repeat");
                let s = summarize(&scenario, &cfg, &out);
                let row = TimingRow {
                    scenario: s.scenario,
                    n,
                    mode,
                    wall_ms: median(times),
                    iterations: s.iterations,
                    converged: s.converged,
                    task_residual: s.task_residual,
                    proj_residual_v: s.proj_residual_v,
                    proj_residual_w: s.proj_residual_w,
                };
                println!(
                    "{} n={} mode={} median={:.2} ms iterations={} converged={}",
                    row.scenario, n, mode, row.wall_ms, row.iterations, row.converged
                );
                rows.push(row);
            }
        }
    }
    std::fs::create_dir_all(&args.out)?;
    write_timing(&args.out.join("timing.csv"), &rows)?;
    Ok(0)
}
