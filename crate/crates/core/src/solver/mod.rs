//! Augmented-Lagrangian trajectory optimizer over lifted slacks.
//!
//! Each outer iteration
//!
//! 1. updates the slacks of every timestep independently (a closed-form
//!    quadratic for simple-form constraints, one Gauss–Seidel sweep over the
//!    joint pairs for general constraints),
//! 2. fits joint angles to `atan2(w, v)` under the smoothness cost, either as
//!    one banded system or per timestep,
//! 3. moves the multipliers along the residuals and grows the proximal
//!    weights geometrically.

pub mod banded;
pub mod config;
pub mod joints;
pub mod map;
pub mod slack;
pub mod state;

use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;

pub use config::{CostModel, Mode, SolverConfig, Weights};
pub use joints::{
    approximate_cost, decoupled_joint_update, l1_objective, lift_angles, minimize_l1_coupled,
    minimize_l1_decoupled, recover_joints, smoothness_cost,
};
pub use map::{map_feasibility, toy_problem, MapConfig, MapIterate, MapOutcome, MapReport, ProjectionNorm};
pub use slack::{
    gauss_seidel_sweep, minimize_l2, project_slacks, project_slacks_l1, update_joint_slack_pair,
    PairMultipliers, SlackMultipliers,
};
pub use state::{
    IterationReport, JointSpace, MultiplierState, Problem, Residuals, SlackState, Trajectory,
};

use crate::constraints::TaskConstraint;
use crate::error::{check_len, config_err, Result};

/// `λ ← λ + ρ·residual` for every family.
pub fn update_multipliers(state: &mut MultiplierState, residuals: &Residuals) {
    let rho = state.rho;
    let step = |lam: &mut [DVector<f64>], res: &[DVector<f64>], r: f64| {
        for (l, x) in lam.iter_mut().zip(res) {
            l.axpy(r, x, 1.0);
        }
    };
    step(&mut state.lambda_q, &residuals.q, rho.q);
    step(&mut state.lambda_v, &residuals.v, rho.v);
    step(&mut state.lambda_w, &residuals.w, rho.w);
    step(&mut state.lambda_f, &residuals.f, rho.f);
}

/// Advances the geometric schedule `ρ = min(ρ0·Δ^k, ρ_max)` by one step.
pub fn update_proximal_weights(state: &mut MultiplierState) {
    state.steps += 1;
    let (scale, cap) = (state.delta.powi(state.steps), state.rho_max);
    state.rho = state.rho0.map(|r| (r * scale).min(cap));
}

pub fn check_convergence(
    current: &IterationReport,
    previous: &IterationReport,
    config: &SolverConfig,
) -> bool {
    current.proj_residual_v < config.proj_tol
        && current.proj_residual_w < config.proj_tol
        && current.task_residual < config.task_tol
        && (current.cost - previous.cost).abs() < config.cost_tol * previous.cost.abs().max(1.0)
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub trajectory: Trajectory,
    pub reports: Vec<IterationReport>,
    pub converged: bool,
    pub slacks: SlackState,
    pub multipliers: MultiplierState,
}

impl SolveOutcome {
    pub fn iterations(&self) -> usize {
        self.reports.len()
    }

    pub fn last_report(&self) -> Option<&IterationReport> {
        self.reports.last()
    }
}

fn initial_configuration(problem: &Problem, config: &SolverConfig) -> Result<Vec<DVector<f64>>> {
    let space = problem.space();
    let m = space.dof();
    let seed = match (&config.pin_start, &config.q_init) {
        (_, Some(q)) => {
            check_len("q_init", m, q.len())?;
            DVector::from_column_slice(q)
        }
        (Some(p), None) => DVector::from_column_slice(p),
        (None, None) => DVector::zeros(m),
    };
    let mut seed = seed;
    space.clip(&mut seed);
    let mut q = vec![seed; problem.n()];
    if let Some(p) = &config.pin_start {
        check_len("pin_start", m, p.len())?;
        let p = DVector::from_column_slice(p);
        if p.iter().zip(space.q_max.iter()).any(|(x, l)| x.abs() > *l) {
            return Err(config_err("pin_start", "outside the joint limits"));
        }
        q[0] = p;
    }
    Ok(q)
}

fn slack_step(
    problem: &Problem,
    t: usize,
    q: &DVector<f64>,
    slacks: &SlackState,
    mult: &MultiplierState,
) -> (DVector<f64>, DVector<f64>) {
    match &problem.constraints()[t] {
        TaskConstraint::Simple(c) => {
            let (bv, bw) = problem.space().slack_targets(q);
            let m = SlackMultipliers {
                lambda_v: &mult.lambda_v[t],
                lambda_w: &mult.lambda_w[t],
                lambda_f: &mult.lambda_f[t],
            };
            minimize_l2(&bv, &bw, m, &mult.rho, c)
        }
        TaskConstraint::General(ev) => {
            let mut v = slacks.v[t].clone();
            let mut w = slacks.w[t].clone();
            gauss_seidel_sweep(
                ev,
                &mut v,
                &mut w,
                q,
                &mult.lambda_v[t],
                &mult.lambda_w[t],
                &mult.lambda_f[t],
                &mult.rho,
            );
            (v, w)
        }
    }
}

/// Runs the optimizer until convergence or `config.max_iter`.
///
/// On non-convergence the last iterate is returned with `converged = false`.
pub fn solve(problem: &Problem, config: &SolverConfig) -> Result<SolveOutcome> {
    config.validate()?;
    if problem.n() != config.n {
        return Err(config_err(
            "n",
            format!("problem has {} timesteps", problem.n()),
        ));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.worker_count)
        .build()
        .map_err(|e| config_err("worker_count", e.to_string()))?;
    let space = problem.space();
    let n = problem.n();
    let pinned = config.pin_start.as_ref().map(|p| DVector::from_column_slice(p));

    let start = Instant::now();
    let mut q = initial_configuration(problem, config)?;
    let mut slacks = SlackState::from_joints(space, &q);
    let mut mult = MultiplierState::zeros(problem, config.rho0, config.delta, config.rho_max);
    let mut reports: Vec<IterationReport> = Vec::new();
    let mut converged = false;

    for k in 0..config.max_iter {
        let (v, w): (Vec<_>, Vec<_>) = pool.install(|| {
            (0..n)
                .into_par_iter()
                .map(|t| slack_step(problem, t, &q[t], &slacks, &mult))
                .unzip()
        });
        slacks = SlackState { v, w };

        let thetas: Vec<DVector<f64>> = (0..n)
            .map(|t| lift_angles(&slacks.v[t], &slacks.w[t], &(&space.coupling * &q[t])))
            .collect();

        let q_next = match config.mode {
            Mode::Coupled => minimize_l1_coupled(
                space,
                &thetas,
                &mult.lambda_q,
                mult.rho.q,
                config.cost,
                config.cost_weight,
                pinned.as_ref(),
            )?,
            Mode::Distributive => pool.install(|| {
                (0..n)
                    .into_par_iter()
                    .map(|t| match (t, &pinned) {
                        (0, Some(p)) => p.clone(),
                        _ => decoupled_joint_update(
                            space,
                            t,
                            &thetas[t],
                            &mult.lambda_q[t],
                            mult.rho.q,
                            config.cost,
                            config.cost_weight,
                            &q,
                        ),
                    })
                    .collect()
            }),
        };
        q = q_next;

        let per_t: Vec<_> = pool.install(|| {
            (0..n)
                .into_par_iter()
                .map(|t| {
                    let (bv, bw) = space.slack_targets(&q[t]);
                    let rq = &space.coupling * &q[t] - &thetas[t];
                    let rv = &slacks.v[t] - &bv;
                    let rw = &slacks.w[t] - &bw;
                    let rf = problem.constraints()[t].residual(&slacks.v[t], &slacks.w[t]);
                    let task = problem.constraints()[t].residual(&bv, &bw).amax();
                    (rq, rv, rw, rf, task)
                })
                .collect()
        });
        let mut residuals = Residuals {
            q: Vec::with_capacity(n),
            v: Vec::with_capacity(n),
            w: Vec::with_capacity(n),
            f: Vec::with_capacity(n),
        };
        let (mut proj_v, mut proj_w, mut task) = (0.0f64, 0.0f64, 0.0f64);
        for (rq, rv, rw, rf, tr) in per_t {
            proj_v = proj_v.max(rv.lp_norm(1));
            proj_w = proj_w.max(rw.lp_norm(1));
            task = task.max(tr);
            residuals.q.push(rq);
            residuals.v.push(rv);
            residuals.w.push(rw);
            residuals.f.push(rf);
        }
        update_multipliers(&mut mult, &residuals);
        update_proximal_weights(&mut mult);

        let report = IterationReport {
            iteration: k,
            proj_residual_v: proj_v,
            proj_residual_w: proj_w,
            task_residual: task,
            cost: smoothness_cost(&q, config.cost)?,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        let done = reports
            .last()
            .is_some_and(|prev| check_convergence(&report, prev, config));
        reports.push(report);
        if done {
            converged = true;
            break;
        }
    }

    Ok(SolveOutcome {
        trajectory: Trajectory::from_rows(&q, config.dt),
        reports,
        converged,
        slacks,
        multipliers: mult,
    })
}
