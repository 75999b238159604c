//! Alternating projections between the task set and the joint circle set.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::joints::recover_joints;
use super::slack::{project_slacks, project_slacks_l1};
use super::state::{JointSpace, Problem, Trajectory};
use crate::constraints::{SimpleFormConstraint, TaskConstraint};
use crate::error::{Error, Result};

/// Norm used when projecting onto the task set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionNorm {
    /// Euclidean projection followed by clipping; any number of rows.
    L2,
    /// Exact ℓ1 projection; single-row constraints only.
    L1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapConfig {
    pub max_iter: usize,
    pub proj_tol: f64,
    pub norm: ProjectionNorm,
    pub dt: f64,
    /// Keep every per-timestep iterate for plotting.
    pub record_path: bool,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            max_iter: 100,
            proj_tol: 1e-4,
            norm: ProjectionNorm::L2,
            dt: 0.1,
            record_path: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapReport {
    pub iteration: usize,
    /// Max over t of `‖v_t - cos(A q_t)‖₁ + ‖w_t - sin(A q_t)‖₁`.
    pub proj_residual: f64,
    /// Max over t of `‖f_t(q_t)‖∞`.
    pub task_residual: f64,
}

/// Slack and joint iterate of every timestep after one MAP round.
#[derive(Debug, Clone, PartialEq)]
pub struct MapIterate {
    pub v: Vec<DVector<f64>>,
    pub w: Vec<DVector<f64>>,
    pub q: Vec<DVector<f64>>,
}

#[derive(Debug, Clone)]
pub struct MapOutcome {
    pub trajectory: Trajectory,
    pub reports: Vec<MapReport>,
    pub converged: bool,
    pub path: Vec<MapIterate>,
}

/// Single joint with `|q| <= 1` and the constraint `sin q + cos q = c`.
pub fn toy_problem(c: f64) -> Result<Problem> {
    let space = JointSpace::new(DMatrix::identity(1, 1), DVector::from_element(1, 1.0))?;
    let con = SimpleFormConstraint::new(
        DMatrix::identity(1, 1),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, 1.0),
        DVector::from_element(1, -c),
    )?;
    Problem::new(space, vec![TaskConstraint::Simple(con)])
}

pub fn map_feasibility(
    problem: &Problem,
    q_init: &[DVector<f64>],
    config: &MapConfig,
) -> Result<MapOutcome> {
    let n = problem.n();
    if q_init.len() != n {
        return Err(Error::Dimension {
            what: "initial trajectory",
            expected: n,
            got: q_init.len(),
        });
    }
    let space = problem.space();
    let simple = problem
        .constraints()
        .iter()
        .map(|c| match c {
            TaskConstraint::Simple(s) => Ok(s),
            TaskConstraint::General(_) => Err(Error::InvalidTask(
                "alternating projection needs simple-form constraints".into(),
            )),
        })
        .collect::<Result<Vec<_>>>()?;

    let mut q: Vec<DVector<f64>> = q_init
        .iter()
        .map(|qt| {
            let mut qt = qt.clone();
            space.clip(&mut qt);
            qt
        })
        .collect();
    let mut reports = Vec::new();
    let mut path = Vec::new();
    let mut converged = false;
    for k in 0..config.max_iter {
        let mut vs = Vec::with_capacity(n);
        let mut ws = Vec::with_capacity(n);
        for t in 0..n {
            let (bv, bw) = space.slack_targets(&q[t]);
            let (v, w) = match config.norm {
                ProjectionNorm::L2 => project_slacks(&bv, &bw, simple[t])?,
                ProjectionNorm::L1 => project_slacks_l1(&bv, &bw, simple[t])?,
            };
            vs.push(v);
            ws.push(w);
        }
        let mut proj = 0.0f64;
        let mut task = 0.0f64;
        for t in 0..n {
            let (qt, _) = recover_joints(space, &vs[t], &ws[t], &q[t]);
            q[t] = qt;
            let (bv, bw) = space.slack_targets(&q[t]);
            proj = proj.max((&vs[t] - bv).lp_norm(1) + (&ws[t] - bw).lp_norm(1));
            task = task.max(problem.task_residual(t, &q[t]).amax());
        }
        reports.push(MapReport {
            iteration: k,
            proj_residual: proj,
            task_residual: task,
        });
        if config.record_path {
            path.push(MapIterate {
                v: vs,
                w: ws,
                q: q.clone(),
            });
        }
        if proj < config.proj_tol {
            converged = true;
            break;
        }
    }
    Ok(MapOutcome {
        trajectory: Trajectory::from_rows(&q, config.dt),
        reports,
        converged,
        path,
    })
}
