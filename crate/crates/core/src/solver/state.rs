use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::config::Weights;
use crate::constraints::{compile, slack_targets_with, TaskConstraint, TaskSpec};
use crate::error::{check_len, Error, Result};
use crate::kinematics::KinematicChain;

/// Joint-space geometry shared by every timestep: the lifting map `A` and
/// the symmetric joint limits.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSpace {
    pub coupling: DMatrix<f64>,
    pub q_max: DVector<f64>,
}

impl JointSpace {
    pub fn new(coupling: DMatrix<f64>, q_max: DVector<f64>) -> Result<Self> {
        check_len("coupling columns", q_max.len(), coupling.ncols())?;
        if q_max.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::InvalidChain("joint limits must be positive".into()));
        }
        Ok(Self { coupling, q_max })
    }

    pub fn of_chain(chain: &KinematicChain) -> Self {
        Self {
            coupling: chain.cumulative_coupling_matrix(),
            q_max: DVector::from_column_slice(chain.q_max()),
        }
    }

    /// Block-diagonal stacking of several chains.
    pub fn stacked(chains: &[&KinematicChain]) -> Self {
        let r: usize = chains.iter().map(|c| c.dof()).sum();
        let mut coupling = DMatrix::zeros(r, r);
        let mut q_max = DVector::zeros(r);
        let mut off = 0;
        for c in chains {
            let m = c.dof();
            coupling
                .view_mut((off, off), (m, m))
                .copy_from(&c.cumulative_coupling_matrix());
            q_max.rows_mut(off, m).copy_from_slice(c.q_max());
            off += m;
        }
        Self { coupling, q_max }
    }

    pub fn dof(&self) -> usize {
        self.q_max.len()
    }

    pub fn lifted_dim(&self) -> usize {
        self.coupling.nrows()
    }

    pub fn clip(&self, q: &mut DVector<f64>) {
        for (x, l) in q.iter_mut().zip(self.q_max.iter()) {
            *x = x.clamp(-l, *l);
        }
    }

    pub fn slack_targets(&self, q: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        slack_targets_with(&self.coupling, q)
    }
}

/// A joint space plus one compiled constraint per timestep.
#[derive(Debug, Clone)]
pub struct Problem {
    space: JointSpace,
    constraints: Vec<TaskConstraint>,
}

impl Problem {
    pub fn new(space: JointSpace, constraints: Vec<TaskConstraint>) -> Result<Self> {
        let r = space.lifted_dim();
        for c in &constraints {
            match c {
                TaskConstraint::Simple(s) => {
                    check_len("constraint lifted dimension", r, s.lifted_dim())?;
                    if s.coupling != space.coupling {
                        return Err(Error::InvalidTask(
                            "constraint coupling differs from the joint space".into(),
                        ));
                    }
                }
                TaskConstraint::General(g) => {
                    check_len("constraint joint count", space.dof(), g.dof())?;
                    if space.coupling != DMatrix::identity(r, space.dof()) {
                        return Err(Error::InvalidTask(
                            "general-form constraints need per-joint lifting".into(),
                        ));
                    }
                }
            }
        }
        Ok(Self { space, constraints })
    }

    /// Compiles `spec` for every timestep of an `n`-step trajectory.
    pub fn from_chain(chain: &KinematicChain, spec: &TaskSpec, n: usize) -> Result<Self> {
        let constraints = (0..n)
            .map(|t| compile(chain, spec, t, n))
            .collect::<Result<Vec<_>>>()?;
        Self::new(JointSpace::of_chain(chain), constraints)
    }

    pub fn space(&self) -> &JointSpace {
        &self.space
    }

    pub fn constraints(&self) -> &[TaskConstraint] {
        &self.constraints
    }

    pub fn n(&self) -> usize {
        self.constraints.len()
    }

    pub fn dof(&self) -> usize {
        self.space.dof()
    }

    /// Constraint rows evaluated at the slacks of configuration `q`.
    pub fn task_residual(&self, t: usize, q: &DVector<f64>) -> DVector<f64> {
        let (v, w) = self.space.slack_targets(q);
        self.constraints[t].residual(&v, &w)
    }
}

/// Lifted slack iterates, one `(v_t, w_t)` pair of vectors per timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct SlackState {
    pub v: Vec<DVector<f64>>,
    pub w: Vec<DVector<f64>>,
}

impl SlackState {
    pub fn from_joints(space: &JointSpace, q: &[DVector<f64>]) -> Self {
        let (v, w) = q.iter().map(|qt| space.slack_targets(qt)).unzip();
        Self { v, w }
    }

    pub fn within_box(&self) -> bool {
        self.v
            .iter()
            .chain(self.w.iter())
            .all(|x| x.iter().all(|c| c.abs() <= 1.0))
    }
}

/// Lagrange multipliers and proximal weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierState {
    pub lambda_q: Vec<DVector<f64>>,
    pub lambda_v: Vec<DVector<f64>>,
    pub lambda_w: Vec<DVector<f64>>,
    pub lambda_f: Vec<DVector<f64>>,
    /// Current weights, `min(rho0·delta^steps, rho_max)`.
    pub rho: Weights,
    pub rho0: Weights,
    pub steps: i32,
    pub delta: f64,
    pub rho_max: f64,
}

impl MultiplierState {
    pub fn zeros(problem: &Problem, rho: Weights, delta: f64, rho_max: f64) -> Self {
        let n = problem.n();
        let r = problem.space().lifted_dim();
        Self {
            lambda_q: vec![DVector::zeros(r); n],
            lambda_v: vec![DVector::zeros(r); n],
            lambda_w: vec![DVector::zeros(r); n],
            lambda_f: problem
                .constraints()
                .iter()
                .map(|c| DVector::zeros(c.rows()))
                .collect(),
            rho: rho.map(|r| r.min(rho_max)),
            rho0: rho,
            steps: 0,
            delta,
            rho_max,
        }
    }
}

/// Per-timestep residuals feeding the multiplier update.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    /// `A q_t - θ_t`
    pub q: Vec<DVector<f64>>,
    /// `v_t - cos(A q_t)`
    pub v: Vec<DVector<f64>>,
    /// `w_t - sin(A q_t)`
    pub w: Vec<DVector<f64>>,
    /// `f_t(v_t, w_t)`
    pub f: Vec<DVector<f64>>,
}

/// Joint trajectory: row `t` of `q` is the configuration at `t·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub q: DMatrix<f64>,
    pub dt: f64,
}

impl Trajectory {
    pub fn from_rows(rows: &[DVector<f64>], dt: f64) -> Self {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        Self {
            q: DMatrix::from_fn(n, m, |t, j| rows[t][j]),
            dt,
        }
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn dof(&self) -> usize {
        self.q.ncols()
    }

    pub fn config(&self, t: usize) -> DVector<f64> {
        self.q.row(t).transpose()
    }

    pub fn rows(&self) -> Vec<DVector<f64>> {
        (0..self.n()).map(|t| self.config(t)).collect()
    }

    /// Forward differences `(q_{t+1} - q_t) / dt`, one fewer row than `q`.
    pub fn velocities(&self) -> DMatrix<f64> {
        let n = self.n();
        let m = self.dof();
        DMatrix::from_fn(n.saturating_sub(1), m, |t, j| {
            (self.q[(t + 1, j)] - self.q[(t, j)]) / self.dt
        })
    }

    pub fn within_limits(&self, q_max: &[f64]) -> bool {
        (0..self.n()).all(|t| (0..self.dof()).all(|j| self.q[(t, j)].abs() <= q_max[j]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    /// Max over t of `‖v_t - cos(A q_t)‖₁`.
    pub proj_residual_v: f64,
    /// Max over t of `‖w_t - sin(A q_t)‖₁`.
    pub proj_residual_w: f64,
    /// Max over t of `‖f_t(q_t)‖∞` evaluated through the forward kinematics.
    pub task_residual: f64,
    pub cost: f64,
    pub wall_ms: f64,
}

impl IterationReport {
    /// Equality of everything except wall time.
    pub fn same_numbers(&self, other: &Self, tol: f64) -> bool {
        self.iteration == other.iteration
            && (self.proj_residual_v - other.proj_residual_v).abs() <= tol
            && (self.proj_residual_w - other.proj_residual_w).abs() <= tol
            && (self.task_residual - other.task_residual).abs() <= tol
            && (self.cost - other.cost).abs() <= tol
    }
}
