use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// How the joint update is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// One banded system over all timesteps.
    Coupled,
    /// Independent per-timestep solves with the cost linearised around the
    /// previous iterate.
    Distributive,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "coupled" => Ok(Mode::Coupled),
            "distributive" => Ok(Mode::Distributive),
            other => Err(format!("unknown mode `{other}` (expected coupled|distributive)")),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Coupled => "coupled",
            Mode::Distributive => "distributive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostModel {
    /// Sum of squared second differences.
    Acceleration,
    /// Sum of squared first differences.
    Velocity,
}

impl CostModel {
    /// Finite-difference stencil applied to `q_{t-k..=t}`.
    pub fn stencil(self) -> &'static [f64] {
        match self {
            CostModel::Acceleration => &[1.0, -2.0, 1.0],
            CostModel::Velocity => &[-1.0, 1.0],
        }
    }

    pub fn min_steps(self) -> usize {
        self.stencil().len()
    }
}

/// One value per multiplier family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub q: f64,
    pub v: f64,
    pub w: f64,
    pub f: f64,
}

impl Weights {
    pub const fn splat(x: f64) -> Self {
        Self {
            q: x,
            v: x,
            w: x,
            f: x,
        }
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            q: f(self.q),
            v: f(self.v),
            w: f(self.w),
            f: f(self.f),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> {
        [self.q, self.v, self.w, self.f].into_iter()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Number of timesteps.
    pub n: usize,
    /// Grid spacing in seconds.
    pub dt: f64,
    pub max_iter: usize,
    pub mode: Mode,
    pub cost: CostModel,
    /// Scale of the smoothness cost relative to the augmented terms.
    pub cost_weight: f64,
    pub proj_tol: f64,
    pub task_tol: f64,
    pub cost_tol: f64,
    pub rho0: Weights,
    pub delta: f64,
    pub rho_max: f64,
    /// Fixed first configuration; removed from the joint update.
    pub pin_start: Option<Vec<f64>>,
    /// Configuration repeated over all timesteps as the first iterate.
    pub q_init: Option<Vec<f64>>,
    /// Worker threads for per-timestep phases; 0 lets the runtime decide.
    pub worker_count: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n: 100,
            dt: 0.1,
            max_iter: 300,
            mode: Mode::Coupled,
            cost: CostModel::Acceleration,
            cost_weight: 0.1,
            proj_tol: 1e-3,
            task_tol: 1e-3,
            cost_tol: 1e-4,
            rho0: Weights::splat(1.0),
            delta: 1.1,
            rho_max: 1e6,
            pin_start: None,
            q_init: None,
            worker_count: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < self.cost.min_steps() {
            return Err(config_err(
                "n",
                format!("needs at least {} timesteps for this cost", self.cost.min_steps()),
            ));
        }
        if !(self.dt > 0.0) {
            return Err(config_err("dt", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(config_err("max_iter", "must be at least 1"));
        }
        for (name, tol) in [
            ("proj_tol", self.proj_tol),
            ("task_tol", self.task_tol),
            ("cost_tol", self.cost_tol),
        ] {
            if !(tol > 0.0) {
                return Err(config_err(name, "must be positive"));
            }
        }
        if !(self.cost_weight >= 0.0) {
            return Err(config_err("cost_weight", "must be non-negative"));
        }
        if self.rho0.iter().any(|r| !(r > 0.0)) {
            return Err(config_err("rho0", "all initial weights must be positive"));
        }
        if !(self.delta > 1.0) {
            return Err(config_err("delta", "growth factor must exceed 1"));
        }
        if !(self.rho_max >= self.rho0.iter().fold(0.0, f64::max)) {
            return Err(config_err("rho_max", "must be at least the initial weights"));
        }
        Ok(())
    }
}
