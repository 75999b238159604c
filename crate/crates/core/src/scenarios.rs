//! The benchmark applications: a planar arm tracing a circle, a closed
//! dual-arm chain, and a 7-dof arm under circular, planar-plus-orientation
//! and orientation-only tasks.
//!
//! Numeric geometry (link lengths, circle radius and centre, start and goal
//! points, base offsets) are shipped defaults chosen for this crate and can
//! be overridden from JSON.

use std::f64::consts::{PI, TAU};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::constraints::{
    planar_orientation_rows, planar_position_rows, AppliesAt, SimpleFormConstraint,
    TaskConstraint, TaskEntry, TaskSpec,
};
use crate::error::{check_len, Error, Result};
use crate::kinematics::{kuka_lwr4, rotation_xyz, ChainFile, KinematicChain, Pose};
use crate::solver::{JointSpace, Problem, SolverConfig, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AppId {
    App1,
    App2,
    App3,
    App4,
    App5,
}

impl AppId {
    pub const ALL: [AppId; 5] = [AppId::App1, AppId::App2, AppId::App3, AppId::App4, AppId::App5];
}

impl FromStr for AppId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "app1" => Ok(AppId::App1),
            "app2" => Ok(AppId::App2),
            "app3" => Ok(AppId::App3),
            "app4" => Ok(AppId::App4),
            "app5" => Ok(AppId::App5),
            other => Err(Error::UnknownScenario(other.into())),
        }
    }
}

impl std::fmt::Display for AppId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            AppId::App1 => "app1",
            AppId::App2 => "app2",
            AppId::App3 => "app3",
            AppId::App4 => "app4",
            AppId::App5 => "app5",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    XY,
    YZ,
    XZ,
}

/// `n` equally spaced points on a circle, starting at angle zero. The first
/// point is the implied closure target after the last.
pub fn circle_waypoints(center: Vector3<f64>, radius: f64, plane: Plane, n: usize) -> Vec<Vector3<f64>> {
    (0..n)
        .map(|k| {
            let (s, c) = (TAU * k as f64 / n as f64).sin_cos();
            let offset = match plane {
                Plane::XY => Vector3::new(c, s, 0.0),
                Plane::YZ => Vector3::new(0.0, c, s),
                Plane::XZ => Vector3::new(c, 0.0, s),
            };
            center + offset * radius
        })
        .collect()
}

/// A closed path over `n` timesteps: `n - 1` circle points plus the first
/// point again.
pub fn closed_circle_path(center: Vector3<f64>, radius: f64, plane: Plane, n: usize) -> Vec<Vector3<f64>> {
    let mut pts = circle_waypoints(center, radius, plane, n - 1);
    pts.push(pts[0]);
    pts
}

/// Two planar arms whose end-effectors are joined with fixed last-link
/// directions.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedChainSpec {
    pub arms: [KinematicChain; 2],
    /// World direction of each arm's last link (rad).
    pub link_angles: [f64; 2],
}

impl ClosedChainSpec {
    pub fn new(arms: [KinematicChain; 2], link_angles: [f64; 2]) -> Result<Self> {
        if !arms.iter().all(|a| a.is_planar()) {
            return Err(Error::InvalidChain("loop closure needs planar arms".into()));
        }
        if (arms[0].base().position - arms[1].base().position).norm() < 1e-9 {
            return Err(Error::InvalidChain("arm bases must be distinct".into()));
        }
        Ok(Self { arms, link_angles })
    }

    pub fn space(&self) -> JointSpace {
        JointSpace::stacked(&[&self.arms[0], &self.arms[1]])
    }

    pub fn dof(&self) -> usize {
        self.arms[0].dof() + self.arms[1].dof()
    }
}

fn assemble_rows(
    blocks: &[(DMatrix<f64>, DMatrix<f64>, DVector<f64>)],
) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
    let d: usize = blocks.iter().map(|b| b.2.len()).sum();
    let r = blocks[0].0.ncols();
    let mut a = DMatrix::zeros(d, r);
    let mut b = DMatrix::zeros(d, r);
    let mut c = DVector::zeros(d);
    let mut off = 0;
    for (ba, bb, bc) in blocks {
        let k = bc.len();
        a.view_mut((off, 0), (k, r)).copy_from(ba);
        b.view_mut((off, 0), (k, r)).copy_from(bb);
        c.rows_mut(off, k).copy_from(bc);
        off += k;
    }
    (a, b, c)
}

/// Places per-arm rows into the stacked slack vector.
fn widen(
    rows: (DMatrix<f64>, DMatrix<f64>, DVector<f64>),
    offset: usize,
    total: usize,
) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
    let (a, b, c) = rows;
    let mut wa = DMatrix::zeros(a.nrows(), total);
    let mut wb = DMatrix::zeros(b.nrows(), total);
    wa.view_mut((0, offset), a.shape()).copy_from(&a);
    wb.view_mut((0, offset), b.shape()).copy_from(&b);
    (wa, wb, c)
}

/// Loop-closure rows over the stacked slacks of both arms: coincident
/// end-effectors (2 rows) and the fixed last-link directions (2 rows each).
pub fn loop_closure_rows(spec: &ClosedChainSpec) -> Result<SimpleFormConstraint> {
    let total = spec.dof();
    let m1 = spec.arms[0].dof();
    let (a1, b1, c1) = widen(planar_position_rows(&spec.arms[0])?, 0, total);
    let (a2, b2, c2) = widen(planar_position_rows(&spec.arms[1])?, m1, total);
    let gap = (a1 - a2, b1 - b2, c1 - c2);
    let o1 = widen(planar_orientation_rows(&spec.arms[0], spec.link_angles[0]), 0, total);
    let o2 = widen(planar_orientation_rows(&spec.arms[1], spec.link_angles[1]), m1, total);
    let (a, b, c) = assemble_rows(&[gap, o1, o2]);
    SimpleFormConstraint::new(spec.space().coupling, a, b, c)
}

/// Cyclicity of a closed-path trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CyclicityReport {
    /// `‖q_0 - q_last‖₁` (rad)
    pub position_gap: f64,
    /// `‖q̇_0 - q̇_last‖₁` from forward differences (rad/s)
    pub velocity_gap: f64,
}

pub fn cyclicity_gap(traj: &Trajectory) -> CyclicityReport {
    let n = traj.n();
    let position_gap = (traj.q.row(0) - traj.q.row(n - 1)).lp_norm(1);
    let vel = traj.velocities();
    let velocity_gap = if vel.nrows() == 0 {
        0.0
    } else {
        (vel.row(0) - vel.row(vel.nrows() - 1)).lp_norm(1)
    };
    CyclicityReport {
        position_gap,
        velocity_gap,
    }
}

/// User-adjustable geometry. Every field is optional; unset fields keep the
/// application's shipped default.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioOverrides {
    pub n: Option<usize>,
    pub dt: Option<f64>,
    /// Planar link lengths (apps 1 and 2).
    pub link_lengths: Option<Vec<f64>>,
    pub q_max: Option<Vec<f64>>,
    /// Spatial chain definition replacing the bundled KUKA LWR 4 table.
    pub chain: Option<ChainFile>,
    pub circle_center: Option<[f64; 3]>,
    pub circle_radius: Option<f64>,
    pub start_position: Option<[f64; 3]>,
    pub goal_position: Option<[f64; 3]>,
    /// Intrinsic XYZ Euler angles of the end-effector orientation target.
    pub orientation_xyz: Option<[f64; 3]>,
    /// Distance between the two arm bases (app 2).
    pub base_distance: Option<f64>,
    /// Fixed first configuration.
    pub start_configuration: Option<Vec<f64>>,
    /// Configuration repeated over the trajectory as the first iterate.
    pub initial_guess: Option<Vec<f64>>,
}

/// Scenario file: an application id plus overrides.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub id: AppId,
    #[serde(flatten)]
    pub overrides: ScenarioOverrides,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioTask {
    Single {
        chain: KinematicChain,
        spec: TaskSpec,
    },
    ClosedChain {
        chains: ClosedChainSpec,
        /// Terminal position of the first arm's end-effector.
        goal: Vector3<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: AppId,
    pub description: &'static str,
    pub task: ScenarioTask,
    pub n: usize,
    pub dt: f64,
    pub pin_start: Option<Vec<f64>>,
    pub initial_guess: Option<Vec<f64>>,
    /// Whether the task-space path is closed.
    pub cyclic: bool,
}

impl Scenario {
    pub fn dof(&self) -> usize {
        match &self.task {
            ScenarioTask::Single { chain, .. } => chain.dof(),
            ScenarioTask::ClosedChain { chains, .. } => chains.dof(),
        }
    }

    pub fn problem(&self) -> Result<Problem> {
        match &self.task {
            ScenarioTask::Single { chain, spec } => Problem::from_chain(chain, spec, self.n),
            ScenarioTask::ClosedChain { chains, goal } => {
                let closure = loop_closure_rows(chains)?;
                let total = chains.dof();
                let (pa, pb, pc) = widen(planar_position_rows(&chains.arms[0])?, 0, total);
                let terminal = (pa, pb, pc - DVector::from_column_slice(&[goal.x, goal.y]));
                let last = {
                    let (a, b, c) = assemble_rows(&[
                        (closure.a.clone(), closure.b.clone(), closure.c.clone()),
                        terminal,
                    ]);
                    SimpleFormConstraint::new(closure.coupling.clone(), a, b, c)?
                };
                let mut cons = vec![TaskConstraint::Simple(closure); self.n - 1];
                cons.push(TaskConstraint::Simple(last));
                Problem::new(chains.space(), cons)
            }
        }
    }

    /// `base` with this scenario's horizon, spacing, pinned start and
    /// initial guess filled in.
    pub fn solver_config(&self, base: &SolverConfig) -> SolverConfig {
        SolverConfig {
            n: self.n,
            dt: self.dt,
            pin_start: self.pin_start.clone().or_else(|| base.pin_start.clone()),
            q_init: self.initial_guess.clone().or_else(|| base.q_init.clone()),
            ..base.clone()
        }
    }
}

const PLANAR_DOF: usize = 6;
const PLANAR_LIMIT: f64 = 2.6;

fn planar_chain(o: &ScenarioOverrides) -> Result<KinematicChain> {
    let lengths = o
        .link_lengths
        .clone()
        .unwrap_or_else(|| vec![1.0; PLANAR_DOF]);
    let q_max = o
        .q_max
        .clone()
        .unwrap_or_else(|| vec![PLANAR_LIMIT; lengths.len()]);
    KinematicChain::planar(lengths, q_max)
}

fn spatial_chain(o: &ScenarioOverrides) -> Result<KinematicChain> {
    let chain = match &o.chain {
        Some(file) => KinematicChain::try_from(file.clone())?,
        None => kuka_lwr4(),
    };
    match &o.q_max {
        Some(q_max) => {
            check_len("q_max", chain.dof(), q_max.len())?;
            let base = *chain.base();
            let rebuilt = match chain.model() {
                crate::kinematics::ChainModel::SpatialDh(s) => {
                    KinematicChain::spatial_dh(s.dh_rows.clone(), q_max.clone())?
                }
                crate::kinematics::ChainModel::Planar(_) => {
                    return Err(Error::InvalidChain("spatial application needs a DH chain".into()))
                }
            };
            Ok(rebuilt.with_base(base))
        }
        None => Ok(chain),
    }
}

fn v3(x: Option<[f64; 3]>, default: [f64; 3]) -> Vector3<f64> {
    Vector3::from(x.unwrap_or(default))
}

fn orientation(o: &ScenarioOverrides, default: [f64; 3]) -> Matrix3<f64> {
    let [a, b, c] = o.orientation_xyz.unwrap_or(default);
    rotation_xyz(a, b, c)
}

/// Equal-bend five-link arc reaching `wrist` from the base, with the sixth
/// link horizontal. Solved by Newton's method on the first absolute angle
/// and the common bend.
fn arched_configuration(lengths: &[f64], wrist: (f64, f64)) -> Result<Vec<f64>> {
    let k = lengths.len() - 1;
    let reach = |phi: f64, bend: f64| {
        let mut x = 0.0;
        let mut y = 0.0;
        let mut dx = [0.0; 2];
        let mut dy = [0.0; 2];
        for (j, l) in lengths[..k].iter().enumerate() {
            let a = phi - j as f64 * bend;
            x += l * a.cos();
            y += l * a.sin();
            dx[0] -= l * a.sin();
            dy[0] += l * a.cos();
            dx[1] += l * j as f64 * a.sin();
            dy[1] -= l * j as f64 * a.cos();
        }
        (x, y, dx, dy)
    };
    let (mut phi, mut bend) = (1.0, 0.3);
    for _ in 0..100 {
        let (x, y, dx, dy) = reach(phi, bend);
        let (ex, ey) = (x - wrist.0, y - wrist.1);
        if ex.hypot(ey) < 1e-13 {
            let mut q = vec![phi];
            q.extend(std::iter::repeat(-bend).take(k - 1));
            q.push(-(phi - (k - 1) as f64 * bend));
            return Ok(q);
        }
        let det = dx[0] * dy[1] - dx[1] * dy[0];
        phi -= (dy[1] * ex - dx[1] * ey) / det;
        bend -= (-dy[0] * ex + dx[0] * ey) / det;
    }
    Err(Error::InvalidTask(
        "could not construct a closed-chain start configuration".into(),
    ))
}

pub fn build_application(id: AppId, o: &ScenarioOverrides) -> Result<Scenario> {
    let mut scenario = match id {
        AppId::App1 => {
            let chain = planar_chain(o)?;
            let n = o.n.unwrap_or(100);
            let center = v3(o.circle_center, [3.5, 1.5, 0.0]);
            let radius = o.circle_radius.unwrap_or(0.5);
            let rot = orientation(o, [0.0, 0.0, 0.0]);
            let guess = match chain.model() {
                crate::kinematics::ChainModel::Planar(p) => {
                    let last = *p.link_lengths.last().unwrap();
                    arched_configuration(&p.link_lengths, (center.x - last, center.y)).ok()
                }
                crate::kinematics::ChainModel::SpatialDh(_) => None,
            };
            let entries = closed_circle_path(center, radius, Plane::XY, n)
                .into_iter()
                .enumerate()
                .map(|(t, p)| {
                    TaskEntry::position(AppliesAt::Step(t), p, [true, true, false]).with_rotation(rot)
                })
                .collect();
            Scenario {
                id,
                description: "planar 6-dof arm tracing a circle with a horizontal last link",
                task: ScenarioTask::Single {
                    chain,
                    spec: TaskSpec::new(entries)?,
                },
                n,
                dt: o.dt.unwrap_or(0.2),
                pin_start: None,
                initial_guess: guess,
                cyclic: true,
            }
        }
        AppId::App2 => {
            let lengths = o
                .link_lengths
                .clone()
                .unwrap_or_else(|| vec![1.0; PLANAR_DOF]);
            let q_max = o
                .q_max
                .clone()
                .unwrap_or_else(|| vec![PLANAR_LIMIT; lengths.len()]);
            let distance = o.base_distance.unwrap_or(7.0);
            let arm1 = KinematicChain::planar(lengths.clone(), q_max.clone())?;
            let arm2 = KinematicChain::planar(lengths.clone(), q_max)?
                .with_base(Pose::planar(distance, 0.0, PI));
            let chains = ClosedChainSpec::new([arm1, arm2], [0.0, PI])?;
            let start = v3(o.start_position, [distance / 2.0, 2.0, 0.0]);
            let goal = v3(o.goal_position, [distance / 2.0, 1.0, 0.0]);
            let pin = match &o.start_configuration {
                Some(q) => q.clone(),
                None => {
                    let last = *lengths.last().unwrap();
                    let q1 = arched_configuration(&lengths, (start.x - last, start.y))?;
                    let mut q = q1.clone();
                    q.extend(q1.iter().map(|x| -x));
                    q
                }
            };
            Scenario {
                id,
                description: "two planar 6-dof arms joined at the end-effector, point to point",
                task: ScenarioTask::ClosedChain { chains, goal },
                n: o.n.unwrap_or(50),
                dt: o.dt.unwrap_or(0.1),
                pin_start: Some(pin),
                initial_guess: None,
                cyclic: false,
            }
        }
        AppId::App3 => {
            let chain = spatial_chain(o)?;
            let n = o.n.unwrap_or(100);
            let center = v3(o.circle_center, [0.45, 0.0, 0.7]);
            let radius = o.circle_radius.unwrap_or(0.1);
            let rot = orientation(o, [0.0, 0.0, 0.0]);
            let entries = closed_circle_path(center, radius, Plane::YZ, n)
                .into_iter()
                .enumerate()
                .map(|(t, p)| TaskEntry::position(AppliesAt::Step(t), p, [true; 3]).with_rotation(rot))
                .collect();
            Scenario {
                id,
                description: "7-dof arm tracing a circle in the Y-Z plane at fixed orientation",
                task: ScenarioTask::Single {
                    chain,
                    spec: TaskSpec::new(entries)?,
                },
                n,
                dt: o.dt.unwrap_or(0.1),
                pin_start: None,
                initial_guess: Some(
                    o.initial_guess
                        .clone()
                        .unwrap_or_else(|| vec![0.0, 0.6, 0.0, -1.2, 0.0, 0.6, 0.0]),
                ),
                cyclic: true,
            }
        }
        AppId::App4 => {
            let chain = spatial_chain(o)?;
            let start = v3(o.start_position, [0.6, -0.2, 0.55]);
            let goal = v3(o.goal_position, [start.x, 0.2, 0.45]);
            let rot = orientation(o, [0.001, 1.04, 0.007]);
            let spec = TaskSpec::new(vec![
                TaskEntry::position(AppliesAt::All, start, [true, false, false]).with_rotation(rot),
                TaskEntry::position(AppliesAt::Step(0), start, [true; 3]),
                TaskEntry::position(AppliesAt::Terminal, goal, [true; 3]),
            ])?;
            Scenario {
                id,
                description: "7-dof arm moving in a plane of constant X at fixed orientation",
                task: ScenarioTask::Single { chain, spec },
                n: o.n.unwrap_or(50),
                dt: o.dt.unwrap_or(0.1),
                pin_start: None,
                initial_guess: Some(
                    o.initial_guess
                        .clone()
                        .unwrap_or_else(|| vec![0.0, -0.6, 0.0, 1.4, 0.0, 1.0, 0.0]),
                ),
                cyclic: false,
            }
        }
        AppId::App5 => {
            let chain = spatial_chain(o)?;
            let start = v3(o.start_position, [0.45, -0.2, 0.8]);
            let goal = v3(o.goal_position, [0.45, 0.15, 0.7]);
            let rot = orientation(o, [1.04, 0.0, 0.0]);
            let spec = TaskSpec::new(vec![
                TaskEntry::rotation(AppliesAt::All, rot),
                TaskEntry::position(AppliesAt::Step(0), start, [true; 3]),
                TaskEntry::position(AppliesAt::Terminal, goal, [true; 3]),
            ])?;
            Scenario {
                id,
                description: "7-dof arm moving point to point at fixed orientation",
                task: ScenarioTask::Single { chain, spec },
                n: o.n.unwrap_or(50),
                dt: o.dt.unwrap_or(0.1),
                pin_start: None,
                initial_guess: Some(
                    o.initial_guess
                        .clone()
                        .unwrap_or_else(|| vec![-0.4, -0.25, 0.12, 1.18, 1.03, 1.25, 0.02]),
                ),
                cyclic: false,
            }
        }
    };
    if let Some(q) = &o.start_configuration {
        check_len("start_configuration", scenario.dof(), q.len())?;
        scenario.pin_start = Some(q.clone());
    }
    if let Some(q) = &o.initial_guess {
        check_len("initial_guess", scenario.dof(), q.len())?;
        scenario.initial_guess = Some(q.clone());
    }
    if let Some(n) = o.n {
        if n < 3 {
            return Err(Error::InvalidConfig {
                field: "n".into(),
                reason: "scenarios need at least 3 timesteps".into(),
            });
        }
    }
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn planar_end(chain: &KinematicChain, q: &[f64]) -> Vector3<f64> {
        chain.forward_kinematics(q).unwrap().position
    }

    #[test]
    fn circle_points_in_order() {
        let pts = circle_waypoints(Vector3::zeros(), 1.0, Plane::XY, 4);
        let want = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        for (p, w) in pts.iter().zip(want) {
            assert_relative_eq!(p.x, w[0], epsilon = 1e-15);
            assert_relative_eq!(p.y, w[1], epsilon = 1e-15);
            assert_eq!(p.z, 0.0);
        }
    }

    #[test]
    fn circle_points_on_circle_and_closed() {
        let c = Vector3::new(0.3, -1.0, 2.0);
        for plane in [Plane::XY, Plane::YZ, Plane::XZ] {
            let pts = closed_circle_path(c, 0.25, plane, 17);
            assert_eq!(pts.len(), 17);
            assert_eq!(pts[0], pts[16]);
            for p in &pts {
                assert_relative_eq!((p - c).norm(), 0.25, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn row_counts() {
        let rows = |id| {
            let s = build_application(id, &ScenarioOverrides { n: Some(10), ..Default::default() }).unwrap();
            let p = s.problem().unwrap();
            (0..p.n()).map(|t| p.constraints()[t].rows()).collect::<Vec<_>>()
        };
        assert!(rows(AppId::App1).iter().all(|&r| r == 4));
        assert!(rows(AppId::App3).iter().all(|&r| r == 12));
        let r5 = rows(AppId::App5);
        assert_eq!(r5[0], 12);
        assert!(r5[1..9].iter().all(|&r| r == 9));
        assert_eq!(r5[9], 12);
        let r4 = rows(AppId::App4);
        // the trajectory-wide X row stays alongside the full endpoint position
        assert_eq!((r4[0], r4[5], r4[9]), (13, 10, 13));
        let r2 = rows(AppId::App2);
        assert_eq!((r2[0], r2[9]), (6, 8));
    }

    #[test]
    fn unknown_id_rejected() {
        assert!(matches!("app9".parse::<AppId>(), Err(Error::UnknownScenario(_))));
        assert_eq!("app3".parse::<AppId>().unwrap(), AppId::App3);
    }

    fn dual(distance: f64) -> ClosedChainSpec {
        let arm = |base| {
            KinematicChain::planar(vec![1.0; 6], vec![3.0; 6]).unwrap().with_base(base)
        };
        ClosedChainSpec::new(
            [arm(Pose::identity()), arm(Pose::planar(distance, 0.0, PI))],
            [0.0, PI],
        )
        .unwrap()
    }

    #[test]
    fn loop_closure_at_zero_configuration() {
        let spec = dual(4.0);
        let con = loop_closure_rows(&spec).unwrap();
        let q = DVector::zeros(12);
        let (v, w) = spec.space().slack_targets(&q);
        let r = con.residual(&v, &w);
        // arm 1 reaches (6, 0); arm 2 from (4, 0) facing -x reaches (-2, 0)
        let p1 = planar_end(&spec.arms[0], &[0.0; 6]);
        let p2 = planar_end(&spec.arms[1], &[0.0; 6]);
        assert_relative_eq!(r[0], p1.x - p2.x, epsilon = 1e-12);
        assert_relative_eq!(r[0], 8.0, epsilon = 1e-12);
        assert_relative_eq!(r[1], 0.0, epsilon = 1e-12);
        for k in 2..6 {
            assert_relative_eq!(r[k], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn mirrored_configuration_closes_the_loop() {
        let lengths = vec![1.0; 6];
        let q1 = arched_configuration(&lengths, (2.5, 2.0)).unwrap();
        let mut q: Vec<f64> = q1.clone();
        q.extend(q1.iter().map(|x| -x));
        let spec = dual(7.0);
        let p1 = planar_end(&spec.arms[0], &q[..6]);
        let p2 = planar_end(&spec.arms[1], &q[6..]);
        assert_relative_eq!((p1 - p2).norm(), 0.0, epsilon = 1e-12);
        let con = loop_closure_rows(&spec).unwrap();
        let (v, w) = spec.space().slack_targets(&DVector::from_vec(q));
        assert!(con.residual(&v, &w).amax() < 1e-12);
    }

    #[test]
    fn coincident_bases_rejected() {
        let arm = KinematicChain::planar(vec![1.0; 2], vec![1.0; 2]).unwrap();
        assert!(ClosedChainSpec::new([arm.clone(), arm], [0.0, PI]).is_err());
    }

    #[test]
    fn arched_start_reaches_target() {
        let lengths = vec![1.0; 6];
        let q = arched_configuration(&lengths, (2.5, 2.0)).unwrap();
        let chain = KinematicChain::planar(lengths, vec![PLANAR_LIMIT; 6]).unwrap();
        let p = planar_end(&chain, &q);
        assert_relative_eq!(p.x, 3.5, epsilon = 1e-12);
        assert_relative_eq!(p.y, 2.0, epsilon = 1e-12);
        assert_relative_eq!(q.iter().sum::<f64>(), 0.0, epsilon = 1e-12);
        assert!(q.iter().all(|x| x.abs() < PLANAR_LIMIT));
    }

    #[test]
    fn app2_pinned_start_is_feasible() {
        let s = build_application(AppId::App2, &ScenarioOverrides::default()).unwrap();
        let p = s.problem().unwrap();
        let q0 = DVector::from_vec(s.pin_start.clone().unwrap());
        assert!(p.task_residual(0, &q0).amax() < 1e-12);
    }

    #[test]
    fn cyclicity_examples() {
        let q = DMatrix::from_row_slice(4, 1, &[0.0, 0.5, 0.5, 0.0]);
        let same = Trajectory { q, dt: 0.1 };
        let r = cyclicity_gap(&same);
        assert_eq!(r.position_gap, 0.0);
        let q = DMatrix::from_row_slice(4, 1, &[0.0, 0.1, -0.099, 0.001]);
        let r = cyclicity_gap(&Trajectory { q, dt: 0.1 });
        assert_relative_eq!(r.position_gap, 0.001, epsilon = 1e-15);
        assert_relative_eq!(r.velocity_gap, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn overrides_are_checked() {
        let bad = ScenarioOverrides { initial_guess: Some(vec![0.0; 3]), ..Default::default() };
        assert!(build_application(AppId::App3, &bad).is_err());
        let short = ScenarioOverrides { n: Some(2), ..Default::default() };
        assert!(build_application(AppId::App1, &short).is_err());
    }

    #[test]
    fn scenario_file_parses() {
        let f: ScenarioFile =
            serde_json::from_str(r#"{"id": "app1", "n": 20, "circle_radius": 0.3}"#).unwrap();
        assert_eq!(f.id, AppId::App1);
        assert_eq!(f.overrides.n, Some(20));
        assert_eq!(f.overrides.circle_radius, Some(0.3));
    }
}
