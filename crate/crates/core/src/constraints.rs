//! Task constraints in lifted slack coordinates.
//!
//! Two algebraic forms are supported:
//!
//! * [`SimpleFormConstraint`]: rows `a·v + b·w + c`, globally affine in the
//!   slacks `v = cos(A q)`, `w = sin(A q)`. Planar chains compile to this.
//! * [`ConstraintEvaluator`]: rows evaluated through the lifted forward
//!   kinematics with per-joint slacks. Each row is affine in every
//!   `(v_j, w_j)` pair separately; [`ConstraintEvaluator::affine_slice`]
//!   extracts the coefficients of one pair.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::kinematics::{KinematicChain, Pose};

/// Timesteps an entry applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppliesAt {
    All,
    Step(usize),
    Terminal,
}

impl AppliesAt {
    pub fn matches(self, t: usize, n: usize) -> bool {
        match self {
            AppliesAt::All => true,
            AppliesAt::Step(s) => s == t,
            AppliesAt::Terminal => t + 1 == n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionTarget {
    pub value: Vector3<f64>,
    pub mask: [bool; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskEntry {
    pub applies_at: AppliesAt,
    pub position: Option<PositionTarget>,
    pub rotation: Option<Matrix3<f64>>,
}

impl TaskEntry {
    pub fn position(applies_at: AppliesAt, value: Vector3<f64>, mask: [bool; 3]) -> Self {
        Self {
            applies_at,
            position: Some(PositionTarget { value, mask }),
            rotation: None,
        }
    }

    pub fn rotation(applies_at: AppliesAt, rotation: Matrix3<f64>) -> Self {
        Self {
            applies_at,
            position: None,
            rotation: Some(rotation),
        }
    }

    pub fn with_rotation(mut self, rotation: Matrix3<f64>) -> Self {
        self.rotation = Some(rotation);
        self
    }

    fn validate(&self) -> Result<()> {
        if let Some(r) = &self.rotation {
            let err = (r.transpose() * r - Matrix3::identity()).amax();
            if err > 1e-6 || (r.determinant() - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidTask(
                    "desired rotation is not a proper rotation matrix".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaskSpec {
    pub entries: Vec<TaskEntry>,
}

impl TaskSpec {
    pub fn new(entries: Vec<TaskEntry>) -> Result<Self> {
        for e in &entries {
            e.validate()?;
        }
        Ok(Self { entries })
    }

    pub fn entries_at(&self, t: usize, n: usize) -> impl Iterator<Item = &TaskEntry> {
        self.entries
            .iter()
            .filter(move |e| e.applies_at.matches(t, n))
    }

    /// Merged position rows `(axis, value)` and rotation target active at `t`.
    fn active_rows(&self, t: usize, n: usize) -> (Vec<(usize, f64)>, Option<Matrix3<f64>>) {
        let mut position = Vec::new();
        let mut rotation = None;
        for e in self.entries_at(t, n) {
            if let Some(p) = &e.position {
                for axis in 0..3 {
                    if p.mask[axis] {
                        position.push((axis, p.value[axis]));
                    }
                }
            }
            if let Some(r) = e.rotation {
                rotation = Some(r);
            }
        }
        (position, rotation)
    }
}

/// Rows `f_d(v, w) = a_d·v + b_d·w + c_d` over the lifted angles `A q`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleFormConstraint {
    pub coupling: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DVector<f64>,
}

impl SimpleFormConstraint {
    pub fn new(
        coupling: DMatrix<f64>,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DVector<f64>,
    ) -> Result<Self> {
        let r = coupling.nrows();
        let d = c.len();
        if d == 0 {
            return Err(Error::InvalidTask("constraint has no rows".into()));
        }
        check_len("coefficient rows a", d, a.nrows())?;
        check_len("coefficient rows b", d, b.nrows())?;
        check_len("coefficient columns a", r, a.ncols())?;
        check_len("coefficient columns b", r, b.ncols())?;
        Ok(Self { coupling, a, b, c })
    }

    pub fn rows(&self) -> usize {
        self.c.len()
    }

    pub fn lifted_dim(&self) -> usize {
        self.coupling.nrows()
    }

    /// `[a b]`, the Jacobian with respect to the stacked slack `[v; w]`.
    pub fn stacked_matrix(&self) -> DMatrix<f64> {
        let (d, r) = self.a.shape();
        let mut m = DMatrix::zeros(d, 2 * r);
        m.view_mut((0, 0), (d, r)).copy_from(&self.a);
        m.view_mut((0, r), (d, r)).copy_from(&self.b);
        m
    }

    pub fn residual(&self, v: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        &self.a * v + &self.b * w + &self.c
    }
}

/// Coefficients of every row in one slack pair: `f_d = g_d v_j + h_d w_j + p_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineSlice {
    pub g: DVector<f64>,
    pub h: DVector<f64>,
    pub p: DVector<f64>,
}

impl AffineSlice {
    pub fn eval(&self, vj: f64, wj: f64) -> DVector<f64> {
        &self.g * vj + &self.h * wj + &self.p
    }
}

/// Rows evaluated through the lifted forward kinematics of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintEvaluator {
    chain: KinematicChain,
    position: Vec<(usize, f64)>,
    rotation: Option<Matrix3<f64>>,
}

impl ConstraintEvaluator {
    /// `position` holds `(axis, desired value)` pairs.
    pub fn new(
        chain: KinematicChain,
        position: Vec<(usize, f64)>,
        rotation: Option<Matrix3<f64>>,
    ) -> Result<Self> {
        if position.iter().any(|(axis, _)| *axis > 2) {
            return Err(Error::InvalidTask("position axis out of range".into()));
        }
        if position.is_empty() && rotation.is_none() {
            return Err(Error::InvalidTask("constraint has no rows".into()));
        }
        Ok(Self {
            chain,
            position,
            rotation,
        })
    }

    pub fn chain(&self) -> &KinematicChain {
        &self.chain
    }

    pub fn rows(&self) -> usize {
        self.position.len() + if self.rotation.is_some() { 9 } else { 0 }
    }

    pub fn dof(&self) -> usize {
        self.chain.dof()
    }

    fn rows_of_transform(&self, t: &Matrix4<f64>) -> DVector<f64> {
        let pose = Pose::from_homogeneous(t);
        self.rows_of_pose(&pose)
    }

    fn rows_of_pose(&self, pose: &Pose) -> DVector<f64> {
        let mut out = DVector::zeros(self.rows());
        for (k, (axis, value)) in self.position.iter().enumerate() {
            out[k] = pose.position[*axis] - value;
        }
        if let Some(r) = &self.rotation {
            let off = self.position.len();
            for i in 0..3 {
                for j in 0..3 {
                    out[off + 3 * i + j] = pose.rotation[(i, j)] - r[(i, j)];
                }
            }
        }
        out
    }

    pub fn residual(&self, v: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let m = self.dof();
        assert!(v.len() == m && w.len() == m, "slack dimension mismatch");
        let mut t = self.chain.base().to_homogeneous();
        for j in 0..m {
            t *= self.chain.lifted_joint_transform(j, v[j], w[j]);
        }
        self.rows_of_transform(&t)
    }

    pub fn residual_at_angles(&self, q: &[f64]) -> Result<DVector<f64>> {
        Ok(self.rows_of_pose(&self.chain.forward_kinematics(q)?))
    }

    /// Three-point slice of all rows in pair `j`, exact because each row is
    /// affine in `(v_j, w_j)`.
    pub fn affine_slice(&self, v: &DVector<f64>, w: &DVector<f64>, j: usize) -> Result<AffineSlice> {
        let m = self.dof();
        if j >= m {
            return Err(Error::Dimension {
                what: "joint index",
                expected: m,
                got: j,
            });
        }
        check_len("slack vector v", m, v.len())?;
        check_len("slack vector w", m, w.len())?;
        let mut prefix = self.chain.base().to_homogeneous();
        for i in 0..j {
            prefix *= self.chain.lifted_joint_transform(i, v[i], w[i]);
        }
        let mut suffix = Matrix4::identity();
        for i in j + 1..m {
            suffix *= self.chain.lifted_joint_transform(i, v[i], w[i]);
        }
        Ok(self.slice_between(&prefix, &suffix, j))
    }

    pub(crate) fn slice_between(
        &self,
        prefix: &Matrix4<f64>,
        suffix: &Matrix4<f64>,
        j: usize,
    ) -> AffineSlice {
        let at = |vj: f64, wj: f64| {
            self.rows_of_transform(&(prefix * self.chain.lifted_joint_transform(j, vj, wj) * suffix))
        };
        let f1 = at(1.0, 0.0);
        let f2 = at(-1.0, 0.0);
        let f3 = at(0.0, 1.0);
        let g = (&f1 - &f2) * 0.5;
        let p = (f1 + f2) * 0.5;
        let h = f3 - &p;
        AffineSlice { g, h, p }
    }
}

/// Compiled constraint at one timestep.
#[derive(Debug, Clone, PartialEq)]
pub enum TaskConstraint {
    Simple(SimpleFormConstraint),
    General(ConstraintEvaluator),
}

impl TaskConstraint {
    pub fn rows(&self) -> usize {
        match self {
            TaskConstraint::Simple(s) => s.rows(),
            TaskConstraint::General(g) => g.rows(),
        }
    }

    pub fn residual(&self, v: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        match self {
            TaskConstraint::Simple(s) => s.residual(v, w),
            TaskConstraint::General(g) => g.residual(v, w),
        }
    }
}

/// Lifted position rows of a planar chain in world coordinates.
///
/// Returns `(a, b, c)` with two rows (x then y) such that the end-effector
/// position equals `a·v + b·w + c` for cumulative slacks `v`, `w`.
pub fn planar_position_rows(
    chain: &KinematicChain,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DVector<f64>)> {
    let lengths = match chain.model() {
        crate::kinematics::ChainModel::Planar(p) => &p.link_lengths,
        _ => {
            return Err(Error::InvalidTask(
                "simple-form compilation needs a planar chain".into(),
            ))
        }
    };
    let m = chain.dof();
    let (s, c) = chain.base_yaw().sin_cos();
    let mut a = DMatrix::zeros(2, m);
    let mut b = DMatrix::zeros(2, m);
    for (j, l) in lengths.iter().enumerate() {
        a[(0, j)] = l * c;
        b[(0, j)] = -l * s;
        a[(1, j)] = l * s;
        b[(1, j)] = l * c;
    }
    let base = chain.base().position;
    Ok((a, b, DVector::from_vec(vec![base.x, base.y])))
}

/// Rows pinning the absolute direction of the last link to `angle`.
pub fn planar_orientation_rows(
    chain: &KinematicChain,
    angle: f64,
) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
    let m = chain.dof();
    let (s, c) = chain.base_yaw().sin_cos();
    let mut a = DMatrix::zeros(2, m);
    let mut b = DMatrix::zeros(2, m);
    a[(0, m - 1)] = c;
    b[(0, m - 1)] = -s;
    a[(1, m - 1)] = s;
    b[(1, m - 1)] = c;
    (a, b, DVector::from_vec(vec![-angle.cos(), -angle.sin()]))
}

pub fn compile_planar(
    chain: &KinematicChain,
    spec: &TaskSpec,
    t: usize,
    n: usize,
) -> Result<SimpleFormConstraint> {
    let (pos_a, pos_b, base) = planar_position_rows(chain)?;
    let (position, rotation) = spec.active_rows(t, n);
    let m = chain.dof();
    let mut a_rows = Vec::new();
    let mut b_rows = Vec::new();
    let mut c = Vec::new();
    for (axis, value) in position {
        if axis == 2 {
            return Err(Error::InvalidTask(
                "planar chains cannot constrain the z coordinate".into(),
            ));
        }
        a_rows.push(pos_a.row(axis).into_owned());
        b_rows.push(pos_b.row(axis).into_owned());
        c.push(base[axis] - value);
    }
    if let Some(r) = rotation {
        let angle = r[(1, 0)].atan2(r[(0, 0)]);
        let (oa, ob, oc) = planar_orientation_rows(chain, angle);
        for k in 0..2 {
            a_rows.push(oa.row(k).into_owned());
            b_rows.push(ob.row(k).into_owned());
            c.push(oc[k]);
        }
    }
    if c.is_empty() {
        return Err(Error::InvalidTask(format!("no task rows at timestep {t}")));
    }
    let d = c.len();
    let a = DMatrix::from_fn(d, m, |i, j| a_rows[i][j]);
    let b = DMatrix::from_fn(d, m, |i, j| b_rows[i][j]);
    SimpleFormConstraint::new(chain.cumulative_coupling_matrix(), a, b, DVector::from_vec(c))
}

pub fn compile_spatial(
    chain: &KinematicChain,
    spec: &TaskSpec,
    t: usize,
    n: usize,
) -> Result<ConstraintEvaluator> {
    let (position, rotation) = spec.active_rows(t, n);
    ConstraintEvaluator::new(chain.clone(), position, rotation)
}

/// Compiles the constraint at `t` in the form matching the chain type.
pub fn compile(chain: &KinematicChain, spec: &TaskSpec, t: usize, n: usize) -> Result<TaskConstraint> {
    if chain.is_planar() {
        compile_planar(chain, spec, t, n).map(TaskConstraint::Simple)
    } else {
        compile_spatial(chain, spec, t, n).map(TaskConstraint::General)
    }
}

/// `cos(A q)` and `sin(A q)`.
pub fn slack_targets_with(coupling: &DMatrix<f64>, q: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let theta = coupling * q;
    (theta.map(f64::cos), theta.map(f64::sin))
}

pub fn slack_targets(chain: &KinematicChain, q: &[f64]) -> Result<(DVector<f64>, DVector<f64>)> {
    check_len("joint vector", chain.dof(), q.len())?;
    Ok(slack_targets_with(
        &chain.cumulative_coupling_matrix(),
        &DVector::from_column_slice(q),
    ))
}

/// On-disk task description: a list of waypoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskFile {
    pub waypoints: Vec<WaypointFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepRef {
    Index(usize),
    Keyword(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaypointFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<StepRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Vec<bool>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<Vec<f64>>,
    #[serde(default)]
    pub terminal: bool,
}

impl TryFrom<TaskFile> for TaskSpec {
    type Error = Error;

    fn try_from(file: TaskFile) -> Result<Self> {
        let mut entries = Vec::with_capacity(file.waypoints.len());
        for (i, wp) in file.waypoints.into_iter().enumerate() {
            let applies_at = if wp.terminal {
                AppliesAt::Terminal
            } else {
                match wp.t {
                    Some(StepRef::Index(k)) => AppliesAt::Step(k),
                    Some(StepRef::Keyword(ref s)) if s == "all" => AppliesAt::All,
                    Some(StepRef::Keyword(ref s)) if s == "terminal" => AppliesAt::Terminal,
                    Some(StepRef::Keyword(s)) => {
                        return Err(Error::InvalidTask(format!(
                            "waypoint {i}: unknown timestep `{s}`"
                        )))
                    }
                    None => AppliesAt::All,
                }
            };
            let position = match wp.position {
                Some(p) => {
                    if p.is_empty() || p.len() > 3 {
                        return Err(Error::InvalidTask(format!(
                            "waypoint {i}: position needs 1 to 3 components"
                        )));
                    }
                    let mask_in = wp.mask.unwrap_or_else(|| vec![true; p.len()]);
                    check_len("waypoint mask", p.len(), mask_in.len())?;
                    let mut value = Vector3::zeros();
                    let mut mask = [false; 3];
                    for k in 0..p.len() {
                        value[k] = p[k];
                        mask[k] = mask_in[k];
                    }
                    Some(PositionTarget { value, mask })
                }
                None => None,
            };
            let rotation = match wp.rotation {
                Some(r) => {
                    check_len("waypoint rotation", 9, r.len())?;
                    Some(Matrix3::from_row_slice(&r))
                }
                None => None,
            };
            entries.push(TaskEntry {
                applies_at,
                position,
                rotation,
            });
        }
        TaskSpec::new(entries)
    }
}
