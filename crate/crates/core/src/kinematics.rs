//! Forward kinematics for planar and Denavit–Hartenberg chains.
//!
//! Besides the usual angle-evaluated kinematics, every chain can be evaluated
//! at *lifted* joint coordinates: each `cos(q_j)` is replaced by a free scalar
//! `v_j` and each `sin(q_j)` by `w_j`. The resulting transform product is
//! affine in every `(v_j, w_j)` pair, which is what the constraint compiler
//! relies on to slice general task constraints joint by joint.

use nalgebra::{DMatrix, Matrix3, Matrix4, Rotation3, Translation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// One row of a standard (distal) Denavit–Hartenberg table.
///
/// The joint transform is `Rz(q + theta_offset) · Tz(d) · Tx(a) · Rx(alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DhRow {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    #[serde(default)]
    pub theta_offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanarChain {
    pub link_lengths: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialDhChain {
    pub dh_rows: Vec<DhRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChainModel {
    Planar(PlanarChain),
    SpatialDh(SpatialDhChain),
}

/// Rigid pose. Rotation is only guaranteed orthonormal for angle-evaluated FK.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub rotation: Matrix3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            position: Vector3::zeros(),
            rotation: Matrix3::identity(),
        }
    }

    /// Pose in the XY plane rotated by `yaw` about z.
    pub fn planar(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            position: Vector3::new(x, y, 0.0),
            rotation: *Rotation3::from_axis_angle(&Vector3::z_axis(), yaw).matrix(),
        }
    }

    pub fn from_homogeneous(t: &Matrix4<f64>) -> Self {
        Self {
            position: t.fixed_view::<3, 1>(0, 3).into_owned(),
            rotation: t.fixed_view::<3, 3>(0, 0).into_owned(),
        }
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut t = Matrix4::identity();
        t.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        t.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.position);
        t
    }
}

/// Intrinsic X-then-Y-then-Z Euler rotation, `Rx(a) · Ry(b) · Rz(c)`.
pub fn rotation_xyz(a: f64, b: f64, c: f64) -> Matrix3<f64> {
    let rx = Rotation3::from_axis_angle(&Vector3::x_axis(), a);
    let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), b);
    let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), c);
    *(rx * ry * rz).matrix()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KinematicChain {
    q_max: Vec<f64>,
    model: ChainModel,
    base: Pose,
}

impl KinematicChain {
    pub fn planar(link_lengths: Vec<f64>, q_max: Vec<f64>) -> Result<Self> {
        if link_lengths.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidChain(
                "planar link lengths must be strictly positive".into(),
            ));
        }
        Self::new(ChainModel::Planar(PlanarChain { link_lengths }), q_max)
    }

    pub fn spatial_dh(dh_rows: Vec<DhRow>, q_max: Vec<f64>) -> Result<Self> {
        Self::new(ChainModel::SpatialDh(SpatialDhChain { dh_rows }), q_max)
    }

    fn new(model: ChainModel, q_max: Vec<f64>) -> Result<Self> {
        let m = match &model {
            ChainModel::Planar(p) => p.link_lengths.len(),
            ChainModel::SpatialDh(s) => s.dh_rows.len(),
        };
        if m == 0 {
            return Err(Error::InvalidChain("chain needs at least one joint".into()));
        }
        check_len("q_max", m, q_max.len())?;
        if q_max.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::InvalidChain(
                "joint limits must be strictly positive".into(),
            ));
        }
        Ok(Self {
            q_max,
            model,
            base: Pose::identity(),
        })
    }

    pub fn with_base(mut self, base: Pose) -> Self {
        self.base = base;
        self
    }

    pub fn dof(&self) -> usize {
        self.q_max.len()
    }

    pub fn q_max(&self) -> &[f64] {
        &self.q_max
    }

    pub fn model(&self) -> &ChainModel {
        &self.model
    }

    pub fn base(&self) -> &Pose {
        &self.base
    }

    pub fn is_planar(&self) -> bool {
        matches!(self.model, ChainModel::Planar(_))
    }

    /// Rotation of the base about z. Only meaningful for planar chains.
    pub fn base_yaw(&self) -> f64 {
        self.base.rotation[(1, 0)].atan2(self.base.rotation[(0, 0)])
    }

    pub fn forward_kinematics(&self, q: &[f64]) -> Result<Pose> {
        check_len("joint vector", self.dof(), q.len())?;
        let base = self.base;
        match &self.model {
            ChainModel::Planar(p) => {
                let mut phi = 0.0;
                let mut local = Vector3::zeros();
                for (l, qj) in p.link_lengths.iter().zip(q) {
                    phi += qj;
                    local += Vector3::new(l * phi.cos(), l * phi.sin(), 0.0);
                }
                let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), phi);
                Ok(Pose {
                    position: base.position + base.rotation * local,
                    rotation: base.rotation * rz.matrix(),
                })
            }
            ChainModel::SpatialDh(s) => {
                let mut t = base.to_homogeneous();
                for (row, qj) in s.dh_rows.iter().zip(q) {
                    let joint = Rotation3::from_axis_angle(&Vector3::z_axis(), qj + row.theta_offset)
                        .to_homogeneous()
                        * Translation3::new(row.a, 0.0, row.d).to_homogeneous()
                        * Rotation3::from_axis_angle(&Vector3::x_axis(), row.alpha)
                            .to_homogeneous();
                    t *= joint;
                }
                Ok(Pose::from_homogeneous(&t))
            }
        }
    }

    /// Transform of joint `j` with `cos(q_j) -> v`, `sin(q_j) -> w`.
    pub fn lifted_joint_transform(&self, j: usize, v: f64, w: f64) -> Matrix4<f64> {
        match &self.model {
            ChainModel::Planar(p) => {
                let l = p.link_lengths[j];
                Matrix4::new(
                    v, -w, 0.0, l * v, //
                    w, v, 0.0, l * w, //
                    0.0, 0.0, 1.0, 0.0, //
                    0.0, 0.0, 0.0, 1.0,
                )
            }
            ChainModel::SpatialDh(s) => {
                let row = s.dh_rows[j];
                let (so, co) = row.theta_offset.sin_cos();
                let c = v * co - w * so;
                let sn = w * co + v * so;
                let (sa, ca) = row.alpha.sin_cos();
                Matrix4::new(
                    c, -sn * ca, sn * sa, row.a * c, //
                    sn, c * ca, -c * sa, row.a * sn, //
                    0.0, sa, ca, row.d, //
                    0.0, 0.0, 0.0, 1.0,
                )
            }
        }
    }

    pub fn generalized_forward_kinematics(&self, v: &[f64], w: &[f64]) -> Result<Pose> {
        check_len("slack vector v", self.dof(), v.len())?;
        check_len("slack vector w", self.dof(), w.len())?;
        let mut t = self.base.to_homogeneous();
        for j in 0..self.dof() {
            t *= self.lifted_joint_transform(j, v[j], w[j]);
        }
        Ok(Pose::from_homogeneous(&t))
    }

    /// Matrix mapping `q_t` to the angles whose cosine and sine get lifted.
    ///
    /// Planar chains lift cumulative angles (lower-triangular ones), spatial
    /// chains lift each joint angle directly.
    pub fn cumulative_coupling_matrix(&self) -> DMatrix<f64> {
        let m = self.dof();
        match self.model {
            ChainModel::Planar(_) => DMatrix::from_fn(m, m, |r, c| if c <= r { 1.0 } else { 0.0 }),
            ChainModel::SpatialDh(_) => DMatrix::identity(m, m),
        }
    }
}

/// On-disk chain description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ChainFile {
    Planar {
        link_lengths: Vec<f64>,
        q_max: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        base: Option<BaseFile>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        note: Option<String>,
    },
    SpatialDh {
        dh_rows: Vec<DhRow>,
        q_max: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        base: Option<BaseFile>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        note: Option<String>,
    },
}

/// Base pose: position plus a row-major rotation matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaseFile {
    #[serde(default)]
    pub position: [f64; 3],
    #[serde(default = "identity_rows")]
    pub rotation: [f64; 9],
}

fn identity_rows() -> [f64; 9] {
    [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]
}

impl BaseFile {
    fn to_pose(&self) -> Pose {
        Pose {
            position: Vector3::from(self.position),
            rotation: Matrix3::from_row_slice(&self.rotation),
        }
    }
}

impl TryFrom<ChainFile> for KinematicChain {
    type Error = Error;

    fn try_from(file: ChainFile) -> Result<Self> {
        let (chain, base) = match file {
            ChainFile::Planar {
                link_lengths,
                q_max,
                base,
                ..
            } => (KinematicChain::planar(link_lengths, q_max)?, base),
            ChainFile::SpatialDh {
                dh_rows, q_max, base, ..
            } => (KinematicChain::spatial_dh(dh_rows, q_max)?, base),
        };
        Ok(match base {
            Some(b) => chain.with_base(b.to_pose()),
            None => chain,
        })
    }
}

/// DH table of the KUKA LWR 4 as published in the manufacturer datasheet.
/// Kept as an editable data file; see `configs/kuka_lwr4.json`.
pub const KUKA_LWR4_JSON: &str = include_str!("../data/kuka_lwr4.json");

pub fn kuka_lwr4() -> KinematicChain {
    let file: ChainFile =
        serde_json::from_str(KUKA_LWR4_JSON).expect("bundled KUKA LWR 4 table is valid json");
    KinematicChain::try_from(file).expect("bundled KUKA LWR 4 table is a valid chain")
}
