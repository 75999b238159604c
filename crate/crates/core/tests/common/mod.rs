//! Independent reference computations shared by the integration suites.
#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use tcopt::kinematics::{ChainModel, DhRow, KinematicChain, Pose};
use tcopt::constraints::{AffineSlice, SimpleFormConstraint};
use tcopt::nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use tcopt::solver::{minimize_l2, SlackMultipliers, Weights};

pub type M4 = [[f64; 4]; 4];

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

fn mul(a: &M4, b: &M4) -> M4 {
    let mut c = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            c[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

/// `Rz(θ) Tz(d) Tx(a) Rx(α)` written out entry by entry.
fn dh(theta: f64, row: &DhRow) -> M4 {
    let (st, ct) = theta.sin_cos();
    let (sa, ca) = row.alpha.sin_cos();
    [
        [ct, -st * ca, st * sa, row.a * ct],
        [st, ct * ca, -ct * sa, row.a * st],
        [0.0, sa, ca, row.d],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

fn pose_to_m4(p: &Pose) -> M4 {
    let mut m = [[0.0; 4]; 4];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = p.rotation[(i, j)];
        }
        m[i][3] = p.position[i];
    }
    m[3][3] = 1.0;
    m
}

/// End-effector pose from joint angles, computed without the library's
/// kinematics code paths.
pub fn fk_oracle(chain: &KinematicChain, q: &[f64]) -> (Vector3<f64>, Matrix3<f64>) {
    let mut t = pose_to_m4(chain.base());
    match chain.model() {
        ChainModel::Planar(p) => {
            let mut angle = 0.0;
            let (mut x, mut y) = (0.0, 0.0);
            for (l, qj) in p.link_lengths.iter().zip(q) {
                angle += qj;
                x += l * angle.cos();
                y += l * angle.sin();
            }
            let local = [
                [angle.cos(), -angle.sin(), 0.0, x],
                [angle.sin(), angle.cos(), 0.0, y],
                [0.0, 0.0, 1.0, 0.0],
                [0.0, 0.0, 0.0, 1.0],
            ];
            t = mul(&t, &local);
        }
        ChainModel::SpatialDh(s) => {
            for (row, qj) in s.dh_rows.iter().zip(q) {
                t = mul(&t, &dh(qj + row.theta_offset, row));
            }
        }
    }
    (
        Vector3::new(t[0][3], t[1][3], t[2][3]),
        Matrix3::from_fn(|i, j| t[i][j]),
    )
}

/// `(α, β, γ)` with `R = Rx(α) Ry(β) Rz(γ)`, for `|β| < π/2`.
pub fn euler_xyz(r: &Matrix3<f64>) -> [f64; 3] {
    let b = r[(0, 2)].clamp(-1.0, 1.0).asin();
    let a = (-r[(1, 2)]).atan2(r[(2, 2)]);
    let c = (-r[(0, 1)]).atan2(r[(0, 0)]);
    [a, b, c]
}

pub fn random_q(rng: &mut StdRng, chain: &KinematicChain) -> Vec<f64> {
    chain.q_max().iter().map(|l| rng.gen_range(-*l..=*l)).collect()
}

pub fn random_slacks(rng: &mut StdRng, r: usize) -> (DVector<f64>, DVector<f64>) {
    (
        DVector::from_fn(r, |_, _| rng.gen_range(-1.0..=1.0)),
        DVector::from_fn(r, |_, _| rng.gen_range(-1.0..=1.0)),
    )
}

pub fn random_matrix(rng: &mut StdRng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..=1.0))
}

pub fn random_vector(rng: &mut StdRng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-scale..=scale))
}

pub fn random_dh_chain(rng: &mut StdRng, m: usize) -> KinematicChain {
    let rows = (0..m)
        .map(|_| DhRow {
            a: rng.gen_range(-0.5..0.5),
            alpha: rng.gen_range(-3.0..3.0),
            d: rng.gen_range(-0.5..0.5),
            theta_offset: rng.gen_range(-1.0..1.0),
        })
        .collect();
    KinematicChain::spatial_dh(rows, vec![3.0; m])
        .unwrap()
        .with_base(Pose {
            position: Vector3::new(0.1, -0.2, 0.3),
            rotation: tcopt::kinematics::rotation_xyz(0.3, -0.4, 1.1),
        })
}

pub fn random_planar_chain(rng: &mut StdRng, m: usize) -> KinematicChain {
    let lengths = (0..m).map(|_| rng.gen_range(0.2..1.5)).collect();
    KinematicChain::planar(lengths, vec![2.5; m])
        .unwrap()
        .with_base(Pose::planar(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-3.0..3.0)))
}

/// Coarse-to-fine exhaustive search over `[-1, 1]^d`. Each level scans a
/// full grid around the incumbent and shrinks the window tenfold; the last
/// level has spacing `1e-3`.
pub fn grid_minimize(d: usize, f: impl Fn(&[f64]) -> f64) -> (Vec<f64>, f64) {
    let mut center = vec![0.0; d];
    let mut half: f64 = 1.0;
    let mut best = (center.clone(), f(&center));
    for spacing in [0.1, 0.01, 0.001] {
        let k = (half / spacing).round() as i64;
        let side = 2 * k + 1;
        let total = (side as usize).pow(d as u32);
        let mut x = vec![0.0; d];
        for idx in 0..total {
            let mut rem = idx;
            let mut inside = true;
            for i in 0..d {
                let step = (rem % side as usize) as i64 - k;
                rem /= side as usize;
                x[i] = center[i] + step as f64 * spacing;
                if x[i].abs() > 1.0 + 1e-12 {
                    inside = false;
                }
            }
            if !inside {
                continue;
            }
            let val = f(&x);
            if val < best.1 {
                best = (x.clone(), val);
            }
        }
        center = best.0.clone();
        half = spacing;
    }
    best
}

pub fn random_constraint(r: &mut StdRng, d: usize, m: usize) -> SimpleFormConstraint {
    SimpleFormConstraint::new(
        DMatrix::identity(m, m),
        random_matrix(r, d, m),
        random_matrix(r, d, m),
        random_vector(r, d, 0.5),
    )
    .unwrap()
}

pub fn random_weights(r: &mut StdRng) -> Weights {
    Weights {
        q: r.gen_range(0.5..3.0),
        v: r.gen_range(0.5..3.0),
        w: r.gen_range(0.5..3.0),
        f: r.gen_range(0.5..3.0),
    }
}

/// Slack Lagrangian written out term by term over the stacked vector.
#[allow(clippy::too_many_arguments)]
pub fn slack_objective(
    s: &[f64],
    bv: &DVector<f64>,
    bw: &DVector<f64>,
    lv: &DVector<f64>,
    lw: &DVector<f64>,
    lf: &DVector<f64>,
    rho: &Weights,
    con: &SimpleFormConstraint,
) -> f64 {
    let m = bv.len();
    let mut total = 0.0;
    for i in 0..m {
        let dv = s[i] - bv[i];
        let dw = s[m + i] - bw[i];
        total += lv[i] * dv + rho.v * dv * dv + lw[i] * dw + rho.w * dw * dw;
    }
    let k = con.stacked_matrix();
    for row in 0..k.nrows() {
        let mut f = con.c[row];
        for i in 0..2 * m {
            f += k[(row, i)] * s[i];
        }
        total += lf[row] * f + rho.f * f * f;
    }
    total
}

#[allow(clippy::too_many_arguments)]
pub fn slack_gradient(
    s: &[f64],
    bv: &DVector<f64>,
    bw: &DVector<f64>,
    lv: &DVector<f64>,
    lw: &DVector<f64>,
    lf: &DVector<f64>,
    rho: &Weights,
    con: &SimpleFormConstraint,
) -> Vec<f64> {
    let m = bv.len();
    let k = con.stacked_matrix();
    let x = DVector::from_column_slice(s);
    let f = &k * &x + &con.c;
    let back = k.transpose() * (lf + f * (2.0 * rho.f));
    (0..2 * m)
        .map(|i| {
            let own = if i < m {
                lv[i] + 2.0 * rho.v * (s[i] - bv[i])
            } else {
                lw[i - m] + 2.0 * rho.w * (s[i] - bw[i - m])
            };
            own + back[i]
        })
        .collect()
}

pub fn central_difference(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let h = 1e-6;
    (0..x.len())
        .map(|i| {
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[i] += h;
            down[i] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect()
}

pub struct SlackInstance {
    pub con: SimpleFormConstraint,
    pub bv: DVector<f64>,
    pub bw: DVector<f64>,
    pub lv: DVector<f64>,
    pub lw: DVector<f64>,
    pub lf: DVector<f64>,
    pub rho: Weights,
}

impl SlackInstance {
    pub fn random(r: &mut StdRng, d: usize, m: usize) -> Self {
        Self {
            con: random_constraint(r, d, m),
            bv: random_vector(r, m, 0.6),
            bw: random_vector(r, m, 0.6),
            lv: random_vector(r, m, 0.3),
            lw: random_vector(r, m, 0.3),
            lf: random_vector(r, d, 0.3),
            rho: random_weights(r),
        }
    }

    pub fn solve(&self) -> Vec<f64> {
        let mult = SlackMultipliers {
            lambda_v: &self.lv,
            lambda_w: &self.lw,
            lambda_f: &self.lf,
        };
        let (v, w) = minimize_l2(&self.bv, &self.bw, mult, &self.rho, &self.con);
        v.iter().chain(w.iter()).copied().collect()
    }

    pub fn objective(&self, s: &[f64]) -> f64 {
        slack_objective(s, &self.bv, &self.bw, &self.lv, &self.lw, &self.lf, &self.rho, &self.con)
    }

    pub fn gradient(&self, s: &[f64]) -> Vec<f64> {
        slack_gradient(s, &self.bv, &self.bw, &self.lv, &self.lw, &self.lf, &self.rho, &self.con)
    }
}

pub fn random_slice(r: &mut StdRng, d: usize) -> AffineSlice {
    AffineSlice {
        g: random_vector(r, d, 1.0),
        h: random_vector(r, d, 1.0),
        p: random_vector(r, d, 0.5),
    }
}

pub fn pair_value(x: &[f64], q: f64, lv: f64, lw: f64, lf: &DVector<f64>, rho: &Weights, s: &AffineSlice) -> f64 {
    let dv = x[0] - q.cos();
    let dw = x[1] - q.sin();
    let mut total = lv * dv + rho.v * dv * dv + lw * dw + rho.w * dw * dw;
    for i in 0..s.g.len() {
        let f = s.g[i] * x[0] + s.h[i] * x[1] + s.p[i];
        total += lf[i] * f + rho.f * f * f;
    }
    total
}

pub fn pair_gradient(x: &[f64], q: f64, lv: f64, lw: f64, lf: &DVector<f64>, rho: &Weights, s: &AffineSlice) -> [f64; 2] {
    let mut g = [lv + 2.0 * rho.v * (x[0] - q.cos()), lw + 2.0 * rho.w * (x[1] - q.sin())];
    for i in 0..s.g.len() {
        let f = s.g[i] * x[0] + s.h[i] * x[1] + s.p[i];
        let k = lf[i] + 2.0 * rho.f * f;
        g[0] += k * s.g[i];
        g[1] += k * s.h[i];
    }
    g
}
