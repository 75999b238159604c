//! Slack updates: projections onto the task set and the quadratic
//! augmented-Lagrangian minimizers over the `[-1, 1]` box.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, Vector2};

use super::config::Weights;
use crate::constraints::{AffineSlice, ConstraintEvaluator, SimpleFormConstraint};
use crate::error::{Error, Result};

fn clip_unit(x: &mut DVector<f64>) {
    x.apply(|c| *c = c.clamp(-1.0, 1.0));
}

fn split(s: &DVector<f64>, r: usize) -> (DVector<f64>, DVector<f64>) {
    (s.rows(0, r).into_owned(), s.rows(r, r).into_owned())
}

fn stack(v: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    let r = v.len();
    let mut s = DVector::zeros(2 * r);
    s.rows_mut(0, r).copy_from(v);
    s.rows_mut(r, r).copy_from(w);
    s
}

/// Euclidean projection of `(target_v, target_w)` onto `{f(v, w) = 0}`,
/// followed by clipping to the unit box.
pub fn project_slacks(
    target_v: &DVector<f64>,
    target_w: &DVector<f64>,
    constraint: &SimpleFormConstraint,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let r = constraint.lifted_dim();
    let m = constraint.stacked_matrix();
    let gram = &m * m.transpose();
    let svd = gram.clone().svd(false, false);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-12 * smax.max(1.0) {
        return Err(Error::DegenerateConstraint(
            "constraint rows are linearly dependent".into(),
        ));
    }
    let target = stack(target_v, target_w);
    let violation = &m * &target + &constraint.c;
    let mult = gram
        .cholesky()
        .ok_or_else(|| Error::DegenerateConstraint("singular constraint Gram matrix".into()))?
        .solve(&violation);
    let mut s = target - m.transpose() * mult;
    clip_unit(&mut s);
    Ok(split(&s, r))
}

/// Exact ℓ1 projection for a single constraint row, clipped to the box.
///
/// The cheapest move per unit of constraint change is along the coordinate
/// with the largest coefficient magnitude, so coordinates are filled greedily
/// in that order. Equal coefficients are filled in order of available room
/// inside the box, then by index.
pub fn project_slacks_l1(
    target_v: &DVector<f64>,
    target_w: &DVector<f64>,
    constraint: &SimpleFormConstraint,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if constraint.rows() != 1 {
        return Err(Error::InvalidConfig {
            field: "norm".into(),
            reason: "the l1 projection supports single-row constraints only".into(),
        });
    }
    let r = constraint.lifted_dim();
    let k = constraint.stacked_matrix().row(0).transpose();
    let mut s = stack(target_v, target_w);
    clip_unit(&mut s);
    let mut remaining = -(k.dot(&s) + constraint.c[0]);
    if remaining == 0.0 {
        return Ok(split(&s, r));
    }
    let want_up = remaining > 0.0;
    // room left for coordinate i in the direction that reduces |remaining|
    let room = |i: usize, s: &DVector<f64>| {
        if (k[i] > 0.0) == want_up {
            1.0 - s[i]
        } else {
            1.0 + s[i]
        }
    };
    let mut order: Vec<usize> = (0..2 * r).filter(|&i| k[i] != 0.0).collect();
    order.sort_by(|&i, &j| {
        let (ki, kj) = (k[i].abs(), k[j].abs());
        if (ki - kj).abs() <= 1e-12 * ki.max(kj) {
            room(j, &s)
                .partial_cmp(&room(i, &s))
                .unwrap()
                .then(i.cmp(&j))
        } else {
            kj.partial_cmp(&ki).unwrap()
        }
    });
    for i in order {
        if remaining == 0.0 {
            break;
        }
        let step = (remaining.abs() / k[i].abs()).min(room(i, &s).max(0.0));
        let dir = if (k[i] > 0.0) == want_up { 1.0 } else { -1.0 };
        s[i] += dir * step;
        let achieved = k[i] * dir * step;
        remaining = if (remaining - achieved).abs() <= 1e-15 * remaining.abs() {
            0.0
        } else {
            remaining - achieved
        };
    }
    Ok(split(&s, r))
}

/// Multipliers seen by the slack update at one timestep.
#[derive(Debug, Clone, Copy)]
pub struct SlackMultipliers<'a> {
    pub lambda_v: &'a DVector<f64>,
    pub lambda_w: &'a DVector<f64>,
    pub lambda_f: &'a DVector<f64>,
}

/// Minimizer of the slack augmented Lagrangian for a simple-form constraint:
///
/// `λvᵀ(v-bv) + ρv‖v-bv‖² + λwᵀ(w-bw) + ρw‖w-bw‖² + λfᵀf + ρf‖f‖²`
///
/// solved unconstrained and then clipped to the unit box.
pub fn minimize_l2(
    bv: &DVector<f64>,
    bw: &DVector<f64>,
    mult: SlackMultipliers<'_>,
    rho: &Weights,
    constraint: &SimpleFormConstraint,
) -> (DVector<f64>, DVector<f64>) {
    let r = bv.len();
    let m = constraint.stacked_matrix();
    let mut h = m.transpose() * &m * rho.f;
    let mut rhs = DVector::zeros(2 * r);
    for i in 0..r {
        h[(i, i)] += rho.v;
        h[(r + i, r + i)] += rho.w;
        rhs[i] = rho.v * bv[i] - 0.5 * mult.lambda_v[i];
        rhs[r + i] = rho.w * bw[i] - 0.5 * mult.lambda_w[i];
    }
    rhs -= m.transpose() * (mult.lambda_f * 0.5 + &constraint.c * rho.f);
    let mut s = h
        .cholesky()
        .expect("slack Hessian is positive definite for positive weights")
        .solve(&rhs);
    clip_unit(&mut s);
    split(&s, r)
}

/// Value of the simple-form slack Lagrangian; used by certificates and tests.
pub fn l2_objective(
    v: &DVector<f64>,
    w: &DVector<f64>,
    bv: &DVector<f64>,
    bw: &DVector<f64>,
    mult: SlackMultipliers<'_>,
    rho: &Weights,
    constraint: &SimpleFormConstraint,
) -> f64 {
    let dv = v - bv;
    let dw = w - bw;
    let f = constraint.residual(v, w);
    mult.lambda_v.dot(&dv)
        + rho.v * dv.norm_squared()
        + mult.lambda_w.dot(&dw)
        + rho.w * dw.norm_squared()
        + mult.lambda_f.dot(&f)
        + rho.f * f.norm_squared()
}

/// Scalar multipliers of one joint pair plus the shared task multipliers.
#[derive(Debug, Clone, Copy)]
pub struct PairMultipliers<'a> {
    pub lambda_v: f64,
    pub lambda_w: f64,
    pub lambda_f: &'a DVector<f64>,
}

/// Exact box-clipped minimizer of the two-variable Lagrangian
///
/// `λv(v-cos q) + ρv(v-cos q)² + λw(w-sin q) + ρw(w-sin q)² + λfᵀf + ρf‖f‖²`
///
/// with `f = g v + h w + p` from `slice`.
pub fn update_joint_slack_pair(
    qj: f64,
    mult: PairMultipliers<'_>,
    rho: &Weights,
    slice: &AffineSlice,
) -> (f64, f64) {
    let (sq, cq) = qj.sin_cos();
    let gg = slice.g.dot(&slice.g);
    let hh = slice.h.dot(&slice.h);
    let gh = slice.g.dot(&slice.h);
    let hess = Matrix2::new(rho.v + rho.f * gg, rho.f * gh, rho.f * gh, rho.w + rho.f * hh);
    let shift = mult.lambda_f * 0.5 + &slice.p * rho.f;
    let rhs = Vector2::new(
        rho.v * cq - 0.5 * mult.lambda_v - slice.g.dot(&shift),
        rho.w * sq - 0.5 * mult.lambda_w - slice.h.dot(&shift),
    );
    let sol = hess
        .cholesky()
        .expect("pair Hessian is positive definite for positive weights")
        .solve(&rhs);
    (sol[0].clamp(-1.0, 1.0), sol[1].clamp(-1.0, 1.0))
}

pub fn pair_objective(
    vj: f64,
    wj: f64,
    qj: f64,
    mult: PairMultipliers<'_>,
    rho: &Weights,
    slice: &AffineSlice,
) -> f64 {
    let dv = vj - qj.cos();
    let dw = wj - qj.sin();
    let f = slice.eval(vj, wj);
    mult.lambda_v * dv
        + rho.v * dv * dv
        + mult.lambda_w * dw
        + rho.w * dw * dw
        + mult.lambda_f.dot(&f)
        + rho.f * f.norm_squared()
}

/// One ascending Gauss–Seidel sweep over all joint pairs of timestep `t`.
///
/// `v` and `w` are updated in place; each pair sees the already-updated
/// pairs of lower index through the refreshed slice.
#[allow(clippy::too_many_arguments)]
pub fn gauss_seidel_sweep(
    evaluator: &ConstraintEvaluator,
    v: &mut DVector<f64>,
    w: &mut DVector<f64>,
    q: &DVector<f64>,
    lambda_v: &DVector<f64>,
    lambda_w: &DVector<f64>,
    lambda_f: &DVector<f64>,
    rho: &Weights,
) {
    let chain = evaluator.chain();
    let m = chain.dof();
    let mut suffix = vec![Matrix4::identity(); m];
    for j in (0..m.saturating_sub(1)).rev() {
        suffix[j] = chain.lifted_joint_transform(j + 1, v[j + 1], w[j + 1]) * suffix[j + 1];
    }
    let mut prefix = chain.base().to_homogeneous();
    for j in 0..m {
        let slice = evaluator.slice_between(&prefix, &suffix[j], j);
        let mult = PairMultipliers {
            lambda_v: lambda_v[j],
            lambda_w: lambda_w[j],
            lambda_f,
        };
        let (vj, wj) = update_joint_slack_pair(q[j], mult, rho, &slice);
        v[j] = vj;
        w[j] = wj;
        prefix *= chain.lifted_joint_transform(j, vj, wj);
    }
}

/// Dense Hessian of the objective minimized by [`minimize_l2`].
pub fn l2_hessian(rho: &Weights, constraint: &SimpleFormConstraint) -> DMatrix<f64> {
    let r = constraint.lifted_dim();
    let m = constraint.stacked_matrix();
    let mut h = m.transpose() * &m * (2.0 * rho.f);
    for i in 0..r {
        h[(i, i)] += 2.0 * rho.v;
        h[(r + i, r + i)] += 2.0 * rho.w;
    }
    h
}
