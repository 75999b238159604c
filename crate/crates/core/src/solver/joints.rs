//! Joint updates: recovering configurations from slacks and the quadratic
//! augmented-Lagrangian minimizers over `Q`.

use std::f64::consts::TAU;

use nalgebra::DVector;

use super::banded::BandedSpd;
use super::config::CostModel;
use super::state::JointSpace;
use crate::error::{Error, Result};

/// `atan2(w, v)` shifted onto the 2π branch nearest `reference`.
///
/// Components whose slack pair is (numerically) zero keep the reference value.
pub fn lift_angles(v: &DVector<f64>, w: &DVector<f64>, reference: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(v.len(), |i, _| {
        if v[i].hypot(w[i]) < 1e-9 {
            return reference[i];
        }
        let a = w[i].atan2(v[i]);
        a + TAU * ((reference[i] - a) / TAU).round()
    })
}

fn least_squares(space: &JointSpace, theta: &DVector<f64>) -> DVector<f64> {
    let a = &space.coupling;
    (a.transpose() * a)
        .cholesky()
        .expect("coupling matrix has full column rank")
        .solve(&(a.transpose() * theta))
}

/// Projection of a slack pair back onto joint space.
///
/// Returns the clipped configuration and the branch-shifted angles `θ` it
/// was fitted to.
pub fn recover_joints(
    space: &JointSpace,
    v: &DVector<f64>,
    w: &DVector<f64>,
    q_prev: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let theta = lift_angles(v, w, &(&space.coupling * q_prev));
    let mut q = least_squares(space, &theta);
    space.clip(&mut q);
    (q, theta)
}

/// Smoothness cost `Σ_t ‖stencil · q_{t-k..=t}‖²`.
pub fn smoothness_cost(q: &[DVector<f64>], model: CostModel) -> Result<f64> {
    let st = model.stencil();
    if q.len() < st.len() {
        return Err(Error::InvalidConfig {
            field: "n".into(),
            reason: format!("trajectory needs at least {} timesteps", st.len()),
        });
    }
    Ok(q.windows(st.len())
        .map(|win| {
            win.iter()
                .zip(st)
                .fold(DVector::zeros(win[0].len()), |acc, (qt, c)| acc + qt * *c)
                .norm_squared()
        })
        .sum())
}

/// The cost with every configuration but the newest of each stencil frozen at
/// `q_prev`: `Σ_t ‖stencil(q_prev_{t-k..t-1}, q_t)‖²`.
pub fn approximate_cost(q: &[DVector<f64>], q_prev: &[DVector<f64>], model: CostModel) -> f64 {
    let st = model.stencil();
    let k = st.len() - 1;
    (k..q.len())
        .map(|t| {
            let mut e = &q[t] * st[k];
            for (i, c) in st[..k].iter().enumerate() {
                e += &q_prev[t - k + i] * *c;
            }
            e.norm_squared()
        })
        .sum()
}

/// Augmented joint objective
/// `weight·J(Q) + Σ_t λ_tᵀ(A q_t - θ_t) + ρ‖A q_t - θ_t‖²` (no clipping).
pub fn l1_objective(
    space: &JointSpace,
    q: &[DVector<f64>],
    thetas: &[DVector<f64>],
    lambda_q: &[DVector<f64>],
    rho_q: f64,
    model: CostModel,
    weight: f64,
) -> f64 {
    let cost = smoothness_cost(q, model).unwrap_or(0.0);
    let aug: f64 = q
        .iter()
        .zip(thetas)
        .zip(lambda_q)
        .map(|((qt, th), l)| {
            let r = &space.coupling * qt - th;
            l.dot(&r) + rho_q * r.norm_squared()
        })
        .sum();
    weight * cost + aug
}

/// Joint update over all timesteps at once: one block-banded solve followed
/// by clipping to the joint limits. A pinned first configuration is held
/// fixed and moved to the right-hand side.
#[allow(clippy::too_many_arguments)]
pub fn minimize_l1_coupled(
    space: &JointSpace,
    thetas: &[DVector<f64>],
    lambda_q: &[DVector<f64>],
    rho_q: f64,
    model: CostModel,
    weight: f64,
    pinned: Option<&DVector<f64>>,
) -> Result<Vec<DVector<f64>>> {
    if !(rho_q > 0.0) {
        return Err(Error::InvalidConfig {
            field: "rho0.q".into(),
            reason: "joint proximal weight must be positive".into(),
        });
    }
    let n = thetas.len();
    let m = space.dof();
    let first = usize::from(pinned.is_some());
    let free = n - first;
    let st = model.stencil();
    let k = st.len() - 1;
    let var = |t: usize, j: usize| (t - first) * m + j;

    let mut h = BandedSpd::zeros(free * m, (k * m).max(m.saturating_sub(1)));
    let mut rhs = vec![0.0; free * m];

    let ata = space.coupling.transpose() * &space.coupling;
    for t in first..n {
        let b = space.coupling.transpose() * (&thetas[t] * rho_q - &lambda_q[t] * 0.5);
        for i in 0..m {
            rhs[var(t, i)] += b[i];
            for j in 0..=i {
                let x = rho_q * ata[(i, j)];
                if x != 0.0 {
                    h.add(var(t, i), var(t, j), x);
                }
            }
        }
    }
    if weight > 0.0 {
        for end in k..n {
            let start = end - k;
            for (a, ca) in st.iter().enumerate() {
                let ta = start + a;
                if ta < first {
                    continue;
                }
                for (b, cb) in st.iter().enumerate() {
                    let tb = start + b;
                    let c = weight * ca * cb;
                    for j in 0..m {
                        if tb < first {
                            rhs[var(ta, j)] -= c * pinned.unwrap()[j];
                        } else if tb <= ta {
                            h.add(var(ta, j), var(tb, j), c);
                        }
                    }
                }
            }
        }
    }
    h.factor()?;
    h.solve_in_place(&mut rhs);
    let mut out = Vec::with_capacity(n);
    if let Some(p) = pinned {
        out.push(p.clone());
    }
    for t in first..n {
        let mut qt = DVector::from_fn(m, |j, _| rhs[var(t, j)]);
        space.clip(&mut qt);
        out.push(qt);
    }
    Ok(out)
}

/// Joint update of a single timestep with the cost frozen at `q_prev`
/// except for `q_t` itself.
#[allow(clippy::too_many_arguments)]
pub fn decoupled_joint_update(
    space: &JointSpace,
    t: usize,
    theta: &DVector<f64>,
    lambda_q: &DVector<f64>,
    rho_q: f64,
    model: CostModel,
    weight: f64,
    q_prev: &[DVector<f64>],
) -> DVector<f64> {
    let m = space.dof();
    let st = model.stencil();
    let k = st.len() - 1;
    let mut h = space.coupling.transpose() * &space.coupling * rho_q;
    let mut rhs = space.coupling.transpose() * (theta * rho_q - lambda_q * 0.5);
    if t >= k && weight > 0.0 {
        // ‖c_k q_t + Σ c_i q_prev‖² with c_k = 1
        let mut anchor = DVector::zeros(m);
        for (i, c) in st[..k].iter().enumerate() {
            anchor += &q_prev[t - k + i] * *c;
        }
        for j in 0..m {
            h[(j, j)] += weight;
        }
        rhs -= anchor * weight;
    }
    let mut q = h
        .cholesky()
        .expect("per-timestep joint Hessian is positive definite")
        .solve(&rhs);
    space.clip(&mut q);
    q
}

/// Fully decoupled joint update of every timestep (serial form).
#[allow(clippy::too_many_arguments)]
pub fn minimize_l1_decoupled(
    space: &JointSpace,
    thetas: &[DVector<f64>],
    lambda_q: &[DVector<f64>],
    rho_q: f64,
    model: CostModel,
    weight: f64,
    q_prev: &[DVector<f64>],
    pinned: Option<&DVector<f64>>,
) -> Vec<DVector<f64>> {
    (0..thetas.len())
        .map(|t| match (t, pinned) {
            (0, Some(p)) => p.clone(),
            _ => decoupled_joint_update(
                space, t, &thetas[t], &lambda_q[t], rho_q, model, weight, q_prev,
            ),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn unit_space(m: usize, limit: f64) -> JointSpace {
        JointSpace::new(DMatrix::identity(m, m), DVector::from_element(m, limit)).unwrap()
    }

    fn prefix_space(m: usize, limit: f64) -> JointSpace {
        JointSpace::new(
            DMatrix::from_fn(m, m, |r, c| if c <= r { 1.0 } else { 0.0 }),
            DVector::from_element(m, limit),
        )
        .unwrap()
    }

    fn dv(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn recover_exact_angle() {
        let s = unit_space(1, 3.0);
        let (q, _) = recover_joints(&s, &dv(&[0.9f64.cos()]), &dv(&[0.9f64.sin()]), &dv(&[0.0]));
        assert_relative_eq!(q[0], 0.9, epsilon = 1e-15);
    }

    #[test]
    fn recover_clips_to_limit() {
        let s = unit_space(1, 0.5);
        let (q, _) = recover_joints(&s, &dv(&[0.9f64.cos()]), &dv(&[0.9f64.sin()]), &dv(&[0.0]));
        assert_eq!(q[0], 0.5);
    }

    #[test]
    fn recover_prefix_sum() {
        let s = prefix_space(2, 3.0);
        let (v, w) = (dv(&[0.3f64.cos(), 0.5f64.cos()]), dv(&[0.3f64.sin(), 0.5f64.sin()]));
        let (q, _) = recover_joints(&s, &v, &w, &dv(&[0.0, 0.0]));
        assert_relative_eq!(q, dv(&[0.3, 0.2]), epsilon = 1e-14);
    }

    #[test]
    fn branch_follows_reference() {
        let a = 3.0f64;
        let th = lift_angles(&dv(&[a.cos()]), &dv(&[a.sin()]), &dv(&[-3.0]));
        assert_relative_eq!(th[0], a - TAU, epsilon = 1e-12);
        let th = lift_angles(&dv(&[0.0]), &dv(&[0.0]), &dv(&[1.234]));
        assert_eq!(th[0], 1.234);
    }

    #[test]
    fn smoothness_examples() {
        let lin: Vec<_> = (0..5).map(|t| dv(&[t as f64, -2.0 * t as f64])).collect();
        assert_relative_eq!(smoothness_cost(&lin, CostModel::Acceleration).unwrap(), 0.0);
        let q = vec![dv(&[0.0]), dv(&[1.0]), dv(&[3.0])];
        assert_eq!(smoothness_cost(&q, CostModel::Acceleration).unwrap(), 1.0);
        let c = vec![dv(&[0.7]); 4];
        assert_eq!(smoothness_cost(&c, CostModel::Acceleration).unwrap(), 0.0);
        assert_eq!(smoothness_cost(&c, CostModel::Velocity).unwrap(), 0.0);
        assert!(smoothness_cost(&c[..2], CostModel::Acceleration).is_err());
        assert!(smoothness_cost(&c[..1], CostModel::Velocity).is_err());
    }

    #[test]
    fn coupled_global_zero() {
        let s = unit_space(1, 3.0);
        let zeros = vec![dv(&[0.0]); 3];
        let q = minimize_l1_coupled(&s, &zeros, &zeros, 1.0, CostModel::Acceleration, 1.0, None)
            .unwrap();
        assert!(q.iter().all(|x| x[0] == 0.0));
    }

    #[test]
    fn coupled_penalty_limit_is_least_squares() {
        let s = prefix_space(2, 3.0);
        let thetas: Vec<_> = (0..6).map(|t| dv(&[0.1 * t as f64, 0.3 - 0.05 * t as f64])).collect();
        let zeros = vec![dv(&[0.0, 0.0]); 6];
        let q = minimize_l1_coupled(&s, &thetas, &zeros, 1e9, CostModel::Acceleration, 1.0, None)
            .unwrap();
        for (qt, th) in q.iter().zip(&thetas) {
            let ls = least_squares(&s, th);
            assert_relative_eq!(qt, &ls, epsilon = 1e-7);
        }
    }

    #[test]
    fn coupled_rejects_zero_rho() {
        let s = unit_space(1, 3.0);
        let zeros = vec![dv(&[0.0]); 3];
        assert!(
            minimize_l1_coupled(&s, &zeros, &zeros, 0.0, CostModel::Acceleration, 1.0, None)
                .is_err()
        );
    }

    #[test]
    fn coupled_pinned_start_is_kept() {
        let s = unit_space(2, 3.0);
        let thetas = vec![dv(&[0.5, 0.5]); 5];
        let zeros = vec![dv(&[0.0, 0.0]); 5];
        let pin = dv(&[0.1, -0.2]);
        let q = minimize_l1_coupled(&s, &thetas, &zeros, 1.0, CostModel::Velocity, 1.0, Some(&pin))
            .unwrap();
        assert_eq!(q[0], pin);
        assert_eq!(q.len(), 5);
    }

    #[test]
    fn decoupled_expansion_point_consistency() {
        let q: Vec<_> = (0..7).map(|t| dv(&[(t as f64 * 0.7).sin(), t as f64 * 0.1])).collect();
        for model in [CostModel::Acceleration, CostModel::Velocity] {
            assert_relative_eq!(
                approximate_cost(&q, &q, model),
                smoothness_cost(&q, model).unwrap(),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn decoupled_zero() {
        let s = unit_space(1, 3.0);
        let zeros = vec![dv(&[0.0]); 3];
        let q = minimize_l1_decoupled(
            &s,
            &zeros,
            &zeros,
            1.0,
            CostModel::Acceleration,
            1.0,
            &zeros,
            None,
        );
        assert!(q.iter().all(|x| x[0] == 0.0));
    }
}
