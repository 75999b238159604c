mod common;

use common::*;
use tcopt::kinematics::{kuka_lwr4, KinematicChain};

fn chains() -> Vec<(&'static str, KinematicChain)> {
    let mut r = rng(11);
    vec![
        ("kuka", kuka_lwr4()),
        ("dh5", random_dh_chain(&mut r, 5)),
        ("planar6", random_planar_chain(&mut r, 6)),
        ("planar2", random_planar_chain(&mut r, 2)),
    ]
}

#[test]
fn angle_fk_matches_reference() {
    let mut r = rng(1);
    for (name, chain) in chains() {
        for _ in 0..100 {
            let q = random_q(&mut r, &chain);
            let pose = chain.forward_kinematics(&q).unwrap();
            let (p, rot) = fk_oracle(&chain, &q);
            assert!((pose.position - p).amax() < 1e-12, "{name}");
            assert!((pose.rotation - rot).amax() < 1e-12, "{name}");
        }
    }
}

#[test]
fn lifted_fk_at_unit_slacks_equals_angle_fk() {
    let mut r = rng(2);
    for (name, chain) in chains() {
        for _ in 0..100 {
            let q = random_q(&mut r, &chain);
            let v: Vec<f64> = q.iter().map(|x| x.cos()).collect();
            let w: Vec<f64> = q.iter().map(|x| x.sin()).collect();
            let lifted = chain.generalized_forward_kinematics(&v, &w).unwrap();
            let direct = chain.forward_kinematics(&q).unwrap();
            assert!((lifted.position - direct.position).amax() < 1e-12, "{name}");
            assert!((lifted.rotation - direct.rotation).amax() < 1e-12, "{name}");
        }
    }
}

#[test]
fn rotations_are_proper() {
    let mut r = rng(3);
    for (name, chain) in chains() {
        for _ in 0..100 {
            let q = random_q(&mut r, &chain);
            let rot = chain.forward_kinematics(&q).unwrap().rotation;
            let e = rot.transpose() * rot - tcopt::nalgebra::Matrix3::identity();
            assert!(e.amax() < 1e-9, "{name}");
            assert!((rot.determinant() - 1.0).abs() < 1e-9, "{name}");
        }
    }
}

#[test]
fn lifted_fk_is_affine_in_each_pair() {
    let mut r = rng(4);
    for (name, chain) in chains() {
        let m = chain.dof();
        for _ in 0..50 {
            let (v, w) = random_slacks(&mut r, m);
            for j in 0..m {
                let eval = |vj: f64, wj: f64| {
                    let (mut v, mut w) = (v.clone(), w.clone());
                    v[j] = vj;
                    w[j] = wj;
                    chain
                        .generalized_forward_kinematics(v.as_slice(), w.as_slice())
                        .unwrap()
                        .to_homogeneous()
                };
                let f1 = eval(1.0, 0.0);
                let f2 = eval(-1.0, 0.0);
                let f3 = eval(0.0, 1.0);
                let g = (f1 - f2) * 0.5;
                let p = (f1 + f2) * 0.5;
                let h = f3 - p;
                let (x, y) = (v[j], w[j]);
                let predicted = g * x + h * y + p;
                assert!((predicted - eval(x, y)).amax() < 1e-12, "{name} j={j}");
            }
        }
    }
}
