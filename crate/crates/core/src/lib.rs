//! Task-constrained trajectory optimization for serial manipulators.
//!
//! Joint angles enter task constraints only through `cos` and `sin`, so the
//! optimizer works on lifted slack variables `v = cos(A q)`, `w = sin(A q)`
//! bounded to `[-1, 1]`. Planar task constraints become affine in the slacks,
//! spatial ones affine in each joint's slack pair. The optimizer alternates
//! between slack updates and smooth joint updates, guided by augmented
//! Lagrangian multipliers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constraints;
pub mod error;
pub mod io;
pub mod kinematics;
pub mod scenarios;
pub mod solver;

pub use error::{Error, Result};
pub use nalgebra;
