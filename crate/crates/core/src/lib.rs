//! Learning quadratic embeddings `ż = A (z ⊗ z) + B z + C` of nonlinear
//! dynamical systems from trajectory data, with SINDy and gEDMD baselines.

// `!(x > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approx;
pub mod baselines;
pub mod dictionary;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod io;
pub mod linalg;
pub mod qendy;
pub mod quadmodel;
pub mod reduction;

pub use dictionary::Dictionary;
pub use dynamics::{Provenance, TrainingSet, Trajectory, VectorField};
pub use error::{Error, Result};
pub use expr::Expr;
pub use qendy::{fit, FitOptions, Solver};
pub use quadmodel::QuadraticModel;
