//! Linear relaxation compact difference (LRCD) solver for the coupled
//! nonlinear Schrodinger system
//!
//! ```text
//! i u_t + kappa Lap u + (|u|^2 + beta |v|^2) u = 0
//! i v_t + kappa Lap v + (|v|^2 + beta |u|^2) v = 0
//! ```
//!
//! on periodic boxes in one to three dimensions. Space is discretized with
//! fourth-order compact differences, time with a Crank-Nicolson scheme whose
//! nonlinearity is linearized through the staggered relaxation variables
//! `Phi ~ |u|^2`, `Psi ~ |v|^2`. Each step costs two independent linear solves
//! and conserves discrete mass and energy exactly.

pub mod cases;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod linsolve;
pub mod mesh;
pub mod operators;
pub mod stepper;

pub use error::{Error, Result};
pub use mesh::{Field, Mesh, RealField, TimeGrid};
pub use stepper::{RelaxState, SchemeParams, Stepper};
