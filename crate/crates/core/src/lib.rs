//! Finite-element simulation of growth-mediated autochemotactic pattern
//! formation in self-propelling bacteria.
//!
//! The model couples a bacterial density `ρ`, a self-secreted chemical `c`
//! and a polarization field `p` on a periodic rectangle:
//!
//! ```text
//! ρ_t = -∇·(ρ p) + Δρ + g ρ (1 - ρ)
//! c_t = D_c Δc + ρ - c + k ∇·(ρ p)
//! p_t = -Γ p + D_p Δp + s ∇c - Γ₂ |p|² p
//! ```
//!
//! Time stepping is decoupled: the density is advanced by a modified
//! characteristic Galerkin step (trace-back weighted by the Jacobian
//! determinant, which preserves mass), then `c` and `p` by backward Euler
//! Galerkin steps. All spatial discretization uses P1 elements.

#![allow(clippy::needless_range_loop)]

pub mod characteristics;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod linalg;
pub mod mesh;
pub mod stepper;

pub use error::{Error, Result};
pub use fem::{FemSpace, QuadratureRule, ScalarField, VectorField};
pub use linalg::{cg_solve, CgSettings, CsrMatrix, SolveReport};
pub use mesh::{Location, PeriodicMesh, Point};
pub use stepper::{Forcing, Parameters, SimState, StepDiagnostics, Stepper};
