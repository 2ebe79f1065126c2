//! Nonconvex-regularized sparse M-estimation.
//!
//! The crate solves programs of the form
//!
//! ```text
//! minimize  L_n(β) + Σ_j ρ_λ(β_j)   subject to  ‖β‖₁ ≤ R
//! ```
//!
//! where `L_n` is one of four losses (least squares, the corrected
//! errors-in-variables quadratic, logistic regression, graphical Lasso) and
//! `ρ_λ` is an amenable penalty (ℓ1, SCAD, MCP, log-sum). Around the solver
//! sit a primal-dual witness certificate for support recovery, synthetic data
//! generators and a deterministic Monte Carlo harness.
//!
//! Module map:
//!
//! - [`numerics`]: soft-thresholding, ℓ1-ball projection, dense eigen/Cholesky helpers.
//! - [`regularizers`]: `ρ_λ`, `ρ'_λ`, `q'_λ` and amenability constants.
//! - [`losses`]: value/gradient/Hessian of each loss, integrated Hessian.
//! - [`solver`]: composite gradient descent, restricted and oracle solvers, multistart.
//! - [`pdw`]: witness construction, incoherence, parameter gates, ℓ∞ diagnostics.
//! - [`glasso`]: spectrally constrained nonconvex graphical Lasso and its oracle.
//! - [`datagen`]: covariance families, β*, trial sampling.
//! - [`experiments`]: phase-transition, error-curve, multistart and glasso studies.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod datagen;
pub mod error;
pub mod experiments;
pub mod glasso;
pub mod io;
pub mod losses;
pub mod numerics;
pub mod pdw;
pub mod regularizers;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
pub use losses::LossModel;
pub use numerics::{Matrix, Vector};
pub use regularizers::{Penalty, RegularizerSpec};
pub use solver::{SolveResult, SolveStatus, SolverConfig, StepSize};
