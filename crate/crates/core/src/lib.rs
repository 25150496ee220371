//! Numerical lab for linear stochastic pantograph equations
//! `dX = (aX + bX(qt)) dt + (σX + ρX(qt)) dW`.
//!
//! The core is generic over the scalar type ([`Real`], implemented for `f32`
//! and `f64`); the aliases below fix the common double-precision choices.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detsolver;
pub mod error;
pub mod exponents;
pub mod export;
pub mod linalg;
pub mod model;
pub mod num;
pub mod roots;
pub mod sdesim;
pub mod stats;

pub use detsolver::{
    check_comparison, kato_mcleod_log_psi, kato_mcleod_psi, solve_multi_delay_ode, solve_pantograph_ode,
    DenseSolution, InterpOrder,
};
pub use error::{Error, Result};
pub use exponents::{
    as_exponent, classify_scalar, first_mean_alpha, matrix_classify, mean_square_alpha,
    multi_delay_classify, multi_delay_real_root, ExponentReport, LyapunovData, MatrixMode, Regime,
    WeightPolicy,
};
pub use linalg::DenseMatrix;
pub use model::{
    InitialCondition, InitialDistribution, InitialValue, MatrixModel, Model, MultiDelayModel,
    ScalarPantographModel, Validate,
};
pub use num::Real;
pub use stats::{
    estimate_as_exponent, estimate_moment_curve, fit_exponential_rate, fit_polynomial_exponent, verify_report,
    EstimateKind, ExponentEstimate, MomentCurve, Tolerances, Verdict,
};
pub use sdesim::{
    simulate_ensemble, simulate_ensemble_range, simulate_path, Ensemble, EnsembleSpec, PathSummary,
    RandomStreamSpec, Trajectory,
};

pub type ScalarModel = ScalarPantographModel<f64>;
pub type ScalarModelF32 = ScalarPantographModel<f32>;
pub type MultiModel = MultiDelayModel<f64>;
pub type MultiModelF32 = MultiDelayModel<f32>;
pub type Matrix = DenseMatrix<f64>;
pub type MatrixF32 = DenseMatrix<f32>;
pub type Report = ExponentReport<f64>;
