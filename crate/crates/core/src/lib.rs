//! Linear-exponential-Gaussian (LEG) and risk-sensitive (RS) filtering for
//! scalar Gauss-Markov signals observed in white noise, with
//! exponential-quadratic criteria.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cameron_martin;
pub mod config;
pub mod error;
pub mod example;
pub mod filters;
pub mod grid;
pub mod io;
pub mod model;
pub mod montecarlo;
pub mod ode;
pub mod riccati;
pub mod scalar;
pub mod volterra;

pub use cameron_martin::{
    conditional_laplace_rhs, gain_matrix_g, optimal_risk, optimal_risk_from, CameronMartin, GMatrix,
};
pub use config::{config_hash, ModelConfig};
pub use error::{Error, ErrorCategory, Result};
pub use example::{discrepancy_report, eval_example, DiscrepancyReport, DiscrepancyRow, ExamplePoint, Quantity};
pub use filters::{
    apply_filter, extract_kernel, kalman_filter, kalman_gains, leg_gains, leg_gains_from, propagate_open_loop,
    risk_neutral_gains, risk_neutral_h, rs_gains, rs_gains_from, rs_gains_with_form, FilterGains, FilterKind,
    FilterRun, KalmanOutput,
};
pub use grid::{ScalarPath, TimeGrid, TriKernel};
pub use model::{
    ou_covariance, transition_pi, validate_model, Coefficient, CovarianceSpec, LambdaSpec, ModelSpec, SymMat2,
    ValidatedModel,
};
pub use montecarlo::{
    cm_verify, mc_compare, path_cost, path_cost_terminal, simulate_path, simulate_paths, CmVerification, Comparison,
    CostSample, McEstimate, NoiseMode, PairedDifference, PathBundle, Strategy, StrategyEstimate,
};
pub use riccati::{
    check_conditions, forward_gamma_trajectory, solve_backward_gamma, solve_backward_linearized, solve_forward_gamma,
    BackwardSolution, ConditionId, ConditionReport, RiccatiSolution,
};
pub use scalar::Real;
pub use volterra::{
    rs_filter_general, solve_riccati_volterra, solve_z_volterra, GeneralRsFilter, RsDriftForm, VolterraSolution, ZPath,
};

/// Double-precision instantiations.
pub type Grid = TimeGrid<f64>;
pub type Series = ScalarPath<f64>;
pub type Kernel = TriKernel<f64>;
pub type Mat2 = SymMat2<f64>;
pub type Spec = ModelSpec<f64>;
pub type Model = ValidatedModel<f64>;
pub type Covariance = CovarianceSpec<f64>;
pub type Gains = FilterGains<f64>;

/// Single-precision instantiations.
pub type Grid32 = TimeGrid<f32>;
pub type Series32 = ScalarPath<f32>;
pub type Kernel32 = TriKernel<f32>;
pub type Mat2x32 = SymMat2<f32>;
pub type Spec32 = ModelSpec<f32>;
pub type Model32 = ValidatedModel<f32>;
pub type Covariance32 = CovarianceSpec<f32>;
pub type Gains32 = FilterGains<f32>;
