//! Fractional Brownian motion via the Mandelbrot–van Ness representation,
//! Hurst-parameter sensitivity `∂_H B^H`, pathwise SDE solvers, long-time /
//! ergodic statistics, rough-path level-2 diagnostics, and Wiener integrals —
//! everything computed from a single shared Brownian driver so that paths are
//! differentiable in the Hurst parameter.
//!
//! All numerics are generic over the [`scalar::Scalar`] precision; the type
//! aliases at the crate root fix the common `f64` instantiations.

pub mod driver;
pub mod ergodic;
pub mod error;
pub mod fbm;
pub mod gaussian;
pub mod grid;
pub mod kernel;
pub mod linalg;
pub mod regularity;
pub mod report;
pub mod rough;
pub mod scalar;
pub mod sde;
pub mod wiener;

pub use driver::{sample_driver, seed_stream, DriverPath, SampleScalar};
pub use ergodic::{
    compare_across_h, ergodic_average, estimate_hitting_laplace, simulate_fou, simulate_fou_with,
    stationary_fou_variance, ComparisonReport, DissipativeProblem, FouSpec, PairComparison,
};
pub use error::{CoreError, Result};
pub use fbm::{fbm_covariance, synthesize_fbm, FbmBundle, FbmSynth};
pub use gaussian::{exact_fbm_cholesky, FbmCholesky};
pub use grid::{GridSpec, HurstBand};
pub use kernel::{
    kernel_cell_weights, kernel_derivative_cell_weights, mvn_constant, mvn_constant_derivative,
    suggested_truncation, tail_std, KernelEval,
};
pub use regularity::{besov_norm_w1, besov_norm_w2, holder_norm_estimate};
pub use report::{fit_loglog_slope, mean_and_se, ExperimentReport, ReportRow, SlopeFit};
pub use rough::{
    default_continuity_functionals, dyadic_sample, holder_distance, law_continuity_check,
    levy_area, levy_area_convergence, mixed_area_divergence, AreaPartner, DyadicPath,
    HolderDistance, PathFunctional, RoughLevel,
};
pub use scalar::Scalar;
pub use sde::{
    ds_flow, ds_reduced_drift, estimate_law_lipschitz, lamperti, sensitivity_additive,
    sensitivity_additive_multi, sensitivity_exponential_scalar, sensitivity_finite_difference,
    sensitivity_variational, sensitivity_variational_multi, solve_additive, solve_additive_multi,
    solve_doss_sussmann, solve_doss_sussmann_with_aux, solve_young, solve_young_multi,
    young_integral, DossSussmannAux, LampertiPair, Method, PathSolution, Scheme, SdeProblem,
    SensitivitySolution,
};
pub use wiener::{
    russo_vallois_symmetric, wiener_integral, wiener_norm_small_h, wiener_variance_covariance,
    wiener_variance_curve, RvConfig, StepFunction,
};

/// `f64` grid.
pub type Grid = GridSpec<f64>;
/// `f64` Hurst band.
pub type Band = HurstBand<f64>;
/// `f64` driver path.
pub type Driver = DriverPath<f64>;
/// `f64` fBm bundle.
pub type Bundle = FbmBundle<f64>;
/// `f64` SDE problem.
pub type Problem = SdeProblem<f64>;
/// `f64` solved path.
pub type Solution = PathSolution<f64>;
/// `f64` Hurst-sensitivity path.
pub type Sensitivity = SensitivitySolution<f64>;
