//! Nonparametric estimation of the diffusion coefficient `σ²(x)` of a
//! jump-diffusion `dX = μ(X₋)dt + σ(X₋)dW + dJ` from equally spaced
//! observations.
//!
//! Squared increments above a threshold `ϑ(δ) = δ^η` are discarded as jumps,
//! and the remaining ones are regressed on the left endpoint with a one-sided
//! kernel-weighted local polynomial. The crate also contains
//!
//! - a simulator for finite-activity (state-dependent compound Poisson) and
//!   infinite-activity (symmetric α-stable, variance gamma) jumps,
//! - the asymptotic bias and variance constants, feasible confidence
//!   intervals and the MSE-optimal bandwidth,
//! - a Monte Carlo harness that checks the studentized estimator against
//!   its normal limit.
//!
//! ```
//! use jumpvol::{builtin_kernel, local_linear_sigma2, simulate_path, ModelSpec};
//!
//! let path = simulate_path(&ModelSpec::brownian(1.0, 0.0), 20_000, 1.0, 7).unwrap();
//! let kernel = builtin_kernel("one_sided_epanechnikov").unwrap();
//! let est = local_linear_sigma2(&path, 0.0, 0.1, &kernel, path.delta.sqrt()).unwrap();
//! assert!((est.sigma2_hat - 1.0).abs() < 0.3);
//! ```

// `!(v > 0.0)` is used on purpose so NaN is rejected with the invalid case.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod io;
pub mod kernel;
pub mod mc;
pub mod model;
mod quadrature;
pub mod sim;
pub mod threshold;

pub use asymptotics::{
    bias_constant, bias_correction, check_rate_conditions, confidence_interval, normal_cdf, normal_quantile,
    optimal_bandwidth, plug_in_curvature, sandwich_variance, variance_constant, variance_constant_for,
    AsymptoticConstants, InferenceResult, RateParams, RateReport,
};
pub use error::{Error, Result};
pub use kernel::{builtin_kernel, kernel_moment, kernel_moment_quadrature, KernelSpec};
pub use mc::{ks_distance, run_experiment, standardize, Bandwidth, ExperimentConfig, MCReport};
pub use model::{Diffusion, Drift, FaSpec, IaKind, IaSpec, Intensity, JumpSize, JumpSpec, ModelSpec, VgParams};
pub use sim::{derive_seed, sample_fa_jumps, sample_ia_increments, simulate_path, simulate_path_with, Path, SimOptions};
pub use threshold::{
    classify_increments, design_moment, design_moments, estimate, fit_local_polynomial, local_linear_sigma2,
    local_poly_fit, local_time_hat, nw_sigma2, response_moment, threshold_value, DesignMoments, EstimateResult,
    Estimator, LocalSample, ThresholdSpec,
};
