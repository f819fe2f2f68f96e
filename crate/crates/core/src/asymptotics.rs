//! Asymptotic bias and variance constants, feasible confidence intervals,
//! MSE-optimal bandwidth and the rate conditions on `(η, φ, α)`.

use nalgebra::DMatrix;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::kernel::{kernel_moment, KernelSpec};
use crate::sim::Path;
use crate::threshold::{local_linear_sigma2, EstimateResult, Estimator};

fn moments(kernel: &KernelSpec) -> Result<[f64; 7]> {
    Ok([
        kernel_moment(kernel, 1, 1)?,
        kernel_moment(kernel, 1, 2)?,
        kernel_moment(kernel, 1, 3)?,
        kernel_moment(kernel, 2, 0)?,
        kernel_moment(kernel, 2, 1)?,
        kernel_moment(kernel, 2, 2)?,
        kernel_moment(kernel, 1, 0)?,
    ])
}

fn spread(k11: f64, k12: f64) -> Result<f64> {
    let d = k12 - k11 * k11;
    if !(d > 0.0) {
        return Err(Error::InvalidKernel(format!("K_1^2 − (K_1^1)² = {d} is not positive")));
    }
    Ok(d)
}

/// `V_x = (K_2^0(K_1^2)² + K_2^2(K_1^1)² − 2K_2^1K_1^2K_1^1) / (K_1^2 − (K_1^1)²)²`.
pub fn variance_constant(kernel: &KernelSpec) -> Result<f64> {
    let [k11, k12, _, k20, k21, k22, _] = moments(kernel)?;
    let d = spread(k11, k12)?;
    Ok((k20 * k12 * k12 + k22 * k11 * k11 - 2.0 * k21 * k12 * k11) / (d * d))
}

/// `[(K_1^2)² − K_1^1K_1^3] / (K_1^2 − (K_1^1)²)`.
pub fn bias_constant(kernel: &KernelSpec) -> Result<f64> {
    let [k11, k12, k13, ..] = moments(kernel)?;
    Ok((k12 * k12 - k11 * k13) / spread(k11, k12)?)
}

/// Leading bias `½ (σ²)''(x) · bias_constant · h²` of the local linear estimator.
pub fn bias_correction(kernel: &KernelSpec, curvature: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::param("h", "bandwidth must be positive"));
    }
    Ok(0.5 * curvature * bias_constant(kernel)? * h * h)
}

/// `(S⁻¹ S* S⁻¹)₀₀` with `S = (K_1^{i+j})`, `S* = (K_2^{i+j})`, `i, j = 0..p`.
/// Equals `K_2^0` for `p = 0` and `V_x` for `p = 1`.
pub fn sandwich_variance(kernel: &KernelSpec, p: usize) -> Result<f64> {
    let dim = p + 1;
    let m1 = (0..2 * dim - 1)
        .map(|j| kernel_moment(kernel, 1, j as u32))
        .collect::<Result<Vec<_>>>()?;
    let m2 = (0..2 * dim - 1)
        .map(|j| kernel_moment(kernel, 2, j as u32))
        .collect::<Result<Vec<_>>>()?;
    let s = DMatrix::from_fn(dim, dim, |r, c| m1[r + c]);
    let s_star = DMatrix::from_fn(dim, dim, |r, c| m2[r + c]);
    let inv = s
        .try_inverse()
        .ok_or_else(|| Error::InvalidKernel("kernel moment matrix is singular".into()))?;
    Ok((&inv * s_star * &inv)[(0, 0)])
}

/// Variance constant for the studentized statistic of `estimator`.
pub fn variance_constant_for(estimator: Estimator, kernel: &KernelSpec) -> Result<f64> {
    match estimator {
        Estimator::LocalLinear => variance_constant(kernel),
        other => sandwich_variance(kernel, other.order()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticConstants {
    pub v_x: f64,
    pub bias_c: f64,
    pub kernel: String,
}

impl AsymptoticConstants {
    pub fn new(kernel: &KernelSpec) -> Result<Self> {
        Ok(Self {
            v_x: variance_constant(kernel)?,
            bias_c: bias_constant(kernel)?,
            kernel: kernel.name().to_owned(),
        })
    }

    pub fn bias(&self, curvature: f64, h: f64) -> f64 {
        0.5 * curvature * self.bias_c * h * h
    }
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::param("level", format!("probability must lie in (0, 1), got {p}")));
    }
    Ok(Normal::standard().inverse_cdf(p))
}

/// Standard normal CDF.
pub fn normal_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InferenceResult {
    pub estimate: EstimateResult,
    pub bias_correction: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
}

/// Feasible interval from `√(hL̂/δ)(σ̂² − σ² − bias) ⇒ N(0, 2σ⁴V)` with `σ⁴`
/// replaced by `σ̂⁴`. Without a curvature the bias term is dropped.
pub fn confidence_interval(
    est: &EstimateResult,
    delta: f64,
    level: f64,
    curvature: Option<f64>,
    kernel: &KernelSpec,
    v: f64,
) -> Result<InferenceResult> {
    if !(est.local_time_hat > 0.0) {
        return Err(Error::NoLocalOccupation { x: est.x });
    }
    if !(v > 0.0) {
        return Err(Error::param("v_x", "variance constant must be positive"));
    }
    let z = normal_quantile(0.5 * (1.0 + level))?;
    let bias = match curvature {
        Some(c) => bias_correction(kernel, c, est.h)?,
        None => 0.0,
    };
    let std_error = est.sigma2_hat.abs() * (2.0 * v * delta / (est.h * est.local_time_hat)).sqrt();
    let centre = est.sigma2_hat - bias;
    Ok(InferenceResult {
        estimate: est.clone(),
        bias_correction: bias,
        std_error,
        ci_low: centre - z * std_error,
        ci_high: centre + z * std_error,
        level,
    })
}

/// `(σ²)''(x)` from local linear estimates at `x − 2h, x, x + 2h` with
/// bandwidth `2h`.
pub fn plug_in_curvature(path: &Path, x: f64, h: f64, kernel: &KernelSpec, threshold: f64) -> Result<f64> {
    let pilot = 2.0 * h;
    let at = |pt: f64| local_linear_sigma2(path, pt, pilot, kernel, threshold).map(|e| e.sigma2_hat);
    Ok((at(x + pilot)? - 2.0 * at(x)? + at(x - pilot)?) / (pilot * pilot))
}

/// MSE-optimal bandwidth
/// `(4δ[K_1^2 − (K_1^1)²]² / (L̂[(σ²)''((K_1^2)² − K_1^1K_1^3)]²))^{1/5}`.
pub fn optimal_bandwidth(delta: f64, local_time_hat: f64, curvature: f64, kernel: &KernelSpec) -> Result<f64> {
    if curvature == 0.0 {
        return Err(Error::FlatDiffusion);
    }
    if !(local_time_hat > 0.0) {
        return Err(Error::param("local_time_hat", "must be positive"));
    }
    if !(delta > 0.0) {
        return Err(Error::param("delta", "must be positive"));
    }
    let [k11, k12, k13, ..] = moments(kernel)?;
    let d = spread(k11, k12)?;
    let bracket = curvature * (k12 * k12 - k11 * k13);
    Ok((4.0 * delta * d * d / (local_time_hat * bracket * bracket)).powf(0.2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateParams {
    pub eta: f64,
    /// `h = δ^φ`.
    pub phi: f64,
    /// Activity index of the infinite-activity part, 0 when absent.
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCheck {
    pub name: &'static str,
    pub slack: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub params: RateParams,
    pub ia_present: bool,
    pub checks: Vec<RateCheck>,
}

impl RateReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &RateCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

impl std::fmt::Display for RateReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let p = self.params;
        writeln!(
            f,
            "rate conditions (eta={}, phi={}, alpha={}, {}):",
            p.eta,
            p.phi,
            p.alpha,
            if self.ia_present { "infinite activity" } else { "finite activity" }
        )?;
        for c in &self.checks {
            writeln!(f, "  {:<32} slack {:+.6}  {}", c.name, c.slack, if c.pass { "pass" } else { "FAIL" })?;
        }
        write!(f, "overall: {}", if self.all_pass() { "pass" } else { "FAIL" })
    }
}

fn check(name: &'static str, slack: f64) -> RateCheck {
    RateCheck {
        name,
        slack,
        pass: slack > 0.0,
    }
}

/// Evaluates every inequality and reports its slack; never fails.
pub fn check_rate_conditions(params: RateParams, ia_present: bool) -> RateReport {
    let RateParams { eta, phi, alpha } = params;
    let mut checks = vec![
        check("0 < eta < 1", eta.min(1.0 - eta)),
        check("phi > 0", phi),
        check("2*phi < 1", 1.0 - 2.0 * phi),
    ];
    if ia_present {
        checks.extend([
            check("alpha < 1", 1.0 - alpha),
            check("eta/2 > phi", eta / 2.0 - phi),
            check("(1 - alpha*eta) - 1/2 + phi/2 > 0", (1.0 - alpha * eta) - 0.5 + phi / 2.0),
            check("eta*(1 - alpha/2) - 1/2 + phi/2 > 0", eta * (1.0 - alpha / 2.0) - 0.5 + phi / 2.0),
        ]);
    }
    RateReport {
        params,
        ia_present,
        checks,
    }
}
