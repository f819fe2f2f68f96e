//! Threshold local-polynomial estimation of `σ²(x)`.
//!
//! Kernel weights are evaluated at left endpoints `X_{t_{i-1}}` and the
//! responses are the forward squared increments `(X_{t_i} − X_{t_{i-1}})²/δ`,
//! `i = 1..n`. An increment is kept iff `(ΔX)² <= ϑ(δ)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::sim::Path;

/// Largest accepted 2-norm condition number of the scaled design matrix.
pub const MAX_CONDITION: f64 = 1e12;

/// Power threshold `ϑ(δ) = δ^η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdSpec {
    eta: f64,
}

impl ThresholdSpec {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::param("eta", format!("must lie in (0, 1), got {eta}")));
        }
        Ok(Self { eta })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

pub fn threshold_value(spec: &ThresholdSpec, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", format!("threshold needs delta in (0, 1), got {delta}")));
    }
    Ok(delta.powf(spec.eta))
}

/// `true` where the increment is kept as continuous.
pub fn classify_increments(path: &Path, threshold: f64) -> Vec<bool> {
    path.increments().map(|d| d * d <= threshold).collect()
}

/// Moments `S_{n,k} = (1/h) Σ K((X−x)/h) (X−x)^k`, `k = 0..2p`, and
/// `Q_{n,k} = (1/h) Σ K((X−x)/h) (X−x)^k (ΔX)²/δ · 1{(ΔX)² <= ϑ}`, `k = 0..p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignMoments {
    pub s: Vec<f64>,
    pub q: Vec<f64>,
    pub x: f64,
    pub h: f64,
    pub p: usize,
}

/// Regression sample: design points, responses and keep flags.
#[derive(Debug, Clone, Copy)]
pub struct LocalSample<'a> {
    pub points: &'a [f64],
    pub responses: &'a [f64],
    pub keep: Option<&'a [bool]>,
}

impl<'a> LocalSample<'a> {
    fn kept(&self, i: usize) -> bool {
        self.keep.is_none_or(|k| k[i])
    }

    fn check(&self) -> Result<()> {
        if self.points.len() != self.responses.len() {
            return Err(Error::param("responses", "length must match points"));
        }
        if let Some(k) = self.keep {
            if k.len() != self.points.len() {
                return Err(Error::param("keep", "length must match points"));
            }
        }
        Ok(())
    }
}

fn check_bandwidth(h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::param("h", format!("bandwidth must be positive, got {h}")));
    }
    Ok(())
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(threshold > 0.0) {
        return Err(Error::param("threshold", format!("must be positive, got {threshold}")));
    }
    Ok(())
}

/// Squared increments over `δ`.
pub fn responses(path: &Path) -> Vec<f64> {
    let inv = 1.0 / path.delta;
    path.increments().map(|d| d * d * inv).collect()
}

pub fn design_moment(path: &Path, x: f64, h: f64, kernel: &KernelSpec, k: u32) -> Result<f64> {
    check_bandwidth(h)?;
    let sum: f64 = path
        .left_points()
        .iter()
        .map(|&xi| kernel.eval((xi - x) / h) * (xi - x).powi(k as i32))
        .sum();
    Ok(sum / h)
}

pub fn response_moment(
    path: &Path,
    x: f64,
    h: f64,
    kernel: &KernelSpec,
    threshold: f64,
    k: u32,
) -> Result<f64> {
    check_bandwidth(h)?;
    check_threshold(threshold)?;
    let inv_delta = 1.0 / path.delta;
    let sum: f64 = path
        .left_points()
        .iter()
        .zip(path.increments())
        .filter(|(_, d)| d * d <= threshold)
        .map(|(&xi, d)| kernel.eval((xi - x) / h) * (xi - x).powi(k as i32) * d * d * inv_delta)
        .sum();
    Ok(sum / h)
}

pub fn design_moments(
    path: &Path,
    x: f64,
    h: f64,
    kernel: &KernelSpec,
    threshold: f64,
    p: usize,
) -> Result<DesignMoments> {
    let s = (0..=2 * p as u32)
        .map(|k| design_moment(path, x, h, kernel, k))
        .collect::<Result<Vec<_>>>()?;
    let q = (0..=p as u32)
        .map(|k| response_moment(path, x, h, kernel, threshold, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(DesignMoments { s, q, x, h, p })
}

/// Weighted local polynomial fit of degree `p` at `x`; `beta[j]` estimates
/// the `j`-th Taylor coefficient of the regression function.
///
/// The normal equations are assembled in the scaled variable `(X − x)/h`
/// and solved by Householder QR; coefficients are unscaled afterwards.
pub fn fit_local_polynomial(
    sample: LocalSample<'_>,
    x: f64,
    h: f64,
    kernel: &KernelSpec,
    p: usize,
) -> Result<Vec<f64>> {
    sample.check()?;
    check_bandwidth(h)?;
    let dim = p + 1;
    let mut u_pow = vec![0.0; 2 * p + 1];
    let mut s = vec![0.0; 2 * p + 1];
    let mut q = vec![0.0; dim];
    let mut effective = 0usize;
    for (i, &xi) in sample.points.iter().enumerate() {
        let u = (xi - x) / h;
        let w = kernel.eval(u);
        if w == 0.0 {
            continue;
        }
        effective += 1;
        u_pow[0] = 1.0;
        for k in 1..u_pow.len() {
            u_pow[k] = u_pow[k - 1] * u;
        }
        for (acc, up) in s.iter_mut().zip(&u_pow) {
            *acc += w * up;
        }
        if sample.kept(i) {
            let y = sample.responses[i];
            for (acc, up) in q.iter_mut().zip(&u_pow) {
                *acc += w * up * y;
            }
        }
    }
    if effective < dim {
        return Err(Error::insufficient(
            x,
            format!("{effective} observations in the kernel window, need {dim}"),
        ));
    }
    let a = DMatrix::from_fn(dim, dim, |r, c| s[r + c]);
    let sv = a.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 0.0) || smax / smin > MAX_CONDITION {
        return Err(Error::insufficient(
            x,
            format!("design matrix condition number {:.3e}", smax / smin),
        ));
    }
    let gamma = a
        .qr()
        .solve(&DVector::from_vec(q))
        .ok_or_else(|| Error::insufficient(x, "singular design matrix"))?;
    Ok(gamma
        .iter()
        .enumerate()
        .map(|(j, g)| g / h.powi(j as i32))
        .collect())
}

/// `β̂ = S_n^{-1} Q_n` for the threshold local polynomial regression of
/// order `p`.
pub fn local_poly_fit(
    path: &Path,
    x: f64,
    h: f64,
    kernel: &KernelSpec,
    threshold: f64,
    p: usize,
) -> Result<Vec<f64>> {
    check_threshold(threshold)?;
    let resp = responses(path);
    let keep = classify_increments(path, threshold);
    fit_local_polynomial(
        LocalSample {
            points: path.left_points(),
            responses: &resp,
            keep: Some(&keep),
        },
        x,
        h,
        kernel,
        p,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResult {
    pub x: f64,
    pub sigma2_hat: f64,
    /// Local polynomial coefficients; `beta[0] == sigma2_hat`.
    pub beta: Vec<f64>,
    pub local_time_hat: f64,
    pub h: f64,
    pub n_effective: usize,
    pub flagged_fraction: f64,
}

/// Local linear weights `K_i{δS_{n,2}/h² − ((X_{i}−x)/h)·δS_{n,1}/h}` on
/// left endpoints.
pub fn local_linear_weights(points: &[f64], x: f64, h: f64, delta: f64, kernel: &KernelSpec) -> Vec<f64> {
    let (mut s1, mut s2) = (0.0, 0.0);
    for &xi in points {
        let w = kernel.eval((xi - x) / h);
        s1 += w * (xi - x);
        s2 += w * (xi - x) * (xi - x);
    }
    let (s1, s2) = (s1 / h, s2 / h);
    let a = delta * s2 / (h * h);
    let b = delta * s1 / h;
    points
        .iter()
        .map(|&xi| {
            let u = (xi - x) / h;
            kernel.eval(u) * (a - u * b)
        })
        .collect()
}

/// Closed-form local linear threshold estimator of `σ²(x)`.
pub fn local_linear_sigma2(
    path: &Path,
    x: f64,
    h: f64,
    kernel: &KernelSpec,
    threshold: f64,
) -> Result<EstimateResult> {
    check_bandwidth(h)?;
    check_threshold(threshold)?;
    let points = path.left_points();
    let weights = local_linear_weights(points, x, h, path.delta, kernel);
    let inv_delta = 1.0 / path.delta;
    let (mut num, mut den, mut scale) = (0.0, 0.0, 0.0);
    for (w, d) in weights.iter().zip(path.increments()) {
        den += w;
        scale += w.abs();
        if d * d <= threshold {
            num += w * d * d * inv_delta;
        }
    }
    if !(scale > 0.0) || den.abs() <= 1e-12 * scale {
        return Err(Error::insufficient(x, "local linear denominator vanishes"));
    }
    let sigma2_hat = num / den;
    let beta = local_poly_fit(path, x, h, kernel, threshold, 1)?;
    Ok(EstimateResult {
        x,
        sigma2_hat,
        beta: vec![sigma2_hat, beta[1]],
        local_time_hat: local_time_hat(path, x, h, kernel)?,
        h,
        n_effective: n_effective(points, x, h, kernel),
        flagged_fraction: flagged_fraction(path, threshold),
    })
}

/// Nadaraya–Watson estimator; with `threshold = None` no increment is censored.
pub fn nw_sigma2(path: &Path, x: f64, h: f64, kernel: &KernelSpec, threshold: Option<f64>) -> Result<f64> {
    check_bandwidth(h)?;
    if let Some(t) = threshold {
        check_threshold(t)?;
    }
    let inv_delta = 1.0 / path.delta;
    let (mut num, mut den) = (0.0, 0.0);
    for (&xi, d) in path.left_points().iter().zip(path.increments()) {
        let w = kernel.eval((xi - x) / h);
        den += w;
        if threshold.is_none_or(|t| d * d <= t) {
            num += w * d * d * inv_delta;
        }
    }
    if den == 0.0 {
        return Err(Error::insufficient(x, "kernel weights sum to zero"));
    }
    Ok(num / den)
}

/// `L̂_X(T, x) = (1/h) Σ K((X_{t_{i-1}} − x)/h) δ`.
pub fn local_time_hat(path: &Path, x: f64, h: f64, kernel: &KernelSpec) -> Result<f64> {
    Ok(path.delta * design_moment(path, x, h, kernel, 0)?)
}

fn n_effective(points: &[f64], x: f64, h: f64, kernel: &KernelSpec) -> usize {
    points.iter().filter(|&&xi| kernel.eval((xi - x) / h) > 0.0).count()
}

fn flagged_fraction(path: &Path, threshold: f64) -> f64 {
    let flagged = path.increments().filter(|d| d * d > threshold).count();
    flagged as f64 / path.n as f64
}

/// Which estimator to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    LocalLinear,
    NwThreshold,
    NwPlain,
    LocalPoly(usize),
}

impl Estimator {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "local_linear" => Ok(Self::LocalLinear),
            "nw_threshold" => Ok(Self::NwThreshold),
            "nw_plain" => Ok(Self::NwPlain),
            other => other
                .strip_prefix("local_poly")
                .and_then(|rest| rest.trim_matches(|c| c == '(' || c == ')' || c == ':').parse().ok())
                .map(Self::LocalPoly)
                .ok_or_else(|| Error::param("estimator", format!("unknown estimator `{s}`"))),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::LocalLinear => "local_linear".into(),
            Self::NwThreshold => "nw_threshold".into(),
            Self::NwPlain => "nw_plain".into(),
            Self::LocalPoly(p) => format!("local_poly({p})"),
        }
    }

    /// Polynomial order the estimator corresponds to.
    pub fn order(&self) -> usize {
        match self {
            Self::LocalLinear => 1,
            Self::NwThreshold | Self::NwPlain => 0,
            Self::LocalPoly(p) => *p,
        }
    }
}

/// Evaluates `estimator` at `x` and fills the shared diagnostics.
pub fn estimate(
    path: &Path,
    x: f64,
    h: f64,
    kernel: &KernelSpec,
    threshold: f64,
    estimator: Estimator,
) -> Result<EstimateResult> {
    if estimator == Estimator::LocalLinear {
        return local_linear_sigma2(path, x, h, kernel, threshold);
    }
    let (sigma2_hat, beta, flagged) = match estimator {
        Estimator::NwThreshold => {
            let v = nw_sigma2(path, x, h, kernel, Some(threshold))?;
            (v, vec![v], flagged_fraction(path, threshold))
        }
        Estimator::NwPlain => {
            let v = nw_sigma2(path, x, h, kernel, None)?;
            (v, vec![v], 0.0)
        }
        Estimator::LocalPoly(p) => {
            let beta = local_poly_fit(path, x, h, kernel, threshold, p)?;
            (beta[0], beta, flagged_fraction(path, threshold))
        }
        Estimator::LocalLinear => unreachable!(),
    };
    Ok(EstimateResult {
        x,
        sigma2_hat,
        beta,
        local_time_hat: local_time_hat(path, x, h, kernel)?,
        h,
        n_effective: n_effective(path.left_points(), x, h, kernel),
        flagged_fraction: flagged,
    })
}
