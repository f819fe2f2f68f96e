//! Model specification for `dX = μ(X₋)dt + σ(X₋)dW + dJ`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Drift {
    Zero,
    /// `κ(θ − x)`.
    LinearMeanRevert { kappa: f64, theta: f64 },
    Custom(ScalarFn),
}

impl Drift {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Drift::Zero => 0.0,
            Drift::LinearMeanRevert { kappa, theta } => kappa * (theta - x),
            Drift::Custom(f) => f(x),
        }
    }
}

impl fmt::Debug for Drift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Drift::Zero => write!(f, "zero"),
            Drift::LinearMeanRevert { kappa, theta } => {
                write!(f, "linear_mean_revert(kappa={kappa}, theta={theta})")
            }
            Drift::Custom(_) => write!(f, "custom"),
        }
    }
}

#[derive(Clone)]
pub enum Diffusion {
    /// `σ(x) = s`.
    Constant { s: f64 },
    /// `σ²(x) = a + b·sin(x)`, requires `a > |b|`.
    SineBump { a: f64, b: f64 },
    /// User-supplied `σ(x)` and optionally `(σ²)''(x)`.
    Custom {
        sigma: ScalarFn,
        curvature: Option<ScalarFn>,
    },
}

impl Diffusion {
    pub fn sine_bump(a: f64, b: f64) -> Result<Self> {
        if !(a > b.abs()) {
            return Err(Error::param("a", format!("sine_bump needs a > |b| (a={a}, b={b})")));
        }
        Ok(Diffusion::SineBump { a, b })
    }

    #[inline]
    pub fn sigma(&self, x: f64) -> f64 {
        match self {
            Diffusion::Constant { s } => *s,
            Diffusion::SineBump { .. } => self.sigma2(x).sqrt(),
            Diffusion::Custom { sigma, .. } => sigma(x),
        }
    }

    #[inline]
    pub fn sigma2(&self, x: f64) -> f64 {
        match self {
            Diffusion::Constant { s } => s * s,
            Diffusion::SineBump { a, b } => a + b * x.sin(),
            Diffusion::Custom { sigma, .. } => {
                let s = sigma(x);
                s * s
            }
        }
    }

    /// `(σ²)''(x)` when known analytically.
    pub fn sigma2_curvature(&self, x: f64) -> Option<f64> {
        match self {
            Diffusion::Constant { .. } => Some(0.0),
            Diffusion::SineBump { b, .. } => Some(-b * x.sin()),
            Diffusion::Custom { curvature, .. } => curvature.as_ref().map(|c| c(x)),
        }
    }
}

impl fmt::Debug for Diffusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diffusion::Constant { s } => write!(f, "constant(s={s})"),
            Diffusion::SineBump { a, b } => write!(f, "sine_bump(a={a}, b={b})"),
            Diffusion::Custom { .. } => write!(f, "custom"),
        }
    }
}

#[derive(Clone)]
pub enum Intensity {
    Constant(f64),
    Custom(ScalarFn),
}

impl Intensity {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Intensity::Constant(l) => *l,
            Intensity::Custom(f) => f(x),
        }
    }
}

impl fmt::Debug for Intensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Intensity::Constant(l) => write!(f, "constant({l})"),
            Intensity::Custom(_) => write!(f, "custom"),
        }
    }
}

/// Law of the compound Poisson jump sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum JumpSize {
    Normal { mean: f64, sd: f64 },
    Constant(f64),
}

impl Default for JumpSize {
    fn default() -> Self {
        JumpSize::Normal { mean: 0.0, sd: 1.0 }
    }
}

/// Finite-activity component: state-dependent compound Poisson.
#[derive(Debug, Clone)]
pub struct FaSpec {
    pub intensity: Intensity,
    pub intensity_bound: f64,
    pub jump_size: JumpSize,
}

impl FaSpec {
    pub fn constant(lambda: f64, jump_size: JumpSize) -> Self {
        Self {
            intensity: Intensity::Constant(lambda),
            intensity_bound: lambda.max(f64::MIN_POSITIVE),
            jump_size,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IaKind {
    SymmetricAlphaStable,
    VarianceGamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VgParams {
    pub nu: f64,
    pub theta: f64,
    pub sigma: f64,
}

/// Infinite-activity Lévy component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IaSpec {
    pub kind: IaKind,
    /// Stability index; must lie in (0, 1) for the stable kind.
    pub alpha: f64,
    /// Multiplier on the increments; zero switches the component off.
    pub scale: f64,
    pub vg: Option<VgParams>,
}

impl IaSpec {
    pub fn stable(alpha: f64, scale: f64) -> Self {
        Self {
            kind: IaKind::SymmetricAlphaStable,
            alpha,
            scale,
            vg: None,
        }
    }

    pub fn variance_gamma(params: VgParams, scale: f64) -> Self {
        Self {
            kind: IaKind::VarianceGamma,
            alpha: 0.0,
            scale,
            vg: Some(params),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale >= 0.0 && self.scale.is_finite()) {
            return Err(Error::param("scale", format!("must be finite and >= 0, got {}", self.scale)));
        }
        match self.kind {
            IaKind::SymmetricAlphaStable => {
                if !(self.alpha > 0.0 && self.alpha < 1.0) {
                    return Err(Error::param(
                        "alpha",
                        format!("stable index must lie in (0, 1), got {}", self.alpha),
                    ));
                }
            }
            IaKind::VarianceGamma => {
                let vg = self
                    .vg
                    .ok_or_else(|| Error::param("vg_params", "variance gamma needs (nu, theta, sigma)"))?;
                if !(vg.nu > 0.0 && vg.sigma >= 0.0 && vg.theta.is_finite()) {
                    return Err(Error::param("vg_params", format!("invalid {vg:?}")));
                }
            }
        }
        Ok(())
    }

    /// Blumenthal–Getoor index of the component (zero for variance gamma).
    pub fn activity_index(&self) -> f64 {
        match self.kind {
            IaKind::SymmetricAlphaStable => self.alpha,
            IaKind::VarianceGamma => 0.0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct JumpSpec {
    pub fa: Option<FaSpec>,
    pub ia: Option<IaSpec>,
}

impl JumpSpec {
    pub fn validate(&self) -> Result<()> {
        if let Some(fa) = &self.fa {
            if !(fa.intensity_bound > 0.0 && fa.intensity_bound.is_finite()) {
                return Err(Error::param("intensity_bound", "must be positive and finite"));
            }
            if let JumpSize::Normal { sd, .. } = fa.jump_size {
                if !(sd >= 0.0) {
                    return Err(Error::param("jump_sd", "must be non-negative"));
                }
            }
        }
        if let Some(ia) = &self.ia {
            ia.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub drift: Drift,
    pub diffusion: Diffusion,
    pub jumps: JumpSpec,
    pub x0: f64,
}

impl ModelSpec {
    /// Driftless Brownian motion with constant volatility `s`, started at `x0`.
    pub fn brownian(s: f64, x0: f64) -> Self {
        Self {
            drift: Drift::Zero,
            diffusion: Diffusion::Constant { s },
            jumps: JumpSpec::default(),
            x0,
        }
    }

    pub fn with_jumps(mut self, jumps: JumpSpec) -> Self {
        self.jumps = jumps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.x0.is_finite() {
            return Err(Error::param("x0", "must be finite"));
        }
        self.jumps.validate()
    }
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::brownian(1.0, 0.0)
    }
}

impl IaKind {
    pub fn label(&self) -> &'static str {
        match self {
            IaKind::SymmetricAlphaStable => "stable",
            IaKind::VarianceGamma => "variance_gamma",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_bump_analytics() {
        let d = Diffusion::sine_bump(2.0, 1.0).unwrap();
        let x: f64 = 0.7;
        assert!((d.sigma2(x) - (2.0 + x.sin())).abs() < 1e-15);
        assert!((d.sigma(x).powi(2) - d.sigma2(x)).abs() < 1e-14);
        assert_eq!(d.sigma2_curvature(x), Some(-x.sin()));
        assert!(Diffusion::sine_bump(1.0, 1.0).is_err());
    }

    #[test]
    fn mean_revert_drift() {
        let d = Drift::LinearMeanRevert { kappa: 2.0, theta: 1.0 };
        assert_eq!(d.eval(0.0), 2.0);
        assert_eq!(d.eval(1.0), 0.0);
    }

    #[test]
    fn stable_index_must_be_below_one() {
        assert!(IaSpec::stable(1.0, 1.0).validate().is_err());
        assert!(IaSpec::stable(0.0, 1.0).validate().is_err());
        assert!(IaSpec::stable(0.5, 1.0).validate().is_ok());
        assert!(IaSpec::stable(0.5, -1.0).validate().is_err());
    }

    #[test]
    fn variance_gamma_requires_params() {
        let mut ia = IaSpec::variance_gamma(VgParams { nu: 0.2, theta: 0.0, sigma: 0.3 }, 1.0);
        assert!(ia.validate().is_ok());
        ia.vg = None;
        assert!(ia.validate().is_err());
        assert_eq!(IaSpec::variance_gamma(VgParams { nu: 0.2, theta: 0.0, sigma: 0.3 }, 1.0).activity_index(), 0.0);
    }
}
