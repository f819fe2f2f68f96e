//! One-sided kernels on the positive half-line and their moments
//! `K_i^j = ∫₀^∞ u^j K(u)^i du`.

use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature;

/// Absolute tolerance used for every quadrature-based moment.
pub const MOMENT_ABS_TOL: f64 = 1e-12;
/// Subdivision cap for adaptive moment quadrature.
pub const MOMENT_MAX_SUBDIVISIONS: usize = 60;
/// Allowed deviation of `∫ K` from one.
pub const NORMALIZATION_TOL: f64 = 1e-10;

pub const BUILTIN_KERNELS: [&str; 2] = ["one_sided_epanechnikov", "one_sided_uniform"];

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    /// `(3/2)(1 - u²)` on `[0, 1]`.
    Epanechnikov,
    /// `1` on `[0, 1]`.
    Uniform,
    /// Piecewise-linear interpolation of `(u, k)` pairs starting at `u = 0`.
    Tabulated { u: Arc<[f64]>, k: Arc<[f64]> },
}

/// A kernel supported on `[0, support_upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    name: String,
    support_upper: f64,
    shape: Shape,
}

impl KernelSpec {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn support_upper(&self) -> f64 {
        self.support_upper
    }

    pub fn has_closed_form_moments(&self) -> bool {
        !matches!(self.shape, Shape::Tabulated { .. })
    }

    /// Kernel weight at `u`; zero outside `[0, support_upper]`.
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        if !(0.0..=self.support_upper).contains(&u) {
            return 0.0;
        }
        match &self.shape {
            Shape::Epanechnikov => 1.5 * (1.0 - u * u),
            Shape::Uniform => 1.0,
            Shape::Tabulated { u: us, k } => {
                let idx = us.partition_point(|&node| node <= u);
                if idx >= us.len() {
                    return k[k.len() - 1];
                }
                let (u0, u1) = (us[idx - 1], us[idx]);
                let w = (u - u0) / (u1 - u0);
                k[idx - 1] + w * (k[idx] - k[idx - 1])
            }
        }
    }

    /// Builds a kernel from tabulated values with linear interpolation.
    ///
    /// `u` must start at 0 and be strictly increasing, `k` must be finite and
    /// non-negative. The tabulated mass must be one within
    /// [`NORMALIZATION_TOL`] unless `renormalize` is set, in which case `k`
    /// is rescaled to unit mass.
    pub fn from_table(name: &str, u: Vec<f64>, k: Vec<f64>, renormalize: bool) -> Result<Self> {
        if u.len() != k.len() || u.len() < 2 {
            return Err(Error::InvalidKernel(
                "table needs at least two (u, k) rows of equal length".into(),
            ));
        }
        if u[0] != 0.0 {
            return Err(Error::InvalidKernel(format!("table must start at u = 0, got {}", u[0])));
        }
        if let Some(w) = u.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidKernel(format!(
                "u must be strictly increasing (row {})",
                w + 2
            )));
        }
        if let Some(bad) = k.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidKernel(format!("kernel value {bad} is negative or non-finite")));
        }
        let mass: f64 = u
            .windows(2)
            .zip(k.windows(2))
            .map(|(uu, kk)| 0.5 * (kk[0] + kk[1]) * (uu[1] - uu[0]))
            .sum();
        let k = if (mass - 1.0).abs() > NORMALIZATION_TOL {
            if !renormalize || mass <= 0.0 {
                return Err(Error::InvalidKernel(format!(
                    "kernel integrates to {mass:.12}, expected 1"
                )));
            }
            k.into_iter().map(|v| v / mass).collect()
        } else {
            k
        };
        let support_upper = *u.last().expect("len >= 2");
        Ok(Self {
            name: name.to_owned(),
            support_upper,
            shape: Shape::Tabulated {
                u: u.into(),
                k: k.into(),
            },
        })
    }

    /// Reads a `u,k` CSV table.
    pub fn from_csv(path: &Path, renormalize: bool) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "u,k" => {}
            _ => {
                return Err(Error::Data {
                    line: 1,
                    reason: "expected header `u,k`".into(),
                })
            }
        }
        let mut us = Vec::new();
        let mut ks = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let (a, b) = line.split_once(',').ok_or_else(|| Error::Data {
                line: idx + 1,
                reason: "expected two comma-separated fields".into(),
            })?;
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|e| Error::Data {
                    line: idx + 1,
                    reason: format!("cannot parse `{}`: {e}", s.trim()),
                })
            };
            us.push(parse(a)?);
            ks.push(parse(b)?);
        }
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("tabulated");
        Self::from_table(name, us, ks, renormalize)
    }

    fn closed_form_moment(&self, i: u32, j: u32) -> Option<f64> {
        match self.shape {
            Shape::Uniform => Some(1.0 / (j as f64 + 1.0)),
            Shape::Epanechnikov => {
                // (3/2)^i ∫₀¹ u^j (1 - u²)^i du, expanded binomially.
                let mut sum = 0.0;
                let mut binom = 1.0;
                for m in 0..=i {
                    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                    sum += sign * binom / (j as f64 + 2.0 * m as f64 + 1.0);
                    binom = binom * (i - m) as f64 / (m + 1) as f64;
                }
                Some(1.5f64.powi(i as i32) * sum)
            }
            Shape::Tabulated { .. } => None,
        }
    }
}

/// Returns one of the built-in kernels by name.
pub fn builtin_kernel(name: &str) -> Result<KernelSpec> {
    let shape = match name {
        "one_sided_epanechnikov" => Shape::Epanechnikov,
        "one_sided_uniform" => Shape::Uniform,
        _ => {
            return Err(Error::UnknownKernel {
                name: name.to_owned(),
                available: BUILTIN_KERNELS.join(", "),
            })
        }
    };
    Ok(KernelSpec {
        name: name.to_owned(),
        support_upper: 1.0,
        shape,
    })
}

/// `K_i^j`, from the closed form when the kernel has one.
pub fn kernel_moment(spec: &KernelSpec, i: u32, j: u32) -> Result<f64> {
    if i == 0 {
        return Err(Error::param("i", "kernel power must be positive"));
    }
    match spec.closed_form_moment(i, j) {
        Some(v) => Ok(v),
        None => kernel_moment_quadrature(spec, i, j),
    }
}

/// `K_i^j` by adaptive quadrature, regardless of closed-form availability.
pub fn kernel_moment_quadrature(spec: &KernelSpec, i: u32, j: u32) -> Result<f64> {
    if i == 0 {
        return Err(Error::param("i", "kernel power must be positive"));
    }
    let integrand = |u: f64| u.powi(j as i32) * spec.eval(u).powi(i as i32);
    match &spec.shape {
        Shape::Tabulated { u, .. } => {
            // Polynomial on each segment, so split at the nodes.
            let share = MOMENT_ABS_TOL / (u.len() - 1) as f64;
            u.windows(2)
                .map(|w| quadrature::integrate(integrand, w[0], w[1], share, MOMENT_MAX_SUBDIVISIONS))
                .sum()
        }
        _ => quadrature::integrate(
            integrand,
            0.0,
            spec.support_upper,
            MOMENT_ABS_TOL,
            MOMENT_MAX_SUBDIVISIONS,
        ),
    }
}
