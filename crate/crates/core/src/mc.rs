//! Monte Carlo validation of the studentized local threshold estimators.
//!
//! Every replicate draws its path from `derive_seed(master_seed, r)`, so the
//! report does not depend on execution order. Replicates run in parallel and
//! are aggregated in index order.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{
    check_rate_conditions, confidence_interval, normal_cdf, variance_constant_for, AsymptoticConstants,
    RateParams, RateReport,
};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::model::{IaSpec, ModelSpec};
use crate::sim::{derive_seed, simulate_path_with, SimOptions};
use crate::threshold::{estimate, threshold_value, Estimator, ThresholdSpec};

/// Replicate failure share above which an experiment is rejected.
pub const MAX_FAILURE_RATE: f64 = 0.2;
/// Mean kernel-window size below which a warning is attached.
pub const MIN_EFFECTIVE_WARNING: f64 = 50.0;

/// `Z = √(hL̂/δ)(σ̂² − σ² − bias) / √(2σ⁴V)` with the true `σ²`.
pub fn standardize(
    sigma2_hat: f64,
    sigma2_true: f64,
    bias: f64,
    h: f64,
    delta: f64,
    local_time_hat: f64,
    v_x: f64,
) -> Result<f64> {
    if !(local_time_hat > 0.0) {
        return Err(Error::param("local_time_hat", "must be positive"));
    }
    if !(v_x > 0.0) {
        return Err(Error::param("v_x", "must be positive"));
    }
    let rate = (h * local_time_hat / delta).sqrt();
    Ok(rate * (sigma2_hat - sigma2_true - bias) / (2.0 * sigma2_true * sigma2_true * v_x).sqrt())
}

/// One-sample Kolmogorov–Smirnov distance to the standard normal.
pub fn ks_distance(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 1.0;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = normal_cdf(v);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Fixed(f64),
    /// `h = δ^φ`.
    Power { phi: f64 },
}

impl Bandwidth {
    pub fn resolve(&self, delta: f64) -> f64 {
        match *self {
            Bandwidth::Fixed(h) => h,
            Bandwidth::Power { phi } => delta.powf(phi),
        }
    }

    /// Exponent `φ` with `h = δ^φ`.
    pub fn phi(&self, delta: f64) -> f64 {
        match *self {
            Bandwidth::Fixed(h) => h.ln() / delta.ln(),
            Bandwidth::Power { phi } => phi,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub n: usize,
    pub t_end: f64,
    pub replications: usize,
    pub x_points: Vec<f64>,
    pub eta: f64,
    pub bandwidth: Bandwidth,
    pub kernel: KernelSpec,
    pub estimator: Estimator,
    pub master_seed: u64,
    pub level: f64,
    pub refinement: usize,
}

impl ExperimentConfig {
    pub fn delta(&self) -> f64 {
        self.t_end / self.n as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::param("replications", "need at least one replicate"));
        }
        if self.x_points.is_empty() {
            return Err(Error::param("x_points", "need at least one evaluation point"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::param("level", "must lie in (0, 1)"));
        }
        let h = self.bandwidth.resolve(self.delta());
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::param("h", format!("bandwidth resolves to {h}")));
        }
        ThresholdSpec::new(self.eta)?;
        self.model.validate()
    }

    pub fn rate_params(&self) -> RateParams {
        RateParams {
            eta: self.eta,
            phi: self.bandwidth.phi(self.delta()),
            alpha: self.model.jumps.ia.map_or(0.0, |ia| ia.activity_index()),
        }
    }

    fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            drift: format!("{:?}", self.model.drift),
            diffusion: format!("{:?}", self.model.diffusion),
            fa: self.model.jumps.fa.as_ref().map(|fa| format!("{fa:?}")),
            ia: self.model.jumps.ia,
            x0: self.model.x0,
            n: self.n,
            t_end: self.t_end,
            replications: self.replications,
            x_points: self.x_points.clone(),
            eta: self.eta,
            bandwidth: self.bandwidth,
            h: self.bandwidth.resolve(self.delta()),
            kernel: self.kernel.name().to_owned(),
            estimator: self.estimator.label(),
            master_seed: self.master_seed,
            level: self.level,
            refinement: self.refinement,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub drift: String,
    pub diffusion: String,
    pub fa: Option<String>,
    pub ia: Option<IaSpec>,
    pub x0: f64,
    pub n: usize,
    pub t_end: f64,
    pub replications: usize,
    pub x_points: Vec<f64>,
    pub eta: f64,
    pub bandwidth: Bandwidth,
    pub h: f64,
    pub kernel: String,
    pub estimator: String,
    pub master_seed: u64,
    pub level: f64,
    pub refinement: usize,
}

/// Per-point outcome of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointOutcome {
    pub x: f64,
    pub sigma2_hat: f64,
    pub z: f64,
    pub covered: bool,
    pub flagged_fraction: f64,
    pub n_effective: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    /// `None` where the estimator had insufficient local data.
    pub points: Vec<Option<PointOutcome>>,
    pub detection: Option<JumpDetection>,
}

/// Confusion counts of the threshold indicator against the true jump mask.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct JumpDetection {
    pub jump_intervals: usize,
    pub jump_intervals_excluded: usize,
    pub clean_intervals: usize,
    pub clean_intervals_excluded: usize,
}

impl JumpDetection {
    fn add(&mut self, other: &JumpDetection) {
        self.jump_intervals += other.jump_intervals;
        self.jump_intervals_excluded += other.jump_intervals_excluded;
        self.clean_intervals += other.clean_intervals;
        self.clean_intervals_excluded += other.clean_intervals_excluded;
    }

    /// Share of jump intervals removed by the indicator.
    pub fn detection_rate(&self) -> f64 {
        self.jump_intervals_excluded as f64 / self.jump_intervals.max(1) as f64
    }

    /// Share of jump-free intervals removed by the indicator.
    pub fn false_exclusion_rate(&self) -> f64 {
        self.clean_intervals_excluded as f64 / self.clean_intervals.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointReport {
    pub x: f64,
    pub estimator: String,
    pub sigma2_true: f64,
    pub curvature: Option<f64>,
    pub bias_term: f64,
    pub variance_constant: f64,
    pub z_samples: Vec<f64>,
    pub sigma2_samples: Vec<f64>,
    pub ks_distance: f64,
    pub coverage: f64,
    pub mean_estimate: f64,
    pub mean_bias: f64,
    pub rmse: f64,
    pub mean_flagged_fraction: f64,
    pub mean_n_effective: f64,
    pub failures: usize,
}

impl PointReport {
    pub fn z_mean(&self) -> f64 {
        mean(&self.z_samples)
    }

    pub fn z_variance(&self) -> f64 {
        let m = self.z_mean();
        let n = self.z_samples.len() as f64;
        self.z_samples.iter().map(|z| (z - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRow {
    pub r: usize,
    pub x: f64,
    pub sigma2_hat: f64,
    pub z: f64,
    pub covered: bool,
    pub flagged_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MCReport {
    pub config: ConfigEcho,
    pub rate_conditions: RateReport,
    pub points: Vec<PointReport>,
    pub jump_detection: Option<JumpDetection>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub rows: Vec<ReplicateRow>,
}

impl MCReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per successful replicate × x.
    pub fn write_replicates_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "r,x,sigma2_hat,z,covered,flagged_fraction")?;
        for row in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                row.r, row.x, row.sigma2_hat, row.z, row.covered as u8, row.flagged_fraction
            )?;
        }
        Ok(())
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

struct PointTruth {
    sigma2: f64,
    curvature: Option<f64>,
    bias: f64,
}

fn point_truth(config: &ExperimentConfig, constants: &AsymptoticConstants, h: f64) -> Vec<PointTruth> {
    config
        .x_points
        .iter()
        .map(|&x| {
            let curvature = config.model.diffusion.sigma2_curvature(x);
            let bias = match (config.estimator, curvature) {
                (Estimator::LocalLinear, Some(c)) => constants.bias(c, h),
                _ => 0.0,
            };
            PointTruth {
                sigma2: config.model.diffusion.sigma2(x),
                curvature,
                bias,
            }
        })
        .collect()
}

/// Simulates and evaluates replicate `r`.
pub fn run_replicate(config: &ExperimentConfig, r: usize) -> Result<ReplicateOutcome> {
    let delta = config.delta();
    let h = config.bandwidth.resolve(delta);
    let threshold = threshold_value(&ThresholdSpec::new(config.eta)?, delta)?;
    let constants = AsymptoticConstants::new(&config.kernel)?;
    let v = variance_constant_for(config.estimator, &config.kernel)?;
    let truth = point_truth(config, &constants, h);
    let path = simulate_path_with(
        &config.model,
        config.n,
        config.t_end,
        derive_seed(config.master_seed, r as u64),
        SimOptions {
            refinement: config.refinement,
        },
    )?;

    let mut points = Vec::with_capacity(config.x_points.len());
    for (&x, truth) in config.x_points.iter().zip(&truth) {
        let est = match estimate(&path, x, h, &config.kernel, threshold, config.estimator) {
            Ok(e) if e.local_time_hat > 0.0 => e,
            Ok(_) | Err(Error::InsufficientLocalData { .. }) => {
                points.push(None);
                continue;
            }
            Err(e) => return Err(e),
        };
        let z = standardize(est.sigma2_hat, truth.sigma2, truth.bias, h, delta, est.local_time_hat, v)?;
        let curvature = match config.estimator {
            Estimator::LocalLinear => truth.curvature,
            _ => None,
        };
        let ci = confidence_interval(&est, delta, config.level, curvature, &config.kernel, v)?;
        points.push(Some(PointOutcome {
            x,
            sigma2_hat: est.sigma2_hat,
            z,
            covered: ci.ci_low <= truth.sigma2 && truth.sigma2 <= ci.ci_high,
            flagged_fraction: est.flagged_fraction,
            n_effective: est.n_effective,
        }));
    }

    let detection = path.jump_mask.as_ref().map(|mask| {
        let mut d = JumpDetection::default();
        for (&jumped, inc) in mask.iter().zip(path.increments()) {
            let excluded = inc * inc > threshold;
            if jumped {
                d.jump_intervals += 1;
                d.jump_intervals_excluded += excluded as usize;
            } else {
                d.clean_intervals += 1;
                d.clean_intervals_excluded += excluded as usize;
            }
        }
        d
    });

    Ok(ReplicateOutcome {
        replicate: r,
        points,
        detection,
    })
}

/// Builds the report from replicate outcomes given in any order.
pub fn aggregate(config: &ExperimentConfig, mut outcomes: Vec<ReplicateOutcome>) -> Result<MCReport> {
    outcomes.sort_by_key(|o| o.replicate);
    let delta = config.delta();
    let h = config.bandwidth.resolve(delta);
    let constants = AsymptoticConstants::new(&config.kernel)?;
    let v = variance_constant_for(config.estimator, &config.kernel)?;
    let truth = point_truth(config, &constants, h);
    let total = outcomes.len();

    let mut points = Vec::with_capacity(config.x_points.len());
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for (k, (&x, truth)) in config.x_points.iter().zip(&truth).enumerate() {
        let ok: Vec<&PointOutcome> = outcomes.iter().filter_map(|o| o.points[k].as_ref()).collect();
        let failures = total - ok.len();
        if failures as f64 > MAX_FAILURE_RATE * total as f64 {
            return Err(Error::TooManyFailures { x, failed: failures, total });
        }
        for o in &outcomes {
            if let Some(p) = &o.points[k] {
                rows.push(ReplicateRow {
                    r: o.replicate,
                    x,
                    sigma2_hat: p.sigma2_hat,
                    z: p.z,
                    covered: p.covered,
                    flagged_fraction: p.flagged_fraction,
                });
            }
        }
        let z_samples: Vec<f64> = ok.iter().map(|p| p.z).collect();
        let sigma2_samples: Vec<f64> = ok.iter().map(|p| p.sigma2_hat).collect();
        let errors: Vec<f64> = sigma2_samples.iter().map(|s| s - truth.sigma2).collect();
        let mean_n_effective = mean(&ok.iter().map(|p| p.n_effective as f64).collect::<Vec<_>>());
        if mean_n_effective < MIN_EFFECTIVE_WARNING {
            warnings.push(format!(
                "x = {x}: mean n_effective {mean_n_effective:.1} below {MIN_EFFECTIVE_WARNING}"
            ));
        }
        points.push(PointReport {
            x,
            estimator: config.estimator.label(),
            sigma2_true: truth.sigma2,
            curvature: truth.curvature,
            bias_term: truth.bias,
            variance_constant: v,
            ks_distance: ks_distance(&z_samples),
            coverage: ok.iter().filter(|p| p.covered).count() as f64 / ok.len().max(1) as f64,
            mean_estimate: mean(&sigma2_samples),
            mean_bias: mean(&errors),
            rmse: mean(&errors.iter().map(|e| e * e).collect::<Vec<_>>()).sqrt(),
            mean_flagged_fraction: mean(&ok.iter().map(|p| p.flagged_fraction).collect::<Vec<_>>()),
            mean_n_effective,
            failures,
            z_samples,
            sigma2_samples,
        });
    }

    let jump_detection = outcomes
        .iter()
        .filter_map(|o| o.detection.as_ref())
        .fold(None, |acc: Option<JumpDetection>, d| {
            let mut acc = acc.unwrap_or_default();
            acc.add(d);
            Some(acc)
        });

    let rate_conditions = check_rate_conditions(config.rate_params(), config.model.jumps.ia.is_some());
    for c in rate_conditions.failures() {
        warnings.push(format!("rate condition `{}` violated (slack {:+.4})", c.name, c.slack));
    }

    Ok(MCReport {
        config: config.echo(),
        rate_conditions,
        points,
        jump_detection,
        warnings,
        rows,
    })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<MCReport> {
    config.validate()?;
    let outcomes = (0..config.replications)
        .into_par_iter()
        .map(|r| run_replicate(config, r))
        .collect::<Result<Vec<_>>>()?;
    aggregate(config, outcomes)
}
