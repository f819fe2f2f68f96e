//! Command-line front end. Exit status: 0 success, 1 usage, 2 data,
//! 3 numerical failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path as FsPath, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::asymptotics::{
    check_rate_conditions, confidence_interval, optimal_bandwidth, plug_in_curvature, variance_constant_for,
    RateParams,
};
use crate::error::Error;
use crate::io::{
    jump_times_path, parse_entries, provenance_path, read_observations, write_jump_times, write_observations,
    BandwidthChoice, Mode, RunConfig,
};
use crate::kernel::KernelSpec;
use crate::mc::{run_experiment, Bandwidth, ExperimentConfig};
use crate::sim::{simulate_path_with, Path, SimOptions};
use crate::threshold::{estimate, local_time_hat, threshold_value, ThresholdSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "jumpvol", version, about = "Threshold local-polynomial diffusion estimation for jump-diffusions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a path and write `t,x` observations.
    Simulate(Overrides),
    /// Estimate σ²(x) with confidence intervals from an observation file.
    Estimate(Overrides),
    /// Run a Monte Carlo experiment.
    Mc(Overrides),
    /// MSE-optimal bandwidth.
    Bandwidth(Overrides),
    /// Check the rate conditions on (eta, phi, alpha).
    CheckConditions(Overrides),
}

/// Flags mirror the configuration keys and override `--config`.
#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct Overrides {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` pairs.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Infinite-activity jumps present (check-conditions).
    #[arg(long)]
    ia: bool,
    #[arg(long)]
    input: Option<String>,
    #[arg(long)]
    output: Option<String>,
    #[arg(long)]
    csv: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long = "T")]
    t_end: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    x0: Option<String>,
    #[arg(long)]
    drift: Option<String>,
    #[arg(long)]
    kappa: Option<String>,
    #[arg(long)]
    theta: Option<String>,
    #[arg(long)]
    diffusion: Option<String>,
    #[arg(long)]
    s: Option<String>,
    #[arg(long)]
    a: Option<String>,
    #[arg(long)]
    b: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long = "jump_mean")]
    jump_mean: Option<String>,
    #[arg(long = "jump_sd")]
    jump_sd: Option<String>,
    #[arg(long = "ia_kind")]
    ia_kind: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long = "ia_scale")]
    ia_scale: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    phi: Option<String>,
    #[arg(long)]
    h: Option<String>,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long = "kernel_file")]
    kernel_file: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    level: Option<String>,
    #[arg(long)]
    estimator: Option<String>,
    /// Comma-separated evaluation points.
    #[arg(long, allow_hyphen_values = true)]
    x: Option<String>,
    #[arg(long = "M")]
    replications: Option<String>,
    #[arg(long)]
    refinement: Option<String>,
    #[arg(long)]
    curvature: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long = "local_time")]
    local_time: Option<String>,
}

impl Overrides {
    fn into_entries(self, mode: &str) -> Result<BTreeMap<String, String>, Error> {
        let mut map = match &self.config {
            Some(p) => parse_entries(&std::fs::read_to_string(p)?)?,
            None => BTreeMap::new(),
        };
        map.insert("mode".into(), mode.into());
        let flags = [
            ("input", self.input),
            ("output", self.output),
            ("csv", self.csv),
            ("n", self.n),
            ("T", self.t_end),
            ("seed", self.seed),
            ("x0", self.x0),
            ("drift", self.drift),
            ("kappa", self.kappa),
            ("theta", self.theta),
            ("diffusion", self.diffusion),
            ("s", self.s),
            ("a", self.a),
            ("b", self.b),
            ("lambda", self.lambda),
            ("jump_mean", self.jump_mean),
            ("jump_sd", self.jump_sd),
            ("ia_kind", self.ia_kind),
            ("alpha", self.alpha),
            ("ia_scale", self.ia_scale),
            ("eta", self.eta),
            ("phi", self.phi),
            ("h", self.h),
            ("kernel", self.kernel),
            ("kernel_file", self.kernel_file),
            ("p", self.p),
            ("level", self.level),
            ("estimator", self.estimator),
            ("x", self.x),
            ("M", self.replications),
            ("refinement", self.refinement),
            ("curvature", self.curvature),
            ("delta", self.delta),
            ("local_time", self.local_time),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                map.insert(k.into(), v);
            }
        }
        if self.ia {
            map.insert("ia_present".into(), "true".into());
        }
        for kv in self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config {
                key: kv.clone(),
                reason: "expected KEY=VALUE".into(),
            })?;
            map.insert(k.trim().into(), v.trim().into());
        }
        Ok(map)
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::UnknownKernel { .. } | Error::InvalidParameter { .. } => EXIT_USAGE,
        Error::Data { .. } | Error::Io(_) | Error::Json(_) | Error::InvalidKernel(_) => EXIT_DATA,
        Error::Quadrature { .. }
        | Error::NonFiniteState { .. }
        | Error::IntensityBound { .. }
        | Error::InsufficientLocalData { .. }
        | Error::NoLocalOccupation { .. }
        | Error::FlatDiffusion
        | Error::TooManyFailures { .. } => EXIT_NUMERICAL,
    }
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the exit status.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let (mode, overrides) = match cli.command {
        Command::Simulate(o) => ("simulate", o),
        Command::Estimate(o) => ("estimate", o),
        Command::Mc(o) => ("mc", o),
        Command::Bandwidth(o) => ("bandwidth", o),
        Command::CheckConditions(o) => ("check", o),
    };
    let result = overrides
        .into_entries(mode)
        .and_then(RunConfig::from_entries)
        .and_then(|cfg| {
            for w in &cfg.warnings {
                eprintln!("warning: {w}");
            }
            run(&cfg)
        });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn run(cfg: &RunConfig) -> Result<(), Error> {
    match cfg.mode {
        Mode::Simulate => simulate(cfg),
        Mode::Estimate => estimate_cmd(cfg),
        Mode::Mc => mc(cfg),
        Mode::Bandwidth => bandwidth(cfg),
        Mode::Check => check(cfg),
    }
}

fn write_provenance(output: &FsPath, cfg: &RunConfig, extra: serde_json::Value) -> Result<(), Error> {
    let doc = json!({ "config": cfg.entries, "resolved": cfg, "result": extra });
    std::fs::write(provenance_path(output), serde_json::to_string_pretty(&doc)?)?;
    Ok(())
}

fn simulate(cfg: &RunConfig) -> Result<(), Error> {
    let out = cfg.output.as_deref().expect("validated");
    let path = simulate_path_with(&cfg.model, cfg.n, cfg.t_end, cfg.seed, SimOptions { refinement: cfg.refinement })?;
    write_observations(&path, out)?;
    let mut extra = json!({ "n": path.n, "delta": path.delta });
    if let Some(times) = &path.fa_jump_times {
        let jt = jump_times_path(out);
        write_jump_times(times, &jt)?;
        extra["jump_times"] = json!(jt);
        extra["fa_jumps"] = json!(times.len());
    }
    write_provenance(out, cfg, extra)?;
    println!("wrote {} observations to {}", path.n + 1, out.display());
    Ok(())
}

/// Resolves `h` for an observed path, returning `(h, details)`.
fn resolve_bandwidth(
    cfg: &RunConfig,
    path: &Path,
    x: f64,
    kernel: &KernelSpec,
    threshold: f64,
) -> Result<(f64, serde_json::Value), Error> {
    match cfg.h {
        BandwidthChoice::Fixed(h) => Ok((h, json!({ "h": h }))),
        BandwidthChoice::Power => {
            let phi = cfg.phi.expect("power bandwidth carries phi");
            let h = path.delta.powf(phi);
            Ok((h, json!({ "h": h, "phi": phi })))
        }
        BandwidthChoice::Auto => {
            // Pilot at the δ^{1/5} rate unless φ is given.
            let pilot = path.delta.powf(cfg.phi.unwrap_or(0.2));
            let lhat = local_time_hat(path, x, pilot, kernel)?;
            let curvature = plug_in_curvature(path, x, pilot, kernel, threshold)?;
            let h = optimal_bandwidth(path.delta, lhat, curvature, kernel)?;
            Ok((
                h,
                json!({ "h": h, "auto": true, "pilot_h": pilot, "pilot_local_time": lhat, "plug_in_curvature": curvature }),
            ))
        }
    }
}

fn estimate_cmd(cfg: &RunConfig) -> Result<(), Error> {
    let input = cfg.input.as_deref().expect("validated");
    let path = read_observations(input)?;
    let kernel = cfg.load_kernel()?;
    let threshold = threshold_value(&ThresholdSpec::new(cfg.eta)?, path.delta)?;
    let v = variance_constant_for(cfg.estimator, &kernel)?;

    let mut text = String::from("x,sigma2_hat,L_hat,se,ci_low,ci_high,flagged_fraction\n");
    let mut details = Vec::new();
    let mut ok = 0usize;
    for &x in &cfg.x_points {
        let row = resolve_bandwidth(cfg, &path, x, &kernel, threshold).and_then(|(h, info)| {
            let est = estimate(&path, x, h, &kernel, threshold, cfg.estimator)?;
            let ci = confidence_interval(&est, path.delta, cfg.level, cfg.curvature, &kernel, v)?;
            Ok((ci, info))
        });
        match row {
            Ok((ci, info)) => {
                ok += 1;
                let e = &ci.estimate;
                text.push_str(&format!(
                    "{:?},{:?},{:?},{:?},{:?},{:?},{:?}\n",
                    x, e.sigma2_hat, e.local_time_hat, ci.std_error, ci.ci_low, ci.ci_high, e.flagged_fraction
                ));
                details.push(json!({ "x": x, "bandwidth": info, "n_effective": e.n_effective }));
            }
            Err(err) if exit_code(&err) == EXIT_NUMERICAL => {
                eprintln!("warning: x = {x}: {err}");
                text.push_str(&format!("{x:?},NaN,NaN,NaN,NaN,NaN,NaN\n"));
                details.push(json!({ "x": x, "error": err.to_string() }));
            }
            Err(err) => return Err(err),
        }
    }
    let extra = json!({ "threshold": threshold, "delta": path.delta, "n": path.n, "points": details });
    match &cfg.output {
        Some(out) => {
            std::fs::write(out, &text)?;
            write_provenance(out, cfg, extra)?;
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            eprintln!("# provenance: {}", json!({ "config": cfg.entries, "result": extra }));
        }
    }
    if ok == 0 {
        return Err(Error::insufficient(cfg.x_points[0], "no evaluation point could be estimated"));
    }
    Ok(())
}

fn mc(cfg: &RunConfig) -> Result<(), Error> {
    let bandwidth = match cfg.h {
        BandwidthChoice::Fixed(h) => Bandwidth::Fixed(h),
        BandwidthChoice::Power => Bandwidth::Power {
            phi: cfg.phi.expect("power bandwidth carries phi"),
        },
        BandwidthChoice::Auto => {
            return Err(Error::Config {
                key: "h".into(),
                reason: "mc needs a fixed h or phi".into(),
            })
        }
    };
    let exp = ExperimentConfig {
        model: cfg.model.clone(),
        n: cfg.n,
        t_end: cfg.t_end,
        replications: cfg.replications,
        x_points: cfg.x_points.clone(),
        eta: cfg.eta,
        bandwidth,
        kernel: cfg.load_kernel()?,
        estimator: cfg.estimator,
        master_seed: cfg.seed,
        level: cfg.level,
        refinement: cfg.refinement,
    };
    let report = run_experiment(&exp)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let json_out = cfg.output.clone().unwrap_or_else(|| PathBuf::from("mc_report.json"));
    let csv_out = cfg.csv.clone().unwrap_or_else(|| json_out.with_extension("csv"));
    let mut doc = serde_json::to_value(&report)?;
    doc["run_config"] = json!(cfg.entries);
    std::fs::write(&json_out, serde_json::to_string_pretty(&doc)?)?;
    report.write_replicates_csv(std::io::BufWriter::new(std::fs::File::create(&csv_out)?))?;
    write_provenance(&csv_out, cfg, json!({ "report": json_out }))?;
    for p in &report.points {
        println!(
            "x={:<8} ks={:.4} coverage={:.3} mean_bias={:+.5} rmse={:.5} failures={}",
            p.x, p.ks_distance, p.coverage, p.mean_bias, p.rmse, p.failures
        );
    }
    println!("wrote {} and {}", json_out.display(), csv_out.display());
    Ok(())
}

fn bandwidth(cfg: &RunConfig) -> Result<(), Error> {
    let kernel = cfg.load_kernel()?;
    let (h, details) = match &cfg.input {
        Some(input) => {
            let path = read_observations(input)?;
            let x = *cfg.x_points.first().ok_or_else(|| Error::Config {
                key: "x".into(),
                reason: "required with input".into(),
            })?;
            let threshold = threshold_value(&ThresholdSpec::new(cfg.eta)?, path.delta)?;
            let mut auto = cfg.clone();
            auto.h = BandwidthChoice::Auto;
            let (h, mut info) = resolve_bandwidth(&auto, &path, x, &kernel, threshold)?;
            if let Some(c) = cfg.curvature {
                let pilot = info["pilot_h"].as_f64().unwrap_or(path.delta.powf(0.2));
                let lhat = local_time_hat(&path, x, pilot, &kernel)?;
                let h = optimal_bandwidth(path.delta, lhat, c, &kernel)?;
                info = json!({ "h": h, "pilot_h": pilot, "pilot_local_time": lhat, "curvature": c });
                (h, info)
            } else {
                (h, info)
            }
        }
        None => {
            let (d, l, c) = (
                cfg.delta.expect("validated"),
                cfg.local_time.expect("validated"),
                cfg.curvature.expect("validated"),
            );
            let h = optimal_bandwidth(d, l, c, &kernel)?;
            (h, json!({ "h": h, "delta": d, "local_time": l, "curvature": c }))
        }
    };
    println!("h_opt = {h:?}");
    println!("{}", json!({ "config": cfg.entries, "result": details }));
    Ok(())
}

fn check(cfg: &RunConfig) -> Result<(), Error> {
    let report = check_rate_conditions(
        RateParams {
            eta: cfg.eta,
            phi: cfg.phi.expect("validated"),
            alpha: cfg.alpha,
        },
        cfg.ia_present,
    );
    println!("{report}");
    Ok(())
}
