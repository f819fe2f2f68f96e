//! Observation files, flat `key = value` run configurations and the model
//! registry used by the command line.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path as FsPath, PathBuf};

use serde::Serialize;

use crate::asymptotics::{check_rate_conditions, RateParams};
use crate::error::{Error, Result};
use crate::kernel::{builtin_kernel, KernelSpec};
use crate::model::{Diffusion, Drift, FaSpec, IaSpec, JumpSize, JumpSpec, ModelSpec, VgParams};
use crate::sim::Path;
use crate::threshold::Estimator;

/// Relative tolerance on the spacing of observation times.
pub const SPACING_TOL: f64 = 1e-9;

/// Reads a `t,x` observation file with at least three rows.
pub fn read_observations(path: &FsPath) -> Result<Path> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == "t,x" => {}
        Some(Err(e)) => return Err(e.into()),
        _ => {
            return Err(Error::Data {
                line: 1,
                reason: "expected header `t,x`".into(),
            })
        }
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let line_no = idx + 2;
        if line.trim().is_empty() {
            continue;
        }
        let row = times.len() + 1;
        let (t, x) = line.split_once(',').ok_or_else(|| Error::Data {
            line: line_no,
            reason: format!("row {row}: expected `t,x`"),
        })?;
        let parse = |s: &str, what: &str| {
            s.trim().parse::<f64>().map_err(|e| Error::Data {
                line: line_no,
                reason: format!("row {row}: cannot parse {what} `{}`: {e}", s.trim()),
            })
        };
        let t = parse(t, "t")?;
        let x = parse(x, "x")?;
        if !t.is_finite() || !x.is_finite() {
            return Err(Error::Data {
                line: line_no,
                reason: format!("row {row}: non-finite value"),
            });
        }
        if let Some(&prev) = times.last() {
            if !(t > prev) {
                return Err(Error::Data {
                    line: line_no,
                    reason: format!("row {row}: t = {t} is not increasing"),
                });
            }
            if times.len() >= 2 {
                let step0 = times[1] - times[0];
                if ((t - prev) - step0).abs() > SPACING_TOL * step0 {
                    return Err(Error::Data {
                        line: line_no,
                        reason: format!("row {row}: irregular spacing {} (expected {step0})", t - prev),
                    });
                }
            }
        }
        times.push(t);
        values.push(x);
    }
    if times.len() < 3 {
        return Err(Error::Data {
            line: times.len() + 1,
            reason: format!("need at least 3 observations, found {}", times.len()),
        });
    }
    let t_end = times[times.len() - 1] - times[0];
    Path::from_values(values, t_end)
}

/// Writes a `t,x` file; values use round-trip-exact formatting.
pub fn write_observations(path: &Path, out: &FsPath) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(out)?);
    writeln!(w, "t,x")?;
    for (i, x) in path.values.iter().enumerate() {
        writeln!(w, "{:?},{:?}", path.time(i), x)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_jump_times(times: &[f64], out: &FsPath) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(out)?);
    writeln!(w, "jump_times")?;
    for t in times {
        writeln!(w, "{t:?}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jump_times(path: &FsPath) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("jump_times") {
        return Err(Error::Data {
            line: 1,
            reason: "expected header `jump_times`".into(),
        });
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse().map_err(|e| Error::Data {
                line: i + 2,
                reason: format!("cannot parse `{l}`: {e}"),
            })
        })
        .collect()
}

/// Companion file for a jump-time list next to an observation file.
pub fn jump_times_path(observations: &FsPath) -> PathBuf {
    sibling(observations, "jump_times.csv")
}

/// Companion provenance file for an output.
pub fn provenance_path(output: &FsPath) -> PathBuf {
    sibling(output, "provenance.json")
}

fn sibling(path: &FsPath, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("output");
    path.with_file_name(format!("{stem}.{suffix}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Simulate,
    Estimate,
    Mc,
    Bandwidth,
    Check,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "simulate" => Mode::Simulate,
            "estimate" => Mode::Estimate,
            "mc" => Mode::Mc,
            "bandwidth" => Mode::Bandwidth,
            "check" | "check-conditions" | "check_conditions" => Mode::Check,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthChoice {
    Fixed(f64),
    /// `h = δ^φ`.
    Power,
    /// MSE-optimal with plug-in curvature.
    Auto,
}

/// Keys accepted in a run configuration.
pub const CONFIG_KEYS: &[&str] = &[
    "mode", "input", "output", "csv", "n", "T", "seed", "x0", "drift", "kappa", "theta", "diffusion", "s",
    "a", "b", "lambda", "jump_mean", "jump_sd", "ia_kind", "alpha", "ia_scale", "vg_nu", "vg_theta",
    "vg_sigma", "eta", "phi", "h", "kernel", "kernel_file", "kernel_normalize", "p", "level", "estimator",
    "x", "x_min", "x_max", "x_count", "M", "refinement", "curvature", "delta", "local_time", "ia_present",
];

/// Fully resolved run configuration.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub mode: Mode,
    /// Every key that was set, after validation, for provenance.
    pub entries: BTreeMap<String, String>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub n: usize,
    pub t_end: f64,
    pub seed: u64,
    pub eta: f64,
    pub phi: Option<f64>,
    pub h: BandwidthChoice,
    pub kernel: String,
    pub kernel_file: Option<PathBuf>,
    pub kernel_normalize: bool,
    pub p: usize,
    pub level: f64,
    pub estimator: Estimator,
    pub x_points: Vec<f64>,
    pub replications: usize,
    pub refinement: usize,
    pub alpha: f64,
    pub ia_present: bool,
    pub curvature: Option<f64>,
    pub delta: Option<f64>,
    pub local_time: Option<f64>,
    #[serde(skip)]
    pub model: ModelSpec,
    pub warnings: Vec<String>,
}

/// Splits `key = value` lines; `#` starts a comment.
pub fn parse_entries(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
            key: line.to_owned(),
            reason: format!("line {}: expected `key = value`", idx + 1),
        })?;
        let (k, v) = (k.trim().to_owned(), v.trim().to_owned());
        if map.insert(k.clone(), v).is_some() {
            return Err(Error::Config {
                key: k,
                reason: format!("line {}: duplicate key", idx + 1),
            });
        }
    }
    Ok(map)
}

pub fn parse_config(path: &FsPath) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    RunConfig::from_entries(parse_entries(&text)?)
}

struct Entries<'a>(&'a BTreeMap<String, String>);

impl Entries<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>().map_err(|e| Error::Config {
                    key: key.to_owned(),
                    reason: format!("cannot parse `{v}`: {e}"),
                })
            })
            .transpose()
    }

    fn req<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.num(key)?.ok_or_else(|| missing(key))
    }

    fn bool(&self, key: &str) -> Result<Option<bool>> {
        self.raw(key)
            .map(|v| match v {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(range(key, format!("expected a boolean, got `{v}`"))),
            })
            .transpose()
    }
}

fn missing(key: &str) -> Error {
    Error::Config {
        key: key.to_owned(),
        reason: "required key is missing".into(),
    }
}

fn range(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_owned(),
        reason: reason.into(),
    }
}

fn check_open_unit(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(range(key, format!("must lie in (0, 1), got {v}")))
    }
}

fn check_positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(range(key, format!("must be positive, got {v}")))
    }
}

fn build_model(e: &Entries<'_>) -> Result<ModelSpec> {
    let drift = match e.raw("drift").unwrap_or("zero") {
        "zero" => Drift::Zero,
        "linear_mean_revert" => Drift::LinearMeanRevert {
            kappa: e.req("kappa")?,
            theta: e.num("theta")?.unwrap_or(0.0),
        },
        other => return Err(range("drift", format!("unknown drift `{other}` (zero, linear_mean_revert)"))),
    };
    let diffusion = match e.raw("diffusion").unwrap_or("constant") {
        "constant" => {
            let s: f64 = e.num("s")?.unwrap_or(1.0);
            Diffusion::Constant { s: check_positive("s", s)? }
        }
        "sine_bump" => {
            let a: f64 = e.req("a")?;
            let b: f64 = e.req("b")?;
            Diffusion::sine_bump(a, b).map_err(|err| range("a", err.to_string()))?
        }
        other => return Err(range("diffusion", format!("unknown diffusion `{other}` (constant, sine_bump)"))),
    };
    let fa = match e.num::<f64>("lambda")? {
        Some(l) if l < 0.0 => return Err(range("lambda", "must be non-negative")),
        Some(l) if l > 0.0 => {
            let sd: f64 = e.num("jump_sd")?.unwrap_or(1.0);
            if sd < 0.0 {
                return Err(range("jump_sd", "must be non-negative"));
            }
            Some(FaSpec::constant(
                l,
                JumpSize::Normal {
                    mean: e.num("jump_mean")?.unwrap_or(0.0),
                    sd,
                },
            ))
        }
        _ => None,
    };
    let ia = match e.raw("ia_kind").unwrap_or("none") {
        "none" => None,
        "stable" | "symmetric_alpha_stable" => {
            let alpha: f64 = e.req("alpha")?;
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(range("alpha", format!("stable index must lie in (0, 1), got {alpha}")));
            }
            Some(IaSpec::stable(alpha, e.num("ia_scale")?.unwrap_or(1.0)))
        }
        "variance_gamma" => Some(IaSpec::variance_gamma(
            VgParams {
                nu: e.req("vg_nu")?,
                theta: e.num("vg_theta")?.unwrap_or(0.0),
                sigma: e.req("vg_sigma")?,
            },
            e.num("ia_scale")?.unwrap_or(1.0),
        )),
        other => return Err(range("ia_kind", format!("unknown kind `{other}` (none, stable, variance_gamma)"))),
    };
    if let Some(ia) = &ia {
        ia.validate().map_err(|err| range("ia_kind", err.to_string()))?;
    }
    Ok(ModelSpec {
        drift,
        diffusion,
        jumps: JumpSpec { fa, ia },
        x0: e.num("x0")?.unwrap_or(0.0),
    })
}

fn x_points(e: &Entries<'_>) -> Result<Vec<f64>> {
    if let Some(list) = e.raw("x") {
        return list
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|err| range("x", format!("cannot parse `{}`: {err}", s.trim())))
            })
            .collect();
    }
    match (e.num::<f64>("x_min")?, e.num::<f64>("x_max")?, e.num::<usize>("x_count")?) {
        (Some(lo), Some(hi), Some(count)) => {
            if count == 0 || hi < lo || (count == 1 && hi != lo) {
                return Err(range("x_count", "grid needs count >= 1 and x_min <= x_max"));
            }
            if count == 1 {
                return Ok(vec![lo]);
            }
            Ok((0..count)
                .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
                .collect())
        }
        (None, None, None) => Ok(Vec::new()),
        _ => Err(range("x_count", "grid needs x_min, x_max and x_count together")),
    }
}

impl RunConfig {
    pub fn from_entries(map: BTreeMap<String, String>) -> Result<Self> {
        if let Some(unknown) = map.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
            return Err(range(unknown, "unknown key"));
        }
        let e = Entries(&map);
        let mode_raw = e.raw("mode").ok_or_else(|| missing("mode"))?;
        let mode = Mode::parse(mode_raw).ok_or_else(|| range("mode", format!("unknown mode `{mode_raw}`")))?;

        let eta = match e.num::<f64>("eta")? {
            Some(v) => check_open_unit("eta", v)?,
            None if matches!(mode, Mode::Estimate | Mode::Mc | Mode::Check) => return Err(missing("eta")),
            None => 0.5,
        };
        let phi = e.num::<f64>("phi")?;
        if let Some(v) = phi {
            check_positive("phi", v)?;
        }
        let h = match e.raw("h") {
            Some("auto") => BandwidthChoice::Auto,
            Some(_) => BandwidthChoice::Fixed(check_positive("h", e.req("h")?)?),
            None if phi.is_some() => BandwidthChoice::Power,
            None if matches!(mode, Mode::Estimate | Mode::Mc) => return Err(missing("h")),
            None => BandwidthChoice::Auto,
        };
        let level = check_open_unit("level", e.num("level")?.unwrap_or(0.95))?;
        let p: usize = e.num("p")?.unwrap_or(1);
        if p > 8 {
            return Err(range("p", format!("order {p} exceeds 8")));
        }
        let estimator = match e.raw("estimator") {
            Some("local_poly") => Estimator::LocalPoly(p),
            Some(s) => Estimator::parse(s).map_err(|err| range("estimator", err.to_string()))?,
            None if p == 1 => Estimator::LocalLinear,
            None => Estimator::LocalPoly(p),
        };
        let kernel = e.raw("kernel").unwrap_or("one_sided_epanechnikov").to_owned();
        let kernel_file = e.raw("kernel_file").map(PathBuf::from);
        if kernel_file.is_none() {
            builtin_kernel(&kernel).map_err(|err| range("kernel", err.to_string()))?;
        }
        let alpha: f64 = e.num("alpha")?.unwrap_or(0.0);
        if !(0.0..1.0).contains(&alpha) && mode != Mode::Check {
            return Err(range("alpha", format!("must lie in [0, 1), got {alpha}")));
        }

        let needs_sim = matches!(mode, Mode::Simulate | Mode::Mc);
        let n: usize = if needs_sim { e.req("n")? } else { e.num("n")?.unwrap_or(0) };
        if needs_sim && n < 2 {
            return Err(range("n", format!("need n >= 2, got {n}")));
        }
        let t_end: f64 = if needs_sim {
            check_positive("T", e.req("T")?)?
        } else {
            e.num("T")?.unwrap_or(1.0)
        };
        let replications: usize = if mode == Mode::Mc { e.req("M")? } else { e.num("M")?.unwrap_or(1) };
        if replications == 0 {
            return Err(range("M", "need at least one replicate"));
        }
        let refinement: usize = e.num("refinement")?.unwrap_or(crate::sim::DEFAULT_REFINEMENT);
        if refinement == 0 {
            return Err(range("refinement", "must be >= 1"));
        }

        let x_points = x_points(&e)?;
        if matches!(mode, Mode::Estimate | Mode::Mc) && x_points.is_empty() {
            return Err(missing("x"));
        }
        let input = e.raw("input").map(PathBuf::from);
        if mode == Mode::Estimate && input.is_none() {
            return Err(missing("input"));
        }
        let output = e.raw("output").map(PathBuf::from);
        if mode == Mode::Simulate && output.is_none() {
            return Err(missing("output"));
        }

        let curvature = e.num::<f64>("curvature")?;
        let delta = e.num::<f64>("delta")?;
        if let Some(d) = delta {
            check_open_unit("delta", d)?;
        }
        let local_time = e.num::<f64>("local_time")?;
        if let Some(l) = local_time {
            check_positive("local_time", l)?;
        }
        if mode == Mode::Bandwidth && input.is_none() && (delta.is_none() || local_time.is_none() || curvature.is_none()) {
            return Err(missing(if delta.is_none() {
                "delta"
            } else if local_time.is_none() {
                "local_time"
            } else {
                "curvature"
            }));
        }
        if mode == Mode::Check && phi.is_none() {
            return Err(missing("phi"));
        }

        let model = build_model(&e)?;
        let ia_present = e.bool("ia_present")?.unwrap_or(model.jumps.ia.is_some());
        let alpha = if model.jumps.ia.is_some() && e.raw("alpha").is_none() {
            model.jumps.ia.map_or(0.0, |ia| ia.activity_index())
        } else {
            alpha
        };

        let mut cfg = RunConfig {
            mode,
            entries: map.clone(),
            input,
            output,
            csv: e.raw("csv").map(PathBuf::from),
            n,
            t_end,
            seed: e.num("seed")?.unwrap_or(0),
            eta,
            phi,
            h,
            kernel,
            kernel_file,
            kernel_normalize: e.bool("kernel_normalize")?.unwrap_or(false),
            p,
            level,
            estimator,
            x_points,
            replications,
            refinement,
            alpha,
            ia_present,
            curvature,
            delta,
            local_time,
            model,
            warnings: Vec::new(),
        };
        cfg.warnings = cfg.rate_warnings();
        Ok(cfg)
    }

    fn rate_warnings(&self) -> Vec<String> {
        if !matches!(self.mode, Mode::Estimate | Mode::Mc) {
            return Vec::new();
        }
        let phi = match (self.phi, self.h, self.mode) {
            (Some(p), _, _) => p,
            (None, BandwidthChoice::Fixed(h), Mode::Mc) => h.ln() / (self.t_end / self.n as f64).ln(),
            _ => return Vec::new(),
        };
        check_rate_conditions(
            RateParams {
                eta: self.eta,
                phi,
                alpha: self.alpha,
            },
            self.ia_present,
        )
        .failures()
        .map(|c| format!("rate condition `{}` violated (slack {:+.4})", c.name, c.slack))
        .collect()
    }

    pub fn load_kernel(&self) -> Result<KernelSpec> {
        match &self.kernel_file {
            Some(p) => KernelSpec::from_csv(p, self.kernel_normalize),
            None => builtin_kernel(&self.kernel),
        }
    }

    /// `key = value` lines that reproduce this configuration.
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entries(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn reads_three_row_file() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("obs.csv");
        std::fs::write(&f, "t,x\n0,1\n0.5,1\n1.0,1\n").unwrap();
        let p = read_observations(&f).unwrap();
        assert_eq!(p.n, 2);
        assert_eq!(p.t_end, 1.0);
        assert_eq!(p.delta, 0.5);
        assert_eq!(p.values, vec![1.0, 1.0, 1.0]);
        assert!(p.jump_mask.is_none());
    }

    #[test]
    fn irregular_spacing_names_row() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("obs.csv");
        std::fs::write(&f, "t,x\n0,1\n0.5,1\n1.2,1\n").unwrap();
        let err = read_observations(&f).unwrap_err().to_string();
        assert!(err.contains("row 3"), "{err}");
    }

    #[test]
    fn malformed_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("obs.csv");
        for (body, needle) in [
            ("time,x\n0,1\n", "header"),
            ("t,x\n0,1\n1,2\n", "at least 3"),
            ("t,x\n0,1\n1,oops\n2,3\n", "line 3"),
            ("t,x\n0,1\n1,1\n0.5,1\n", "not increasing"),
        ] {
            std::fs::write(&f, body).unwrap();
            let err = read_observations(&f).unwrap_err().to_string();
            assert!(err.contains(needle), "{body:?}: {err}");
        }
    }

    #[test]
    fn jump_times_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("j.csv");
        let times = vec![0.1, 0.123_456_789_012_345_67, 0.9];
        write_jump_times(&times, &f).unwrap();
        assert_eq!(read_jump_times(&f).unwrap(), times);
        assert_eq!(
            jump_times_path(FsPath::new("/tmp/run/path.csv")),
            PathBuf::from("/tmp/run/path.jump_times.csv")
        );
    }

    #[test]
    fn parses_minimal_estimate_config() {
        let text = "# estimate at two points\nmode = estimate\ninput = data.csv\nx = 0.0, 0.5\nh = auto\neta = 0.5  # threshold\n";
        let cfg = RunConfig::from_entries(parse_entries(text).unwrap()).unwrap();
        assert_eq!(cfg.mode, Mode::Estimate);
        assert_eq!(cfg.h, BandwidthChoice::Auto);
        assert_eq!(cfg.x_points, vec![0.0, 0.5]);
        assert_eq!(cfg.estimator, Estimator::LocalLinear);
        assert!(cfg.to_config_text().contains("h = auto"));
    }

    #[test]
    fn eta_out_of_range() {
        let err = RunConfig::from_entries(entries(&[
            ("mode", "estimate"),
            ("input", "a.csv"),
            ("x", "0"),
            ("h", "0.1"),
            ("eta", "1.5"),
        ]))
        .unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "eta"), "{err}");
    }

    #[test]
    fn unknown_and_missing_keys() {
        let err = RunConfig::from_entries(entries(&[("mode", "check"), ("bogus", "1")])).unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "bogus"));
        let err = RunConfig::from_entries(entries(&[("mode", "simulate"), ("n", "10")])).unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "T"));
        let err = parse_entries("mode = mc\nmode = estimate\n").unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn model_registry() {
        let cfg = RunConfig::from_entries(entries(&[
            ("mode", "simulate"),
            ("n", "100"),
            ("T", "1"),
            ("output", "p.csv"),
            ("drift", "linear_mean_revert"),
            ("kappa", "2"),
            ("theta", "1"),
            ("diffusion", "sine_bump"),
            ("a", "2"),
            ("b", "1"),
            ("lambda", "5"),
            ("ia_kind", "stable"),
            ("alpha", "0.5"),
            ("ia_scale", "0.5"),
        ]))
        .unwrap();
        assert_eq!(cfg.model.drift.eval(0.0), 2.0);
        assert_eq!(cfg.model.diffusion.sigma2(0.0), 2.0);
        assert!(cfg.model.jumps.fa.is_some());
        assert_eq!(cfg.model.jumps.ia, Some(IaSpec::stable(0.5, 0.5)));
        assert!(cfg.ia_present);

        let err = RunConfig::from_entries(entries(&[
            ("mode", "simulate"),
            ("n", "100"),
            ("T", "1"),
            ("output", "p.csv"),
            ("ia_kind", "stable"),
            ("alpha", "1.2"),
        ]))
        .unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "alpha"));
    }

    #[test]
    fn x_grid() {
        let cfg = RunConfig::from_entries(entries(&[
            ("mode", "mc"),
            ("n", "100"),
            ("T", "1"),
            ("M", "2"),
            ("h", "0.1"),
            ("eta", "0.5"),
            ("x_min", "-1"),
            ("x_max", "1"),
            ("x_count", "5"),
        ]))
        .unwrap();
        assert_eq!(cfg.x_points, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn rate_warnings_are_surfaced() {
        let cfg = RunConfig::from_entries(entries(&[
            ("mode", "mc"),
            ("n", "100"),
            ("T", "1"),
            ("M", "2"),
            ("phi", "0.6"),
            ("eta", "0.5"),
            ("x", "0"),
        ]))
        .unwrap();
        assert_eq!(cfg.h, BandwidthChoice::Power);
        assert!(cfg.warnings.iter().any(|w| w.contains("2*phi < 1")));
    }
}
