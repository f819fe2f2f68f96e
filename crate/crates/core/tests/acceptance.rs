//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use common::{brute_force_wls, narrow_band_occupation, random_instance, rel, Instance};
use jumpvol::{
    bias_correction, builtin_kernel, check_rate_conditions, classify_increments, derive_seed, fit_local_polynomial,
    kernel_moment, kernel_moment_quadrature, local_linear_sigma2, local_poly_fit, local_time_hat, optimal_bandwidth,
    run_experiment, simulate_path, threshold_value, variance_constant, Bandwidth, Diffusion, Drift, Estimator,
    ExperimentConfig, FaSpec, IaSpec, JumpSize, JumpSpec, LocalSample, MCReport, ModelSpec, RateParams,
    ThresholdSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn epa() -> jumpvol::KernelSpec {
    builtin_kernel("one_sided_epanechnikov").unwrap()
}

fn kernel_moment_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for name in ["one_sided_epanechnikov", "one_sided_uniform"] {
        let k = builtin_kernel(name).unwrap();
        for i in 1..=2 {
            for j in 0..=5 {
                let closed = kernel_moment(&k, i, j).unwrap();
                let quad = kernel_moment_quadrature(&k, i, j).unwrap();
                worst = worst.max((closed - quad).abs());
            }
        }
    }
    let v = variance_constant(&builtin_kernel("one_sided_uniform").unwrap()).unwrap();
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-10 && (v - 4.0).abs() <= 1e-10 && elapsed < Duration::from_secs(1),
        format!("max |closed - quadrature| = {worst:.2e}, uniform V = {v:?}, {elapsed:.2?}"),
    )
}

fn estimator_equivalence() -> Outcome {
    let start = Instant::now();
    let kernel = epa();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_ll, mut worst_oracle, mut evaluated) = (0.0f64, 0.0f64, 0);
    for _ in 0..100 {
        let Instance { path, x, h, threshold } = random_instance(&mut rng, 50..=500);
        let ll = local_linear_sigma2(&path, x, h, &kernel, threshold).unwrap();
        let p1 = local_poly_fit(&path, x, h, &kernel, threshold, 1).unwrap();
        worst_ll = worst_ll.max(rel(ll.sigma2_hat, p1[0]));

        let y: Vec<f64> = path.increments().map(|d| d * d / path.delta).collect();
        let keep = classify_increments(&path, threshold);
        for p in 1..=2 {
            let fit = local_poly_fit(&path, x, h, &kernel, threshold, p).unwrap();
            let oracle = brute_force_wls(path.left_points(), &y, &keep, x, h, &kernel, p);
            let scale = oracle
                .iter()
                .enumerate()
                .map(|(j, b)| (b * h.powi(j as i32)).abs())
                .fold(0.0, f64::max);
            let normwise = fit
                .iter()
                .zip(&oracle)
                .enumerate()
                .map(|(j, (a, b))| (a - b).abs() * h.powi(j as i32))
                .fold(0.0, f64::max)
                / scale;
            worst_oracle = worst_oracle.max(rel(fit[0], oracle[0])).max(normwise);
        }
        evaluated += 1;
    }
    let elapsed = start.elapsed();
    outcome(
        worst_ll <= 1e-10 && worst_oracle <= 1e-10 && elapsed < Duration::from_secs(10),
        format!(
            "{evaluated} instances, local linear vs p=1 {worst_ll:.2e}, vs brute-force WLS {worst_oracle:.2e}, {elapsed:.2?}"
        ),
    )
}

fn polynomial_reproduction() -> Outcome {
    let kernel = epa();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for p in 0..=3usize {
        for _ in 0..20 {
            let coef: Vec<f64> = (0..=p).map(|_| rng.random_range(-2.0..2.0)).collect();
            let x = rng.random_range(-1.0..1.0);
            let h = rng.random_range(0.3..1.0);
            let points: Vec<f64> = (0..400).map(|_| x + rng.random_range(-0.5..1.2) * h).collect();
            let ys: Vec<f64> = points
                .iter()
                .map(|&xi| coef.iter().enumerate().map(|(j, c)| c * (xi - x).powi(j as i32)).sum())
                .collect();
            let sample = LocalSample {
                points: &points,
                responses: &ys,
                keep: None,
            };
            let beta = fit_local_polynomial(sample, x, h, &kernel, p).unwrap();
            for (b, c) in beta.iter().zip(&coef) {
                worst = worst.max((b - c).abs());
            }
        }
    }
    outcome(worst <= 1e-8, format!("max coefficient error {worst:.2e} over p = 0..3"))
}

fn jump_disentangling() -> Outcome {
    let start = Instant::now();
    let model = ModelSpec::brownian(1.0, 0.0).with_jumps(JumpSpec {
        fa: Some(FaSpec::constant(5.0, JumpSize::Normal { mean: 0.0, sd: 1.0 })),
        ia: None,
    });
    let (n, eta) = (10_000, 0.9);
    let counts: Vec<[usize; 4]> = (0..200u64)
        .into_par_iter()
        .map(|r| {
            let path = simulate_path(&model, n, 1.0, derive_seed(4, r)).unwrap();
            let thr = threshold_value(&ThresholdSpec::new(eta).unwrap(), path.delta).unwrap();
            let keep = classify_increments(&path, thr);
            let mut c = [0usize; 4];
            for (&jumped, &kept) in path.jump_mask.as_ref().unwrap().iter().zip(&keep) {
                let slot = if jumped { 0 } else { 2 };
                c[slot] += 1;
                c[slot + 1] += !kept as usize;
            }
            c
        })
        .collect();
    let total = counts.iter().fold([0usize; 4], |mut acc, c| {
        acc.iter_mut().zip(c).for_each(|(a, b)| *a += b);
        acc
    });
    let detected = total[1] as f64 / total[0] as f64;
    let false_excl = total[3] as f64 / total[2] as f64;
    let elapsed = start.elapsed();
    outcome(
        detected >= 0.98 && false_excl <= 0.005 && elapsed < Duration::from_secs(120),
        format!(
            "jump intervals excluded {:.4} ({}/{}), jump-free excluded {:.4} ({}/{}), {elapsed:.2?}",
            detected, total[1], total[0], false_excl, total[3], total[2]
        ),
    )
}

fn ou_config() -> ExperimentConfig {
    ExperimentConfig {
        model: ModelSpec {
            drift: Drift::LinearMeanRevert { kappa: 1.0, theta: 0.0 },
            diffusion: Diffusion::Constant { s: 1.0 },
            jumps: JumpSpec::default(),
            x0: 0.0,
        },
        n: 5000,
        t_end: 1.0,
        replications: 500,
        x_points: vec![0.0],
        eta: 0.5,
        bandwidth: Bandwidth::Fixed(0.15),
        kernel: epa(),
        estimator: Estimator::LocalLinear,
        master_seed: 5,
        level: 0.95,
        refinement: 10,
    }
}

fn summary(report: &MCReport) -> String {
    let p = &report.points[0];
    format!(
        "KS {:.4}, mean(Z) {:+.4}, var(Z) {:.4}, coverage {:.3}, mean estimate {:.4}, failures {}",
        p.ks_distance,
        p.z_mean(),
        p.z_variance(),
        p.coverage,
        p.mean_estimate,
        p.failures
    )
}

fn clt_pivot(report: &MCReport, elapsed: Duration) -> Outcome {
    let p = &report.points[0];
    outcome(
        p.ks_distance <= 0.10
            && (-0.2..=0.2).contains(&p.z_mean())
            && (0.7..=1.3).contains(&p.z_variance())
            && elapsed < Duration::from_secs(300),
        format!("{}, {elapsed:.2?}", summary(report)),
    )
}

fn coverage(report: &MCReport) -> Outcome {
    let c = report.points[0].coverage;
    outcome((0.90..=0.98).contains(&c), format!("coverage {c:.3} over {} replicates", report.points[0].z_samples.len()))
}

fn fa_robustness() -> Outcome {
    let mut cfg = ou_config();
    cfg.model.jumps.fa = Some(FaSpec::constant(5.0, JumpSize::default()));
    cfg.eta = 0.9;
    match run_experiment(&cfg) {
        Ok(report) => {
            let p = &report.points[0];
            outcome(
                p.ks_distance <= 0.12 && (0.89..=0.98).contains(&p.coverage),
                summary(&report),
            )
        }
        Err(e) => outcome(false, format!("experiment failed: {e}")),
    }
}

fn ia_robustness() -> Outcome {
    let start = Instant::now();
    let params = RateParams {
        eta: 0.9,
        phi: 0.4,
        alpha: 0.5,
    };
    let rates_ok = check_rate_conditions(params, true).all_pass();
    let mut base = ou_config();
    base.replications = 300;
    base.eta = 0.9;
    base.bandwidth = Bandwidth::Power { phi: 0.4 };
    base.master_seed = 8;
    let mut with_ia = base.clone();
    with_ia.model.jumps.ia = Some(IaSpec::stable(0.5, 0.5));
    match (run_experiment(&base), run_experiment(&with_ia)) {
        (Ok(b), Ok(j)) => {
            let (mb, mj) = (b.points[0].mean_estimate, j.points[0].mean_estimate);
            let shift = rel(mj, mb);
            let cov = j.points[0].coverage;
            let elapsed = start.elapsed();
            outcome(
                rates_ok && shift <= 0.10 && (0.88..=0.98).contains(&cov) && elapsed < Duration::from_secs(600),
                format!(
                    "rate conditions {}, mean {mj:.4} vs no-jump {mb:.4} (rel {shift:.4}), coverage {cov:.3}, h = {:.4}, {elapsed:.2?}",
                    if rates_ok { "pass" } else { "FAIL" },
                    j.config.h
                ),
            )
        }
        (Err(e), _) | (_, Err(e)) => outcome(false, format!("experiment failed: {e}")),
    }
}

fn bias_ordering() -> Outcome {
    let model = ModelSpec {
        drift: Drift::LinearMeanRevert { kappa: 1.0, theta: 1.0 },
        diffusion: Diffusion::sine_bump(2.0, 1.0).unwrap(),
        jumps: JumpSpec::default(),
        x0: 1.0,
    };
    let (n, t_end, seed) = (20_000, 10.0, 9);
    let pilot = simulate_path(&model, n, t_end, derive_seed(seed, 0)).unwrap();
    let m = pilot.values.iter().sum::<f64>() / pilot.values.len() as f64;
    let sd = (pilot.values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (pilot.values.len() - 1) as f64).sqrt();
    let x = model.x0 - 1.5 * sd;
    let cfg = |estimator| ExperimentConfig {
        model: model.clone(),
        n,
        t_end,
        replications: 300,
        x_points: vec![x],
        eta: 0.5,
        bandwidth: Bandwidth::Fixed(0.2),
        kernel: epa(),
        estimator,
        master_seed: seed,
        level: 0.95,
        refinement: 10,
    };
    match (run_experiment(&cfg(Estimator::LocalLinear)), run_experiment(&cfg(Estimator::NwThreshold))) {
        (Ok(ll), Ok(nw)) => {
            let (bl, bn) = (ll.points[0].mean_bias, nw.points[0].mean_bias);
            outcome(
                bl.abs() < bn.abs(),
                format!("x = {x:.4} (sample sd {sd:.4}), local linear bias {bl:+.5}, threshold NW bias {bn:+.5}"),
            )
        }
        (Err(e), _) | (_, Err(e)) => outcome(false, format!("experiment failed: {e}")),
    }
}

fn occupation_limit() -> Outcome {
    let kernel = epa();
    let paths = 50u64;
    let mut lines = Vec::new();
    let mut pass = true;
    for h in [0.05, 0.1] {
        let pairs: Vec<(f64, f64)> = (0..paths)
            .into_par_iter()
            .map(|r| {
                let path = simulate_path(&ModelSpec::brownian(1.0, 0.0), 100_000, 1.0, derive_seed(10, r)).unwrap();
                let lhat = local_time_hat(&path, 0.0, h, &kernel).unwrap();
                (lhat * 1.0, narrow_band_occupation(&path, 0.0, 0.02, |_| 1.0))
            })
            .collect();
        let est = pairs.iter().map(|p| p.0).sum::<f64>() / paths as f64;
        let oracle = pairs.iter().map(|p| p.1).sum::<f64>() / paths as f64;
        let within = pairs.iter().filter(|(a, b)| rel(*a, *b) <= 0.2).count();
        let r = rel(est, oracle);
        pass &= r <= 0.2;
        lines.push(format!(
            "h = {h}: mean L̂σ² {est:.4} vs occupation {oracle:.4} (rel {r:.4}; {within}/{paths} paths within 20%)"
        ));
    }
    outcome(pass, lines.join("; "))
}

fn formula_arithmetic() -> Outcome {
    let uni = builtin_kernel("one_sided_uniform").unwrap();
    let mut errs = Vec::new();
    let mut check = |name: &str, got: f64, want: f64| errs.push((name.to_owned(), rel(got, want)));
    // Exact rationals from the closed-form moments.
    check("V uniform", variance_constant(&uni).unwrap(), 4.0);
    check("V epanechnikov", variance_constant(&epa()).unwrap(), 111.0 / 7000.0 / (19.0f64 / 320.0).powi(2));
    check("bias epanechnikov", bias_correction(&epa(), 2.0, 0.1).unwrap(), -0.011 / 9.5);
    check("bias uniform", bias_correction(&uni, 1.0, 1.0).unwrap(), -1.0 / 12.0);
    // 30-digit evaluation of the displayed formula.
    check("h_opt", optimal_bandwidth(0.001, 1.0, 2.0, &epa()).unwrap(), 0.595_021_102_144_957_3);
    let ok = check_rate_conditions(RateParams { eta: 0.9, phi: 0.4, alpha: 0.5 }, true);
    for (c, want) in ok.checks[4..].iter().zip([0.05, 0.25, 0.375]) {
        check(c.name, c.slack, want);
    }
    let bad = check_rate_conditions(RateParams { eta: 0.9, phi: 0.5, alpha: 0.5 }, true);
    // φ = 0.5 also sits on the boundary of 2φ < 1, so that check fails too.
    let verdicts = ok.all_pass() && !bad.all_pass() && bad.failures().any(|c| c.name == "eta/2 > phi");
    let worst = errs.iter().map(|e| e.1).fold(0.0, f64::max);
    let offender = errs.iter().max_by(|a, b| a.1.total_cmp(&b.1)).map(|e| e.0.clone()).unwrap_or_default();
    outcome(
        worst <= 1e-9 && verdicts,
        format!("max relative error {worst:.2e} ({offender}), pass/fail verdicts {}", if verdicts { "match" } else { "differ" }),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut record = |id, name, run: &dyn Fn() -> Outcome| {
        let o = run();
        println!("criterion {id:>2} [{name}]: {} - {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o));
    };
    record(1, "kernel moments", &kernel_moment_oracle);
    record(2, "estimator equivalence", &estimator_equivalence);
    record(3, "polynomial reproduction", &polynomial_reproduction);
    record(4, "jump disentangling", &jump_disentangling);

    let start = Instant::now();
    let clean = run_experiment(&ou_config());
    let elapsed = start.elapsed();
    record(5, "CLT pivot normality", &|| match &clean {
        Ok(r) => clt_pivot(r, elapsed),
        Err(e) => outcome(false, format!("experiment failed: {e}")),
    });
    record(6, "coverage", &|| match &clean {
        Ok(r) => coverage(r),
        Err(e) => outcome(false, format!("experiment failed: {e}")),
    });
    record(7, "finite-activity robustness", &fa_robustness);
    record(8, "infinite-activity robustness", &ia_robustness);
    record(9, "bias ordering", &bias_ordering);
    record(10, "occupation-time limit", &occupation_limit);
    record(11, "formula arithmetic", &formula_arithmetic);

    let failed: Vec<_> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("acceptance: {}/{} criteria pass", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
