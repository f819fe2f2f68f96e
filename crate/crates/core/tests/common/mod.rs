#![allow(dead_code)]

use jumpvol::{KernelSpec, Path};
use rand::Rng;

/// Weighted normal equations `(XᵀWX)β = XᵀWY` built from the raw design
/// `X_ik = (X_i − x)^k`, solved by Gauss–Jordan elimination with partial
/// pivoting. Deliberately shares nothing with the library solver.
pub fn brute_force_wls(
    points: &[f64],
    responses: &[f64],
    keep: &[bool],
    x: f64,
    h: f64,
    kernel: &KernelSpec,
    p: usize,
) -> Vec<f64> {
    let dim = p + 1;
    let design: Vec<Vec<f64>> = points
        .iter()
        .map(|&xi| (0..dim).map(|k| (xi - x).powi(k as i32)).collect())
        .collect();
    let w: Vec<f64> = points.iter().map(|&xi| kernel.eval((xi - x) / h) / h).collect();
    let mut aug = vec![vec![0.0; dim + 1]; dim];
    for i in 0..points.len() {
        for r in 0..dim {
            for c in 0..dim {
                aug[r][c] += design[i][r] * w[i] * design[i][c];
            }
            if keep[i] {
                aug[r][dim] += design[i][r] * w[i] * responses[i];
            }
        }
    }
    for col in 0..dim {
        let pivot = (col..dim)
            .max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs()))
            .unwrap();
        aug.swap(col, pivot);
        let d = aug[col][col];
        for v in aug[col].iter_mut() {
            *v /= d;
        }
        let pivot_row = aug[col].clone();
        for (r, row) in aug.iter_mut().enumerate() {
            if r != col {
                let f = row[col];
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
            }
        }
    }
    aug.iter().map(|row| row[dim]).collect()
}

/// Random path, evaluation point, bandwidth and threshold with enough mass
/// in the kernel window for a well-posed fit.
pub struct Instance {
    pub path: Path,
    pub x: f64,
    pub h: f64,
    pub threshold: f64,
}

pub fn random_instance<R: Rng>(rng: &mut R, n_range: std::ops::RangeInclusive<usize>) -> Instance {
    let n = rng.random_range(n_range);
    let t_end = rng.random_range(0.5..2.0);
    let delta = t_end / n as f64;
    let mut values = Vec::with_capacity(n + 1);
    let mut v = 0.0;
    values.push(v);
    for _ in 0..n {
        let z: f64 = rng.random_range(-1.0..1.0) + rng.random_range(-1.0..1.0);
        v += z * delta.sqrt();
        // Occasional jumps so the threshold bites.
        if rng.random_bool(0.05) {
            v += rng.random_range(-0.5..0.5);
        }
        values.push(v);
    }
    let path = Path::from_values(values, t_end).unwrap();
    let mut sorted = path.left_points().to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = sorted[n / 10];
    let hi = sorted[n / 2];
    let x = rng.random_range(lo..=hi);
    let span = sorted[n - 1] - x;
    let h = span * rng.random_range(0.4..1.0);
    let mut sq: Vec<f64> = path.increments().map(|d| d * d).collect();
    sq.sort_by(f64::total_cmp);
    // Midpoint between order statistics so no increment sits on the boundary.
    let k = ((n as f64 * rng.random_range(0.85..0.99)) as usize).min(n - 2);
    let threshold = 0.5 * (sq[k] + sq[k + 1]);
    Instance { path, x, h, threshold }
}

/// `(1/2ε) ∫ 1{|X_s − x| < ε} σ²(X_s) ds` on the observation grid.
pub fn narrow_band_occupation(path: &Path, x: f64, eps: f64, sigma2: impl Fn(f64) -> f64) -> f64 {
    path.left_points()
        .iter()
        .filter(|v| (*v - x).abs() < eps)
        .map(|&v| sigma2(v) * path.delta)
        .sum::<f64>()
        / (2.0 * eps)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
