//! Euler–Maruyama simulation of jump-diffusions observed on an equispaced
//! grid, with exact thinning for state-dependent compound Poisson jumps and
//! exact per-step increments for the infinite-activity component.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{FaSpec, IaKind, IaSpec, JumpSize, ModelSpec};

pub const DEFAULT_REFINEMENT: usize = 10;

const STREAM_BROWNIAN: u64 = 0;
const STREAM_FA: u64 = 1;
const STREAM_IA: u64 = 2;

/// Equally spaced observations `X_{t_0}, …, X_{t_n}` with `t_i = i·δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub n: usize,
    pub t_end: f64,
    pub delta: f64,
    pub values: Vec<f64>,
    /// `jump_mask[i]` is set when a finite-activity jump fell in `(t_i, t_{i+1}]`.
    pub jump_mask: Option<Vec<bool>>,
    pub fa_jump_times: Option<Vec<f64>>,
    pub seed: Option<u64>,
}

impl Path {
    /// Wraps observed values on `[0, t_end]`; no jump bookkeeping.
    pub fn from_values(values: Vec<f64>, t_end: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::param("values", "need at least two observations"));
        }
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::param("T", format!("must be positive, got {t_end}")));
        }
        let n = values.len() - 1;
        Ok(Self {
            n,
            t_end,
            delta: t_end / n as f64,
            values,
            jump_mask: None,
            fa_jump_times: None,
            seed: None,
        })
    }

    /// Observation time of index `i`.
    pub fn time(&self, i: usize) -> f64 {
        self.t_end * i as f64 / self.n as f64
    }

    /// Increments `X_{t_i} − X_{t_{i-1}}`, `i = 1..n`.
    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.windows(2).map(|w| w[1] - w[0])
    }

    /// Left endpoints `X_{t_0}, …, X_{t_{n-1}}`.
    pub fn left_points(&self) -> &[f64] {
        &self.values[..self.n]
    }
}

/// Seed for replicate `index` under `master`; independent of evaluation order.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(0x6a09_e667_f3bc_c909)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn draw_jump_size<R: Rng + ?Sized>(law: JumpSize, rng: &mut R) -> f64 {
    match law {
        JumpSize::Normal { mean, sd } => {
            let z: f64 = StandardNormal.sample(rng);
            mean + sd * z
        }
        JumpSize::Constant(v) => v,
    }
}

/// Thinning of a rate-`bound` Poisson stream against `λ(X_{t-})`.
struct Thinning<'a> {
    spec: &'a FaSpec,
    rng: ChaCha8Rng,
    next_candidate: f64,
}

impl<'a> Thinning<'a> {
    fn new(spec: &'a FaSpec, seed: u64) -> Self {
        let mut rng = stream_rng(seed, STREAM_FA);
        let gap: f64 = Exp1.sample(&mut rng);
        Self {
            spec,
            next_candidate: gap / spec.intensity_bound,
            rng,
        }
    }

    /// Pops the next candidate time if it is `<= until`.
    fn candidate_until(&mut self, until: f64) -> Option<f64> {
        if self.next_candidate > until {
            return None;
        }
        let t = self.next_candidate;
        let gap: f64 = Exp1.sample(&mut self.rng);
        self.next_candidate += gap / self.spec.intensity_bound;
        Some(t)
    }

    /// Accept/reject the candidate given the pre-jump state; returns the
    /// jump size when accepted.
    fn thin(&mut self, state: f64) -> Result<Option<f64>> {
        let bound = self.spec.intensity_bound;
        let lambda = self.spec.intensity.eval(state);
        if !(lambda >= 0.0) || lambda > bound * (1.0 + 1e-12) {
            return Err(Error::IntensityBound {
                value: lambda,
                state,
                bound,
            });
        }
        let u: f64 = self.rng.random();
        if u * bound < lambda {
            Ok(Some(draw_jump_size(self.spec.jump_size, &mut self.rng)))
        } else {
            Ok(None)
        }
    }
}

/// Compound Poisson event times and sizes on `(0, t_end]` by thinning.
///
/// `state_at(t)` must return the pre-jump state `X_{t-}` given all events
/// accepted so far; it is called in increasing `t`.
pub fn sample_fa_jumps<F>(
    spec: &FaSpec,
    mut state_at: F,
    t_end: f64,
    seed: u64,
) -> Result<Vec<(f64, f64)>>
where
    F: FnMut(f64, &[(f64, f64)]) -> f64,
{
    let mut thinning = Thinning::new(spec, seed);
    let mut events = Vec::new();
    while let Some(t) = thinning.candidate_until(t_end) {
        let state = state_at(t, &events);
        if let Some(size) = thinning.thin(state)? {
            events.push((t, size));
        }
    }
    Ok(events)
}

/// Draws one increment of the infinite-activity component over `dt`.
struct IaSampler {
    spec: IaSpec,
    dt: f64,
    stable_scale: f64,
    vg_gammas: Option<(Gamma<f64>, Gamma<f64>)>,
}

impl IaSampler {
    fn new(spec: IaSpec, dt: f64) -> Result<Self> {
        spec.validate()?;
        if !(dt > 0.0) {
            return Err(Error::param("delta", "must be positive"));
        }
        let stable_scale = match spec.kind {
            IaKind::SymmetricAlphaStable => spec.scale * dt.powf(1.0 / spec.alpha),
            IaKind::VarianceGamma => 0.0,
        };
        let vg_gammas = match (spec.kind, spec.vg) {
            (IaKind::VarianceGamma, Some(vg)) => {
                // Difference of two gamma variates with matched shape dt/ν.
                let root = (vg.theta * vg.theta + 2.0 * vg.sigma * vg.sigma / vg.nu).sqrt();
                let mu_up = 0.5 * root + 0.5 * vg.theta;
                let mu_down = 0.5 * root - 0.5 * vg.theta;
                let shape = dt / vg.nu;
                let mk = |mean: f64| {
                    Gamma::new(shape, (mean * vg.nu).max(f64::MIN_POSITIVE))
                        .map_err(|e| Error::param("vg_params", e.to_string()))
                };
                Some((mk(mu_up)?, mk(mu_down)?))
            }
            _ => None,
        };
        Ok(Self {
            spec,
            dt,
            stable_scale,
            vg_gammas,
        })
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.spec.scale == 0.0 {
            return 0.0;
        }
        match self.spec.kind {
            IaKind::SymmetricAlphaStable => self.stable_scale * symmetric_stable(self.spec.alpha, rng),
            IaKind::VarianceGamma => {
                let (up, down) = self.vg_gammas.as_ref().expect("built for VG");
                self.spec.scale * (up.sample(rng) - down.sample(rng))
            }
        }
    }
}

impl std::fmt::Debug for IaSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "IaSampler({:?}, dt={})", self.spec, self.dt)
    }
}

/// Standard symmetric α-stable variate (Chambers–Mallows–Stuck, β = 0).
pub fn symmetric_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let v = PI * (rng.random::<f64>() - 0.5);
    let w = loop {
        let w: f64 = Exp1.sample(rng);
        if w > 0.0 {
            break w;
        }
    };
    let a = (alpha * v).sin() / v.cos().powf(1.0 / alpha);
    let b = (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha);
    a * b
}

/// `count` i.i.d. increments of the infinite-activity component over `delta`.
pub fn sample_ia_increments(ia: &IaSpec, delta: f64, count: usize, seed: u64) -> Result<Vec<f64>> {
    let sampler = IaSampler::new(*ia, delta)?;
    let mut rng = stream_rng(seed, STREAM_IA);
    Ok((0..count).map(|_| sampler.draw(&mut rng)).collect())
}

#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    /// Fine Euler steps per observation interval.
    pub refinement: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            refinement: DEFAULT_REFINEMENT,
        }
    }
}

pub fn simulate_path(model: &ModelSpec, n: usize, t_end: f64, seed: u64) -> Result<Path> {
    simulate_path_with(model, n, t_end, seed, SimOptions::default())
}

/// Simulates `n + 1` observations on `[0, t_end]` using `n · refinement`
/// Euler steps. Brownian, jump-time and Lévy draws use separate random
/// streams, so switching a jump component on or off leaves the Brownian
/// path unchanged.
pub fn simulate_path_with(
    model: &ModelSpec,
    n: usize,
    t_end: f64,
    seed: u64,
    options: SimOptions,
) -> Result<Path> {
    if n < 2 {
        return Err(Error::param("n", format!("need n >= 2, got {n}")));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::param("T", format!("must be positive, got {t_end}")));
    }
    if options.refinement == 0 {
        return Err(Error::param("refinement", "must be >= 1"));
    }
    model.validate()?;

    let refinement = options.refinement;
    let fine_steps = n * refinement;
    let dt = t_end / fine_steps as f64;
    let sqrt_dt = dt.sqrt();

    let mut w_rng = stream_rng(seed, STREAM_BROWNIAN);
    let mut thinning = model.jumps.fa.as_ref().map(|fa| Thinning::new(fa, seed));
    let ia = match model.jumps.ia {
        Some(spec) => Some((IaSampler::new(spec, dt)?, stream_rng(seed, STREAM_IA))),
        None => None,
    };
    let mut ia = ia;

    let mut values = Vec::with_capacity(n + 1);
    values.push(model.x0);
    let mut fa_times = Vec::new();
    let mut jump_mask = vec![false; n];
    let mut x = model.x0;

    for step in 0..fine_steps {
        let t_right = t_end * (step + 1) as f64 / fine_steps as f64;
        let z: f64 = StandardNormal.sample(&mut w_rng);
        let mut jump = 0.0;
        if let Some(th) = thinning.as_mut() {
            while let Some(tau) = th.candidate_until(t_right) {
                if let Some(size) = th.thin(x + jump)? {
                    jump += size;
                    fa_times.push(tau);
                    jump_mask[step / refinement] = true;
                }
            }
        }
        if let Some((sampler, rng)) = ia.as_mut() {
            jump += sampler.draw(rng);
        }
        x += model.drift.eval(x) * dt + model.diffusion.sigma(x) * sqrt_dt * z + jump;
        if !x.is_finite() {
            return Err(Error::NonFiniteState { step });
        }
        if (step + 1) % refinement == 0 {
            values.push(x);
        }
    }

    let has_fa = model.jumps.fa.is_some();
    Ok(Path {
        n,
        t_end,
        delta: t_end / n as f64,
        values,
        jump_mask: has_fa.then_some(jump_mask),
        fa_jump_times: has_fa.then_some(fa_times),
        seed: Some(seed),
    })
}
