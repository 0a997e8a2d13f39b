//! The max-stable field `Y(t) = max_i Γ_i^{-1} Z^{(i)}(t)` on finite point sets.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::estimators::{estimate_h_dy, DyConfig, DyMethod, EstimateResult};
use crate::grid::{enumerate_points, GridSpec, PointSet};
use crate::rng::{salt, Replicator, StreamRng};
use crate::spectral::{FieldSampler, SpectralFieldSpec};
use crate::stats::{proportion, z_score, Summary};

pub const DEFAULT_QUANTILE: f64 = 0.9999;
pub const DEFAULT_MAX_SPAWN: usize = 1_000_000;
pub const DEFAULT_PILOT_REPS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stopping", rename_all = "snake_case")]
pub enum Stopping {
    /// Uses a deterministic bound on `Z` over the points (kernel and Bernoulli fields).
    ExactKernel { max_spawn: usize },
    /// Uses the pilot `q`-quantile of `max Z` as the bound.
    Threshold { q: f64, max_spawn: usize, pilot_reps: usize },
}

impl Stopping {
    pub fn exact() -> Self {
        Self::ExactKernel { max_spawn: DEFAULT_MAX_SPAWN }
    }

    pub fn threshold() -> Self {
        Self::Threshold { q: DEFAULT_QUANTILE, max_spawn: DEFAULT_MAX_SPAWN, pilot_reps: DEFAULT_PILOT_REPS }
    }

    /// Exact when the field admits a uniform bound, threshold otherwise.
    pub fn auto(spec: &SpectralFieldSpec) -> Self {
        match spec {
            SpectralFieldSpec::Kernel { kernel, .. } if kernel.has_compact_support() => Self::exact(),
            SpectralFieldSpec::Bernoulli { .. } => Self::exact(),
            _ => Self::threshold(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxStableSample {
    pub values: Vec<f64>,
    pub spawn_count: usize,
    /// Bound on the probability that a later spawn would still change some value.
    pub residual_bias_bound: f64,
    pub capped: bool,
}

impl MaxStableSample {
    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Turns a capped simulation into an error.
    pub fn strict(self, cap: usize) -> Result<Self> {
        if self.capped {
            return Err(Error::SpawnCapExceeded { cap, residual: self.residual_bias_bound });
        }
        Ok(self)
    }
}

/// Prepared simulator for one spec on one point set.
#[derive(Debug)]
pub struct MaxStableSimulator {
    sampler: FieldSampler,
    bound: f64,
    /// `E[max Z · 1{max Z > bound}]`; 0 for exact stopping.
    tail_mean: f64,
    max_spawn: usize,
}

impl MaxStableSimulator {
    pub fn on_points(spec: &SpectralFieldSpec, points: &PointSet, stopping: Stopping, seed: u64) -> Result<Self> {
        Self::build(spec.sampler_on_points(points)?, stopping, seed)
    }

    pub fn on_grid(spec: &SpectralFieldSpec, g: &GridSpec, stopping: Stopping, seed: u64) -> Result<Self> {
        Self::build(spec.sampler_on_grid(g)?, stopping, seed)
    }

    fn build(sampler: FieldSampler, stopping: Stopping, seed: u64) -> Result<Self> {
        match stopping {
            Stopping::ExactKernel { max_spawn } => {
                let bound = sampler
                    .uniform_bound()
                    .ok_or_else(|| config_err("exact stopping needs a field with a known uniform bound"))?;
                Ok(Self { sampler, bound, tail_mean: 0.0, max_spawn })
            }
            Stopping::Threshold { q, max_spawn, pilot_reps } => {
                if !(q > 0.0 && q < 1.0) || pilot_reps < 100 {
                    return Err(config_err("threshold stopping needs q in (0, 1) and at least 100 pilot runs"));
                }
                let pilot = Replicator::new(seed).with_salt(salt::PILOT).run(pilot_reps, |_, rng| {
                    let mut z = vec![0.0; sampler.len()];
                    sampler.sample_into(rng, &mut z);
                    Ok(z.iter().cloned().fold(0.0, f64::max))
                })?;
                let mut sorted = pilot.clone();
                sorted.sort_by(f64::total_cmp);
                let k = ((q * pilot_reps as f64).ceil() as usize).clamp(1, pilot_reps) - 1;
                let bound = sorted[k];
                let tail_mean = pilot.iter().filter(|m| **m > bound).sum::<f64>() / pilot_reps as f64;
                Ok(Self { sampler, bound, tail_mean, max_spawn })
            }
        }
    }

    pub fn len(&self) -> usize {
        self.sampler.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sampler.is_empty()
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// One realisation of `Y`; spawns stop once `B / Γ_i` falls below `min Y`.
    pub fn simulate<R: Rng + ?Sized>(&self, rng: &mut R) -> MaxStableSample {
        let n = self.sampler.len();
        let mut y = vec![0.0f64; n];
        let mut z = vec![0.0f64; n];
        let mut gamma = 0.0f64;
        let mut spawn = 0;
        loop {
            let e: f64 = Exp1.sample(rng);
            gamma += e;
            spawn += 1;
            self.sampler.sample_into(rng, &mut z);
            let inv = gamma.recip();
            let mut min_y = f64::INFINITY;
            for (yi, zi) in y.iter_mut().zip(&z) {
                *yi = yi.max(zi * inv);
                min_y = min_y.min(*yi);
            }
            if min_y > 0.0 && self.bound * inv < min_y {
                let residual = if self.tail_mean > 0.0 { (self.tail_mean / min_y).min(1.0) } else { 0.0 };
                return MaxStableSample { values: y, spawn_count: spawn, residual_bias_bound: residual, capped: false };
            }
            if spawn >= self.max_spawn {
                // expected number of later spawns that could still exceed the current minimum
                let residual = if min_y > 0.0 { (self.bound / min_y - gamma).max(0.0).min(1.0) } else { 1.0 };
                return MaxStableSample { values: y, spawn_count: spawn, residual_bias_bound: residual, capped: true };
            }
        }
    }
}

/// Maximum of one realisation of `Y` over the points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupSample {
    pub sup: f64,
    pub spawn_count: usize,
    /// Bound on the probability that a later spawn would still raise the maximum.
    pub residual_bias_bound: f64,
    pub capped: bool,
}

impl MaxStableSimulator {
    /// `max_i Y(t_i)` alone; spawns stop once `B / Γ_i` falls below the running maximum,
    /// which needs far fewer spawns than fixing every coordinate of `Y`.
    pub fn simulate_sup<R: Rng + ?Sized>(&self, rng: &mut R) -> SupSample {
        let mut z = vec![0.0f64; self.sampler.len()];
        let mut gamma = 0.0f64;
        let mut sup = 0.0f64;
        let mut spawn = 0;
        loop {
            let e: f64 = Exp1.sample(rng);
            gamma += e;
            spawn += 1;
            self.sampler.sample_into(rng, &mut z);
            let inv = gamma.recip();
            sup = z.iter().fold(sup, |m, v| m.max(v * inv));
            if sup > 0.0 && self.bound * inv < sup {
                let residual = if self.tail_mean > 0.0 { (self.tail_mean / sup).min(1.0) } else { 0.0 };
                return SupSample { sup, spawn_count: spawn, residual_bias_bound: residual, capped: false };
            }
            if spawn >= self.max_spawn {
                let residual = if sup > 0.0 { (self.bound / sup - gamma).clamp(0.0, 1.0) } else { 1.0 };
                return SupSample { sup, spawn_count: spawn, residual_bias_bound: residual, capped: true };
            }
        }
    }
}

/// One realisation of `Y` on the grid.
pub fn simulate_y(spec: &SpectralFieldSpec, g: &GridSpec, rng: &mut StreamRng, stopping: Stopping, seed: u64) -> Result<MaxStableSample> {
    Ok(MaxStableSimulator::on_grid(spec, g, stopping, seed)?.simulate(rng))
}

/// Many independent realisations, in replica order.
pub fn simulate_many(sim: &MaxStableSimulator, sims: usize, runner: &Replicator) -> Result<Vec<MaxStableSample>> {
    runner.with_salt(salt::MAXSTABLE).run(sims, |_, rng| Ok(sim.simulate(rng)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidiEstimate {
    pub value: f64,
    pub stderr: f64,
    /// `E max_i Z(t_i) / x_i`.
    pub exponent: Summary,
}

/// `P(Y(t_i) ≤ x_i ∀i) = exp(-E max_i Z(t_i)/x_i)`, from samples of `Z` only.
pub fn fidi_cdf(spec: &SpectralFieldSpec, points: &PointSet, thresholds: &[f64], reps: usize, runner: &Replicator) -> Result<FidiEstimate> {
    if thresholds.len() != points.len() || thresholds.iter().any(|x| !(*x > 0.0)) {
        return Err(config_err("one positive threshold per point is required"));
    }
    if reps < 1000 {
        return Err(config_err("fidi estimates need at least 1000 replications"));
    }
    let sampler = spec.sampler_on_points(points)?;
    let vals = runner.run(reps, |_, rng| {
        let mut z = vec![0.0; sampler.len()];
        sampler.sample_into(rng, &mut z);
        Ok(z.iter().zip(thresholds).map(|(v, x)| v / x).fold(0.0, f64::max))
    })?;
    let exponent = Summary::of(&vals);
    let value = (-exponent.mean).exp();
    Ok(FidiEstimate { value, stderr: value * exponent.stderr, exponent })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxStabilityCheck {
    /// `P̂(Y ≤ x)^m`.
    pub powered: f64,
    /// `P̂(m Y ≤ x)`.
    pub rescaled: f64,
    pub stderr: f64,
    pub z: f64,
}

/// Compares `P(Y(t) ≤ x)^m` with `P(m Y(t) ≤ x)` at point `index` of the samples.
pub fn max_stability_check(samples: &[MaxStableSample], index: usize, x: f64, m: u32) -> MaxStabilityCheck {
    let n = samples.len();
    let a: Vec<f64> = samples.iter().map(|s| f64::from(u8::from(s.values[index] <= x))).collect();
    let b: Vec<f64> = samples.iter().map(|s| f64::from(u8::from(m as f64 * s.values[index] <= x))).collect();
    let (pa, pb) = (Summary::of(&a).mean, Summary::of(&b).mean);
    let grad = m as f64 * pa.powi(m as i32 - 1);
    // delta method on (pa, pb) with their empirical covariance
    let cov = crate::stats::covariance(&a, &b);
    let var = (grad * grad * pa * (1.0 - pa) + pb * (1.0 - pb) - 2.0 * grad * cov) / n as f64;
    let stderr = var.max(0.0).sqrt();
    let powered = pa.powi(m as i32);
    MaxStabilityCheck { powered, rescaled: pb, stderr, z: z_score(powered - pb, stderr) }
}

/// Empirical `P(Y(t) ≤ x)` at point `index`.
pub fn marginal_cdf(samples: &[MaxStableSample], index: usize, x: f64) -> Summary {
    proportion(samples.iter().filter(|s| s.values[index] <= x).count(), samples.len())
}

/// Kolmogorov distance between the empirical law of `Y(t)` and unit Fréchet.
pub fn frechet_ks_distance(samples: &[MaxStableSample], index: usize) -> f64 {
    let mut v: Vec<f64> = samples.iter().map(|s| s.values[index]).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, x)| {
            let f = (-1.0 / x).exp();
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremalIndex {
    /// `δ^d Ĥ^δ`.
    pub theta: f64,
    pub theta_stderr: f64,
    pub h: EstimateResult,
    /// `P̂(max_grid Y ≤ r T^d)` from simulated `Y`.
    pub prob: Summary,
    /// `Ê max_grid Z` from `Z` alone.
    pub mean_sup: Summary,
    /// `|-ln P̂ - Ê / (r T^d)|`.
    pub identity_gap: f64,
    pub gap_stderr: f64,
    pub max_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremalConfig {
    pub delta: f64,
    pub horizon: f64,
    pub r: f64,
    #[serde(default = "one")]
    pub dim: usize,
    /// Window of the ratio estimator; the horizon when absent.
    #[serde(default)]
    pub window: Option<f64>,
}

fn one() -> usize {
    1
}

/// Extremal index estimate and the finite-grid identity `-ln P(max Y ≤ x) = E max Z / x`.
pub fn extremal_index(
    spec: &SpectralFieldSpec,
    cfg: &ExtremalConfig,
    reps: usize,
    stopping: Stopping,
    runner: &Replicator,
) -> Result<ExtremalIndex> {
    if !(cfg.delta > 0.0 && cfg.r > 0.0) {
        return Err(config_err("extremal index needs delta > 0 and r > 0"));
    }
    let dy = DyConfig {
        dim: cfg.dim,
        delta: cfg.delta,
        eta: cfg.delta,
        window: cfg.window.unwrap_or(cfg.horizon),
        mesh: None,
        method: DyMethod::Auto,
    };
    let h = estimate_h_dy(spec, &dy, reps, runner)?;
    let scale = cfg.delta.powi(cfg.dim as i32);
    let g = GridSpec::boxed(cfg.dim, cfg.delta, cfg.horizon)?;
    let x = cfg.r * cfg.horizon.powi(cfg.dim as i32);
    let sampler = spec.sampler_on_grid(&g)?;
    let sups = runner.with_salt(salt::ORACLE).run(reps, |_, rng| {
        let mut z = vec![0.0; sampler.len()];
        sampler.sample_into(rng, &mut z);
        Ok(z.iter().cloned().fold(0.0, f64::max))
    })?;
    let mean_sup = Summary::of(&sups);
    let sim = MaxStableSimulator::build(sampler, stopping, runner.seed)?;
    let ys = runner.with_salt(salt::MAXSTABLE).run(reps, |_, rng| Ok(sim.simulate_sup(rng)))?;
    let prob = proportion(ys.iter().filter(|s| s.sup <= x).count(), ys.len());
    let max_residual = ys.iter().map(|s| s.residual_bias_bound).fold(0.0, f64::max);
    let identity_gap = (-prob.mean.ln() - mean_sup.mean / x).abs();
    let gap_stderr = ((prob.stderr / prob.mean).powi(2) + (mean_sup.stderr / x).powi(2)).sqrt();
    Ok(ExtremalIndex {
        theta: scale * h.estimate,
        theta_stderr: scale * h.stderr,
        h,
        prob,
        mean_sup,
        identity_gap,
        gap_stderr,
        max_residual,
    })
}

/// Built-in 0-homogeneous functionals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "functional", rename_all = "snake_case")]
pub enum Functional {
    /// `f(s) / f(0)`, with `0/0 = 0`.
    Ratio { s: f64 },
    /// `max f / (mesh Σ f)` over `[-R, R] ∩ mesh Z`.
    SupOverSum { window: f64, mesh: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltCheck {
    /// `E[Z(h) F(Z)]`.
    pub lhs: Summary,
    /// `E[Z(0) F(B^h Z)]`, `B^h Z(·) = Z(· - h)`.
    pub rhs: Summary,
    pub difference: Summary,
    pub z: f64,
}

fn div0(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a / b
    }
}

/// Both sides of `E[Z(h) F(Z)] = E[Z(0) F(B^h Z)]` on shared draws of `Z` (one dimension).
pub fn tilt_identity_check(spec: &SpectralFieldSpec, shift: f64, functional: Functional, reps: usize, runner: &Replicator) -> Result<TiltCheck> {
    // points: [0, h] then the functional's points for Z and for B^h Z
    let mut xs = vec![0.0, shift];
    let (a, b) = match functional {
        Functional::Ratio { s } => {
            xs.extend([s, 0.0, s - shift, -shift]);
            ((2, 4), (4, 6))
        }
        Functional::SupOverSum { window, mesh } => {
            let g = GridSpec::window(1, mesh, window)?;
            let w = enumerate_points(&g)?;
            let n = w.len();
            xs.extend(w.coords());
            xs.extend(w.coords().iter().map(|t| t - shift));
            ((2, 2 + n), (2 + n, 2 + 2 * n))
        }
    };
    // identical points must carry identical values, so sample each distinct point once
    let xs: Vec<f64> = xs.iter().map(|x| x + 0.0).collect();
    let mut unique: Vec<f64> = xs.clone();
    unique.sort_by(f64::total_cmp);
    unique.dedup();
    let slot: Vec<usize> = xs.iter().map(|x| unique.binary_search_by(|u| u.total_cmp(x)).expect("present")).collect();
    let sampler = spec.sampler_on_points(&PointSet::from_1d(&unique))?;
    let eval = |f: &[f64]| -> f64 {
        match functional {
            Functional::Ratio { .. } => div0(f[0], f[1]),
            Functional::SupOverSum { mesh, .. } => {
                let m = f.iter().cloned().fold(0.0, f64::max);
                div0(m, mesh * f.iter().sum::<f64>())
            }
        }
    };
    let pairs = runner.run(reps, |_, rng| {
        let mut u = vec![0.0; sampler.len()];
        sampler.sample_into(rng, &mut u);
        let z: Vec<f64> = slot.iter().map(|&i| u[i]).collect();
        Ok((z[1] * eval(&z[a.0..a.1]), z[0] * eval(&z[b.0..b.1])))
    })?;
    let l: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let r: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let difference = crate::stats::paired_difference(&l, &r);
    Ok(TiltCheck { lhs: Summary::of(&l), rhs: Summary::of(&r), z: z_score(difference.mean, difference.stderr), difference })
}
