//! Centered Gaussian fields on grids.
//!
//! Fields with stationary increments are described by their variance function
//! `σ²(t) = Var W(t)`, with `W(0) = 0` and
//! `Cov(W(s), W(t)) = (σ²(s) + σ²(t) - σ²(t - s)) / 2`.
//! Stationary fields are described by a covariance function instead.
//!
//! Two samplers share one contract: the fast circulant-embedding sampler for
//! uniform 1-d grids, and a dense Cholesky sampler for arbitrary point sets.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::grid::{enumerate_points, integer_ratio, GridSpec, PointSet};

/// Largest point count accepted by the dense sampler.
pub const MAX_DENSE_POINTS: usize = 4096;

/// Negative embedding eigenvalues down to `-EIGEN_CLIP_TOL * max` are treated as zero.
pub const EIGEN_CLIP_TOL: f64 = 1e-10;

/// Shape of `r(u)` on the unit sphere for [`VarianceFunction::NormSphere`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum SphereProfile {
    /// `r(u) = value`.
    Constant { value: f64 },
    /// `r(u) = (uᵀ A u)^{λ/2}` with `A = [[a11, a12], [a12, a22]]` positive semidefinite,
    /// so that `σ²(t) = (tᵀ A t)^{λ/2}`. In one dimension only `a11` is used.
    Elliptic { a11: f64, a12: f64, a22: f64 },
}

impl SphereProfile {
    fn eval(&self, u: &[f64], lambda: f64) -> f64 {
        match *self {
            SphereProfile::Constant { value } => value,
            SphereProfile::Elliptic { a11, a12, a22 } => {
                let q = if u.len() == 1 {
                    a11 * u[0] * u[0]
                } else {
                    a11 * u[0] * u[0] + 2.0 * a12 * u[0] * u[1] + a22 * u[1] * u[1]
                };
                q.max(0.0).powf(lambda / 2.0)
            }
        }
    }

    fn sup(&self, lambda: f64) -> f64 {
        match *self {
            SphereProfile::Constant { value } => value,
            SphereProfile::Elliptic { a11, a12, a22 } => {
                let tr = a11 + a22;
                let disc = ((a11 - a22) * (a11 - a22) / 4.0 + a12 * a12).sqrt();
                (tr / 2.0 + disc).max(a11).max(0.0).powf(lambda / 2.0)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            SphereProfile::Constant { value } if value >= 0.0 && value.is_finite() => Ok(()),
            SphereProfile::Elliptic { a11, a12, a22 }
                if a11 >= 0.0 && a22 >= 0.0 && a11 * a22 >= a12 * a12 && a11.is_finite() && a22.is_finite() =>
            {
                Ok(())
            }
            _ => Err(config_err(format!("sphere profile {self:?} is not nonnegative definite"))),
        }
    }
}

/// Variance function of a centered Gaussian field with stationary increments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VarianceFunction {
    /// `scale · ‖t‖^{2α}`, Hurst index `α ∈ (0, 1]`.
    Fbm { alpha: f64, scale: f64 },
    /// `c² ‖t‖²`; in one dimension `W(t) = c t ξ`.
    Linear { c: f64 },
    /// Independent sum of two fields.
    Sum { first: Box<VarianceFunction>, second: Box<VarianceFunction> },
    /// `factor² · σ²_base`.
    Scaled { factor: f64, base: Box<VarianceFunction> },
    /// `‖t‖^λ r(t/‖t‖)`, `λ ∈ (0, 2]`.
    NormSphere { lambda: f64, profile: SphereProfile },
}

/// Power-law envelopes `σ²(t) ≤ C₀‖t‖^{ν₀}` near zero and `σ²(t) ≤ C∞‖t‖^{ν∞}` at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthBounds {
    pub nu0: f64,
    pub c0: f64,
    pub nu_inf: f64,
    pub c_inf: f64,
}

impl GrowthBounds {
    pub fn exponents_admissible(&self) -> bool {
        self.nu0 > 0.0 && self.nu0 <= 2.0 && self.nu_inf > 0.0 && self.nu_inf <= 2.0
    }
}

fn norm(t: &[f64]) -> f64 {
    t.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl VarianceFunction {
    pub fn fbm(alpha: f64, scale: f64) -> Self {
        Self::Fbm { alpha, scale }
    }

    pub fn linear(c: f64) -> Self {
        Self::Linear { c }
    }

    pub fn scaled(factor: f64, base: VarianceFunction) -> Self {
        Self::Scaled { factor, base: Box::new(base) }
    }

    pub fn sum(first: VarianceFunction, second: VarianceFunction) -> Self {
        Self::Sum { first: Box::new(first), second: Box::new(second) }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Fbm { alpha, scale } => {
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(config_err(format!("Hurst index must lie in (0, 1], got {alpha}")));
                }
                if !(*scale > 0.0 && scale.is_finite()) {
                    return Err(config_err(format!("fBm scale must be positive, got {scale}")));
                }
                Ok(())
            }
            Self::Linear { c } if *c > 0.0 && c.is_finite() => Ok(()),
            Self::Linear { c } => Err(config_err(format!("linear coefficient must be positive, got {c}"))),
            Self::Sum { first, second } => {
                first.validate()?;
                second.validate()
            }
            Self::Scaled { factor, base } => {
                if !(*factor >= 0.0 && factor.is_finite()) {
                    return Err(config_err(format!("scale factor must be nonnegative, got {factor}")));
                }
                base.validate()
            }
            Self::NormSphere { lambda, profile } => {
                if !(*lambda > 0.0 && *lambda <= 2.0) {
                    return Err(config_err(format!("norm exponent must lie in (0, 2], got {lambda}")));
                }
                profile.validate()
            }
        }
    }

    pub fn variance_at(&self, t: &[f64]) -> f64 {
        match self {
            Self::Fbm { alpha, scale } => {
                let r = norm(t);
                if r == 0.0 {
                    0.0
                } else {
                    scale * r.powf(2.0 * alpha)
                }
            }
            Self::Linear { c } => c * c * t.iter().map(|x| x * x).sum::<f64>(),
            Self::Sum { first, second } => first.variance_at(t) + second.variance_at(t),
            Self::Scaled { factor, base } => factor * factor * base.variance_at(t),
            Self::NormSphere { lambda, profile } => {
                let r = norm(t);
                if r == 0.0 {
                    return 0.0;
                }
                let u: Vec<f64> = t.iter().map(|x| x / r).collect();
                r.powf(*lambda) * profile.eval(&u, *lambda)
            }
        }
    }

    pub fn covariance(&self, s: &[f64], t: &[f64]) -> f64 {
        let diff: Vec<f64> = t.iter().zip(s).map(|(a, b)| a - b).collect();
        0.5 * (self.variance_at(s) + self.variance_at(t) - self.variance_at(&diff))
    }

    /// True when the field vanishes identically.
    pub fn is_degenerate(&self) -> bool {
        match self {
            Self::Scaled { factor, base } => *factor == 0.0 || base.is_degenerate(),
            Self::Sum { first, second } => first.is_degenerate() && second.is_degenerate(),
            Self::NormSphere { profile, lambda } => profile.sup(*lambda) == 0.0,
            _ => false,
        }
    }

    pub fn growth(&self) -> GrowthBounds {
        match self {
            Self::Fbm { alpha, scale } => GrowthBounds { nu0: 2.0 * alpha, c0: *scale, nu_inf: 2.0 * alpha, c_inf: *scale },
            Self::Linear { c } => GrowthBounds { nu0: 2.0, c0: c * c, nu_inf: 2.0, c_inf: c * c },
            Self::Sum { first, second } => {
                let (a, b) = (first.growth(), second.growth());
                GrowthBounds {
                    nu0: a.nu0.min(b.nu0),
                    c0: a.c0 + b.c0,
                    nu_inf: a.nu_inf.max(b.nu_inf),
                    c_inf: a.c_inf + b.c_inf,
                }
            }
            Self::Scaled { factor, base } => {
                let g = base.growth();
                GrowthBounds { c0: factor * factor * g.c0, c_inf: factor * factor * g.c_inf, ..g }
            }
            Self::NormSphere { lambda, profile } => {
                let c = profile.sup(*lambda);
                GrowthBounds { nu0: *lambda, c0: c, nu_inf: *lambda, c_inf: c }
            }
        }
    }
}

/// Correlation shape of a stationary field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Correlation {
    /// `exp(-‖t‖ / scale)`.
    Exponential { scale: f64 },
    /// `exp(-(‖t‖ / scale)²)`.
    Gaussian { scale: f64 },
    /// `cos(2π t₁ / period)`; a rank-two field, periodic in the first coordinate.
    Cosine { period: f64 },
}

/// Covariance `variance · ρ(t - s)` of a stationary centered Gaussian field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryCovariance {
    pub variance: f64,
    pub correlation: Correlation,
}

impl StationaryCovariance {
    pub fn validate(&self) -> Result<()> {
        let ok = self.variance > 0.0
            && self.variance.is_finite()
            && match self.correlation {
                Correlation::Exponential { scale } | Correlation::Gaussian { scale } => scale > 0.0,
                Correlation::Cosine { period } => period > 0.0,
            };
        if ok {
            Ok(())
        } else {
            Err(config_err(format!("invalid stationary covariance {self:?}")))
        }
    }

    pub fn at_lag(&self, h: &[f64]) -> f64 {
        let rho = match self.correlation {
            Correlation::Exponential { scale } => (-norm(h) / scale).exp(),
            Correlation::Gaussian { scale } => (-(norm(h) / scale).powi(2)).exp(),
            Correlation::Cosine { period } => (2.0 * std::f64::consts::PI * h[0] / period).cos(),
        };
        self.variance * rho
    }

    /// Increment variance `E(X(t) - X(0))²`.
    pub fn increment_variance(&self, t: &[f64]) -> f64 {
        2.0 * (self.variance - self.at_lag(t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Gaussian,
    Spectral,
}

/// One realization on a point set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub points: PointSet,
    pub values: Vec<f64>,
    pub kind: PathKind,
}

/// FFT sampler of a stationary sequence of length `len` with autocovariance `gamma`.
#[derive(Clone)]
struct CirculantCore {
    len: usize,
    sqrt_eig: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CirculantCore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantCore").field("len", &self.len).field("embedding", &self.sqrt_eig.len()).finish()
    }
}

impl CirculantCore {
    fn new(len: usize, gamma: impl Fn(usize) -> f64) -> Result<Self> {
        let mut half = (len.max(2) - 1).next_power_of_two();
        let mut worst = 0.0;
        for _ in 0..4 {
            let n = 2 * half;
            let mut buf: Vec<Complex<f64>> = (0..n)
                .map(|j| {
                    let lag = if j <= half { j } else { n - j };
                    Complex::new(gamma(lag), 0.0)
                })
                .collect();
            let fft = FftPlanner::new().plan_fft_forward(n);
            fft.process(&mut buf);
            let max = buf.iter().map(|c| c.re).fold(0.0f64, f64::max);
            let min = buf.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
            if min >= -EIGEN_CLIP_TOL * max.max(f64::MIN_POSITIVE) {
                let sqrt_eig = buf.iter().map(|c| (c.re.max(0.0) / n as f64).sqrt()).collect();
                return Ok(Self { len, sqrt_eig, fft });
            }
            worst = min / max;
            half *= 2;
        }
        Err(Error::EmbeddingNotPsd { min_eigenvalue: worst })
    }

    /// Draws `2 · embedding` standard normals and writes `len` values.
    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let mut buf: Vec<Complex<f64>> = self
            .sqrt_eig
            .iter()
            .map(|s| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                Complex::new(s * a, s * b)
            })
            .collect();
        self.fft.process(&mut buf);
        for (o, c) in out.iter_mut().zip(&buf[..self.len]) {
            *o = c.re;
        }
    }

    fn variates(&self) -> usize {
        2 * self.sqrt_eig.len()
    }
}

#[derive(Debug, Clone)]
enum CirculantMode {
    /// Path rebuilt from increments; `origin` and `first` index the extended lattice.
    Increments { origin: usize, first: usize },
    Stationary,
}

/// Exact FFT sampler on a uniform 1-d grid.
#[derive(Debug, Clone)]
pub struct CirculantSampler {
    n: usize,
    core: CirculantCore,
    mode: CirculantMode,
}

impl CirculantSampler {
    /// Field with stationary increments pinned to `W(0) = 0`; the grid's lattice must contain the origin.
    pub fn increments(vf: &VarianceFunction, g: &GridSpec) -> Result<Self> {
        vf.validate()?;
        if g.dim != 1 {
            return Err(config_err("circulant sampling is one-dimensional"));
        }
        let n = g.points_per_axis();
        let r = g.axis_range();
        let k_origin = integer_ratio(-g.anchor[0], g.delta)
            .ok_or_else(|| config_err("circulant sampling needs the origin on the grid lattice"))?;
        let lo = (*r.start()).min(k_origin);
        let hi = (*r.end()).max(k_origin);
        let steps = (hi - lo) as usize;
        let delta = g.delta;
        let var = |k: f64| vf.variance_at(&[k * delta]);
        let gamma = |k: usize| {
            let k = k as f64;
            0.5 * (var(k + 1.0) + var(k - 1.0) - 2.0 * var(k))
        };
        let core = CirculantCore::new(steps.max(1), gamma)?;
        Ok(Self {
            n,
            core,
            mode: CirculantMode::Increments { origin: (k_origin - lo) as usize, first: (r.start() - lo) as usize },
        })
    }

    pub fn stationary(cov: &StationaryCovariance, g: &GridSpec) -> Result<Self> {
        cov.validate()?;
        if g.dim != 1 {
            return Err(config_err("circulant sampling is one-dimensional"));
        }
        let n = g.points_per_axis();
        let delta = g.delta;
        let core = CirculantCore::new(n, |k| cov.at_lag(&[k as f64 * delta]))?;
        Ok(Self { n, core, mode: CirculantMode::Stationary })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn variates_per_path(&self) -> usize {
        self.core.variates()
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self.mode {
            CirculantMode::Stationary => self.core.sample_into(rng, out),
            CirculantMode::Increments { origin, first } => {
                let mut inc = vec![0.0; self.core.len];
                self.core.sample_into(rng, &mut inc);
                let total = inc.len() + 1;
                let mut path = vec![0.0; total];
                for j in origin + 1..total {
                    path[j] = path[j - 1] + inc[j - 1];
                }
                for j in (0..origin).rev() {
                    path[j] = path[j + 1] - inc[j];
                }
                out.copy_from_slice(&path[first..first + self.n]);
            }
        }
    }
}

/// Exact dense sampler `W = L ξ` for any point set of at most [`MAX_DENSE_POINTS`] points.
#[derive(Debug, Clone)]
pub struct CholeskySampler {
    n: usize,
    /// Points with positive variance; the rest are identically zero.
    active: Vec<usize>,
    /// Packed lower-triangular factor, row-major.
    factor: Vec<f64>,
    pub jitter: f64,
}

impl CholeskySampler {
    pub fn from_covariance(points: &PointSet, cov: impl Fn(&[f64], &[f64]) -> f64) -> Result<Self> {
        let n = points.len();
        if n > MAX_DENSE_POINTS {
            return Err(Error::TooManyPoints { points: n, max: MAX_DENSE_POINTS });
        }
        let active: Vec<usize> = (0..n).filter(|&i| cov(points.get(i), points.get(i)) > 0.0).collect();
        let m = active.len();
        let base = DMatrix::from_fn(m, m, |i, j| cov(points.get(active[i]), points.get(active[j])));
        let trace: f64 = (0..m).map(|i| base[(i, i)]).sum();
        let mut last = 0.0;
        for rel in [0.0, 1e-16, 1e-14, 1e-12, 1e-10] {
            let jitter = rel * trace;
            last = jitter;
            let mut a = base.clone();
            for i in 0..m {
                a[(i, i)] += jitter;
            }
            if let Some(ch) = a.cholesky() {
                let l = ch.l();
                let mut factor = Vec::with_capacity(m * (m + 1) / 2);
                for i in 0..m {
                    for j in 0..=i {
                        factor.push(l[(i, j)]);
                    }
                }
                return Ok(Self { n, active, factor, jitter });
            }
        }
        Err(Error::NotPsd { jitter: last })
    }

    pub fn increments(vf: &VarianceFunction, points: &PointSet) -> Result<Self> {
        vf.validate()?;
        Self::from_covariance(points, |s, t| vf.covariance(s, t))
    }

    pub fn stationary(cov: &StationaryCovariance, points: &PointSet) -> Result<Self> {
        cov.validate()?;
        Self::from_covariance(points, |s, t| {
            let h: Vec<f64> = t.iter().zip(s).map(|(a, b)| a - b).collect();
            cov.at_lag(&h)
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn variates_per_path(&self) -> usize {
        self.active.len()
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let m = self.active.len();
        let z: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut row = 0;
        for i in 0..m {
            let coeffs = &self.factor[row..row + i + 1];
            out[self.active[i]] = coeffs.iter().zip(&z).map(|(l, x)| l * x).sum();
            row += i + 1;
        }
    }
}

/// Either exact sampler behind one interface.
#[derive(Debug, Clone)]
pub enum GaussianSampler {
    Circulant(CirculantSampler),
    Cholesky(CholeskySampler),
}

impl GaussianSampler {
    /// Circulant when the grid is 1-d and the embedding is PSD, dense otherwise.
    pub fn for_increments(vf: &VarianceFunction, g: &GridSpec) -> Result<Self> {
        if g.dim == 1 {
            match CirculantSampler::increments(vf, g) {
                Ok(s) => return Ok(Self::Circulant(s)),
                Err(Error::EmbeddingNotPsd { .. }) | Err(Error::InvalidConfig(_)) if vf.validate().is_ok() => {}
                Err(e) => return Err(e),
            }
        }
        Ok(Self::Cholesky(CholeskySampler::increments(vf, &enumerate_points(g)?)?))
    }

    pub fn for_stationary(cov: &StationaryCovariance, g: &GridSpec) -> Result<Self> {
        if g.dim == 1 {
            match CirculantSampler::stationary(cov, g) {
                Ok(s) => return Ok(Self::Circulant(s)),
                Err(Error::EmbeddingNotPsd { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(Self::Cholesky(CholeskySampler::stationary(cov, &enumerate_points(g)?)?))
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Circulant(s) => s.len(),
            Self::Cholesky(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            Self::Circulant(s) => s.sample_into(rng, out),
            Self::Cholesky(s) => s.sample_into(rng, out),
        }
    }
}

/// One path of `W` on a 1-d grid by circulant embedding of the increments.
pub fn sample_path_circulant<R: Rng + ?Sized>(vf: &VarianceFunction, g: &GridSpec, rng: &mut R) -> Result<PathSample> {
    let s = CirculantSampler::increments(vf, g)?;
    let mut values = vec![0.0; s.len()];
    s.sample_into(rng, &mut values);
    Ok(PathSample { points: enumerate_points(g)?, values, kind: PathKind::Gaussian })
}

/// One path of `W` on an explicit point set by dense Cholesky factorization.
pub fn sample_path_cholesky<R: Rng + ?Sized>(
    vf: &VarianceFunction,
    points: &PointSet,
    rng: &mut R,
) -> Result<PathSample> {
    let s = CholeskySampler::increments(vf, points)?;
    let mut values = vec![0.0; s.len()];
    s.sample_into(rng, &mut values);
    Ok(PathSample { points: points.clone(), values, kind: PathKind::Gaussian })
}
