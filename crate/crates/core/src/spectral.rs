//! Nonnegative mean-one spectral fields `Z` and their samplers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::gaussian::{
    CholeskySampler, GaussianSampler, PathKind, PathSample, SphereProfile, StationaryCovariance, VarianceFunction,
};
use crate::grid::{enumerate_points, GridSpec, PointSet};
use crate::kernel::{Kernel, SamplingDensity};
use crate::rng::Replicator;
use crate::stats::{paired_difference, z_score, Summary};

/// `q(z) = a + b z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineProfile {
    pub a: f64,
    pub b: f64,
}

impl AffineProfile {
    pub fn at(&self, z: f64) -> f64 {
        self.a + self.b * z
    }
}

/// A family `z ↦ σ_z²`, `z ∈ [0, 1]`, of variance functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilySpec {
    /// `σ_z = |q(z)| σ_base`.
    Scaled { q: AffineProfile, base: VarianceFunction },
    /// `σ_z²(t) = (tᵀ A(z) t)^{λ/2}` with `A(z)` interpolating linearly between two
    /// elliptic profiles.
    NormSphere { lambda: f64, at_zero: SphereProfile, at_one: SphereProfile },
}

/// Outcome of the per-node regularity checks of a family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyNodeCheck {
    pub z: f64,
    pub nu0: f64,
    pub nu_inf: f64,
    pub c0: f64,
    pub c_inf: f64,
    /// Largest relative change of `σ_z(t)` under a `1e-6` perturbation of `z`.
    pub continuity_gap: f64,
    /// Whether `σ_z²(t) / ln‖t‖ > 8d` at `‖t‖ = 10⁶` (sufficient for positivity).
    pub positivity_sufficient: bool,
    pub degenerate: bool,
}

pub const FAMILY_CONTINUITY_TOL: f64 = 1e-3;

impl FamilySpec {
    pub fn member(&self, z: f64) -> Result<VarianceFunction> {
        match self {
            FamilySpec::Scaled { q, base } => Ok(VarianceFunction::scaled(q.at(z).abs(), base.clone())),
            FamilySpec::NormSphere { lambda, at_zero, at_one } => {
                let profile = match (at_zero, at_one) {
                    (
                        SphereProfile::Elliptic { a11: p, a12: q, a22: r },
                        SphereProfile::Elliptic { a11: p1, a12: q1, a22: r1 },
                    ) => SphereProfile::Elliptic {
                        a11: p + z * (p1 - p),
                        a12: q + z * (q1 - q),
                        a22: r + z * (r1 - r),
                    },
                    (SphereProfile::Constant { value: v0 }, SphereProfile::Constant { value: v1 }) => {
                        SphereProfile::Constant { value: v0 + z * (v1 - v0) }
                    }
                    _ => return Err(config_err("both sphere profiles of a family must have the same shape")),
                };
                Ok(VarianceFunction::NormSphere { lambda: *lambda, profile })
            }
        }
    }

    /// Scalar form `σ_z = s(z) σ_ref` when the family is a pure rescaling in one dimension.
    fn as_scaled(&self, dim: usize) -> Option<(VarianceFunction, Box<dyn Fn(f64) -> f64 + Send + Sync>)> {
        match self.clone() {
            FamilySpec::Scaled { q, base } => Some((base, Box::new(move |z| q.at(z).abs()))),
            FamilySpec::NormSphere { lambda, at_zero, at_one } if dim == 1 => {
                let r0 = match at_zero {
                    SphereProfile::Elliptic { a11, .. } => a11.powf(lambda / 2.0),
                    SphereProfile::Constant { value } => value,
                };
                let r1 = match at_one {
                    SphereProfile::Elliptic { a11, .. } => a11.powf(lambda / 2.0),
                    SphereProfile::Constant { value } => value,
                };
                let elliptic = matches!(at_zero, SphereProfile::Elliptic { .. });
                let (a0, a1) = match (at_zero, at_one) {
                    (SphereProfile::Elliptic { a11: x, .. }, SphereProfile::Elliptic { a11: y, .. }) => (x, y),
                    _ => (0.0, 0.0),
                };
                let base = VarianceFunction::fbm(lambda / 2.0, 1.0);
                Some((
                    base,
                    Box::new(move |z| {
                        let r = if elliptic { (a0 + z * (a1 - a0)).max(0.0).powf(lambda / 2.0) } else { r0 + z * (r1 - r0) };
                        r.max(0.0).sqrt()
                    }),
                ))
            }
            _ => None,
        }
    }

    pub fn check_at(&self, z: f64, dim: usize) -> Result<FamilyNodeCheck> {
        if !(0.0..=1.0).contains(&z) {
            return Err(Error::FamilyInvalid { z, reason: "node outside [0, 1]".into() });
        }
        let vf = self.member(z)?;
        vf.validate().map_err(|e| Error::FamilyInvalid { z, reason: e.to_string() })?;
        let g = vf.growth();
        if !vf.is_degenerate() && !g.exponents_admissible() {
            return Err(Error::FamilyInvalid { z, reason: format!("growth exponents {g:?} outside (0, 2]") });
        }
        let eps = 1e-6;
        let zn = if z + eps <= 1.0 { z + eps } else { z - eps };
        let near = self.member(zn)?;
        let mut gap: f64 = 0.0;
        for r in [0.1, 0.5, 1.0, 2.0, 5.0] {
            let t: Vec<f64> = std::iter::once(r).chain(std::iter::repeat(0.3 * r)).take(dim).collect();
            let (a, b) = (vf.variance_at(&t).sqrt(), near.variance_at(&t).sqrt());
            gap = gap.max((a - b).abs() / (1.0 + a));
        }
        if gap > FAMILY_CONTINUITY_TOL {
            return Err(Error::FamilyInvalid { z, reason: format!("σ_z jumps by {gap:e} under a 1e-6 change of z") });
        }
        let far: Vec<f64> = std::iter::once(1e6).chain(std::iter::repeat(0.0)).take(dim).collect();
        Ok(FamilyNodeCheck {
            z,
            nu0: g.nu0,
            nu_inf: g.nu_inf,
            c0: g.c0,
            c_inf: g.c_inf,
            continuity_gap: gap,
            positivity_sufficient: vf.variance_at(&far) / 1e6f64.ln() > 8.0 * dim as f64,
            degenerate: vf.is_degenerate(),
        })
    }
}

/// Recipe for a nonnegative, mean-one field `Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum SpectralFieldSpec {
    /// `Z(t) = exp(W(t) - σ²(t)/2)`.
    LogGaussian { vf: VarianceFunction },
    /// `Z(t) = L(t - N) / p(N)`, `N ~ p`.
    Kernel {
        kernel: Kernel,
        #[serde(default)]
        density: SamplingDensity,
    },
    /// `Z = Z_U` for `U ~ Uniform[0, 1]` independent of the Gaussian path.
    Family { family: FamilySpec },
    /// `Z(t) = V / p`, `V ~ Bernoulli(p)`, constant in `t`.
    Bernoulli { p: f64 },
    /// `Z(t) = exp(X(t) - Var X / 2)` for a stationary Gaussian `X`.
    StationaryLogGaussian { cov: StationaryCovariance },
}

impl SpectralFieldSpec {
    pub fn log_gaussian(vf: VarianceFunction) -> Self {
        Self::LogGaussian { vf }
    }

    pub fn kernel(kernel: Kernel) -> Self {
        Self::Kernel { kernel, density: SamplingDensity::default() }
    }

    pub fn kernel_with_density(kernel: Kernel, density: SamplingDensity) -> Self {
        Self::Kernel { kernel, density }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::LogGaussian { vf } => vf.validate(),
            Self::Kernel { kernel, density } => {
                density.validate()?;
                kernel.validate()
            }
            Self::Family { family } => family.check_at(0.5, 1).map(|_| ()),
            Self::Bernoulli { p } if *p > 0.0 && *p < 1.0 => Ok(()),
            Self::Bernoulli { p } => Err(config_err(format!("Bernoulli parameter must lie in (0, 1), got {p}"))),
            Self::StationaryLogGaussian { cov } => cov.validate(),
        }
    }

    /// True when `P(Z(0) > 0) = 1`.
    pub fn origin_positive(&self) -> bool {
        matches!(self, Self::LogGaussian { .. } | Self::Family { .. } | Self::StationaryLogGaussian { .. })
    }

    /// True when the law of `Z` is invariant under shifts (not just its sup-expectations).
    pub fn is_stationary(&self) -> bool {
        matches!(self, Self::Bernoulli { .. } | Self::StationaryLogGaussian { .. })
    }

    pub fn sampler_on_grid(&self, g: &GridSpec) -> Result<FieldSampler> {
        self.validate()?;
        let points = enumerate_points(g)?;
        let inner = match self {
            Self::LogGaussian { vf } => {
                if vf.is_degenerate() {
                    Inner::Constant
                } else {
                    Inner::LogGaussian { gauss: GaussianSampler::for_increments(vf, g)?, half_var: half_vars(vf, &points) }
                }
            }
            Self::StationaryLogGaussian { cov } => {
                Inner::Stationary { gauss: GaussianSampler::for_stationary(cov, g)?, half_var: 0.5 * cov.variance }
            }
            Self::Family { family } => {
                let (base, scale) = family
                    .as_scaled(g.dim)
                    .ok_or_else(|| config_err("mixture sampling needs a family that rescales one base field"))?;
                Inner::Mixture {
                    gauss: GaussianSampler::for_increments(&base, g)?,
                    half_var: half_vars(&base, &points),
                    scale,
                }
            }
            _ => self.simple_inner(&points)?,
        };
        Ok(FieldSampler { points, inner })
    }

    /// Sampler on an arbitrary point set; Gaussian variants use the dense sampler.
    pub fn sampler_on_points(&self, points: &PointSet) -> Result<FieldSampler> {
        self.validate()?;
        let inner = match self {
            Self::LogGaussian { vf } => {
                if vf.is_degenerate() {
                    Inner::Constant
                } else {
                    Inner::LogGaussian {
                        gauss: GaussianSampler::Cholesky(CholeskySampler::increments(vf, points)?),
                        half_var: half_vars(vf, points),
                    }
                }
            }
            Self::StationaryLogGaussian { cov } => Inner::Stationary {
                gauss: GaussianSampler::Cholesky(CholeskySampler::stationary(cov, points)?),
                half_var: 0.5 * cov.variance,
            },
            Self::Family { family } => {
                let (base, scale) = family
                    .as_scaled(points.dim)
                    .ok_or_else(|| config_err("mixture sampling needs a family that rescales one base field"))?;
                Inner::Mixture {
                    gauss: GaussianSampler::Cholesky(CholeskySampler::increments(&base, points)?),
                    half_var: half_vars(&base, points),
                    scale,
                }
            }
            _ => self.simple_inner(points)?,
        };
        Ok(FieldSampler { points: points.clone(), inner })
    }

    fn simple_inner(&self, points: &PointSet) -> Result<Inner> {
        match self {
            Self::Kernel { kernel, density } => {
                if points.dim != 1 {
                    return Err(config_err("kernel fields are one-dimensional"));
                }
                Ok(Inner::Kernel { kernel: kernel.clone(), density: *density })
            }
            Self::Bernoulli { p } => Ok(Inner::Bernoulli { p: *p }),
            _ => unreachable!("Gaussian variants are handled by the callers"),
        }
    }
}

fn half_vars(vf: &VarianceFunction, points: &PointSet) -> Vec<f64> {
    points.iter().map(|t| 0.5 * vf.variance_at(t)).collect()
}

enum Inner {
    LogGaussian { gauss: GaussianSampler, half_var: Vec<f64> },
    Stationary { gauss: GaussianSampler, half_var: f64 },
    Mixture { gauss: GaussianSampler, half_var: Vec<f64>, scale: Box<dyn Fn(f64) -> f64 + Send + Sync> },
    Kernel { kernel: Kernel, density: SamplingDensity },
    Bernoulli { p: f64 },
    Constant,
}

/// Side information of one draw.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Draw {
    /// Kernel location `N`, for kernel fields.
    pub location: Option<f64>,
    /// Mixture index `U`, for family fields.
    pub family_z: Option<f64>,
}

/// Prepared sampler of `Z` on a fixed point set.
pub struct FieldSampler {
    points: PointSet,
    inner: Inner,
}

impl std::fmt::Debug for FieldSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FieldSampler").field("points", &self.points.len()).finish_non_exhaustive()
    }
}

impl FieldSampler {
    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> Draw {
        match &self.inner {
            Inner::LogGaussian { gauss, half_var } => {
                gauss.sample_into(rng, out);
                for (z, hv) in out.iter_mut().zip(half_var) {
                    *z = (*z - hv).exp();
                }
                Draw::default()
            }
            Inner::Stationary { gauss, half_var } => {
                gauss.sample_into(rng, out);
                for z in out.iter_mut() {
                    *z = (*z - half_var).exp();
                }
                Draw::default()
            }
            Inner::Mixture { gauss, half_var, scale } => {
                let u: f64 = rng.random();
                let q = scale(u);
                gauss.sample_into(rng, out);
                for (z, hv) in out.iter_mut().zip(half_var) {
                    *z = (q * *z - q * q * hv).exp();
                }
                Draw { family_z: Some(u), ..Draw::default() }
            }
            Inner::Kernel { kernel, density } => {
                let n = density.sample(rng);
                let w = 1.0 / density.pdf(n);
                for (z, t) in out.iter_mut().zip(self.points.iter()) {
                    *z = kernel.eval(t[0] - n) * w;
                }
                Draw { location: Some(n), ..Draw::default() }
            }
            Inner::Bernoulli { p } => {
                let v = if rng.random::<f64>() < *p { 1.0 / p } else { 0.0 };
                out.iter_mut().for_each(|z| *z = v);
                Draw::default()
            }
            Inner::Constant => {
                out.iter_mut().for_each(|z| *z = 1.0);
                Draw::default()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PathSample {
        let mut values = vec![0.0; self.len()];
        self.sample_into(rng, &mut values);
        PathSample { points: self.points.clone(), values, kind: PathKind::Spectral }
    }

    /// `sup_{t ∈ R} Z(t)` of a kernel draw: `sup L / p(N)`.
    pub fn global_sup(&self, draw: &Draw) -> Option<f64> {
        match (&self.inner, draw.location) {
            (Inner::Kernel { kernel, density }, Some(n)) => Some(kernel.sup() / density.pdf(n)),
            _ => None,
        }
    }

    /// A bound `B` with `Z(t) ≤ B` on every point of this sampler for every draw.
    pub fn uniform_bound(&self) -> Option<f64> {
        match &self.inner {
            Inner::Kernel { kernel, density } if kernel.has_compact_support() => {
                let (lo, hi) = kernel.support();
                let xs = self.points.coords();
                let xmin = xs.iter().cloned().fold(f64::INFINITY, f64::min);
                let xmax = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                Some(kernel.sup() / density.min_on(xmin - hi, xmax - lo))
            }
            Inner::Bernoulli { p } => Some(1.0 / p),
            Inner::Constant => Some(1.0),
            _ => None,
        }
    }
}

/// One draw of `Z` on the grid.
pub fn sample_spectral<R: Rng + ?Sized>(spec: &SpectralFieldSpec, g: &GridSpec, rng: &mut R) -> Result<PathSample> {
    Ok(spec.sampler_on_grid(g)?.sample(rng))
}

/// Per-point z-scores of the empirical mean of `Z(t)` against 1.
pub fn check_mean_one(spec: &SpectralFieldSpec, points: &PointSet, reps: usize, runner: &Replicator) -> Result<Vec<f64>> {
    if reps < 1000 {
        return Err(config_err("the mean-one check needs at least 1000 replications"));
    }
    let sampler = spec.sampler_on_points(points)?;
    let rows = runner.run(reps, |_, rng| {
        let mut z = vec![0.0; sampler.len()];
        sampler.sample_into(rng, &mut z);
        Ok(z)
    })?;
    Ok((0..points.len())
        .map(|i| {
            let col: Vec<f64> = rows.iter().map(|r| r[i]).collect();
            Summary::of(&col).z_against(1.0)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftCheck {
    pub shifted: Summary,
    pub base: Summary,
    pub difference: Summary,
    pub z: f64,
}

/// Compares `E sup_{K∩δZ^d} Z(t + c)` with `E sup_{K∩δZ^d} Z(t)` for `K = [0, T]^d`, on paired draws.
pub fn check_shift_invariance(
    spec: &SpectralFieldSpec,
    horizon: f64,
    shift: &[f64],
    delta: f64,
    reps: usize,
    runner: &Replicator,
) -> Result<ShiftCheck> {
    let g = GridSpec::boxed(shift.len(), delta, horizon)?;
    let base = enumerate_points(&g)?;
    let moved = base.shifted(shift);
    let n = base.len();
    let mut all = base.coords().to_vec();
    all.extend_from_slice(moved.coords());
    let sampler = spec.sampler_on_points(&PointSet::new(g.dim, all)?)?;
    let pairs = runner.run(reps, |_, rng| {
        let mut z = vec![0.0; 2 * n];
        sampler.sample_into(rng, &mut z);
        let m0 = z[..n].iter().cloned().fold(0.0, f64::max);
        let m1 = z[n..].iter().cloned().fold(0.0, f64::max);
        Ok((m1, m0))
    })?;
    let shifted: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let unshifted: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let difference = paired_difference(&shifted, &unshifted);
    Ok(ShiftCheck {
        shifted: Summary::of(&shifted),
        base: Summary::of(&unshifted),
        z: z_score(difference.mean, difference.stderr),
        difference,
    })
}
