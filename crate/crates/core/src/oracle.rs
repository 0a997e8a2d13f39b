//! Closed forms and brute-force references for validating the fast paths.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::estimators::{kernel_constant, KernelQuadConfig};
use crate::gaussian::CholeskySampler;
use crate::grid::PointSet;
use crate::kernel::Kernel;
use crate::rng::{salt, Replicator};
use crate::spectral::SpectralFieldSpec;
use crate::stats::{normal_cdf, Summary};

const ROOT_2PI: f64 = 2.506_628_274_631_000_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    ClosedForm,
    DenseCholeskyMc,
    FineQuadrature,
    CoverageMeasure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub name: String,
    pub reference_value: f64,
    pub method: OracleMethod,
    pub tolerance: f64,
    /// Monte Carlo standard error, for simulated references.
    #[serde(default)]
    pub stderr: Option<f64>,
}

impl OracleReport {
    fn closed(name: &str, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), reference_value: value, method: OracleMethod::ClosedForm, tolerance, stderr: None }
    }

    pub fn accepts(&self, value: f64) -> bool {
        (value - self.reference_value).abs() <= self.tolerance
    }
}

/// `E[sup Z / ∫ Z]` for `Z(t) = exp(c t ξ - c² t² / 2)`, which is `c / √(2π)`.
pub fn hurst1_closed_form(c: f64) -> f64 {
    c / ROOT_2PI
}

/// Lebesgue measure of `∪_{t ∈ [0,T] ∩ δZ} [t, t + 1]`; `delta = 0` means all of `[0, T]`.
pub fn kernel_coverage_measure(delta: f64, horizon: f64) -> f64 {
    if delta == 0.0 {
        return horizon + 1.0;
    }
    let n = crate::grid::steps(horizon, delta);
    let mut total = 0.0;
    let mut reach = f64::NEG_INFINITY;
    for k in 0..=n {
        let (a, b) = (delta * k as f64, delta * k as f64 + 1.0);
        total += b - a.max(reach).min(b);
        reach = reach.max(b);
    }
    total
}

/// `exp(-E max(Z(0), Z(s)))` for `Z(t) = exp(c t ξ - c² t² / 2)`, which is `exp(-2Φ(cs/2))`.
pub fn lognormal_two_point(c: f64, s: f64) -> f64 {
    (-2.0 * normal_cdf(c * s / 2.0)).exp()
}

/// `H^δ` of `Z(t) = exp(√2 B(t) - |t|)` for two-sided Brownian `B`:
/// `δ^{-1} exp(-2 Σ_{k≥1} Φ̄(√(kδ/2)) / k)`.
pub fn brownian_discrete_pickands(delta: f64) -> f64 {
    assert!(delta > 0.0);
    let mut sum = 0.0;
    for k in 1..10_000_000u64 {
        let term = normal_cdf(-(k as f64 * delta / 2.0).sqrt()) / k as f64;
        sum += term;
        if term < 1e-18 {
            break;
        }
    }
    (-2.0 * sum).exp() / delta
}

/// Locally stationary constant of `σ_z = |a + b z| c t` over `z ∈ [0, 1]`.
pub fn affine_linear_family(a: f64, b: f64, c: f64) -> f64 {
    // ∫_0^1 |a + b z| dz
    let integral = if b == 0.0 {
        a.abs()
    } else {
        let f = |z: f64| (a + b * z) * (a + b * z).abs() / (2.0 * b);
        let root = -a / b;
        if (0.0..=1.0).contains(&root) {
            (f(root) - f(0.0)).abs() + (f(1.0) - f(root)).abs()
        } else {
            (f(1.0) - f(0.0)).abs()
        }
    };
    integral * hurst1_closed_form(c)
}

/// Target of a brute-force reference run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "target", rename_all = "snake_case")]
pub enum OracleTarget {
    /// Ratio estimator on `[-R, R] ∩ hZ` with `delta`, `eta` multiples of `mesh` (0 = mesh / Riemann).
    Dy { delta: f64, eta: f64, window: f64, mesh: f64 },
    /// `T^{-1} E max_{[0,T] ∩ δZ} Z`.
    Direct { horizon: f64, delta: f64 },
}

fn lattice(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as i64;
    (0..=n).map(|k| lo + step * k as f64).collect()
}

fn on_lattice(x: f64, step: f64) -> bool {
    step == 0.0 || ((x / step) - (x / step).round()).abs() < 1e-9
}

/// Recomputes an estimator with a dense sampler and a plain reduction (one dimension).
pub fn dense_mc_reference(spec: &SpectralFieldSpec, target: OracleTarget, reps: usize, runner: &Replicator) -> Result<OracleReport> {
    let xs = match target {
        OracleTarget::Dy { window, mesh, .. } => lattice(-window, window, mesh),
        OracleTarget::Direct { horizon, delta } => lattice(0.0, horizon, delta),
    };
    let points = PointSet::from_1d(&xs);
    enum Draw {
        Dense(CholeskySampler, Vec<f64>),
        Other(crate::spectral::FieldSampler),
    }
    let draw = match spec {
        SpectralFieldSpec::LogGaussian { vf } => {
            let half: Vec<f64> = xs.iter().map(|x| 0.5 * vf.variance_at(&[*x])).collect();
            Draw::Dense(CholeskySampler::increments(vf, &points)?, half)
        }
        _ => Draw::Other(spec.sampler_on_points(&points)?),
    };
    let runner = runner.with_salt(salt::ORACLE);
    let values = runner.run(reps, |_, rng| {
        let mut z = vec![0.0; xs.len()];
        match &draw {
            Draw::Dense(s, half) => {
                s.sample_into(rng, &mut z);
                for i in 0..z.len() {
                    z[i] = (z[i] - half[i]).exp();
                }
            }
            Draw::Other(s) => {
                s.sample_into(rng, &mut z);
            }
        }
        Ok(match target {
            OracleTarget::Direct { horizon, .. } => {
                let mut m = 0.0f64;
                for v in &z {
                    if *v > m {
                        m = *v;
                    }
                }
                m / horizon
            }
            OracleTarget::Dy { delta, eta, window, mesh } => {
                let mut z0 = 0.0;
                let mut sup = 0.0f64;
                let mut sum = 0.0;
                for (x, v) in xs.iter().zip(&z) {
                    if x.abs() < 0.5 * mesh {
                        z0 = *v;
                    }
                    if on_lattice(*x, delta) {
                        sup = sup.max(*v);
                    }
                    if eta == 0.0 {
                        if *x < window - 0.5 * mesh {
                            sum += v * mesh;
                        }
                    } else if on_lattice(*x, eta) {
                        sum += v * eta;
                    }
                }
                if z0 == 0.0 {
                    0.0
                } else {
                    z0 * sup / sum
                }
            }
        })
    })?;
    let s = Summary::of(&values);
    if !s.mean.is_finite() {
        return Err(config_err("reference run produced a non-finite mean"));
    }
    Ok(OracleReport {
        name: format!("dense reference for {target:?}"),
        reference_value: s.mean,
        method: OracleMethod::DenseCholeskyMc,
        tolerance: 4.0 * s.stderr,
        stderr: Some(s.stderr),
    })
}

/// Exact expectation of the direct estimator for a kernel field, by quadrature.
pub fn kernel_direct_reference(kernel: &Kernel, delta: f64, horizon: f64) -> Result<OracleReport> {
    let v = kernel_constant(kernel, delta, horizon, &KernelQuadConfig::default())?;
    Ok(OracleReport {
        name: format!("kernel direct, delta={delta}, T={horizon}"),
        reference_value: v.result.estimate,
        method: OracleMethod::FineQuadrature,
        tolerance: 1e-8,
        stderr: None,
    })
}

/// Reference values with known closed forms.
pub fn catalogue() -> Vec<OracleReport> {
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut v = vec![
        OracleReport::closed("hurst1 c=sqrt2", hurst1_closed_form(sqrt2), 1e-12),
        OracleReport::closed("hurst1 c=1", hurst1_closed_form(1.0), 1e-12),
        OracleReport::closed("gaussian kernel sup", 1.0 / ROOT_2PI, 1e-12),
        OracleReport::closed("lognormal two-point c=1 s=1", lognormal_two_point(1.0, 1.0), 1e-12),
        OracleReport::closed("affine family 1+z", affine_linear_family(1.0, 1.0, 1.0), 1e-12),
        OracleReport::closed("affine family z", affine_linear_family(0.0, 1.0, 1.0), 1e-12),
        OracleReport::closed("frechet cdf at 1", (-1f64).exp(), 1e-12),
        OracleReport::closed("brownian discrete delta=1/16", brownian_discrete_pickands(0.0625), 1e-10),
    ];
    for (delta, horizon) in [(0.5, 10.0), (2.0, 10.0), (1.0, 0.0)] {
        v.push(OracleReport {
            name: format!("indicator coverage delta={delta} T={horizon}"),
            reference_value: kernel_coverage_measure(delta, horizon),
            method: OracleMethod::CoverageMeasure,
            tolerance: 1e-12,
            stderr: None,
        });
    }
    v
}
