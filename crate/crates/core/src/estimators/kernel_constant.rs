use serde::{Deserialize, Serialize};

use super::result::{fingerprint, EstimateResult};
use crate::error::{config_err, Error, Result};
use crate::grid::steps;
use crate::kernel::Kernel;
use crate::quadrature::{integrate, QuadConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelQuadConfig {
    /// Stop the dyadic refinement once successive values differ by less than this.
    pub tol: f64,
    /// Tail mass allowed outside the integration box.
    pub tail_tol: f64,
    /// Box `[-margin, T + margin]`; chosen from the kernel tails when absent.
    #[serde(default)]
    pub margin: Option<f64>,
    pub max_level: u32,
}

impl Default for KernelQuadConfig {
    fn default() -> Self {
        Self { tol: 1e-8, tail_tol: 1e-10, margin: None, max_level: 14 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DyadicRow {
    pub delta: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelConstant {
    pub result: EstimateResult,
    /// `H^{2^{-n}}` for `n = 0, 1, ...` when the continuum was requested.
    pub dyadic: Vec<DyadicRow>,
    /// Value with the supremum taken over all of `[0, T]`.
    pub continuum: Option<f64>,
}

/// `T^{-1} ∫ sup_{t ∈ [0, T] ∩ δZ} L(z - t) dz`; `delta = 0` refines dyadically.
pub fn kernel_constant(kernel: &Kernel, delta: f64, horizon: f64, cfg: &KernelQuadConfig) -> Result<KernelConstant> {
    let started = std::time::Instant::now();
    kernel.validate()?;
    if !(delta >= 0.0 && horizon > 0.0) {
        return Err(config_err("kernel constant needs delta >= 0 and T > 0"));
    }
    let (lo, hi) = match cfg.margin {
        Some(m) => (-m, m),
        None => kernel.effective_support(cfg.tail_tol),
    };
    let tail = kernel.tail_mass_outside(lo, hi);
    if tail > cfg.tail_tol {
        return Err(Error::NonIntegrable { tail_mass: tail, tol: cfg.tail_tol });
    }
    let box_ = (lo, horizon + hi);
    let fp = fingerprint(&("kernel", kernel, delta, horizon, cfg));
    if delta > 0.0 {
        let v = lattice_value(kernel, delta, horizon, box_)?;
        return Ok(KernelConstant { result: EstimateResult::exact(v, fp, started), dyadic: Vec::new(), continuum: None });
    }
    let mut dyadic: Vec<DyadicRow> = Vec::new();
    let mut converged = false;
    for n in 0..=cfg.max_level {
        let d = 0.5f64.powi(n as i32);
        let value = lattice_value(kernel, d, horizon, box_)?;
        if let Some(prev) = dyadic.last() {
            if (value - prev.value).abs() < cfg.tol {
                converged = true;
            }
        }
        dyadic.push(DyadicRow { delta: d, value });
        if converged {
            break;
        }
    }
    let continuum = continuum_value(kernel, horizon, box_);
    let mut result = EstimateResult::exact(dyadic.last().map(|r| r.value).unwrap_or(continuum), fp, started);
    result.continuum_proxy = true;
    if !converged {
        result.notes.push(format!("dyadic refinement did not settle within {} levels", cfg.max_level));
    }
    Ok(KernelConstant { result, dyadic, continuum: Some(continuum) })
}

fn quad_cfg() -> QuadConfig {
    QuadConfig { abs_tol: 1e-11, rel_tol: 1e-12, max_panels: 2_000_000 }
}

fn lattice_value(kernel: &Kernel, delta: f64, horizon: f64, (a, b): (f64, f64)) -> Result<f64> {
    let kmax = steps(horizon, delta);
    if kmax > 50_000_000 {
        return Err(config_err("lattice too fine for the kernel quadrature"));
    }
    let kb = kernel.breakpoints();
    let mut breaks = Vec::with_capacity((kmax as usize + 1) * (kb.len() + 1));
    for k in 0..=kmax {
        let t = delta * k as f64;
        breaks.extend(kb.iter().map(|b| t + b));
        breaks.push(t + 0.5 * delta);
    }
    let out = integrate(|z| kernel.lattice_sup(z, delta, 0, kmax), a, b, &breaks, quad_cfg());
    Ok(out.value / horizon)
}

fn continuum_value(kernel: &Kernel, horizon: f64, (a, b): (f64, f64)) -> f64 {
    let mut breaks: Vec<f64> = kernel.breakpoints();
    breaks.extend(kernel.breakpoints().iter().map(|x| x + horizon));
    breaks.extend([0.0, horizon]);
    integrate(|z| kernel.sup_on_interval(z - horizon, z), a, b, &breaks, quad_cfg()).value / horizon
}

/// `∫ L(s) / (η Σ_{k ∈ Z} L(s + kη)) ds`, which equals 1 for every `η > 0`.
pub fn fubini_identity(kernel: &Kernel, eta: f64) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(config_err("fubini identity needs eta > 0"));
    }
    kernel.validate()?;
    let (lo, hi) = kernel.effective_support(1e-17);
    let lattice_sum = |s: f64| -> f64 {
        let first = ((lo - s) / eta).floor() as i64;
        let last = ((hi - s) / eta).ceil() as i64;
        (first..=last).map(|k| kernel.eval(s + eta * k as f64)).sum::<f64>() * eta
    };
    // the identity needs every shift of the lattice to meet the support of L
    for i in 0..4096 {
        let s = eta * (i as f64 + 0.5) / 4096.0;
        if lattice_sum(s) <= 0.0 {
            return Err(Error::InvalidKernel(format!("the lattice {s:.4} + {eta}Z misses the support of the kernel")));
        }
    }
    let kb = kernel.breakpoints();
    let mut breaks = Vec::new();
    let kmax = ((hi - lo) / eta).ceil() as i64 + 1;
    for k in -kmax..=kmax {
        breaks.extend(kb.iter().map(|b| b - eta * k as f64));
    }
    let mut vanished = None;
    let out = integrate(
        |s| {
            let l = kernel.eval(s);
            if l == 0.0 {
                return 0.0;
            }
            let d = lattice_sum(s);
            if d <= 0.0 {
                vanished.get_or_insert(s);
                return 0.0;
            }
            l / d
        },
        lo,
        hi,
        &breaks,
        QuadConfig { abs_tol: 1e-13, rel_tol: 1e-13, max_panels: 400_000 },
    );
    if let Some(s) = vanished {
        return Err(Error::InvalidKernel(format!("lattice sum vanishes at {s}")));
    }
    Ok(out.value)
}
