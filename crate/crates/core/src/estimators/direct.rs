use serde::{Deserialize, Serialize};

use super::result::{fingerprint, EstimateResult};
use crate::error::{config_err, Result};
use crate::grid::GridSpec;
use crate::rng::Replicator;
use crate::spectral::SpectralFieldSpec;
use crate::stats::Summary;

pub const MIN_REPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectConfig {
    #[serde(default = "one")]
    pub dim: usize,
    pub horizon: f64,
    pub delta: f64,
    /// `delta` stands in for the continuum.
    #[serde(default)]
    pub continuum_proxy: bool,
}

fn one() -> usize {
    1
}

impl DirectConfig {
    pub fn new(horizon: f64, delta: f64) -> Self {
        Self { dim: 1, horizon, delta, continuum_proxy: false }
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::boxed(self.dim, self.delta, self.horizon)
    }
}

/// Mean over replications of `T^{-d} max_{[0,T]^d ∩ δZ^d} Z`.
pub fn estimate_h_direct(
    spec: &SpectralFieldSpec,
    cfg: &DirectConfig,
    reps: usize,
    runner: &Replicator,
) -> Result<EstimateResult> {
    let started = std::time::Instant::now();
    if reps < MIN_REPS {
        return Err(config_err(format!("direct estimator needs at least {MIN_REPS} replications")));
    }
    let g = cfg.grid()?;
    let sampler = spec.sampler_on_grid(&g)?;
    let scale = cfg.horizon.powi(cfg.dim as i32).recip();
    let values = runner.run(reps, |_, rng| {
        let mut z = vec![0.0; sampler.len()];
        sampler.sample_into(rng, &mut z);
        Ok(z.iter().cloned().fold(0.0, f64::max) * scale)
    })?;
    let fp = fingerprint(&("direct", spec, cfg, reps, runner.seed));
    let mut out = EstimateResult::from_summary(Summary::of(&values), fp, started);
    out.continuum_proxy = cfg.continuum_proxy;
    if let SpectralFieldSpec::LogGaussian { vf } = spec {
        if vf.is_degenerate() {
            out.notes.push("degenerate field: Z is identically 1".into());
        }
    }
    Ok(out)
}
