use serde::{Deserialize, Serialize};

use super::direct::MIN_REPS;
use crate::error::{config_err, Result};
use crate::grid::{integer_ratio, GridSpec};
use crate::rng::Replicator;
use crate::spectral::SpectralFieldSpec;
use crate::stats::{z_score, Summary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubadditivityCheck {
    /// `a(T1)`, `E max` over `[0, T1]`.
    pub first: Summary,
    /// `a(T2)`, estimated on `[T1, T1 + T2]`.
    pub second: Summary,
    /// `a(T1 + T2)`.
    pub joint: Summary,
    /// Per-path `max_{[0,T1+T2]} - max_{[0,T1]} - max_{[T1,T1+T2]}`.
    pub excess: Summary,
    /// `excess.mean / excess.stderr`; subadditivity means this is not significantly positive.
    pub z: f64,
}

impl SubadditivityCheck {
    pub fn holds(&self, z_tol: f64) -> bool {
        self.z <= z_tol
    }
}

/// `a(T1 + T2) ≤ a(T1) + a(T2)` with one path per replication over `[0, T1 + T2]`.
///
/// The second horizon is read off the shifted block `[T1, T1 + T2]`, which has the
/// same expected maximum as `[0, T2]` because sup-expectations are shift invariant.
pub fn subadditivity_check(
    spec: &SpectralFieldSpec,
    t1: f64,
    t2: f64,
    delta: f64,
    reps: usize,
    runner: &Replicator,
) -> Result<SubadditivityCheck> {
    if reps < MIN_REPS {
        return Err(config_err(format!("subadditivity check needs at least {MIN_REPS} replications")));
    }
    let k1 = integer_ratio(t1, delta).ok_or_else(|| config_err("T1 must be a multiple of delta"))? as usize;
    integer_ratio(t2, delta).ok_or_else(|| config_err("T2 must be a multiple of delta"))?;
    let g = GridSpec::boxed(1, delta, t1 + t2)?;
    let sampler = spec.sampler_on_grid(&g)?;
    let rows = runner.run(reps, |_, rng| {
        let mut z = vec![0.0; sampler.len()];
        sampler.sample_into(rng, &mut z);
        let max = |s: &[f64]| s.iter().cloned().fold(0.0, f64::max);
        Ok([max(&z[..=k1]), max(&z[k1..]), max(&z)])
    })?;
    let col = |i: usize| rows.iter().map(|r| r[i]).collect::<Vec<f64>>();
    let excess: Vec<f64> = rows.iter().map(|r| r[2] - r[0] - r[1]).collect();
    let excess = Summary::of(&excess);
    Ok(SubadditivityCheck {
        first: Summary::of(&col(0)),
        second: Summary::of(&col(1)),
        joint: Summary::of(&col(2)),
        z: z_score(excess.mean, excess.stderr),
        excess,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Kernel, SamplingDensity};
    use crate::VarianceFunction;

    #[test]
    fn indicator_values() {
        let spec = SpectralFieldSpec::kernel_with_density(Kernel::IndicatorUnit, SamplingDensity::Normal { scale: 5.0 });
        let c = subadditivity_check(&spec, 5.0, 5.0, 0.5, 40_000, &Replicator::new(1)).unwrap();
        assert!(c.first.z_against(6.0).abs() < 4.0, "{c:?}");
        assert!(c.second.z_against(6.0).abs() < 4.0, "{c:?}");
        assert!(c.joint.z_against(11.0).abs() < 4.0, "{c:?}");
        assert!(c.holds(4.0));
    }

    #[test]
    fn linear_field_is_subadditive() {
        let spec = SpectralFieldSpec::log_gaussian(VarianceFunction::linear(2f64.sqrt()));
        let c = subadditivity_check(&spec, 2.0, 3.0, 0.1, 5000, &Replicator::new(2)).unwrap();
        assert!(c.holds(4.0), "{c:?}");
        assert!(c.excess.mean <= 0.0);
    }
}
