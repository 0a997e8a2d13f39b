use serde::{Deserialize, Serialize};

use super::direct::MIN_REPS;
use super::result::{fingerprint, EstimateResult};
use crate::error::{config_err, Result};
use crate::grid::{integer_ratio, GridSpec};
use crate::rng::Replicator;
use crate::spectral::SpectralFieldSpec;
use crate::stats::{paired_difference, Summary};

/// Estimator applied at every `delta` of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "estimator", rename_all = "snake_case")]
pub enum SweepEstimator {
    /// `T^{-d} max` over `[0, T]^d`.
    Direct { dim: usize, horizon: f64 },
    /// Ratio estimator with `eta = delta` on `[-R, R]^d`.
    Dy { dim: usize, window: f64 },
}

impl SweepEstimator {
    fn dim(&self) -> usize {
        match *self {
            Self::Direct { dim, .. } | Self::Dy { dim, .. } => dim,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Diagnosis {
    Converged,
    NotConverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    pub result: EstimateResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// `|Ĥ^{δ_{i+1}} - Ĥ^{δ_i}|`.
    pub gaps: Vec<f64>,
    /// Paired standard errors of the successive differences.
    pub gap_stderr: Vec<f64>,
    pub diagnosis: Diagnosis,
    /// Paths on which a finer lattice had a smaller maximum (always 0).
    pub monotone_violations: usize,
}

impl SweepResult {
    pub fn gaps_nonincreasing(&self) -> bool {
        self.gaps.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn last(&self) -> &EstimateResult {
        &self.rows.last().expect("sweeps have at least one row").result
    }
}

struct Layer {
    step: usize,
    weight: f64,
}

/// Runs one estimator over decreasing `deltas` on shared paths sampled at the finest spacing.
pub fn continuity_sweep(
    spec: &SpectralFieldSpec,
    deltas: &[f64],
    estimator: SweepEstimator,
    reps: usize,
    runner: &Replicator,
) -> Result<SweepResult> {
    let started = std::time::Instant::now();
    if deltas.is_empty() {
        return Err(config_err("a sweep needs at least one delta"));
    }
    if deltas.windows(2).any(|w| !(w[1] < w[0])) || deltas[deltas.len() - 1] <= 0.0 {
        return Err(config_err("sweep deltas must be positive and strictly decreasing"));
    }
    if reps < MIN_REPS {
        return Err(config_err(format!("a sweep needs at least {MIN_REPS} replications")));
    }
    let h = deltas[deltas.len() - 1];
    let dim = estimator.dim();
    let layers = deltas
        .iter()
        .map(|&d| match integer_ratio(d, h) {
            Some(k) if k >= 1 => Ok(Layer { step: k as usize, weight: d.powi(dim as i32) }),
            _ => Err(config_err(format!("delta {d} is not a multiple of the finest delta {h}"))),
        })
        .collect::<Result<Vec<_>>>()?;
    let g = match estimator {
        SweepEstimator::Direct { horizon, .. } => GridSpec::boxed(dim, h, horizon)?,
        SweepEstimator::Dy { window, .. } => GridSpec::window(dim, h, window)?,
    };
    let idx = g.indices()?;
    let origin = g.origin_index().and_then(|o| idx.iter().position(|k| *k == o));
    // deepest layer index on which each point lies (layers nest from coarse to fine)
    let depth: Vec<usize> = idx
        .iter()
        .map(|k| {
            layers
                .iter()
                .position(|l| k[..dim].iter().all(|v| v.rem_euclid(l.step as i64) == 0))
                .expect("the finest layer contains every point")
        })
        .collect();
    let sampler = spec.sampler_on_grid(&g)?;
    let n = layers.len();
    let per_path = runner.run(reps, |_, rng| {
        let mut z = vec![0.0; sampler.len()];
        sampler.sample_into(rng, &mut z);
        let mut sup = vec![0.0f64; n];
        let mut sum = vec![0.0f64; n];
        for (v, &d) in z.iter().zip(&depth) {
            sup[d] = sup[d].max(*v);
            sum[d] += v;
        }
        for i in 1..n {
            sup[i] = sup[i].max(sup[i - 1]);
            sum[i] += sum[i - 1];
        }
        let values: Vec<f64> = match estimator {
            SweepEstimator::Direct { horizon, .. } => sup.iter().map(|s| s / horizon.powi(dim as i32)).collect(),
            SweepEstimator::Dy { .. } => {
                let z0 = z[origin.expect("windows contain the origin")];
                (0..n)
                    .map(|i| if z0 == 0.0 { 0.0 } else { z0 * sup[i] / (layers[i].weight * sum[i]) })
                    .collect()
            }
        };
        Ok((values, sup))
    })?;
    let monotone_violations = per_path.iter().filter(|(_, sup)| sup.windows(2).any(|w| w[1] < w[0])).count();
    let columns: Vec<Vec<f64>> = (0..n).map(|i| per_path.iter().map(|(v, _)| v[i]).collect()).collect();
    let base_fp = fingerprint(&("sweep", spec, deltas, &estimator, reps, runner.seed));
    let rows: Vec<SweepRow> = deltas
        .iter()
        .zip(&columns)
        .map(|(&delta, col)| {
            let mut r = EstimateResult::from_summary(Summary::of(col), fingerprint(&(&base_fp, delta)), started);
            r.continuum_proxy = false;
            SweepRow { delta, result: r }
        })
        .collect();
    let diffs: Vec<Summary> = columns.windows(2).map(|w| paired_difference(&w[1], &w[0])).collect();
    let gaps: Vec<f64> = diffs.iter().map(|d| d.mean.abs()).collect();
    let gap_stderr: Vec<f64> = diffs.iter().map(|d| d.stderr).collect();
    let converged = gaps.windows(2).all(|w| w[1] <= w[0])
        && gaps.last().zip(gap_stderr.last()).is_none_or(|(g, s)| *g <= 3.0 * s);
    Ok(SweepResult {
        rows,
        gaps,
        gap_stderr,
        diagnosis: if converged { Diagnosis::Converged } else { Diagnosis::NotConverged },
        monotone_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Kernel, SamplingDensity};
    use crate::VarianceFunction;

    #[test]
    fn indicator_coverage_pattern() {
        let spec = SpectralFieldSpec::kernel_with_density(Kernel::IndicatorUnit, SamplingDensity::Normal { scale: 20.0 });
        let s = continuity_sweep(
            &spec,
            &[2.0, 1.0, 0.5],
            SweepEstimator::Direct { dim: 1, horizon: 20.0 },
            40_000,
            &Replicator::new(1),
        )
        .unwrap();
        let want = [11.0 / 20.0, 21.0 / 20.0, 21.0 / 20.0];
        for (row, w) in s.rows.iter().zip(want) {
            assert!(row.result.z_against(w).abs() < 4.0, "{row:?}");
        }
        assert_eq!(s.monotone_violations, 0);
        // δ = 1 and δ = 0.5 give identical maxima for the indicator
        assert_eq!(s.gaps[1], 0.0);
    }

    #[test]
    fn dy_sweep_is_monotone_per_path() {
        let spec = SpectralFieldSpec::log_gaussian(VarianceFunction::fbm(0.5, 2.0));
        let s = continuity_sweep(
            &spec,
            &[1.0, 0.5, 0.25],
            SweepEstimator::Dy { dim: 1, window: 8.0 },
            2000,
            &Replicator::new(2),
        )
        .unwrap();
        assert_eq!(s.monotone_violations, 0);
        assert_eq!(s.gaps.len(), 2);
        assert!(s.rows.iter().all(|r| r.result.estimate > 0.3 && r.result.estimate < 1.2));
    }

    #[test]
    fn rejects_bad_deltas() {
        let spec = SpectralFieldSpec::Bernoulli { p: 0.5 };
        let est = SweepEstimator::Direct { dim: 1, horizon: 4.0 };
        let r = Replicator::new(0);
        assert!(continuity_sweep(&spec, &[0.5, 1.0], est, 100, &r).is_err());
        assert!(continuity_sweep(&spec, &[1.0, 0.4], est, 100, &r).is_err());
        assert!(continuity_sweep(&spec, &[], est, 100, &r).is_err());
    }
}
