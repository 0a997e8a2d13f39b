use serde::{Deserialize, Serialize};

use super::dy::{estimate_h_dy, DyConfig, DyMethod};
use super::result::{fingerprint, EstimateResult};
use crate::error::{config_err, Result};
use crate::quadrature::gauss_legendre_unit;
use crate::rng::Replicator;
use crate::spectral::{FamilyNodeCheck, FamilySpec, SpectralFieldSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyConfig {
    /// Lattice spacing; 0 for the continuum proxy on the mesh.
    pub delta: f64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    pub window: f64,
    #[serde(default)]
    pub mesh: Option<f64>,
    #[serde(default = "one")]
    pub dim: usize,
}

fn default_nodes() -> usize {
    8
}

fn one() -> usize {
    1
}

impl FamilyConfig {
    pub fn new(delta: f64, window: f64) -> Self {
        Self { delta, nodes: default_nodes(), window, mesh: None, dim: 1 }
    }

    fn dy(&self) -> DyConfig {
        DyConfig { dim: self.dim, delta: self.delta, eta: self.delta, window: self.window, mesh: self.mesh, method: DyMethod::MonteCarlo }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyNode {
    pub z: f64,
    pub weight: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub check: FamilyNodeCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyEstimate {
    pub result: EstimateResult,
    pub nodes: Vec<FamilyNode>,
    /// Difference between the Gauss–Legendre and the midpoint rule on the same node values.
    pub quadrature_error: f64,
}

/// `∫_0^1 H^δ_{Z_z} dz` by Gauss–Legendre over per-node ratio estimates.
pub fn estimate_family_h(family: &FamilySpec, cfg: &FamilyConfig, reps: usize, runner: &Replicator) -> Result<FamilyEstimate> {
    let started = std::time::Instant::now();
    if cfg.nodes == 0 {
        return Err(config_err("family quadrature needs at least one node"));
    }
    let (zs, ws) = gauss_legendre_unit(cfg.nodes);
    let dy = cfg.dy();
    let mut nodes = Vec::with_capacity(zs.len());
    for (j, (&z, &w)) in zs.iter().zip(&ws).enumerate() {
        let check = family.check_at(z, cfg.dim)?;
        let (estimate, stderr) = if check.degenerate {
            (0.0, 0.0)
        } else {
            let spec = SpectralFieldSpec::log_gaussian(family.member(z)?);
            let r = estimate_h_dy(&spec, &dy, reps, &runner.child(j as u64))?;
            (r.estimate, r.stderr)
        };
        nodes.push(FamilyNode { z, weight: w, estimate, stderr, check });
    }
    let value: f64 = nodes.iter().map(|n| n.weight * n.estimate).sum();
    let mc_var: f64 = nodes.iter().map(|n| (n.weight * n.stderr).powi(2)).sum();
    let quadrature_error = (value - midpoint_rule(&nodes)).abs();
    let fp = fingerprint(&("family", family, cfg, reps, runner.seed));
    let mut result = EstimateResult::exact(value, fp, started);
    result.stderr = (mc_var + quadrature_error.powi(2)).sqrt();
    result.reps = reps;
    result.continuum_proxy = cfg.delta == 0.0;
    let degenerate = nodes.iter().filter(|n| n.check.degenerate).count();
    if degenerate > 0 {
        result.notes.push(format!("{degenerate} degenerate node(s) contribute 0"));
    }
    Ok(FamilyEstimate { result, nodes, quadrature_error })
}

/// Rule with weights equal to the lengths of the cells between node midpoints.
fn midpoint_rule(nodes: &[FamilyNode]) -> f64 {
    let n = nodes.len();
    (0..n)
        .map(|i| {
            let left = if i == 0 { 0.0 } else { 0.5 * (nodes[i - 1].z + nodes[i].z) };
            let right = if i + 1 == n { 1.0 } else { 0.5 * (nodes[i].z + nodes[i + 1].z) };
            (right - left) * nodes[i].estimate
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySweep {
    pub continuum: FamilyEstimate,
    pub rows: Vec<(f64, FamilyEstimate)>,
    /// `|𝓗^δ - 𝓗^0|` per row.
    pub gaps: Vec<f64>,
}

impl FamilySweep {
    pub fn gaps_nonincreasing(&self) -> bool {
        self.gaps.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Family constants at decreasing `deltas` and at the continuum proxy, all on one mesh and one seed.
pub fn family_sweep(
    family: &FamilySpec,
    deltas: &[f64],
    cfg: &FamilyConfig,
    reps: usize,
    runner: &Replicator,
) -> Result<FamilySweep> {
    if deltas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(config_err("sweep deltas must be strictly decreasing"));
    }
    let base = FamilyConfig { delta: 0.0, ..*cfg };
    let mesh = base.dy().resolved_mesh();
    let base = FamilyConfig { mesh: Some(mesh), ..base };
    let continuum = estimate_family_h(family, &base, reps, runner)?;
    let mut rows = Vec::new();
    for &d in deltas {
        rows.push((d, estimate_family_h(family, &FamilyConfig { delta: d, ..base }, reps, runner)?));
    }
    let gaps = rows.iter().map(|(_, r)| (r.result.estimate - continuum.result.estimate).abs()).collect();
    Ok(FamilySweep { continuum, rows, gaps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::AffineProfile;
    use crate::VarianceFunction;

    fn affine(a: f64, b: f64) -> FamilySpec {
        FamilySpec::Scaled { q: AffineProfile { a, b }, base: VarianceFunction::linear(1.0) }
    }

    fn cfg() -> FamilyConfig {
        FamilyConfig { mesh: Some(0.02), ..FamilyConfig::new(0.0, 10.0) }
    }

    const ROOT_2PI: f64 = 2.506_628_274_631_000_2;

    #[test]
    fn affine_family_matches_closed_form() {
        let f = estimate_family_h(&affine(1.0, 1.0), &cfg(), 200, &Replicator::new(1)).unwrap();
        let want = 1.5 / ROOT_2PI;
        assert!((f.result.estimate - want).abs() < 0.012f64.max(3.0 * f.result.stderr), "{:?}", f.result);
    }

    #[test]
    fn proportional_family_has_degenerate_end() {
        let f = estimate_family_h(&affine(0.0, 1.0), &FamilyConfig { nodes: 5, ..cfg() }, 200, &Replicator::new(2)).unwrap();
        let want = 0.5 / ROOT_2PI;
        assert!((f.result.estimate - want).abs() < 0.012f64.max(3.0 * f.result.stderr), "{:?}", f.result);
        let z0 = FamilySpec::Scaled { q: AffineProfile { a: 0.0, b: 1.0 }, base: VarianceFunction::linear(1.0) };
        assert!(z0.check_at(0.0, 1).unwrap().degenerate);
    }

    #[test]
    fn constant_family_equals_single_field() {
        let spec = SpectralFieldSpec::log_gaussian(VarianceFunction::linear(1.0));
        let single = estimate_h_dy(&spec, &cfg().dy(), 200, &Replicator::new(3).child(0)).unwrap();
        let f = estimate_family_h(&affine(1.0, 0.0), &FamilyConfig { nodes: 1, ..cfg() }, 200, &Replicator::new(3)).unwrap();
        assert_eq!(f.result.estimate, single.estimate);
    }

    #[test]
    fn midpoint_rule_integrates_constants() {
        let check = affine(1.0, 0.0).check_at(0.5, 1).unwrap();
        let nodes: Vec<FamilyNode> = [0.1, 0.5, 0.8]
            .iter()
            .map(|&z| FamilyNode { z, weight: 0.0, estimate: 2.0, stderr: 0.0, check: check.clone() })
            .collect();
        assert!((midpoint_rule(&nodes) - 2.0).abs() < 1e-15);
    }
}
