//! Dispatch of a resolved configuration to the estimators.

use pickands_core::estimators::{
    continuity_sweep, estimate_family_h, estimate_h_direct, estimate_h_dy, family_sweep, fubini_identity, kernel_constant,
    FamilyConfig, KernelQuadConfig,
};
use pickands_core::maxstable::{extremal_index, fidi_cdf, simulate_many, ExtremalConfig, MaxStableSimulator};
use pickands_core::oracle::{hurst1_closed_form, kernel_coverage_measure};
use pickands_core::{
    DirectConfig, DyConfig, EstimateResult, PointSet, Replicator, SpectralFieldSpec, Stopping, SweepEstimator, VarianceFunction,
};

use crate::config::{Command, MaxStableMode, Method, Resolved, Suite};
use crate::error::{config, CliError};
use crate::output::Row;

/// Runtime switches that never change results.
#[derive(Debug, Clone, Copy, Default)]
pub struct Runtime {
    pub progress: bool,
    pub timing: bool,
}

impl Runtime {
    fn note(&self, msg: impl AsRef<str>) {
        if self.progress {
            eprintln!("pickands: {}", msg.as_ref());
        }
    }
}

/// Outcome of a run: data rows, or the text lines of a validation suite.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Rows(Vec<Row>),
    Validation { lines: Vec<String>, passed: bool },
}

struct Ctx<'a> {
    r: &'a Resolved,
    rt: Runtime,
    runner: Replicator,
    fp: String,
    label: String,
}

impl Ctx<'_> {
    fn row(&self, delta: Option<f64>, eta: Option<f64>, horizon: Option<f64>, window: Option<f64>, res: &EstimateResult) -> Row {
        Row {
            command: self.r.cfg.command.name().into(),
            spec: self.label.clone(),
            delta,
            eta,
            horizon,
            window,
            reps: res.reps,
            seed: self.r.cfg.seed,
            estimate: res.estimate,
            stderr: res.stderr,
            elapsed_s: self.rt.timing.then_some(res.elapsed_s),
            fingerprint: self.fp.clone(),
        }
    }

    fn field(&self) -> &SpectralFieldSpec {
        self.r.field.as_ref().expect("resolved commands carry their field")
    }

    fn reps(&self) -> usize {
        self.r.cfg.reps.unwrap_or(0)
    }
}

fn req(v: Option<f64>, name: &str) -> Result<f64, CliError> {
    v.ok_or_else(|| config(format!("missing `{name}`")))
}

pub fn execute(r: &Resolved, rt: Runtime) -> Result<Outcome, CliError> {
    let cfg = &r.cfg;
    let ctx = Ctx {
        r,
        rt,
        runner: Replicator::new(cfg.seed).with_workers(cfg.workers.resolve()),
        fp: cfg.fingerprint(),
        label: cfg.spec_label(),
    };
    rt.note(format!("{} with {} replication(s), seed {}", cfg.command.name(), ctx.reps(), cfg.seed));
    let out = match cfg.command {
        Command::Estimate => estimate(&ctx),
        Command::Sweep => sweep(&ctx),
        Command::Kernel => kernel(&ctx),
        Command::Family => family(&ctx),
        Command::Maxstable => maxstable(&ctx),
        Command::Validate => return validate(&ctx),
    }?;
    rt.note(format!("{} row(s) done", out.len()));
    Ok(Outcome::Rows(out))
}

fn estimate(c: &Ctx) -> Result<Vec<Row>, CliError> {
    let cfg = &c.r.cfg;
    match cfg.method {
        Some(Method::Direct) => {
            let d = DirectConfig { dim: cfg.dim, horizon: req(cfg.horizon, "T")?, delta: req(cfg.delta, "delta")?, continuum_proxy: false };
            let res = estimate_h_direct(c.field(), &d, c.reps(), &c.runner)?;
            Ok(vec![c.row(Some(d.delta), None, Some(d.horizon), None, &res)])
        }
        _ => {
            let d = dy_config(cfg)?;
            let res = estimate_h_dy(c.field(), &d, c.reps(), &c.runner)?;
            Ok(vec![c.row(Some(d.delta), Some(d.eta), None, Some(d.window), &res)])
        }
    }
}

fn dy_config(cfg: &crate::config::RunConfig) -> Result<DyConfig, CliError> {
    Ok(DyConfig {
        dim: cfg.dim,
        delta: req(cfg.delta, "delta")?,
        eta: req(cfg.eta, "eta")?,
        window: req(cfg.window, "R")?,
        mesh: cfg.mesh,
        method: cfg.dy_method.unwrap_or_default(),
    })
}

fn sweep(c: &Ctx) -> Result<Vec<Row>, CliError> {
    let cfg = &c.r.cfg;
    let deltas = cfg.deltas.clone().unwrap_or_default();
    let est = match cfg.method {
        Some(Method::Direct) => SweepEstimator::Direct { dim: cfg.dim, horizon: req(cfg.horizon, "T")? },
        _ => SweepEstimator::Dy { dim: cfg.dim, window: req(cfg.window, "R")? },
    };
    let s = continuity_sweep(c.field(), &deltas, est, c.reps(), &c.runner)?;
    c.rt.note(format!("sweep diagnosis: {:?}, gaps {:?}", s.diagnosis, s.gaps));
    Ok(s
        .rows
        .iter()
        .map(|row| match est {
            SweepEstimator::Direct { horizon, .. } => c.row(Some(row.delta), None, Some(horizon), None, &row.result),
            SweepEstimator::Dy { window, .. } => c.row(Some(row.delta), Some(row.delta), None, Some(window), &row.result),
        })
        .collect())
}

fn kernel(c: &Ctx) -> Result<Vec<Row>, CliError> {
    let cfg = &c.r.cfg;
    let k = c.r.kernel.as_ref().expect("kernel command carries a kernel");
    let q = KernelQuadConfig { tol: cfg.quad_tol.unwrap_or(1e-8), ..KernelQuadConfig::default() };
    let (delta, horizon) = (req(cfg.delta, "delta")?, req(cfg.horizon, "T")?);
    let v = kernel_constant(k, delta, horizon, &q)?;
    let mut rows: Vec<Row> = v
        .dyadic
        .iter()
        .map(|d| {
            let res = EstimateResult { estimate: d.value, ..v.result.clone() };
            c.row(Some(d.delta), None, Some(horizon), None, &res)
        })
        .collect();
    if let Some(cont) = v.continuum {
        let res = EstimateResult { estimate: cont, ..v.result.clone() };
        rows.push(c.row(Some(0.0), None, Some(horizon), None, &res));
    } else {
        rows.push(c.row(Some(delta), None, Some(horizon), None, &v.result));
    }
    Ok(rows)
}

fn family(c: &Ctx) -> Result<Vec<Row>, CliError> {
    let cfg = &c.r.cfg;
    let f = c.r.family.as_ref().expect("family command carries a family");
    let fc = FamilyConfig {
        delta: req(cfg.delta, "delta")?,
        nodes: cfg.nodes.unwrap_or(8),
        window: req(cfg.window, "R")?,
        mesh: cfg.mesh,
        dim: cfg.dim,
    };
    let row = |delta: f64, res: &EstimateResult| c.row(Some(delta), Some(delta), None, Some(fc.window), res);
    match &cfg.deltas {
        Some(deltas) => {
            let s = family_sweep(f, deltas, &fc, c.reps(), &c.runner)?;
            let mut rows = vec![row(0.0, &s.continuum.result)];
            rows.extend(s.rows.iter().map(|(d, e)| row(*d, &e.result)));
            Ok(rows)
        }
        None => {
            let e = estimate_family_h(f, &fc, c.reps(), &c.runner)?;
            Ok(vec![row(fc.delta, &e.result)])
        }
    }
}

fn maxstable(c: &Ctx) -> Result<Vec<Row>, CliError> {
    let cfg = &c.r.cfg;
    let spec = c.field();
    let started = std::time::Instant::now();
    let result = |estimate: f64, stderr: f64| EstimateResult {
        estimate,
        stderr,
        reps: c.reps(),
        elapsed_s: started.elapsed().as_secs_f64(),
        fingerprint: c.fp.clone(),
        continuum_proxy: false,
        notes: Vec::new(),
    };
    match cfg.mode.unwrap_or(MaxStableMode::Simulate) {
        MaxStableMode::Simulate => {
            let points = PointSet::from_1d(cfg.points.as_deref().unwrap_or(&[0.0]));
            let th = cfg.thresholds.clone().unwrap_or_default();
            let sim = MaxStableSimulator::on_points(spec, &points, Stopping::auto(spec), cfg.seed)?;
            let ys = simulate_many(&sim, c.reps(), &c.runner)?;
            let hits = ys.iter().filter(|y| y.values.iter().zip(&th).all(|(v, x)| v <= x)).count();
            let n = ys.len() as f64;
            let p = hits as f64 / n;
            Ok(vec![c.row(None, None, None, None, &result(p, (p * (1.0 - p) / n).sqrt()))])
        }
        MaxStableMode::Fidi => {
            let points = PointSet::from_1d(cfg.points.as_deref().unwrap_or(&[0.0]));
            let th = cfg.thresholds.clone().unwrap_or_default();
            let f = fidi_cdf(spec, &points, &th, c.reps(), &c.runner)?;
            Ok(vec![c.row(None, None, None, None, &result(f.value, f.stderr))])
        }
        MaxStableMode::Extremal => {
            let e = ExtremalConfig {
                delta: req(cfg.delta, "delta")?,
                horizon: req(cfg.horizon, "T")?,
                r: req(cfg.r, "r")?,
                dim: cfg.dim,
                window: cfg.window,
            };
            let x = extremal_index(spec, &e, c.reps(), Stopping::auto(spec), &c.runner)?;
            c.rt.note(format!("identity gap {:.4e} (stderr {:.4e})", x.identity_gap, x.gap_stderr));
            Ok(vec![c.row(Some(e.delta), Some(e.delta), Some(e.horizon), e.window, &result(x.theta, x.theta_stderr))])
        }
    }
}

fn validate(c: &Ctx) -> Result<Outcome, CliError> {
    let cfg = &c.r.cfg;
    let (value, reference, tol) = match cfg.suite.unwrap_or(Suite::Fubini) {
        Suite::Fubini => {
            let k = c.r.kernel.as_ref().expect("fubini suite carries a kernel");
            (fubini_identity(k, req(cfg.eta, "eta")?)?, 1.0, 1e-6)
        }
        Suite::Coverage => {
            let (delta, horizon) = (req(cfg.delta, "delta")?, req(cfg.horizon, "T")?);
            let k = c.r.kernel.as_ref().expect("coverage suite carries a kernel");
            let v = kernel_constant(k, delta, horizon, &KernelQuadConfig::default())?;
            (v.result.estimate, kernel_coverage_measure(delta, horizon) / horizon, 1e-8)
        }
        Suite::Hurst1 => {
            let ch = match c.field() {
                SpectralFieldSpec::LogGaussian { vf: VarianceFunction::Linear { c } } => *c,
                _ => return Err(config("the hurst1 suite needs a `linear:c=` field")),
            };
            let res = estimate_h_dy(c.field(), &dy_config(cfg)?, c.reps(), &c.runner)?;
            (res.estimate, hurst1_closed_form(ch), 0.01f64.max(4.0 * res.stderr))
        }
    };
    let passed = (value - reference).abs() <= tol;
    c.rt.note(format!("reference {reference:.6}, tolerance {tol:e}: {}", if passed { "pass" } else { "FAIL" }));
    Ok(Outcome::Validation { lines: vec![format!("{value:.6}")], passed })
}
