//! Run configuration: a JSON file, flag overrides, and per-command defaults.

use std::path::{Path, PathBuf};

use pickands_core::estimators::fingerprint;
use pickands_core::{DyConfig, DyMethod, FamilySpec, Kernel, SpectralFieldSpec};
use serde::{Deserialize, Serialize};

use crate::error::{config, CliError};
use crate::specstr::{parse_family, parse_kernel_name, parse_spec, Overrides};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Estimate,
    Sweep,
    Kernel,
    Family,
    Maxstable,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Estimate => "estimate",
            Command::Sweep => "sweep",
            Command::Kernel => "kernel",
            Command::Family => "family",
            Command::Maxstable => "maxstable",
            Command::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Direct,
    Dy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MaxStableMode {
    /// `P(Y(t_i) <= x_i for all i)` from simulated max-stable paths.
    Simulate,
    /// The same probability from samples of `Z` alone.
    Fidi,
    /// Extremal index `delta^d H^delta` on `[0, T]`.
    Extremal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    /// `eta * sum_k int L(-x) L(x + k eta) / sum_j L(x + j eta) dx`, expected 1.
    Fubini,
    /// Indicator kernel constant against the coverage measure of `[0, T]`.
    Coverage,
    /// Ratio estimator for `sigma^2(t) = c^2 t^2` against `c / sqrt(2 pi)`.
    Hurst1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AutoTag {
    #[serde(rename = "auto")]
    Auto,
}

/// Worker threads: a count or `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Workers {
    Count(usize),
    Auto(AutoTag),
}

impl Default for Workers {
    fn default() -> Self {
        Workers::Count(1)
    }
}

impl Workers {
    pub fn auto() -> Self {
        Workers::Auto(AutoTag::Auto)
    }

    pub fn resolve(self) -> usize {
        match self {
            Workers::Count(n) => n.max(1),
            Workers::Auto(_) => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        }
    }
}

pub fn parse_workers(s: &str) -> Result<Workers, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(Workers::auto());
    }
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(Workers::Count(n)),
        _ => Err(format!("expected a positive count or `auto`, got `{s}`")),
    }
}

/// A field given either as a short descriptor or as the full JSON form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpecInput {
    Text(String),
    Spec(SpectralFieldSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FamilyInput {
    Text(String),
    Spec(FamilySpec),
}

/// Every option of a run. Absent values are filled by [`RunConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<SpecInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dy_method: Option<DyMethod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// `T`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// `R`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<MaxStableMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<Suite>,
    #[serde(default)]
    pub workers: Workers,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

fn one() -> usize {
    1
}

pub const DEFAULT_DELTAS: [f64; 5] = [1.0, 0.5, 0.25, 0.125, 0.0625];

/// A configuration with every default filled in, plus the parsed inputs.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub cfg: RunConfig,
    pub field: Option<SpectralFieldSpec>,
    pub family: Option<FamilySpec>,
    pub kernel: Option<Kernel>,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            spec: None,
            family: None,
            kernel: None,
            method: None,
            dy_method: None,
            delta: None,
            eta: None,
            horizon: None,
            window: None,
            mesh: None,
            deltas: None,
            dim: 1,
            reps: None,
            seed: 0,
            nodes: None,
            quad_tol: None,
            mode: None,
            points: None,
            thresholds: None,
            r: None,
            suite: None,
            workers: Workers::default(),
            output: None,
            format: Format::default(),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| config(format!("{}: {e}", path.display())))
    }

    /// Text of the `spec` column.
    pub fn spec_label(&self) -> String {
        match (&self.spec, &self.family, &self.kernel) {
            (Some(SpecInput::Text(s)), _, _) => s.clone(),
            (Some(SpecInput::Spec(s)), _, _) => json(s),
            (None, Some(FamilyInput::Text(s)), _) => s.clone(),
            (None, Some(FamilyInput::Spec(f)), _) => json(f),
            (None, None, Some(k)) => format!("kernel:{k}"),
            _ => String::new(),
        }
    }

    /// Hash of every resolved value that can change a result.
    ///
    /// Worker count, output path and format only affect how results are computed
    /// and written, so they are left out.
    pub fn fingerprint(&self) -> String {
        let mut c = self.portable();
        c.format = Format::default();
        fingerprint(&c)
    }

    /// The configuration without the worker count and output path, as written beside outputs.
    pub fn portable(&self) -> RunConfig {
        Self { workers: Workers::default(), output: None, ..self.clone() }
    }

    fn apply(&mut self, o: Overrides) {
        self.delta = self.delta.or(o.delta);
        self.eta = self.eta.or(o.eta);
        self.horizon = self.horizon.or(o.horizon);
        self.window = self.window.or(o.window);
        self.mesh = self.mesh.or(o.mesh);
    }

    fn field(&mut self) -> Result<Option<SpectralFieldSpec>, CliError> {
        match self.spec.clone() {
            None => Ok(None),
            Some(SpecInput::Spec(s)) => {
                s.validate()?;
                Ok(Some(s))
            }
            Some(SpecInput::Text(t)) => {
                let (s, o) = parse_spec(&t)?;
                self.apply(o);
                Ok(Some(s))
            }
        }
    }

    fn need_field(&mut self) -> Result<SpectralFieldSpec, CliError> {
        self.field()?.ok_or_else(|| config(format!("`{}` needs --spec", self.command.name())))
    }

    /// Fills every absent option with its default for the command.
    pub fn resolve(mut self) -> Result<Resolved, CliError> {
        if self.dim != 1 && self.dim != 2 {
            return Err(config("dim must be 1 or 2"));
        }
        let mut field = None;
        let mut family = None;
        let mut kernel = None;
        match self.command {
            Command::Estimate => {
                field = Some(self.need_field()?);
                let method = *self.method.get_or_insert(Method::Dy);
                self.reps.get_or_insert(10_000);
                match method {
                    Method::Dy => self.resolve_dy(),
                    Method::Direct => {
                        self.horizon.get_or_insert(10.0);
                        self.delta.get_or_insert(0.1);
                    }
                }
            }
            Command::Sweep => {
                field = Some(self.need_field()?);
                let method = *self.method.get_or_insert(Method::Dy);
                self.reps.get_or_insert(10_000);
                self.deltas.get_or_insert_with(|| DEFAULT_DELTAS.to_vec());
                match method {
                    Method::Dy => {
                        self.window.get_or_insert(10.0);
                    }
                    Method::Direct => {
                        self.horizon.get_or_insert(10.0);
                    }
                }
            }
            Command::Kernel => {
                kernel = Some(self.resolve_kernel()?);
                self.delta.get_or_insert(0.0);
                self.horizon.get_or_insert(10.0);
                self.quad_tol.get_or_insert(1e-8);
            }
            Command::Family => {
                let (f, o) = match self.family.clone() {
                    Some(FamilyInput::Text(t)) => parse_family(&t)?,
                    Some(FamilyInput::Spec(f)) => (f, Overrides::default()),
                    None => return Err(config("`family` needs --family")),
                };
                self.apply(o);
                family = Some(f);
                self.reps.get_or_insert(200);
                self.delta.get_or_insert(0.0);
                self.window.get_or_insert(10.0);
                self.nodes.get_or_insert(8);
                let delta = self.delta.unwrap_or(0.0);
                let dy = DyConfig { dim: self.dim, mesh: self.mesh, ..DyConfig::new(delta, delta, 10.0) };
                self.mesh = Some(dy.resolved_mesh());
            }
            Command::Maxstable => {
                let spec = self.need_field()?;
                let mode = *self.mode.get_or_insert(MaxStableMode::Simulate);
                self.reps.get_or_insert(10_000);
                match mode {
                    MaxStableMode::Simulate | MaxStableMode::Fidi => {
                        let n = self.points.get_or_insert_with(|| vec![0.0]).len();
                        let th = self.thresholds.get_or_insert_with(|| vec![1.0; n]);
                        if th.len() != n {
                            return Err(config("give one threshold per point"));
                        }
                    }
                    MaxStableMode::Extremal => {
                        self.delta.get_or_insert(0.5);
                        let t = *self.horizon.get_or_insert(20.0);
                        self.window.get_or_insert(t);
                        self.r.get_or_insert(1.0);
                    }
                }
                field = Some(spec);
            }
            Command::Validate => {
                let suite = *self.suite.get_or_insert(Suite::Fubini);
                match suite {
                    Suite::Fubini => {
                        kernel = Some(self.resolve_kernel_or("gaussian")?);
                        self.eta.get_or_insert(1.0);
                    }
                    Suite::Coverage => {
                        self.kernel.get_or_insert_with(|| "indicator".into());
                        kernel = Some(Kernel::IndicatorUnit);
                        self.delta.get_or_insert(0.5);
                        self.horizon.get_or_insert(10.0);
                    }
                    Suite::Hurst1 => {
                        if self.spec.is_none() {
                            self.spec = Some(SpecInput::Text("linear:c=1".into()));
                        }
                        let spec = self.need_field()?;
                        if !matches!(spec, SpectralFieldSpec::LogGaussian { vf: pickands_core::VarianceFunction::Linear { .. } }) {
                            return Err(config("the hurst1 suite needs a `linear:c=` field"));
                        }
                        field = Some(spec);
                        self.reps.get_or_insert(2_000);
                        self.resolve_dy();
                    }
                }
            }
        }
        if self.reps == Some(0) {
            return Err(config("reps must be positive"));
        }
        Ok(Resolved { cfg: self, field, family, kernel })
    }

    fn resolve_dy(&mut self) {
        let delta = *self.delta.get_or_insert(0.0);
        let eta = *self.eta.get_or_insert(delta);
        self.window.get_or_insert(10.0);
        self.dy_method.get_or_insert(DyMethod::Auto);
        let dy = DyConfig { dim: self.dim, mesh: self.mesh, ..DyConfig::new(delta, eta, 10.0) };
        self.mesh = Some(dy.resolved_mesh());
    }

    fn resolve_kernel(&mut self) -> Result<Kernel, CliError> {
        if self.kernel.is_none() {
            if let Some(SpectralFieldSpec::Kernel { kernel, .. }) = self.field()? {
                return Ok(kernel);
            }
        }
        let name = self.kernel.clone().ok_or_else(|| config("`kernel` needs --kernel or a kernel --spec"))?;
        parse_kernel_name(&name)
    }

    fn resolve_kernel_or(&mut self, default: &str) -> Result<Kernel, CliError> {
        if self.kernel.is_none() && self.spec.is_none() {
            self.kernel = Some(default.into());
        }
        self.resolve_kernel()
    }
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_estimate() {
        let mut c = RunConfig::new(Command::Estimate);
        c.spec = Some(SpecInput::Text("linear:c=1".into()));
        let r = c.resolve().unwrap();
        assert_eq!(r.cfg.method, Some(Method::Dy));
        assert_eq!(r.cfg.delta, Some(0.0));
        assert_eq!(r.cfg.eta, Some(0.0));
        assert_eq!(r.cfg.window, Some(10.0));
        assert_eq!(r.cfg.mesh, Some(0.01));
        assert_eq!(r.cfg.reps, Some(10_000));
    }

    #[test]
    fn descriptor_overrides_fill_but_do_not_beat_explicit_values() {
        let mut c = RunConfig::new(Command::Estimate);
        c.spec = Some(SpecInput::Text("kernel:indicator,eta=3,R=10".into()));
        c.window = Some(4.0);
        let r = c.resolve().unwrap();
        assert_eq!(r.cfg.eta, Some(3.0));
        assert_eq!(r.cfg.window, Some(4.0));
    }

    #[test]
    fn resolution_is_idempotent() {
        let mut c = RunConfig::new(Command::Sweep);
        c.spec = Some(SpecInput::Text("fbm:alpha=0.5,scale=2".into()));
        let once = c.resolve().unwrap().cfg;
        let twice = once.clone().resolve().unwrap().cfg;
        assert_eq!(once, twice);
        assert_eq!(once.fingerprint(), twice.fingerprint());
    }

    #[test]
    fn json_round_trip() {
        let mut c = RunConfig::new(Command::Maxstable);
        c.spec = Some(SpecInput::Spec(SpectralFieldSpec::Bernoulli { p: 0.5 }));
        c.workers = Workers::auto();
        let r = c.resolve().unwrap().cfg;
        let text = serde_json::to_string(&r).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
        assert!(text.contains("\"workers\":\"auto\""));
    }

    #[test]
    fn fingerprint_ignores_workers_and_output() {
        let mut a = RunConfig::new(Command::Estimate);
        a.spec = Some(SpecInput::Text("linear:c=1".into()));
        let mut b = a.clone();
        b.workers = Workers::Count(4);
        b.output = Some("x.csv".into());
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.seed = 1;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = serde_json::from_str::<RunConfig>(r#"{"command":"estimate","bogus":1}"#);
        assert!(err.is_err());
    }

    #[test]
    fn missing_spec_is_config_error() {
        let e = RunConfig::new(Command::Sweep).resolve().unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn workers_parse() {
        assert_eq!(parse_workers("auto"), Ok(Workers::auto()));
        assert_eq!(parse_workers("3"), Ok(Workers::Count(3)));
        assert!(parse_workers("0").is_err());
    }
}
