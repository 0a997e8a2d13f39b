use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use pickands_core::DyMethod;

use crate::config::{parse_workers, Command, FamilyInput, Format, MaxStableMode, Method, RunConfig, SpecInput, Suite, Workers};
use crate::error::CliError;
use crate::run::Runtime;

#[derive(Debug, Parser)]
#[command(name = "pickands", version, about = "Pickands-type constants, extremal indices and max-stable simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// One estimate of H^delta with the direct or the ratio estimator.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_enum)]
        method: Option<Method>,
        /// Ratio estimator evaluation: auto, monte-carlo or quadrature.
        #[arg(long, value_parser = parse_dy_method)]
        dy_method: Option<DyMethod>,
    },
    /// Estimates at decreasing delta on shared paths.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_enum)]
        method: Option<Method>,
        /// Comma-separated, strictly decreasing.
        #[arg(long, value_delimiter = ',')]
        deltas: Option<Vec<f64>>,
    },
    /// Deterministic quadrature of a kernel-field constant.
    Kernel {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: GridArgs,
        /// gaussian, indicator, laplace or table=<csv>.
        #[arg(long)]
        kernel: Option<String>,
        #[arg(long)]
        quad_tol: Option<f64>,
    },
    /// Aggregate constant of a locally stationary family.
    Family {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: GridArgs,
        /// e.g. `affine:a=1,b=1` or `affine:a=0,b=1,base=fbm,alpha=0.5`.
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        nodes: Option<usize>,
        /// Also estimate at these deltas against the continuum.
        #[arg(long, value_delimiter = ',')]
        deltas: Option<Vec<f64>>,
    },
    /// Max-stable simulation, finite-dimensional laws and extremal indices.
    Maxstable {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_enum)]
        mode: Option<MaxStableMode>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        points: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        thresholds: Option<Vec<f64>>,
        /// Level multiplier: the threshold is r T^d.
        #[arg(long)]
        r: Option<f64>,
    },
    /// Built-in reference checks; exit code 4 when one fails.
    Validate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_enum)]
        suite: Option<Suite>,
        #[arg(long)]
        kernel: Option<String>,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Field descriptor, e.g. `fbm:alpha=0.5,scale=2`.
    #[arg(long)]
    pub spec: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads or `auto`.
    #[arg(long, env = "PICKANDS_WORKERS", value_parser = parse_workers)]
    pub workers: Option<Workers>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Report replication counts on standard error.
    #[arg(long)]
    pub progress: bool,
    /// Fill the elapsed_s column.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub eta: Option<f64>,
    /// Horizon `T`.
    #[arg(short = 'T', long = "horizon")]
    pub horizon: Option<f64>,
    /// Window radius `R`.
    #[arg(short = 'R', long = "window")]
    pub window: Option<f64>,
    /// Simulation mesh `h`.
    #[arg(long)]
    pub mesh: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
}

fn parse_dy_method(s: &str) -> Result<DyMethod, String> {
    match s {
        "auto" => Ok(DyMethod::Auto),
        "monte-carlo" | "monte_carlo" | "mc" => Ok(DyMethod::MonteCarlo),
        "quadrature" => Ok(DyMethod::Quadrature),
        _ => Err(format!("unknown evaluation `{s}` (auto, monte-carlo, quadrature)")),
    }
}

fn set<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

impl Sub {
    /// Merges the config file (if any) with the flags.
    pub fn into_config(self) -> Result<(RunConfig, Runtime), CliError> {
        let (command, common, grid) = match &self {
            Sub::Estimate { common, grid, .. } => (Command::Estimate, common, grid),
            Sub::Sweep { common, grid, .. } => (Command::Sweep, common, grid),
            Sub::Kernel { common, grid, .. } => (Command::Kernel, common, grid),
            Sub::Family { common, grid, .. } => (Command::Family, common, grid),
            Sub::Maxstable { common, grid, .. } => (Command::Maxstable, common, grid),
            Sub::Validate { common, grid, .. } => (Command::Validate, common, grid),
        };
        let mut cfg = match &common.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::new(command),
        };
        if cfg.command != command {
            return Err(crate::error::config(format!(
                "config file is for `{}` but the command is `{}`",
                cfg.command.name(),
                command.name()
            )));
        }
        set(&mut cfg.spec, common.spec.clone().map(SpecInput::Text));
        set(&mut cfg.reps, common.reps);
        if let Some(s) = common.seed {
            cfg.seed = s;
        }
        if let Some(w) = common.workers {
            cfg.workers = w;
        }
        set(&mut cfg.output, common.output.clone());
        if let Some(f) = common.format {
            cfg.format = f;
        }
        set(&mut cfg.delta, grid.delta);
        set(&mut cfg.eta, grid.eta);
        set(&mut cfg.horizon, grid.horizon);
        set(&mut cfg.window, grid.window);
        set(&mut cfg.mesh, grid.mesh);
        if let Some(d) = grid.dim {
            cfg.dim = d;
        }
        let rt = Runtime { progress: common.progress, timing: common.timing };
        match self {
            Sub::Estimate { method, dy_method, .. } => {
                set(&mut cfg.method, method);
                set(&mut cfg.dy_method, dy_method);
            }
            Sub::Sweep { method, deltas, .. } => {
                set(&mut cfg.method, method);
                set(&mut cfg.deltas, deltas);
            }
            Sub::Kernel { kernel, quad_tol, .. } => {
                set(&mut cfg.kernel, kernel);
                set(&mut cfg.quad_tol, quad_tol);
            }
            Sub::Family { family, nodes, deltas, .. } => {
                set(&mut cfg.family, family.map(FamilyInput::Text));
                set(&mut cfg.nodes, nodes);
                set(&mut cfg.deltas, deltas);
            }
            Sub::Maxstable { mode, points, thresholds, r, .. } => {
                set(&mut cfg.mode, mode);
                set(&mut cfg.points, points);
                set(&mut cfg.thresholds, thresholds);
                set(&mut cfg.r, r);
            }
            Sub::Validate { suite, kernel, .. } => {
                set(&mut cfg.suite, suite);
                set(&mut cfg.kernel, kernel);
            }
        }
        Ok((cfg, rt))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> RunConfig {
        let cli = Cli::try_parse_from(std::iter::once("pickands").chain(args.iter().copied())).unwrap();
        cli.command.into_config().unwrap().0
    }

    #[test]
    fn sweep_flags() {
        let c = parse(&["sweep", "--spec", "fbm:alpha=0.5,scale=2", "--deltas", "1,0.5,0.25", "--reps", "100", "--seed", "42"]);
        assert_eq!(c.command, Command::Sweep);
        assert_eq!(c.deltas, Some(vec![1.0, 0.5, 0.25]));
        assert_eq!(c.seed, 42);
    }

    #[test]
    fn short_grid_flags() {
        let c = parse(&["estimate", "--spec", "linear:c=1", "-T", "5", "-R", "8", "--method", "direct"]);
        assert_eq!(c.horizon, Some(5.0));
        assert_eq!(c.window, Some(8.0));
        assert_eq!(c.method, Some(Method::Direct));
    }

    #[test]
    fn config_file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"command":"estimate","spec":"linear:c=1","reps":500,"seed":9}"#).unwrap();
        let c = parse(&["estimate", "--config", path.to_str().unwrap(), "--reps", "700"]);
        assert_eq!(c.reps, Some(700));
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn mismatched_config_command() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"command":"sweep","spec":"linear:c=1"}"#).unwrap();
        let cli = Cli::try_parse_from(["pickands", "estimate", "--config", path.to_str().unwrap()]).unwrap();
        assert_eq!(cli.command.into_config().unwrap_err().exit_code(), 2);
    }
}
