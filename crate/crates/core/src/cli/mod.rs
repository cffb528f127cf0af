//! Plumbing behind the `mamab` binary: configs, runs, sweeps, CSV and SVG.

pub mod config;
pub mod output;
pub mod plot;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::env::{EnvError, Environment};
use crate::harness::{run_experiment, Execution, ExperimentResult};

pub use config::{ConfigError, EnvSpec, Override, RunConfig};
pub use output::{emit_csv, read_summary, OutputError, OutputPaths};
pub use plot::{render_svg, write_svg, PlotError, Series};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error("sweep needs at least one value for `{0}`")]
    EmptySweep(String),
    #[error("{0} joint arms exceed the brute-force cap of {1}")]
    TooLarge(String, usize),
}

/// Runs the configured experiment.
pub fn execute(cfg: &RunConfig) -> Result<ExperimentResult, CliError> {
    let env = cfg.build_environment()?;
    let exec = if cfg.parallel {
        Execution::Parallel
    } else {
        Execution::Sequential
    };
    Ok(run_experiment(&cfg.experiment(&env), exec))
}

/// Runs the experiment and writes its CSV files under `cfg.out`.
pub fn run_and_emit(cfg: &RunConfig) -> Result<(ExperimentResult, OutputPaths), CliError> {
    let result = execute(cfg)?;
    let paths = emit_csv(&result, &cfg.out)?;
    Ok((result, paths))
}

/// One point of a parameter sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub label: String,
    pub config: RunConfig,
}

/// Legend label for `key=value`; `policy.epsilon` renders as `ε=value`.
pub fn sweep_label(key: &str, value: &str) -> String {
    let leaf = key.rsplit('.').next().unwrap_or(key);
    match leaf {
        "epsilon" => format!("ε={value}"),
        _ => format!("{leaf}={value}"),
    }
}

/// Expands a sweep over `key`: one config per value, each writing under
/// `<out>_<leaf><value>`.
pub fn plan_sweep(
    path: &Path,
    overrides: &[Override],
    key: &str,
    values: &[String],
) -> Result<Vec<SweepPoint>, CliError> {
    if values.is_empty() {
        return Err(CliError::EmptySweep(key.to_string()));
    }
    let leaf = key.rsplit('.').next().unwrap_or(key);
    values
        .iter()
        .map(|v| {
            let mut all = overrides.to_vec();
            all.push(Override::parse(&format!("{key}={v}"))?);
            let mut config = RunConfig::load(path, &all)?;
            let mut out = config.out.clone().into_os_string();
            out.push(format!("_{leaf}{v}"));
            config.out = PathBuf::from(out);
            let label = sweep_label(key, v);
            config.name = format!("{} {label}", config.name);
            Ok(SweepPoint { label, config })
        })
        .collect()
}

/// Human-readable optimum and gap summary, computed by brute force.
pub fn oracle_report(env: &Environment, cap: usize, with_table: bool) -> Result<String, CliError> {
    let table = env.gap_table(cap).ok_or_else(|| {
        let count = env
            .action_set()
            .count(env.graph())
            .map_or_else(|| "more than 2^128".to_string(), |n| n.to_string());
        CliError::TooLarge(count, cap)
    })?;
    let positive = table.iter().map(|(_, g)| *g).filter(|&g| g > 0.0);
    let delta_min = positive.clone().fold(f64::INFINITY, f64::min);
    let delta_max = table.iter().map(|(_, g)| *g).fold(0.0, f64::max);
    let h = env.graph();
    let mut s = String::new();
    let _ = writeln!(s, "environment: {}", env.name());
    let _ = writeln!(s, "agents: {}", h.num_agents());
    let _ = writeln!(s, "groups: {}", h.num_groups());
    let _ = writeln!(s, "local arms: {}", h.local_arm_count());
    let _ = writeln!(s, "joint arms: {}", table.len());
    let _ = writeln!(s, "optimal arm: {}", env.optimal_arm());
    let _ = writeln!(s, "mu*: {:.6}", env.optimal_value());
    if delta_min.is_finite() {
        let _ = writeln!(s, "delta_min: {delta_min:.6}");
    } else {
        let _ = writeln!(s, "delta_min: none (every arm is optimal)");
    }
    let _ = writeln!(s, "delta_max: {delta_max:.6}");
    if with_table {
        let _ = writeln!(s, "joint_arm,mean,gap");
        for (a, gap) in &table {
            let arms: Vec<String> = a.arms().iter().map(usize::to_string).collect();
            let _ = writeln!(s, "{},{:.6},{:.6}", arms.join(" "), env.joint_mean(a), gap);
        }
    }
    Ok(s)
}
