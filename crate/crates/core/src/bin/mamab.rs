use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mamab::cli::{
    self, config::RunConfig, oracle_report, plan_sweep, read_summary, write_svg, Override, Series,
};
use mamab::elimination::DEFAULT_ORACLE_CAP;

#[derive(Parser)]
#[command(
    name = "mamab",
    version,
    about = "Multi-agent bandit experiments on coordination hypergraphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    config: PathBuf,
    /// Override a config key, e.g. `--set policy.epsilon=0.05`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output path prefix.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record wall-clock time in the summary.
    #[arg(long)]
    timing: bool,
    /// Run trials on all cores.
    #[arg(long)]
    parallel: bool,
}

impl RunArgs {
    fn overrides(&self) -> Result<Vec<Override>> {
        let mut all = self
            .set
            .iter()
            .map(|s| Override::parse(s))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(seed) = self.seed {
            all.push(Override::new("seed", seed as i64));
        }
        if let Some(trials) = self.trials {
            all.push(Override::new("trials", trials as i64));
        }
        if let Some(out) = &self.out {
            all.push(Override::new("out", out.display().to_string()));
        }
        if self.timing {
            all.push(Override::new("timing", true));
        }
        if self.parallel {
            all.push(Override::new("parallel", true));
        }
        Ok(all)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its CSV files.
    Run(RunArgs),
    /// Run one experiment per value of a config key and plot them together.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Key to vary, e.g. `policy.epsilon`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Plot summary CSV files as an SVG chart.
    Plot {
        #[arg(required = true)]
        summaries: Vec<PathBuf>,
        /// Legend labels, one per summary; defaults to the file stems.
        #[arg(long = "label")]
        labels: Vec<String>,
        #[arg(long, default_value = "mean cumulative regret")]
        title: String,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Print the brute-force optimum and gaps of a config's environment.
    Oracle {
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Also list every joint arm with its mean and gap.
        #[arg(long)]
        gaps: bool,
        #[arg(long, default_value_t = DEFAULT_ORACLE_CAP)]
        cap: usize,
    },
}

fn run(args: &RunArgs) -> Result<()> {
    let cfg = RunConfig::load(&args.config, &args.overrides()?)?;
    let (result, paths) = cli::run_and_emit(&cfg)?;
    let last = result
        .summary
        .rows
        .last()
        .context("experiment logged no checkpoints")?;
    println!(
        "{}: T={} trials={} final regret {:.3} (std {:.3})",
        cfg.name, cfg.horizon, cfg.trials, last.mean, last.std
    );
    println!("wrote {}", paths.trials.display());
    println!("wrote {}", paths.summary.display());
    Ok(())
}

fn sweep(args: &RunArgs, param: &str, values: &[String]) -> Result<()> {
    let points = plan_sweep(&args.config, &args.overrides()?, param, values)?;
    let mut series = Vec::with_capacity(points.len());
    for p in &points {
        let (result, paths) = cli::run_and_emit(&p.config)?;
        let last = result
            .summary
            .rows
            .last()
            .context("experiment logged no checkpoints")?;
        println!(
            "{}: final regret {:.3} (std {:.3}), {:.0} gaussian draws, {}",
            p.label,
            last.mean,
            last.std,
            last.mean_gaussian_draws,
            paths.summary.display()
        );
        series.push(Series {
            label: p.label.clone(),
            rows: result.summary.rows,
        });
    }
    let base = RunConfig::load(&args.config, &args.overrides()?)?;
    let mut svg = base.out.into_os_string();
    svg.push(format!(
        "_{}.svg",
        param.rsplit('.').next().unwrap_or(param)
    ));
    let svg = PathBuf::from(svg);
    write_svg(&series, &base.name, &svg)?;
    println!("wrote {}", svg.display());
    Ok(())
}

fn plot(summaries: &[PathBuf], labels: &[String], title: &str, out: &Path) -> Result<()> {
    if !labels.is_empty() && labels.len() != summaries.len() {
        bail!("{} labels for {} summaries", labels.len(), summaries.len());
    }
    let series = summaries
        .iter()
        .enumerate()
        .map(|(i, path)| {
            let label = labels.get(i).cloned().unwrap_or_else(|| {
                let name = path.file_name().map(|n| n.to_string_lossy().into_owned());
                let name = name.unwrap_or_default();
                name.strip_suffix(".summary.csv")
                    .unwrap_or(&name)
                    .to_string()
            });
            Ok(Series {
                label,
                rows: read_summary(path)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_svg(&series, title, out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn oracle(config: &Path, set: &[String], gaps: bool, cap: usize) -> Result<()> {
    let overrides = set
        .iter()
        .map(|s| Override::parse(s))
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = RunConfig::load(config, &overrides)?;
    let env = cfg.build_environment()?;
    print!("{}", oracle_report(&env, cap, gaps)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => run(args),
        Command::Sweep { run, param, values } => sweep(run, param, values),
        Command::Plot {
            summaries,
            labels,
            title,
            out,
        } => plot(summaries, labels, title, out),
        Command::Oracle {
            config,
            set,
            gaps,
            cap,
        } => oracle(config, set, *gaps, *cap),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
