use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use quotamech::harness::report::{write_bic, write_run, write_sweep};
use quotamech::harness::{benchmark, bic_sweep, run_scenario, sweep, RunOptions, Scenario};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "quotamech", version, about = "Online quota allocation with misreport detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Replicate one scenario at a single horizon.
    Run {
        #[command(flatten)]
        common: Common,
        /// Horizon to run; defaults to the largest one in the config.
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Run every horizon of a scenario and fit the regret scaling.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Paired truthful/deviating runs from the scenario's [bic] section.
    Bic {
        #[command(flatten)]
        common: Common,
    },
    /// Solve for the optimal offsets of the scenario's law and quota.
    Solve {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario TOML file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides `base_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    threads: Option<usize>,
    /// Write per-round traces as NDJSON.
    #[arg(long)]
    traces: bool,
}

impl Common {
    fn load(&self) -> Result<(Scenario, RunOptions)> {
        let mut s = load(&self.config)?;
        if let Some(seed) = self.seed {
            s.base_seed = seed;
        }
        if self.threads == Some(0) {
            bail!("--threads must be at least 1");
        }
        Ok((s, RunOptions { threads: self.threads, keep_traces: self.traces }))
    }
}

fn load(path: &Path) -> Result<Scenario> {
    Scenario::from_path(path).with_context(|| format!("loading {}", path.display()))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { common, horizon } => {
            let (s, opts) = common.load()?;
            let horizon = horizon.or_else(|| s.horizons.iter().copied().max()).unwrap_or(1);
            let run = run_scenario(&s, horizon, &opts)?;
            write_run(&common.out, &run)?;
            let r = &run.regret;
            println!(
                "{}",
                json!({
                    "scenario": s.name,
                    "horizon": horizon,
                    "seeds": r.per_seed.len(),
                    "failed_seeds": r.failed_seeds,
                    "mean_regret": r.mean,
                    "max_regret": r.max_regret,
                    "out": common.out,
                })
            );
        }
        Command::Sweep { common } => {
            let (s, opts) = common.load()?;
            let report = sweep(&s, &opts)?;
            write_sweep(&common.out, &report)?;
            for p in &report.points {
                println!("{}", serde_json::to_string(p)?);
            }
            println!("{}", json!({ "slope": report.slope, "fitted_c": report.fitted_c, "out": common.out }));
        }
        Command::Bic { common } => {
            let (s, opts) = common.load()?;
            let report = bic_sweep(&s, &opts)?;
            write_bic(&common.out, &report)?;
            for p in &report.points {
                println!(
                    "{}",
                    json!({
                        "horizon": p.horizon,
                        "strategy": p.strategy,
                        "mean_gain": p.mean_gain,
                        "ci": p.ci,
                        "upper_quantile": p.upper_quantile,
                        "bound_scale": p.bound_scale,
                        "fraction_exceeding": p.fraction_exceeding,
                    })
                );
            }
            println!(
                "{}",
                json!({ "mean_slope": report.mean_slope, "fitted_c": report.fitted_c, "out": common.out })
            );
        }
        Command::Solve { config } => {
            let s = load(&config)?;
            let (report, utility) = benchmark(&s.distribution.build()?, &s.quota()?)?;
            println!("{}", serde_json::to_string_pretty(&json!({ "solver": report, "benchmark_utility": utility }))?);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_is_well_formed() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_common_flags() {
        let cli = Cli::try_parse_from([
            "quotamech", "run", "--config", "a.toml", "--out", "o", "--seed", "3", "--threads", "2", "--traces",
        ])
        .unwrap();
        match cli.command {
            Command::Run { common, horizon } => {
                assert_eq!(common.seed, Some(3));
                assert_eq!(common.threads, Some(2));
                assert!(common.traces);
                assert_eq!(horizon, None);
            }
            other => panic!("{other:?}"),
        }
    }
}
