//! `gmatern`: simulate, thin, evaluate and estimate from the command line.
//!
//! Every subcommand writes its artifacts plus a `manifest.json` into the output
//! directory: `--out`, else `out_dir` from the config, else `$GMATERN_OUT/<command>`,
//! else `gmatern-out/<command>`. Errors go to stderr as one JSON object; the exit
//! status is 2 for config errors, 3 for numeric failures and 4 for I/O errors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod error;
mod jobs;
mod output;
mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{EstimateJob, ExtremalJob, IntensityJob, Job, RunConfig, SimulateLgcpJob, ThinJob};
use error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "gmatern", version, about = "Generalized Matérn thinning and extremal storm simulation")]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate LGCP (or Poisson) patterns with their intensity fields.
    SimulateLgcp {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        job: SimulateLgcpJob,
    },
    /// Thin a stored pattern.
    Thin {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        job: ThinJob,
    },
    /// Closed-form or Monte Carlo intensities of the thinned process.
    Intensity {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        job: IntensityJob,
    },
    /// Storm fields, extremal thinnings and their checks.
    Extremal {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        job: ExtremalJob,
    },
    /// Empirical summaries of stored patterns or samples.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        job: EstimateJob,
    },
    /// Run the job described by a TOML config file.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Long-format tables for plotting from an artifact.
    PlotData {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn default_out(command: &str) -> PathBuf {
    match std::env::var_os("GMATERN_OUT") {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(command),
        _ => PathBuf::from("gmatern-out").join(command),
    }
}

fn set_threads(n: Option<usize>) -> CliResult<()> {
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::config("`threads` must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(e.to_string()))?;
    }
    Ok(())
}

fn run_job(cfg: RunConfig, out: Option<PathBuf>, threads: Option<usize>) -> CliResult<PathBuf> {
    set_threads(threads.or(cfg.threads))?;
    let dir = out.or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| default_out(cfg.job.name()));
    let artifacts = jobs::execute(&cfg.job, cfg.seed)?;
    output::commit(&dir, cfg.job.name(), &cfg, artifacts)
}

fn read_config(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    config::parse_config(&text)
}

fn dispatch(cli: Cli) -> CliResult<PathBuf> {
    let from_flags = |common: Common, job: Job| {
        let cfg = RunConfig {
            seed: common.seed,
            out_dir: None,
            threads: None,
            job,
        };
        run_job(cfg, common.out, cli.threads)
    };
    match cli.command {
        Command::SimulateLgcp { common, job } => from_flags(common, Job::SimulateLgcp(job)),
        Command::Thin { common, job } => from_flags(common, Job::Thin(job)),
        Command::Intensity { common, job } => from_flags(common, Job::Intensity(job)),
        Command::Extremal { common, job } => from_flags(common, Job::Extremal(job)),
        Command::Estimate { common, job } => from_flags(common, Job::Estimate(job)),
        Command::Run { config, out } => run_job(read_config(&config)?, out, cli.threads),
        Command::PlotData { input, out } => {
            set_threads(cli.threads)?;
            let artifacts = plot::plot_data(&input)?;
            let dir = out.unwrap_or_else(|| default_out("plot-data"));
            output::commit(&dir, "plot-data", &serde_json::json!({ "input": input }), artifacts)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::config(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.kind.exit_code());
        }
    };
    match dispatch(cli) {
        Ok(manifest) => {
            println!("{}", serde_json::json!({ "manifest": manifest }));
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.kind.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    #[test]
    fn flag_definitions_are_consistent() {
        super::Cli::command().debug_assert();
    }
}
