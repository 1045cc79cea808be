use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use blockprior::harness::{self, emit, render, ExperimentConfig, Format, Grid, Mode};
use blockprior::Error;
use clap::{Parser, Subcommand, ValueEnum};

const CONFIG_ERROR: u8 = 2;
const NUMERICAL_ERROR: u8 = 3;

#[derive(Parser)]
#[command(name = "blockprior", version, about = "Measurement bounds, optimal weights and recovery experiments for block-sparse signals with prior support information")]
struct Cli {
    /// JSON experiment configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (stdout when absent)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Svg,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the normalized measurement bound over sparsity fractions
    Bounds {
        #[arg(long)]
        q: Option<usize>,
        /// Block sizes, comma separated
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
        /// Sparsity fractions, comma separated
        #[arg(long, value_delimiter = ',')]
        sigma: Vec<f64>,
    },
    /// Tabulate optimal set weights
    Weights {
        #[arg(long, value_delimiter = ',')]
        alpha: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
    },
    /// Tabulate the sensitivity of the optimal weights
    Sensitivity {
        #[arg(long, value_delimiter = ',')]
        alpha: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
        /// Sensitivity below which a row counts as flat
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Solve one instance of a sweep configuration and print a JSON summary per weighting
    Recover {
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Run the experiment described by --config
    Sweep,
}

fn load(cli: &Cli, mode: Option<Mode>) -> Result<ExperimentConfig, Error> {
    let mut config = match (&cli.config, mode) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(mode)) => ExperimentConfig::new(mode),
        (None, None) => return Err(Error::Config("--config is required".into())),
    };
    if let Some(mode) = mode {
        config.mode = mode;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn write_output(cli: &Cli, text: &str) -> Result<(), Error> {
    match &cli.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), Error> {
    let format = match cli.format {
        OutputFormat::Csv => Format::Csv,
        OutputFormat::Svg => Format::Svg,
    };
    let config = match &cli.command {
        Command::Bounds { q, k, sigma } => {
            let mut config = load(cli, Some(Mode::BoundsTable))?;
            if q.is_some() {
                config.q = *q;
            }
            config.q = config.q.or(Some(100));
            if !k.is_empty() {
                config.k_list = Some(k.clone());
            }
            if !sigma.is_empty() {
                config.sigma_grid = Some(Grid::List(sigma.clone()));
            }
            config
        }
        Command::Weights { alpha, k } | Command::Sensitivity { alpha, k, .. } => {
            let mode = if matches!(cli.command, Command::Weights { .. }) {
                Mode::WeightsTable
            } else {
                Mode::SensitivityTable
            };
            let mut config = load(cli, Some(mode))?;
            if !alpha.is_empty() {
                config.alpha_grid = Some(Grid::List(alpha.clone()));
            }
            if !k.is_empty() {
                config.k_list = Some(k.clone());
            }
            if let Command::Sensitivity { threshold: Some(t), .. } = cli.command {
                config.flat_threshold = Some(t);
            }
            config
        }
        Command::Recover { m, trial } => {
            let config = load(cli, None)?;
            let reports = harness::recover_instance(&config, *m, *trial)?;
            let mut text = String::new();
            for r in reports {
                let line = serde_json::json!({
                    "series": r.series.as_str(),
                    "m": r.m,
                    "s": r.s,
                    "error": r.error,
                    "success": r.success,
                    "converged": r.outcome.converged,
                    "certified": r.outcome.certified,
                    "iterations": r.outcome.iterations,
                    "primal_residual": r.outcome.primal_residual,
                    "objective": r.outcome.objective,
                });
                text.push_str(&line.to_string());
                text.push('\n');
            }
            return write_output(cli, &text);
        }
        Command::Sweep => load(cli, None)?,
    };
    let report = harness::run(&config)?;
    match &cli.out {
        Some(path) => emit(&report, format, path),
        None => write_output(cli, &render(&report, format)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(NUMERICAL_ERROR)
            } else {
                ExitCode::from(CONFIG_ERROR)
            }
        }
    }
}
