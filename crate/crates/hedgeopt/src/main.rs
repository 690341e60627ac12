//! Command-line interface: solve the ellipsoid matrix equation, run hedging
//! experiments, plot results.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hedgeopt::harness::{
    read_csv_xy, read_matrix_json, render_scatter, run_experiment, solve_report, write_csv,
    ExperimentConfig, Preset,
};

#[derive(Parser)]
#[command(name = "hedgeopt", version, about = "Ellipsoid-triggered discrete delta hedging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve 2 tr(X) X + 4 X^2 = C^2 for a symmetric matrix C read from JSON.
    Solve {
        /// JSON file holding the matrix (array of rows, or {"dim","entries"}).
        #[arg(long)]
        input: PathBuf,
    },
    /// Run a hedging experiment and write the results CSV.
    Run {
        /// Experiment configuration (strict JSON).
        #[arg(long)]
        config: PathBuf,
        /// Resolution preset overriding n_bar and n_paths.
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: HEDGEOPT_WORKERS, then all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Scatter two CSV columns into a standalone SVG.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        /// X column name, e.g. beta_stochastic.
        #[arg(long)]
        x: String,
        /// Y column name, e.g. beta_uniform.
        #[arg(long)]
        y: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn resolve_workers(flag: Option<usize>) -> usize {
    if let Some(w) = flag {
        return w;
    }
    std::env::var("HEDGEOPT_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(0)
}

fn run(cli: Cli) -> hedgeopt::Result<()> {
    match cli.command {
        Command::Solve { input } => {
            let matrix = read_matrix_json(&input)?;
            print!("{}", solve_report(&matrix)?);
        }
        Command::Run { config, preset, out, workers } => {
            let mut config = ExperimentConfig::from_file(&config)?;
            if let Some(p) = preset {
                config.apply_preset(p);
            }
            if let Some(dir) = out {
                config.output_dir = dir;
            }
            let outcome = run_experiment(&config, resolve_workers(workers))?;
            std::fs::create_dir_all(&config.output_dir)
                .map_err(|e| hedgeopt::Error::io(&config.output_dir, e))?;
            let csv_path = config.output_dir.join("results.csv");
            write_csv(&outcome.outcomes, &config.strategy_set(), &csv_path)?;
            print!("{}", outcome.summary.render());
            println!("results: {}", csv_path.display());
        }
        Command::Plot { csv, x, y, out } => {
            let points = read_csv_xy(&csv, &x, &y)?;
            let svg = render_scatter(&points, &x, &y);
            std::fs::write(&out, svg).map_err(|e| hedgeopt::Error::io(&out, e))?;
            println!("plot: {} ({} points)", out.display(), points.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
