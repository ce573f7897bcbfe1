use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use bore_cli::aggregate::{aggregate_dir, write_aggregate};
use bore_cli::config::{Method, RunConfig, Seeds};
use bore_cli::demo::{self, DemoSettings};
use bore_cli::run::execute;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bore", version, about = "Classifier-based Bayesian optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run replicated optimization runs described by a JSON config.
    Run(RunArgs),
    /// Aggregate trace-*.csv files in a directory into per-iteration quantiles.
    Aggregate {
        dir: PathBuf,
        /// Defaults to <dir>/aggregate.csv.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Tabulate true and estimated density ratios on the toy problem.
    DreDemo {
        #[arg(long, default_value_t = 0.25)]
        gamma: f64,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 601)]
        grid_size: usize,
        #[arg(long, default_value = "dre_demo.csv")]
        output: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long)]
    benchmark: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    n_init: Option<usize>,
    #[arg(long)]
    n_iterations: Option<usize>,
    /// Number of consecutive seeds, starting at --seed-base.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long, requires = "seeds")]
    seed_base: Option<u64>,
    #[arg(long)]
    record_wall_time: bool,
}

impl RunArgs {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(v) = &self.output_dir {
            c.output_dir = v.clone();
        }
        if let Some(v) = self.method {
            c.method = v;
        }
        if let Some(v) = &self.benchmark {
            c.benchmark = v.clone();
        }
        if let Some(v) = self.gamma {
            c.gamma = v;
        }
        if let Some(v) = self.n_init {
            c.n_init = v;
        }
        if let Some(v) = self.n_iterations {
            c.n_iterations = v;
        }
        if let Some(count) = self.seeds {
            c.seeds = Seeds::Range {
                count,
                base: self.seed_base.unwrap_or(0),
            };
        }
        if self.record_wall_time {
            c.record_wall_time = true;
        }
    }
}

fn real_main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => {
            let mut config = RunConfig::load(&args.config)?;
            args.apply(&mut config);
            for p in execute(&config)? {
                println!("{}", p.display());
            }
        }
        Command::Aggregate { dir, output } => {
            let (metric, rows) = aggregate_dir(&dir)?;
            let out = output.unwrap_or_else(|| dir.join("aggregate.csv"));
            write_aggregate(&out, metric, &rows)?;
            println!("{}", out.display());
        }
        Command::DreDemo {
            gamma,
            n,
            seed,
            grid_size,
            output,
        } => {
            let settings = DemoSettings {
                gamma,
                n,
                seed,
                grid_size,
                ..DemoSettings::default()
            };
            let rows = demo::compute(&settings)?;
            demo::write_csv(&output, &rows)?;
            println!("{}", output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
