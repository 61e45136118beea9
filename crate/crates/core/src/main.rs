use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mbprecode::channel::save_channel;
use mbprecode::runner::report::emit_curves;
use mbprecode::runner::{benchmark_precoders, emit_report, run_scenario, sweep_psat, ScenarioConfig, SweepRange};
use mbprecode::{Error, Result};

#[derive(Parser)]
#[command(name = "mbprecode", version, about = "Multibeam satellite precoding simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured scenario and write CSV reports.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sweep the saturation power and write reports plus per-scheme curves.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        psat_min: f64,
        #[arg(long, allow_hyphen_values = true)]
        psat_max: f64,
        #[arg(long)]
        step: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time the precoder designs against the number of users.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "4,8,16")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Write the scenario channel matrix as CSV.
    GenChannel {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out, seed } => {
            let mut cfg = ScenarioConfig::from_path(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let report = run_scenario(&cfg)?;
            emit_report(&report, &out)?;
            let failed = report.cells.iter().filter(|c| c.outcome.is_err()).count();
            eprintln!(
                "{} cells, {} failed, reports in {}",
                report.cells.len(),
                failed,
                out.display()
            );
        }
        Command::Sweep {
            config,
            psat_min,
            psat_max,
            step,
            out,
        } => {
            let cfg = ScenarioConfig::from_path(&config)?;
            let range = SweepRange {
                min_dbw: psat_min,
                max_dbw: psat_max,
                step_db: step,
            };
            let (report, curves) = sweep_psat(&cfg, range)?;
            emit_report(&report, &out)?;
            emit_curves(&curves, &out)?;
            eprintln!("{} schemes swept, reports in {}", curves.len(), out.display());
        }
        Command::Bench { sizes, reps, seed } => {
            let rep = benchmark_precoders(&sizes, reps, seed)?;
            print!("{}", rep.to_csv());
            for (name, slope) in &rep.exponents {
                eprintln!("{name}: fitted growth exponent {slope:.2}");
            }
        }
        Command::GenChannel { config, out } => {
            let cfg = ScenarioConfig::from_path(&config)?;
            let h = cfg.build_channel()?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::Io(e.to_string()))?;
            }
            save_channel(&h, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.code());
            match e {
                Error::Config(_) | Error::Parse { .. } => ExitCode::from(2),
                Error::Io(_) => ExitCode::from(3),
                _ => ExitCode::from(1),
            }
        }
    }
}
