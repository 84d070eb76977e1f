use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use quench_lab::{run_oracle_check, run_quench_experiment, CliError, ExperimentConfig, OracleTolerances};

#[derive(Parser)]
#[command(name = "quench-lab", version, about = "Quench dynamics and subsystem distance analysis")]
struct Cli {
    /// Worker threads for sweep points.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,

    /// Output directory; overrides `output_dir` in the config.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every quench of a configuration and write the result tables.
    Run { config: PathBuf },
    /// Compare the MPS pipeline with exact diagonalization (chains up to 10 sites).
    OracleCheck { config: PathBuf },
}

fn load(path: &PathBuf, output: &Option<PathBuf>) -> Result<ExperimentConfig, CliError> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(dir) = output {
        config.output_dir = dir.clone();
    }
    Ok(config)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run { config } => {
            let config = load(config, &cli.output)?;
            let outcome = run_quench_experiment(&config, cli.workers)?;
            println!("[run] wrote {} quenches to {}", outcome.results.len(), outcome.output_dir.display());
            outcome.status()
        }
        Command::OracleCheck { config } => {
            let config = load(config, &cli.output)?;
            let reports = run_oracle_check(&config, OracleTolerances::default())?;
            let mut failed = Vec::new();
            for r in &reports {
                println!(
                    "[oracle] {} n={} t_end={} rdm={:.3e} series={:.3e} energy={:.3e} {}",
                    r.quench_id,
                    r.n,
                    r.t_end,
                    r.max_rdm_deviation,
                    r.max_series_deviation,
                    r.ground_energy_deviation,
                    if r.passed { "PASS" } else { "FAIL" }
                );
                if !r.passed {
                    failed.push(r.quench_id.clone());
                }
            }
            std::fs::create_dir_all(&config.output_dir)?;
            std::fs::write(config.output_dir.join("oracle_report.json"), serde_json::to_string_pretty(&reports)? + "\n")?;
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::OracleFailed(failed.join(", ")))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
