use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use msfi_cli::{commands, init_threads, run_experiment, CliError, ExperimentConfig, Overrides};

/// Multiscale random field laboratory.
#[derive(Parser)]
#[command(name = "msfi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write results.csv, verdicts.csv, report.json.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicates: Option<usize>,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit with status 3 unless every verdict is dominated.
        #[arg(long)]
        assert_verdicts: bool,
    },
    /// Print exact oracle tables for the built-in tiny instances.
    Oracle,
    /// Evaluate bound curves.
    Bounds {
        #[command(subcommand)]
        command: BoundsCommand,
    },
    /// Tabulate weight families.
    Weights {
        #[command(subcommand)]
        command: WeightsCommand,
    },
}

#[derive(Subcommand)]
enum BoundsCommand {
    /// `msfi bounds eval TailMLSIfct C=2 delta=1 L=64 weight.kind=algebraic weight.beta=0.5`
    Eval { regime: String, params: Vec<String> },
}

#[derive(Subcommand)]
enum WeightsCommand {
    /// `msfi weights table algebraic beta=2 d=1 ell=1,2,4`
    Table { family: String, params: Vec<String> },
}

const EXIT_VERDICT: u8 = 3;

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Run {
            config,
            seed,
            replicates,
            out,
            assert_verdicts,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.apply(&Overrides {
                seed,
                replicates,
                output_dir: out,
            });
            let report = run_experiment(&cfg)?;
            report.write(&cfg.output_dir)?;
            for v in &report.verdicts {
                println!(
                    "{}: C_fit={} dominated={} margin={}",
                    v.regime, v.c_fit, v.dominated, v.margin
                );
            }
            println!("{} rows written to {}", report.rows.len(), cfg.output_dir.display());
            if assert_verdicts && !report.verdicts_pass() {
                return Ok(EXIT_VERDICT);
            }
        }
        Command::Oracle => print!("{}", commands::oracle_tables()?),
        Command::Bounds {
            command: BoundsCommand::Eval { regime, params },
        } => print!("{}", commands::bounds_eval(&regime, &params)?),
        Command::Weights {
            command: WeightsCommand::Table { family, params },
        } => print!("{}", commands::weights_table(&family, &params)?),
    }
    Ok(0)
}

fn main() -> ExitCode {
    init_threads();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
