//! decision-gate: plan, evaluate and simulate multi-metric ship decisions.
//!
//! Exit codes: 0 ship (or success), 1 no-ship, 2 input error, 3 infeasible design.

mod commands;
mod config;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use decision_gate::design_corrections::{CorrectionKind, MetricCounts};
use decision_gate::mc_harness::{CovarianceStructure, Scenario};
use decision_gate::sequential_gst::SpendingFunction;
use decision_gate::{Error, RiskBudget};

const EXIT_INPUT: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Infeasible(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Planning(_) => Self::Infeasible(e.to_string()),
            _ => Self::Input(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
}

#[derive(Parser)]
#[command(
    name = "decision-gate",
    version,
    about = "Risk-controlled ship decisions for multi-metric experiments"
)]
struct Cli {
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Table, global = true)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print corrected levels, power targets and sample sizes for a config
    Design { config: PathBuf },

    /// Evaluate observed results against a config's plan
    Evaluate { config: PathBuf, results: PathBuf },

    /// Monte Carlo error rates of the decision rule
    Simulate(SimulateFlags),
}

#[derive(clap::Args)]
struct SimulateFlags {
    #[arg(long, default_value = "status_quo", value_parser = parse_scenario)]
    scenario: Scenario,

    /// independent, dependent, block1 or block2
    #[arg(long, default_value = "independent", value_parser = CovarianceStructure::parse)]
    structure: CovarianceStructure,

    /// none, only_alpha, prop33, prop41, prop41_improved or prop41_improved_remark
    #[arg(long, default_value = "prop41", value_parser = parse_correction)]
    correction: CorrectionKind,

    /// Substitute Nyholt's effective number of tests for S and G
    #[arg(long)]
    nyholt: bool,

    #[arg(long, default_value_t = 5)]
    success: usize,
    #[arg(long, default_value_t = 5)]
    guardrail: usize,
    #[arg(long, default_value_t = 2)]
    deterioration: usize,
    #[arg(long, default_value_t = 2)]
    quality: usize,

    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha_minus: f64,
    #[arg(long, default_value_t = 0.2)]
    beta: f64,

    #[arg(long, default_value_t = 20_000)]
    reps: u64,

    #[arg(long, env = "DECISION_GATE_SEED", default_value_t = 20_240_601)]
    seed: u64,

    /// Interim analyses of the deterioration and quality tests
    #[arg(long, default_value_t = 10)]
    looks: usize,

    /// linear or obf
    #[arg(long, default_value = "linear", value_parser = parse_spending)]
    spending: SpendingFunction,

    /// Run every scenario x structure x correction cell instead of one cell
    #[arg(long)]
    paper_tables: bool,

    /// With --paper-tables, add the Nyholt-adjusted rows
    #[arg(long, requires = "paper_tables")]
    nyholt_rows: bool,

    /// Single-metric table of sequential deterioration vs final test agreement
    #[arg(long, conflicts_with = "paper_tables")]
    overlay_table: bool,

    /// Worker threads (defaults to all cores)
    #[arg(long)]
    threads: Option<usize>,

    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_scenario(s: &str) -> Result<Scenario, Error> {
    s.parse()
}

fn parse_correction(s: &str) -> Result<CorrectionKind, Error> {
    s.parse()
}

fn parse_spending(s: &str) -> Result<SpendingFunction, Error> {
    s.parse()
}

fn run(cli: Cli) -> Result<(String, i32), CliError> {
    match cli.command {
        Command::Design { config } => commands::design(&config, cli.format),
        Command::Evaluate { config, results } => {
            commands::evaluate_cmd(&config, &results, cli.format)
        }
        Command::Simulate(f) => {
            if let Some(n) = f.threads {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| CliError::Input(format!("--threads: {e}")))?;
            }
            commands::simulate(&commands::SimulateArgs {
                scenario: f.scenario,
                structure: f.structure,
                correction: f.correction,
                nyholt: f.nyholt,
                counts: MetricCounts::new(f.success, f.guardrail, f.deterioration, f.quality),
                budget: RiskBudget::new(f.alpha, f.alpha_minus, f.beta),
                reps: f.reps,
                seed: f.seed,
                looks: f.looks,
                spending: f.spending,
                paper_tables: f.paper_tables,
                nyholt_rows: f.nyholt_rows,
                overlay_table: f.overlay_table,
                out: f.out,
                format: cli.format,
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok((text, code)) => {
            print!("{text}");
            ExitCode::from(code as u8)
        }
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(CliError::Infeasible(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INFEASIBLE)
        }
    }
}
