use clap::{Args, Parser, Subcommand};
use sirs_core::analysis::{SweepAxis, CHECK_IDS};
use sirs_core::cli::{
    cmd_equilibria, cmd_r0, cmd_simulate, cmd_sweep, cmd_verify, parse_config, CliError, Format, ScenarioConfig,
    VerifyOptions,
};
use sirs_core::reproduction::OperatorGrid;
use std::path::PathBuf;
use std::process::ExitCode;

/// Seasonal SIRS model with asymptomatic infection.
#[derive(Parser, Debug)]
#[command(name = "sirs", version)]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output format; overrides the scenario's `output.format`.
    #[arg(long, global = true)]
    format: Option<Format>,
    /// Sampling seed; overrides the scenario's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Spectral radius of the monodromy matrix and the basic reproduction number.
    R0 {
        /// Also estimate R0 from the discretised next-infection operator.
        #[arg(long)]
        operator_oracle: bool,
        /// Grid size for the operator estimate.
        #[arg(long, default_value_t = 2048)]
        grid: usize,
    },
    /// Integrate from an initial point and print a CSV trajectory.
    Simulate(SimulateArgs),
    /// Equilibria and their stability (constant transmission only).
    Equilibria,
    /// Run verification checks; exits with 2 if any is violated.
    Verify {
        /// Checks to run; repeatable. Defaults to all.
        #[arg(long = "check", value_parser = clap::builder::PossibleValuesParser::new(CHECK_IDS))]
        checks: Vec<String>,
        /// Random initial points per check when the scenario lists none.
        #[arg(long, default_value_t = 20)]
        samples: usize,
        /// `r_s - r_a` for the near-equal-rates check.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        delta_r: f64,
        /// Fixed horizon for extinction and persistence instead of the adaptive one.
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// R0 and rho along one parameter axis.
    Sweep {
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        grid: Vec<f64>,
    },
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    t_end: f64,
    /// Sampling interval; every accepted step is printed when absent.
    #[arg(long)]
    stride: Option<f64>,
    /// Index into the scenario's `initial_points`.
    #[arg(long, default_value_t = 0)]
    point: usize,
}

fn load(path: &Option<PathBuf>) -> Result<ScenarioConfig, CliError> {
    let path = path
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config PATH is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let config = parse_config(&text)?;
    for w in config.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<(String, bool, ScenarioConfig), CliError> {
    let mut config = load(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let format = cli.format.unwrap_or(config.output.format);
    let (text, violated) = match cli.command {
        Command::R0 { operator_oracle, grid } => {
            let op = operator_oracle.then_some(OperatorGrid {
                grid_n: grid,
                truncation: None,
            });
            (cmd_r0(&config, op, format)?, false)
        }
        Command::Simulate(a) => (cmd_simulate(&config, a.t_end, a.stride, a.point)?, false),
        Command::Equilibria => (cmd_equilibria(&config, format)?, false),
        Command::Verify {
            checks,
            samples,
            delta_r,
            horizon,
        } => {
            let checks = if checks.is_empty() {
                CHECK_IDS.iter().map(|s| s.to_string()).collect()
            } else {
                checks
            };
            let opts = VerifyOptions {
                checks,
                samples,
                seed: config.seed,
                delta_r,
                horizon,
            };
            let out = cmd_verify(&config, &opts, format)?;
            (out.text, out.violated)
        }
        Command::Sweep { axis, grid } => (cmd_sweep(&config, axis, &grid, format)?, false),
    };
    Ok((text, violated, config))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok((text, violated, config)) => {
            let written = match &config.output.path {
                Some(path) => std::fs::write(path, &text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
            ExitCode::from(if violated { 2 } else { 0 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
