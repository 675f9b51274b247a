use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use difflow::workbench::{run_experiment, ExperimentMode, Overrides, SimConfigFile};
use difflow::Error;

/// Differentiable 2D incompressible flow with immersed bodies.
#[derive(Parser)]
#[command(name = "difflow", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    output: PathBuf,
    /// Override the Reynolds number.
    #[arg(long)]
    re: Option<f64>,
    /// Override the number of time steps.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Roll the configured system forward and export fields and forces.
    Simulate(Common),
    /// Cylinder-in-free-stream benchmark: drag, lift, Strouhal number.
    BenchmarkCylinder(Common),
    /// Gradient-based shape/gait optimization of the tail.
    Optimize(Common),
    /// Verify analytic gradients against finite differences.
    CheckGradients(Common),
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::StepFailed { source, .. } => exit_code(source),
        Error::InvalidConfig(_) | Error::DimensionMismatch { .. } => 2,
        Error::Io(_) => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, common) = match &cli.command {
        Command::Simulate(c) => (ExperimentMode::Simulate, c),
        Command::BenchmarkCylinder(c) => (ExperimentMode::BenchmarkCylinder, c),
        Command::Optimize(c) => (ExperimentMode::Optimize, c),
        Command::CheckGradients(c) => (ExperimentMode::CheckGradients, c),
    };

    let config = match SimConfigFile::load(&common.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let overrides = Overrides {
        re: common.re,
        steps: common.steps,
    };
    match run_experiment(&config, mode, &common.output, overrides) {
        Ok(report) => {
            for (k, v) in &report.summary {
                println!("{k} = {v}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
