//! Command-line front end for the bi-level group-lasso library.

mod commands;
mod io;
mod manifest;
mod svg;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bilasso",
    version,
    about = "Bayesian bi-level group lasso for multi-task regression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with known ground truth.
    Simulate(commands::SimulateArgs),
    /// Run the Gibbs sampler and summarize the posterior.
    Fit(commands::FitArgs),
    /// Estimate (λ₁², λ₂²) by Monte Carlo EM from one or more initial values.
    Mcem(commands::McemArgs),
    /// Grid-search (λ₁², λ₂²) by WAIC and refit at the argmin.
    Waic(commands::WaicArgs),
    /// Evaluate the marginal-likelihood approximation over a grid.
    Mlsurface(commands::MlSurfaceArgs),
    /// Solve the penalized (posterior-mode) problem directly.
    Map(commands::MapArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(args) => commands::cmd_simulate(args),
        Command::Fit(args) => commands::cmd_fit(args),
        Command::Mcem(args) => commands::cmd_mcem(args),
        Command::Waic(args) => commands::cmd_waic(args),
        Command::Mlsurface(args) => commands::cmd_mlsurface(args),
        Command::Map(args) => commands::cmd_map(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
