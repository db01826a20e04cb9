//! `fastgw`: entropic GW/FGW solvers on uniform grids, benchmarks and
//! self-checks.
//!
//! Exit codes: 0 success, 1 input/configuration error (a machine-readable
//! error JSON is printed to stdout), 2 verification failure. Logging is
//! controlled by `RUST_LOG` (e.g. `RUST_LOG=warn`).

mod bench_cmd;
mod echo;
mod io;
mod run;
mod verify_cmd;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "fastgw",
    version,
    about = "Entropic (Fused) Gromov-Wasserstein on uniform grids with quadratic-time gradients"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve entropic Gromov-Wasserstein between two measures
    Gw(run::SolveArgs),
    /// Solve entropic Fused Gromov-Wasserstein (feature + structure costs)
    Fgw(run::FgwArgs),
    /// Time the fast and naive gradient modes over an experiment family
    Bench(bench_cmd::BenchArgs),
    /// Run the oracle/invariant self-checks and print a pass/fail ledger
    Verify(verify_cmd::VerifyArgs),
}

fn main() {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            print_error_json("ConfigInvalid", &e.to_string());
            std::process::exit(1);
        }
    };

    let outcome = match &cli.command {
        Command::Gw(args) => run::cmd_gw(args),
        Command::Fgw(args) => run::cmd_fgw(args),
        Command::Bench(args) => bench_cmd::cmd_bench(args),
        Command::Verify(args) => verify_cmd::cmd_verify(args),
    };

    match outcome {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            print_error_json(err.kind(), &err.to_string());
            std::process::exit(1);
        }
    }
}

fn print_error_json(kind: &str, message: &str) {
    println!(
        "{}",
        serde_json::json!({ "error": kind, "message": message })
    );
}
