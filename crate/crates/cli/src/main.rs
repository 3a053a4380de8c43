//! `motoo-lab`: reproducible experiments on SDEs with iterated-logarithm
//! growth. See README for the config schema and subcommand reference.

mod commands;
mod config;

use commands::CliError;
use std::process::ExitCode;

const USAGE: &str = "\
motoo-lab <subcommand> [flags]

subcommands:
  validate   --config FILE [--tol T]
             sample the model hypotheses on the default grids
  classify   --generator (bm|inverse_drift|cir) [--rho R] [--sigma S]
             [--delta D] [--c C] [--envelope (log|sqrt_loglog) --a A --t0 T0]
             [--out FILE]
             scale/speed/Feller report as JSON, optional Motoo verdict
  density    --delta D --t T [--x0 X] [--grid lo:hi:step] [--out FILE]
             squared-Bessel density/CDF/tail-bound table as CSV
  simulate   --model FILE [--T T] [--dt DT] [--paths N] [--seed S]
             [--coupled] [--every K] [--out FILE]
             Euler paths as CSV (t, X and z_l, z, z_u, theta when coupled)
  lil-report --config FILE [--out PREFIX] [--workers N]
             ensemble growth statistics: JSON summary + CSV time series

exit codes: 0 ok, 1 validation failure, 2 numeric failure, 64 usage.
MOTOO_LAB_THREADS overrides the worker count (never affects results).
";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(subcommand) = args.first().map(String::as_str) else {
        eprint!("{USAGE}");
        return ExitCode::from(64);
    };
    let rest = &args[1..];
    let result = match subcommand {
        "validate" => commands::cmd_validate(rest),
        "classify" => commands::cmd_classify(rest),
        "density" => commands::cmd_density(rest),
        "simulate" => commands::cmd_simulate(rest),
        "lil-report" => commands::cmd_lil_report(rest),
        "help" | "--help" | "-h" => {
            print!("{USAGE}");
            Ok(())
        }
        other => Err(CliError::Usage(format!("unknown subcommand '{other}'"))),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            eprint!("{USAGE}");
            ExitCode::from(64)
        }
        Err(CliError::Validation(msg)) => {
            eprintln!("validation failure: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Numeric(msg)) => {
            eprintln!("numeric failure: {msg}");
            ExitCode::from(2)
        }
    }
}
