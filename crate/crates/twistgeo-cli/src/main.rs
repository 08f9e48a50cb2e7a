use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use twistgeo_cli::expr::{parse_expression, print_element};
use twistgeo_cli::geofile::{load_geometry, GeometrySpec};
use twistgeo_cli::report::{check, levi_civita, render, Outcome, Suite};

const RESIDUAL_FAILURE: u8 = 1;
const SPEC_ERROR: u8 = 2;

#[derive(Parser)]
#[command(name = "twistgeo", version, about = "Exact braided noncommutative Riemannian geometry for abelian twists")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run residual suites and print a JSON report; exit 1 if any residual is nonzero.
    Check {
        spec: PathBuf,
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        /// Overrides the seed from the [suite] section.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Solve for the Levi-Civita connection and write its report.
    LeviCivita {
        spec: PathBuf,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate an expression in the spec's algebra and print it canonically.
    Eval {
        spec: PathBuf,
        #[arg(long)]
        expr: String,
    },
}

fn load(path: &Path) -> Result<GeometrySpec, ExitCode> {
    match load_geometry(path) {
        Ok(spec) => {
            for w in &spec.warnings {
                eprintln!("{}: {w}", path.display());
            }
            Ok(spec)
        }
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            Err(ExitCode::from(SPEC_ERROR))
        }
    }
}

fn finish(outcome: twistgeo::Result<Outcome>, out: Option<&PathBuf>) -> ExitCode {
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(RESIDUAL_FAILURE);
        }
    };
    let text = render(&outcome.report);
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &text) {
                eprintln!("cannot write {}: {e}", path.display());
                return ExitCode::from(SPEC_ERROR);
            }
        }
        None => print!("{text}"),
    }
    if outcome.failures == 0 {
        ExitCode::SUCCESS
    } else {
        eprintln!("{} check(s) with nonzero residuals", outcome.failures);
        ExitCode::from(RESIDUAL_FAILURE)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Check { spec, suite, seed } => match load(&spec) {
            Ok(s) => {
                let seed = seed.unwrap_or(s.suite.seed);
                finish(check(&s, suite, seed), None)
            }
            Err(code) => code,
        },
        Command::LeviCivita { spec, out } => match load(&spec) {
            Ok(s) => finish(levi_civita(&s), out.as_ref()),
            Err(code) => code,
        },
        Command::Eval { spec, expr } => match load(&spec) {
            Ok(s) => {
                let alg = s.geometry.alg();
                match parse_expression(&expr, alg) {
                    Ok((value, warnings)) => {
                        for w in warnings {
                            eprintln!("{w}");
                        }
                        println!("{}", print_element(alg.kind(), &value));
                        ExitCode::SUCCESS
                    }
                    Err(e) => {
                        eprintln!("{e}");
                        ExitCode::from(SPEC_ERROR)
                    }
                }
            }
            Err(code) => code,
        },
    }
}
