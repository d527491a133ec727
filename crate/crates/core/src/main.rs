use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use dtkernel::cli::{execute, Command, EXIT_USAGE};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    /// Run every structural check on the model.
    Check,
    /// Emit the discount curve from a valuation depth.
    Curve,
    /// Price one asset and test transversality.
    Price,
    /// Emit the money-market, Doob and Flesaker-Hughston decompositions.
    Decompose,
}

/// Discrete-time pricing kernels on finite event trees.
#[derive(Debug, Parser)]
#[command(name = "dtkernel", version)]
struct Args {
    #[arg(value_enum)]
    command: Cmd,
    /// Model configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Valuation depth for `curve`.
    #[arg(long)]
    from: Option<usize>,
    /// Asset id for `price`.
    #[arg(long)]
    asset: Option<String>,
    /// Write the document here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the tolerance in the configuration.
    #[arg(long)]
    tolerance: Option<f64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let path = args.config.display().to_string();
    let text = match fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("ConfigParseError in {path}: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let command = match args.command {
        Cmd::Check => Command::Check,
        Cmd::Curve => Command::Curve,
        Cmd::Price => Command::Price,
        Cmd::Decompose => Command::Decompose,
    };
    let output = match execute(
        command,
        &text,
        &path,
        args.from,
        args.asset.as_deref(),
        args.tolerance,
    ) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(e.exit_code());
        }
    };
    for line in &output.summary {
        eprintln!("{line}");
    }
    let written = match &args.out {
        Some(p) => fs::write(p, &output.document),
        None => std::io::stdout().write_all(output.document.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("cannot write output: {e}");
        return ExitCode::from(EXIT_USAGE);
    }
    ExitCode::from(output.exit_code)
}
