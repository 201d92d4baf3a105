use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fdcrack::{run, CliResult, Command, Config};

/// Cut-cell crack solver: convergence studies, stabilization sweeps, the
/// pressurized crack demo and 3D crack extension.
#[derive(Debug, Parser)]
#[command(name = "fdcrack", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Configuration file with `key = value` lines.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a configuration key (repeatable).
    #[arg(long = "set", short = 's', value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Write the main output here instead of stdout.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn configure(args: &Args) -> CliResult<Config> {
    let mut cfg = match &args.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    for kv in &args.set {
        cfg.set(kv)?;
    }
    if let Some(p) = &args.out {
        cfg.insert("out", p.display().to_string());
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = configure(&args).and_then(|cfg| {
        let stdout = std::io::stdout();
        let stderr = std::io::stderr();
        run(args.command, &cfg, &mut stdout.lock(), &mut stderr.lock())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fdcrack: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
