use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fenvm_cli::{parse_config, run_command, CliError, Config};

/// Simulate the ferroelectric memristor and write experiment tables as CSV.
#[derive(Debug, Parser)]
#[command(name = "fenvm", version)]
struct Args {
    /// INI configuration; defaults are used when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, created if needed.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    #[arg(long, value_name = "N", default_value_t = 0)]
    seed: u64,
    /// iv, hysteresis, scheme, fitA, cdf, retention, d2d, scaling, arrhenius, xbar, bench or mvm.
    #[arg(long, value_name = "NAME")]
    command: String,
}

fn load(path: Option<&PathBuf>) -> Result<Config, CliError> {
    let Some(path) = path else {
        return Ok(Config::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = load(args.config.as_ref()).and_then(|cfg| run_command(&args.command, &cfg, &args.out, args.seed));
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("fenvm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
