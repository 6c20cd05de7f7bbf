use std::process::ExitCode;

use bqp_cli::{run, Cli, CliError};
use clap::Parser;

fn write(path: &std::path::Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = run(&cli).and_then(|out| {
        if let (Some(path), Some(trace)) = (&cli.trace, &out.trace) {
            write(path, trace)?;
        }
        let json = out.report.to_json();
        match &cli.output {
            Some(path) => {
                write(path, &json)?;
                print!("{}", out.report.to_text());
            }
            None => {
                eprint!("{}", out.report.to_text());
                print!("{json}");
            }
        }
        Ok(out.report.status.exit_code())
    });
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("bqpsolve: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
