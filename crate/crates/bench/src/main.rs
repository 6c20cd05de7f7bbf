use std::path::PathBuf;
use std::process::ExitCode;

use bqp_bench::{run_suite, Family, SuiteConfig};
use clap::Parser;

#[derive(Debug, Parser)]
#[command(name = "bqpbench", about = "Runs a generated instance family and writes CSV tables")]
struct Args {
    #[arg(long, value_enum)]
    family: Family,
    #[arg(long, value_delimiter = ',', default_value = "14")]
    sizes: Vec<usize>,
    /// Seeds 0..seeds.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    workers: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    warmup: usize,
    /// Directory for raw.csv, summary.csv and scaling.csv; stdout when absent.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.workers.contains(&0) {
        eprintln!("bqpbench: worker counts must be positive");
        return ExitCode::from(1);
    }
    let cfg = SuiteConfig { warmup: args.warmup, ..SuiteConfig::new(args.family, args.sizes, (0..args.seeds).collect(), args.workers) };
    let suite = match run_suite(&cfg) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("bqpbench: {e}");
            return ExitCode::from(3);
        }
    };
    let tables = [("raw.csv", suite.raw_csv()), ("summary.csv", suite.summary_csv()), ("scaling.csv", suite.scaling_csv())];
    match &args.out_dir {
        Some(dir) => {
            for (name, body) in &tables {
                if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(dir.join(name), body)) {
                    eprintln!("bqpbench: {}: {e}", dir.join(name).display());
                    return ExitCode::from(1);
                }
            }
        }
        None => {
            for (name, body) in &tables {
                println!("# {name}\n{body}");
            }
        }
    }
    ExitCode::SUCCESS
}
