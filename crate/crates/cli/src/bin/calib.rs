use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "calib", version, about = "Run simulation-based calibration studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a study and write its CSV outputs and manifest.
    Run {
        config: PathBuf,
        /// Worker threads for replication loops.
        #[arg(long, env = "CALIB_WORKERS")]
        workers: Option<usize>,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a configuration without running it.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, workers, out } => {
            match calib_cli::load(&config).and_then(|c| calib_cli::run(&c, workers, out.as_deref())) {
                Ok(report) => {
                    for (name, rows) in &report.files {
                        println!("{}: {rows} rows", report.output_dir.join(name).display());
                    }
                    0
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
        Command::Validate { config } => match calib_cli::load(&config) {
            Ok(c) => {
                let diagnostics = calib_cli::validate(&c);
                for d in &diagnostics {
                    println!("{d}");
                }
                if diagnostics.is_empty() {
                    0
                } else {
                    2
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
    };
    ExitCode::from(code as u8)
}
