use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use coreach::fitting::{fit_session, RecordedTrial};
use coreach::metrics::read_trial_log;

/// Identifies a person's model from trial logs and writes the fit report
/// as JSON.
#[derive(Debug, Parser)]
#[command(name = "coreach-fit", version)]
struct Cli {
    /// Trial logs (`<session>.jsonl`); obstacle-free and obstacle sessions.
    #[arg(required = true)]
    logs: Vec<PathBuf>,
    /// DMP temporal scaling, s.
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut records = Vec::new();
    for path in &cli.logs {
        let log = match read_trial_log(path) {
            Ok(l) => l,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::FAILURE;
            }
        };
        for done in log.completed_trials() {
            match RecordedTrial::from_completed(&done) {
                Ok(r) => records.push(r),
                Err(e) => eprintln!("{}: trial {} skipped: {e}", path.display(), done.spec.trial_id),
            }
        }
    }
    let report = match fit_session(&records, cli.tau) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let json = report.to_json();
    match &cli.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, json + "\n") {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::FAILURE;
            }
        }
        None => println!("{json}"),
    }
    ExitCode::SUCCESS
}
