//! Writes a seeded synthetic EDF corpus with label files for trying the CLI.
//!
//! Usage: `cargo run --example synthetic_corpus -- <dir> [subjects] [epochs] [seed]`

use std::path::PathBuf;
use std::process::ExitCode;

use sleepstage::synthetic::{write_fixture_dir, SyntheticConfig};

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(dir) = args.first().map(PathBuf::from) else {
        eprintln!("usage: synthetic_corpus <dir> [subjects] [epochs] [seed]");
        return ExitCode::from(1);
    };
    let number = |i: usize, default: u64| args.get(i).map_or(Ok(default), |s| s.parse::<u64>());
    let (Ok(subjects), Ok(epochs), Ok(seed)) = (number(1, 10), number(2, 40), number(3, 0)) else {
        eprintln!("subjects, epochs and seed must be non-negative integers");
        return ExitCode::from(1);
    };
    let cfg = SyntheticConfig {
        n_subjects: subjects as usize,
        epochs_per_subject: epochs as usize,
        seed,
        ..Default::default()
    };
    match write_fixture_dir(&dir, &cfg) {
        Ok(paths) => {
            println!("wrote {} recordings to {}", paths.len(), dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
