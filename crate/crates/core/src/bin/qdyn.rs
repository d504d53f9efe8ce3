use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use qdyn_core::report::{self, RunError, RunOptions, EXIT_INVALID, EXIT_OK};
use qdyn_core::scenario::{self, Diagnostic, Preset, PRESETS};

#[derive(Parser)]
#[command(name = "qdyn", version, about = "Open quantum system dynamics: evolve, check legitimacy and Markovianity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenario files and write reports.
    Run {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Directory for `<stem>.report.json` (and `<stem>.csv`).
        #[arg(long)]
        out: PathBuf,
        /// Seed for sampled BLP state pairs (default: scenario seed, else 42).
        #[arg(long)]
        seed: Option<u64>,
        /// Override grid.steps.
        #[arg(long)]
        steps: Option<usize>,
        /// Override the divisibility tolerance.
        #[arg(long = "tol-div")]
        tol_div: Option<f64>,
        /// Also write the per-grid-point CSV table.
        #[arg(long)]
        csv: bool,
    },
    /// Parse and check a scenario without running it.
    Validate { file: PathBuf },
    /// List presets, or print a template scenario for one.
    Presets {
        /// Print a ready-to-run scenario for this preset.
        #[arg(long)]
        template: Option<String>,
    },
}

fn print_diagnostics(file: &Path, diagnostics: &[Diagnostic]) {
    for d in diagnostics {
        if d.path.is_empty() {
            eprintln!("{}: {}", file.display(), d.message);
        } else {
            eprintln!("{}: {}: {}", file.display(), d.path, d.message);
        }
    }
}

fn run_one(file: &Path, out: &Path, opts: &RunOptions, csv: bool) -> i32 {
    let scenario = match scenario::load(file) {
        Ok(s) => report::apply_overrides(s, opts),
        Err(d) => {
            print_diagnostics(file, &d);
            return EXIT_INVALID;
        }
    };
    let output = match report::run(&scenario) {
        Ok(o) => o,
        Err(RunError::Invalid(d)) => {
            print_diagnostics(file, &d);
            return EXIT_INVALID;
        }
        Err(e) => {
            eprintln!("{}: numerical failure: {e}", file.display());
            return e.exit_code();
        }
    };
    let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
    match report::write_outputs(out, stem, &output, csv) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("{}: cannot write output: {e}", file.display());
            1
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            files,
            out,
            seed,
            steps,
            tol_div,
            csv,
        } => {
            let opts = RunOptions { seed, steps, tol_div };
            files
                .par_iter()
                .map(|f| run_one(f, &out, &opts, csv))
                .collect::<Vec<_>>()
                .into_iter()
                .max()
                .unwrap_or(EXIT_OK)
        }
        Command::Validate { file } => match scenario::load(&file) {
            Ok(_) => EXIT_OK,
            Err(d) => {
                print_diagnostics(&file, &d);
                EXIT_INVALID
            }
        },
        Command::Presets { template: None } => {
            for (name, about) in PRESETS {
                println!("{name:<28} {about}");
            }
            EXIT_OK
        }
        Command::Presets { template: Some(name) } => match Preset::by_name(&name) {
            Some(p) => {
                println!("{}", serde_json::to_string_pretty(&p.template()).expect("scenario serializes"));
                EXIT_OK
            }
            None => {
                eprintln!("unknown preset {name:?}");
                EXIT_INVALID
            }
        },
    };
    ExitCode::from(code as u8)
}
