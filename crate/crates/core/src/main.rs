use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use heliumjcm::cli::{self, EXIT_CONFIG};
use heliumjcm::config::Task;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    SpectrumSweep,
    AbsorptionMap,
    Shifts,
    Crossings,
    Rates,
    SelfTest,
    /// Check a config without computing anything.
    Validate,
}

impl Command {
    fn task(self) -> Option<Task> {
        Some(match self {
            Command::SpectrumSweep => Task::SpectrumSweep,
            Command::AbsorptionMap => Task::AbsorptionMap,
            Command::Shifts => Task::Shifts,
            Command::Crossings => Task::Crossings,
            Command::Rates => Task::Rates,
            Command::SelfTest => Task::SelfTest,
            Command::Validate => return None,
        })
    }
}

/// Surface electrons on liquid helium in a tilted magnetic field.
///
/// Exit codes: 0 success, 2 config error, 3 numerical failure (see
/// failures.json), 4 self-test failure.
#[derive(Debug, Parser)]
#[command(name = "heliumjcm", version)]
struct Args {
    command: Command,
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: $HELIUMJCM_OUT_DIR, then `output.dir`, then ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for parallel sweeps.
    #[arg(long)]
    threads: Option<usize>,
    /// Task to validate against when the config has no `task` key.
    #[arg(long, value_enum)]
    task: Option<Task>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().expect("thread pool configured once");
    }
    let code = match args.command.task() {
        Some(task) => cli::run(task, args.config.as_deref(), args.out.as_deref()),
        None => {
            let Some(path) = args.config.as_deref() else {
                eprintln!("error: validate needs --config <path>");
                return ExitCode::from(EXIT_CONFIG as u8);
            };
            let (code, report) = cli::validate(path, args.task);
            if code == 0 {
                print!("{report}");
            } else {
                eprintln!("{report}");
            }
            code
        }
    };
    ExitCode::from(code as u8)
}
