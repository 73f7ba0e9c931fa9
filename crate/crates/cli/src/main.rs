use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use saute_cli::commands::{self, RunOptions, Suite};
use saute_core::eval::ExportFormat;

#[derive(Parser)]
#[command(name = "saute", version, about = "Safety-augmented MDP experiments, exact solves and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a finite fixture exactly and write the value table.
    Solve {
        config: PathBuf,
        /// Output file [default: <config>.values.json].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overwrite existing output.
        #[arg(long)]
        force: bool,
    },
    /// Run a verification suite; exits 4 when it fails.
    Verify {
        #[arg(value_enum)]
        suite: SuiteArg,
        config: PathBuf,
    },
    /// Execute an experiment plan.
    Run {
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Validate and print the plan without running it.
        #[arg(long)]
        dry_run: bool,
        /// Worker threads for trajectory evaluation [default: all cores].
        #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
        jobs: Option<u16>,
        /// Overwrite results from an earlier run.
        #[arg(long)]
        force: bool,
    },
    /// Convert a results.json file to CSV or JSON.
    Export {
        input: PathBuf,
        #[arg(long, value_enum)]
        format: FormatArg,
        #[arg(long)]
        out: PathBuf,
        /// Overwrite existing output.
        #[arg(long)]
        force: bool,
    },
    /// Serve a wrapped environment over line-delimited JSON on stdio.
    Serve { config: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    T1,
    T2b,
    T3,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = std::io::stdout();
    let result = match cli.command {
        Command::Solve { config, out: path, force } => {
            let path = path.unwrap_or_else(|| commands::default_solve_output(&config));
            commands::solve(&config, &path, force, &mut out).map(drop)
        }
        Command::Verify { suite, config } => {
            let suite = match suite {
                SuiteArg::T1 => Suite::T1,
                SuiteArg::T2b => Suite::T2b,
                SuiteArg::T3 => Suite::T3,
            };
            commands::verify(suite, &config, &mut out).map(drop)
        }
        Command::Run { config, out: dir, dry_run, jobs, force } => {
            let opts = RunOptions { dry_run, jobs: jobs.map(usize::from), force };
            commands::run(&config, &dir, &opts, &mut out).map(drop)
        }
        Command::Export { input, format, out: path, force } => {
            let format = match format {
                FormatArg::Csv => ExportFormat::Csv,
                FormatArg::Json => ExportFormat::Json,
            };
            commands::export(&input, format, &path, force)
        }
        Command::Serve { config } => commands::serve(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
