use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gwrepro_cli::commands::{self, RunArgs};
use gwrepro_cli::error::{CliError, EXIT_USAGE};
use gwrepro_wfengine::SortBy;

#[derive(Parser)]
#[command(
    name = "gwrepro",
    version,
    about = "Synthetic two-detector compact-binary search run as a workflow"
)]
struct Cli {
    /// Overrides [run] seed in the configuration [default: from config, 20150914]
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic strain and a checksum manifest.
    GenData {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write into a non-empty output directory.
        #[arg(long)]
        force: bool,
    },
    /// Print the workflow DAG.
    Plan {
        #[arg(long)]
        config: PathBuf,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute the workflow on generated data.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Node pool; defaults to [workflow] nodes, then a built-in pool.
        #[arg(long)]
        nodes: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads [default: [workflow] workers, 4]
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Histogram a results file.
    Hist {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        bin_width: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Per-transformation runtime and memory from a provenance log.
    Stats {
        #[arg(long)]
        provenance: PathBuf,
        #[arg(long, value_enum, default_value_t = By::Memory)]
        by: By,
        /// Show only the first N transformations.
        #[arg(long)]
        tasks: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum By {
    Memory,
    Runtime,
}

fn dispatch(cli: Cli) -> Result<(String, String), CliError> {
    let out = |s: String| (s, String::new());
    match cli.command {
        Command::GenData {
            config,
            out: dir,
            force,
        } => {
            let cfg = commands::load_config(&config, cli.seed)?;
            commands::gen_data(&cfg, &dir, force).map(out)
        }
        Command::Plan { config, out: file } => {
            let cfg = commands::load_config(&config, cli.seed)?;
            let text = commands::plan_text(&cfg)?;
            match file {
                Some(p) => std::fs::write(&p, text)
                    .map(|_| out(String::new()))
                    .map_err(|e| CliError::execution(format!("writing {}: {e}", p.display()))),
                None => Ok(out(text)),
            }
        }
        Command::Run {
            config,
            data,
            nodes,
            out: dir,
            workers,
        } => {
            let cfg = commands::load_config(&config, cli.seed)?;
            commands::run(
                &cfg,
                &RunArgs {
                    data,
                    nodes,
                    out: dir,
                    workers,
                },
            )
        }
        Command::Hist {
            results,
            bin_width,
            csv,
            svg,
        } => commands::hist(&results, bin_width, csv.as_deref(), svg.as_deref()).map(out),
        Command::Stats {
            provenance,
            by,
            tasks,
        } => {
            let by = match by {
                By::Memory => SortBy::Memory,
                By::Runtime => SortBy::Runtime,
            };
            commands::stats(&provenance, by, tasks).map(out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok((stdout, stderr)) => {
            print!("{stdout}");
            eprint!("{stderr}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
