//! `tensordict` command-line surface: synthetic generators, decompositions,
//! sequence embeddings, and the end-to-end benchmark report.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 non-convergence,
//! 3 benchmark criterion failure.

mod commands;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_NO_CONVERGENCE: u8 = 2;
pub const EXIT_CRITERIA_FAILED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "tensordict",
    about = "Tensor decompositions, convolutional dictionary learning, and word-sequence embeddings",
    version
)]
struct Cli {
    /// Cap internal parallelism (fallback: TENSORDICT_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Orthogonal 4th-order tensor decomposition by noisy projected SGD.
    Decompose(commands::decompose::DecomposeArgs),
    /// Learn convolutional filters from the third cumulant (CT-ALS), with an
    /// optional alternating-minimization baseline.
    LearnFilters(commands::learn::LearnArgs),
    /// Train and apply word-sequence embedding models.
    Embed(commands::embed_cmd::EmbedArgs),
    /// Run the end-to-end verification suite and emit reports.
    Benchmark(commands::benchmark_cmd::BenchmarkArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are not usage errors
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::from(EXIT_OK),
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };

    let threads = cli.threads.or_else(|| {
        std::env::var("TENSORDICT_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(t) = threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build_global();
    }

    let code = match cli.command {
        Command::Decompose(args) => commands::decompose::run(args),
        Command::LearnFilters(args) => commands::learn::run(args),
        Command::Embed(args) => commands::embed_cmd::run(args),
        Command::Benchmark(args) => commands::benchmark_cmd::run(args),
    };
    ExitCode::from(code)
}
