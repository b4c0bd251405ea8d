use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use currsched_cli::commands::{cmd_gen_toy, cmd_plan, cmd_score, cmd_shard, cmd_simulate, cmd_stream};
use currsched_cli::config::ConfigArgs;
use currsched_cli::CliError;

#[derive(Parser)]
#[command(name = "currsched", version, about = "Curriculum-learning data scheduler")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score every sample under one or more difficulty criteria.
    Score(ConfigArgs),
    /// Jenks-shard the corpus by one criterion.
    Shard(ConfigArgs),
    /// Dry-run a schedule: visible shards, order and q per phase.
    Plan(ConfigArgs),
    /// Run the training loop against the built-in mock learner.
    Simulate(ConfigArgs),
    /// Emit the batch-stream protocol (JSONL).
    Stream(ConfigArgs),
    /// Write a synthetic toy bitext.
    GenToy {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 2000)]
        vocab: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn dispatch(command: Command) -> Result<i32, CliError> {
    let report = |outcome: currsched_cli::commands::Outcome| {
        if let Some(dir) = outcome.run_dir {
            eprintln!("artifacts: {}", dir.display());
        }
        outcome.exit_code
    };
    let code = match command {
        Command::Score(a) => report(cmd_score(&a.resolve()?)?),
        Command::Shard(a) => report(cmd_shard(&a.resolve()?)?),
        Command::Plan(a) => report(cmd_plan(&a.resolve()?, &mut io::stdout().lock())?),
        Command::Simulate(a) => report(cmd_simulate(&a.resolve()?)?),
        Command::Stream(a) => {
            let cfg = a.resolve()?;
            report(cmd_stream(&cfg, &mut io::BufWriter::new(io::stdout().lock()), &mut io::stderr())?)
        }
        Command::GenToy { out, n, vocab, seed } => {
            cmd_gen_toy(&out, n, vocab, seed)?;
            0
        }
    };
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("currsched: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
