//! `geml`: synthesise corpora, train and adapt dialogue models, evaluate,
//! run ablations, inspect graphs and chat with a checkpoint.

mod chat;
mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use geml_core::eval::Regime;

use config::Overrides;

/// Usage, config and IO problems; exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(
    name = "geml",
    version,
    about = "Graph-evolving meta-learning for medical dialogue generation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus (or a whole benchmark) from a JSON spec.
    Synth(SynthArgs),
    /// Train on the source corpus with the configured regime.
    Train(RunArgs),
    /// Fine-tune a source checkpoint on the target adaptation corpus.
    Adapt(RunArgs),
    /// Evaluate a checkpoint on the target test corpus.
    Eval(RunArgs),
    /// Run the ablation grid end to end.
    Ablate(RunArgs),
    /// Interactive consultation with a frozen checkpoint.
    Chat(ChatArgs),
    /// Write a graph as JSON or Graphviz DOT.
    ExportGraph(ExportArgs),
}

#[derive(Args)]
pub struct SynthArgs {
    /// SynthSpec JSON; with --benchmark, a BenchmarkSpec JSON or `standard`.
    pub spec: String,
    /// Corpus file, or the output directory with --benchmark.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the seed in the spec.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write a commonsense triple file derived from the spec.
    #[arg(long)]
    pub commonsense: Option<PathBuf>,
    /// Share of true disease-symptom edges kept in the triple file.
    #[arg(long, default_value_t = 1.0)]
    pub keep: f64,
    /// Write source, target adaptation and target test corpora plus triples.
    #[arg(long)]
    pub benchmark: bool,
}

#[derive(Args)]
pub struct RunArgs {
    /// RunConfig JSON.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; overrides `paths.out_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub regime: Option<Regime>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            regime: self.regime,
        }
    }
}

#[derive(Args)]
pub struct ChatArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Graph JSON; defaults to the file saved next to the checkpoint.
    #[arg(long)]
    pub graph: Option<PathBuf>,
}

#[derive(Args)]
pub struct ExportArgs {
    /// Graph JSON or commonsense triple file.
    pub graph: PathBuf,
    #[arg(long, default_value = "json")]
    pub format: String,
    /// Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn exit_code(e: &anyhow::Error) -> u8 {
    use geml_core::Error as E;
    for cause in e.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if let Some(core) = cause.downcast_ref::<E>() {
            return match core {
                E::NonFinite(_) => 3,
                E::Io { .. }
                | E::Parse { .. }
                | E::Corpus(_)
                | E::UnknownEntity(_)
                | E::Graph(_)
                | E::Checkpoint(_)
                | E::Config(_)
                | E::Json(_) => 2,
                _ => 1,
            };
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let result = match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Train(a) => commands::train(&a.config, &a.overrides()),
        Command::Adapt(a) => commands::adapt(&a.config, &a.overrides()),
        Command::Eval(a) => commands::eval(&a.config, &a.overrides()),
        Command::Ablate(a) => commands::ablate(&a.config, &a.overrides()),
        Command::Chat(a) => chat::run(&a),
        Command::ExportGraph(a) => commands::export_graph(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = String::new();
            for cause in e.chain() {
                let c = cause.to_string();
                if !msg.ends_with(&c) {
                    if !msg.is_empty() {
                        msg.push_str(": ");
                    }
                    msg.push_str(&c);
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(exit_code(&e))
        }
    }
}
