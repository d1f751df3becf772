use clap::{Parser, Subcommand};

use coordmap_cli::{cmd_cluster, cmd_detect, cmd_eval, cmd_simulate};
use coordmap_cli::{ClusterArgs, DetectArgs, EvalArgs, SimulateArgs};

/// Detect coordinated accounts in social-network activity traces by
/// cross mapping user pairs, with topic-based search-space pruning,
/// baselines and evaluation against ground truth.
#[derive(Parser)]
#[command(name = "coordmap", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labelled corpus with known causal structure.
    Simulate(SimulateArgs),
    /// Run a detector over an event log and write an output bundle.
    Detect(DetectArgs),
    /// Cluster users by topic (TF-IDF + NMF) or compare partitions.
    Cluster(ClusterArgs),
    /// Score detection bundles or external score matrices against labels.
    Eval(EvalArgs),
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(&args).map(|_| ()),
        Command::Detect(args) => cmd_detect(&args).map(|_| ()),
        Command::Cluster(args) => cmd_cluster(&args).map(|_| ()),
        Command::Eval(args) => cmd_eval(&args).map(|_| ()),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
