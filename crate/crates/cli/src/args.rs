use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "ucrec", version, about = "Controllable sequential recommendation with counterfactual explanations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub common: Common,

    /// Only log warnings and errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

/// Flags shared by every subcommand. Each maps onto a config key and wins
/// over both the config file and `--set`.
#[derive(Debug, Default, Args)]
pub struct Common {
    /// Config file of `key = value` pairs.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Override any config key, e.g. `--set lambda=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Model file written by `train`.
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,

    /// Interaction file (MovieLens `::` or tab-separated).
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,

    /// Recommendation list length.
    #[arg(long, global = true)]
    pub k: Option<usize>,

    /// Explanation method (search, relax, random, similarity). Evaluation
    /// commands accept a comma-separated list.
    #[arg(long, global = true)]
    pub method: Option<String>,

    #[arg(long = "sample-size", global = true)]
    pub sample_size: Option<usize>,

    /// Simulation set size.
    #[arg(long, global = true)]
    pub m: Option<usize>,

    /// Worker threads for evaluation.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest, filter, split and train; writes the model and its id map
    /// and split manifest.
    Train,
    /// Print a user's current top-K list.
    Recommend {
        #[arg(long)]
        user: String,
    },
    /// Explain why an item is in a user's list.
    ExplainRetro {
        #[arg(long)]
        user: String,
        #[arg(long)]
        item: String,
        /// Also print the explanation as a JSON line.
        #[arg(long)]
        json: bool,
    },
    /// Show which items a new interaction would bring into the list.
    ExplainPro {
        #[arg(long)]
        user: String,
        #[arg(long)]
        item: String,
        #[arg(long)]
        json: bool,
    },
    /// Complexity, accuracy and fidelity of retrospective explanations.
    EvalRetro,
    /// Ranking accuracy with and without the simulated interaction.
    EvalPro,
    /// Sweep one solver hyperparameter.
    Ablate {
        /// gamma1, lambda or gamma2.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Run the HTTP API.
    Serve,
    /// Write a synthetic interaction corpus and item titles.
    Synth {
        #[arg(long, default_value_t = 943)]
        users: usize,
        #[arg(long, default_value_t = 1682)]
        items: usize,
    },
}
