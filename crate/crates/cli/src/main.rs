use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

mod artifact;
mod commands;
mod config;
mod inputs;

/// Generate, score and search goal programs.
#[derive(Parser, Debug)]
#[command(name = "goalgen", version, about)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Global {
    /// TOML configuration file; `include = [..]` pulls in other files.
    #[arg(short, long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Settings profile: desk or standard.
    #[arg(long, global = true)]
    pub profile: Option<String>,
    /// Evaluation threads; 0 uses every core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Corpus: a game file, a directory of them, or synthetic:N.
    #[arg(long, global = true, env = "GOALGEN_CORPUS")]
    pub corpus: Option<String>,
    /// Traces: a .jsonl file, a directory of them, or synthetic:N.
    #[arg(long, global = true, env = "GOALGEN_TRACES")]
    pub traces: Option<String>,
    /// Output directory for multi-file commands.
    #[arg(long, global = true, env = "GOALGEN_OUT")]
    pub out: Option<PathBuf>,
    /// Override any setting, e.g. --set train.lr=0.01 (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Draw games from the grammar fitted to the corpus.
    Sample {
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Write here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Regrowth corruptions of each game in a file.
    Corrupt {
        #[arg(long)]
        game: PathBuf,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Feature table (full catalog, normalized) for the games in a file.
    Features {
        #[arg(long)]
        game: PathBuf,
        /// Normalize with this model's context instead of fitting one on the corpus.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Fit grammar, features and fitness weights on the corpus.
    Train {
        /// Feature set: full, no_common_sense or no_coherence_features.
        #[arg(long, default_value = "full")]
        features: String,
        /// Model file; defaults to paths.model or <out>/model.json.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Cross-validate training settings over a small grid.
    Cv {
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// MAP-Elites search with a trained model.
    Search {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Also write a checkpoint every this many generations.
        #[arg(long)]
        checkpoint_every: Option<usize>,
    },
    /// Fitness of each game in a file.
    Score {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        game: PathBuf,
    },
    /// Run games over traces and report satisfactions, counts and scores.
    Replay {
        #[arg(long)]
        game: PathBuf,
        /// Defaults to the configured traces.
        #[arg(long)]
        trace: Option<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Templated English description of each game in a file.
    Describe {
        #[arg(long)]
        game: PathBuf,
    },
    /// Corpus structure and role-filler tables; with an archive, nearest
    /// corpus games and trace coverage of its elites.
    Analyze {
        #[arg(long)]
        archive: Option<PathBuf>,
    },
    /// Train and search with one ablation and the full model, then compare.
    Ablate {
        /// full, no_common_sense, no_coherence_features, no_crossover,
        /// no_custom_ops, pcfg_only, held_out or held_out:F.
        #[arg(long)]
        ablation: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = commands::resolve(&cli.global)?;
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global()?;
    }
    commands::dispatch(&cfg, cli.cmd)
}
