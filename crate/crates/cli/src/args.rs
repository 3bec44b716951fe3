use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use hrlt_core::config::EncoderSpec;
use hrlt_core::{Config, Error, Result};

#[derive(Debug, Parser)]
#[command(name = "hrlt", version, about = "Hierarchical RL aspect/opinion/sentiment triplet extraction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Teacher-forced pre-training; keeps the best dev checkpoint.
    Pretrain(TrainArgs),
    /// Full schedule, or fine-tuning of an existing checkpoint with `--from`.
    Finetune(FinetuneArgs),
    /// Greedy-decode a gold corpus and report precision, recall and F1.
    Eval(EvalArgs),
    /// Write predicted triplets and option positions as JSON lines.
    Predict(PredictArgs),
}

/// Settings shared by every subcommand. Any `--section.key value` flag is an
/// extra config override, applied after `--config`.
#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `trainable` or `cache:<path>`.
    #[arg(long)]
    pub encoder: Option<EncoderSpec>,
    /// Threads used for evaluation.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Config override; `--train.seed 3` is shorthand for `--set train.seed=3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Training corpus (overrides `data.train`).
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Dev corpus for model selection (overrides `data.dev`).
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Run directory (overrides `run.out_dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write greedy dev traces of the best model as JSON lines.
    #[arg(long, value_name = "PATH")]
    pub trace_dump: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    /// Continue supervised training instead of REINFORCE.
    #[arg(long)]
    pub no_rl: bool,
    /// Start from this checkpoint and skip pre-training.
    #[arg(long, value_name = "CHECKPOINT")]
    pub from: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Gold corpus (defaults to `data.test`).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Also report single/multiple and overlap partitions.
    #[arg(long)]
    pub partition: bool,
    #[arg(long, value_name = "PATH")]
    pub trace_dump: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Corpus to tag; gold triplets are ignored.
    #[arg(long)]
    pub input: PathBuf,
    /// Defaults to standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub trace_dump: Option<PathBuf>,
}

/// Rewrite `--a.b v` and `--a.b=v` as `--set a.b=v` so clap sees a fixed flag set.
pub fn expand_dotted(args: impl IntoIterator<Item = OsString>) -> Vec<OsString> {
    let mut out = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let dotted = arg.to_str().and_then(|s| s.strip_prefix("--")).filter(|name| {
            let key = name.split('=').next().unwrap_or_default();
            key.contains('.') && !key.starts_with('.')
        });
        let Some(name) = dotted.map(str::to_owned) else {
            out.push(arg);
            continue;
        };
        let pair = if name.contains('=') {
            name
        } else {
            let value = it.next().map(|v| v.to_string_lossy().into_owned()).unwrap_or_default();
            format!("{name}={value}")
        };
        out.push("--set".into());
        out.push(pair.into());
    }
    out
}

impl ConfigArgs {
    /// Config file, then overrides in order, then the dedicated flags.
    pub fn resolve(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(path) => Config::parse(&hrlt_core::data::read_text(path)?)?,
            None => Config::default(),
        };
        for pair in &self.set {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("override `{pair}` is not KEY=VALUE")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(seed) = self.seed {
            cfg.train.seed = seed;
        }
        if let Some(e) = &self.encoder {
            cfg.run.encoder = e.clone();
        }
        if let Some(j) = self.jobs {
            if j == 0 {
                return Err(Error::Usage("--jobs must be at least 1".into()));
            }
            cfg.run.jobs = j;
        }
        Ok(cfg)
    }
}
