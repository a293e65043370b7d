//! Command-line front end. Every command reads one flat `key = value`
//! config file; `--set key=value` and the dedicated flags override it.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{
    cmd_build_vocab, cmd_eval, cmd_finetune, cmd_predict, cmd_pretrain, cmd_run, cmd_selftrain, cmd_tfidf, Outputs,
};
pub use config::RunConfig;

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "maclr", version, about = "Zero-shot multi-label text retrieval by self-supervised encoder pre-training")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Flat key = value config file; defaults to the desk preset.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Any config key, e.g. `--set t_total=500`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Build the vocabulary from instances and labels.
    BuildVocab,
    /// TF-IDF baseline predictions and metrics.
    Tfidf,
    /// Stage I pre-training from scratch.
    Pretrain,
    /// Pseudo-pair mining and Stage II self-training.
    Selftrain,
    /// Few-shot fine-tuning on a subset of the training pairs.
    Finetune,
    /// Top-k labels for each query instance.
    Predict,
    /// Metrics of a predictions file.
    Eval,
    /// The whole pipeline from one config.
    Run,
}

impl Cli {
    /// Config file plus overrides; flags are applied last.
    pub fn resolve_config(&self) -> Result<RunConfig> {
        let mut overrides = Vec::new();
        let mut bad = Vec::new();
        for o in &self.overrides {
            match o.split_once('=') {
                Some((k, v)) => overrides.push((k.trim().to_string(), v.trim().to_string())),
                None => bad.push(format!("--set {o:?}: expected KEY=VALUE")),
            }
        }
        if !bad.is_empty() {
            return Err(Error::Config(bad));
        }
        if let Some(s) = self.seed {
            overrides.push(("seed".into(), s.to_string()));
        }
        if let Some(w) = self.workers {
            overrides.push(("workers".into(), w.to_string()));
        }
        if let Some(d) = &self.out_dir {
            overrides.push(("out_dir".into(), d.display().to_string()));
        }
        match &self.config {
            Some(p) => RunConfig::from_file(p, &overrides),
            None => RunConfig::parse("", &overrides),
        }
    }
}

pub fn execute(command: Command, cfg: &RunConfig) -> Result<Outputs> {
    let run = || match command {
        Command::BuildVocab => cmd_build_vocab(cfg),
        Command::Tfidf => cmd_tfidf(cfg),
        Command::Pretrain => cmd_pretrain(cfg),
        Command::Selftrain => cmd_selftrain(cfg),
        Command::Finetune => cmd_finetune(cfg),
        Command::Predict => cmd_predict(cfg),
        Command::Eval => cmd_eval(cfg),
        Command::Run => cmd_run(cfg),
    };
    match cfg.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = cli.resolve_config().and_then(|cfg| execute(cli.command, &cfg));
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
