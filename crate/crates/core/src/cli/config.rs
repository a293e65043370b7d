use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::corpus::FewShotMode;
use crate::error::{Error, Result};
use crate::fsutil;
use crate::pipeline::{EncoderConfig, TrainConfig};
use crate::retrieval::validate_k_list;

const PATH_KEYS: [&str; 9] = [
    "instances",
    "labels",
    "pairs",
    "test_instances",
    "test_pairs",
    "vocab",
    "checkpoint",
    "predictions",
    "out_dir",
];

/// Everything a command needs, parsed from a flat `key = value` file.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub instances: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    /// Ground-truth training pairs; only few-shot fine-tuning reads them.
    pub pairs: Option<PathBuf>,
    pub test_instances: Option<PathBuf>,
    pub test_pairs: Option<PathBuf>,
    /// Defaults to `<out_dir>/vocab.txt`.
    pub vocab: Option<PathBuf>,
    /// Input checkpoint; each command has its own default in `out_dir`.
    pub checkpoint: Option<PathBuf>,
    /// Predictions read by `eval`; defaults to `<out_dir>/predictions.tsv`.
    pub predictions: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub train: TrainConfig,
    pub encoder: EncoderConfig,
    pub fewshot_mode: FewShotMode,
    pub fewshot_ratio: f64,
    pub fewshot_seed: u64,
    pub eval_k: Vec<usize>,
    pub workers: Option<usize>,
    pub min_frequency: usize,
    pub instance_max_len: usize,
    pub label_max_len: usize,
}

impl RunConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let (train, encoder) = match name {
            "desk" => (TrainConfig::desk(), EncoderConfig::desk()),
            "full" => (TrainConfig::full(), EncoderConfig::full()),
            other => return Err(Error::Config(vec![format!("preset: unknown preset {other:?} (desk, full)")])),
        };
        Ok(Self {
            instances: None,
            labels: None,
            pairs: None,
            test_instances: None,
            test_pairs: None,
            vocab: None,
            checkpoint: None,
            predictions: None,
            out_dir: PathBuf::from("out"),
            train,
            encoder,
            fewshot_mode: FewShotMode::PairRatio,
            fewshot_ratio: 0.05,
            fewshot_seed: 0,
            eval_k: vec![1, 3, 5, 10, 100],
            workers: None,
            min_frequency: 1,
            instance_max_len: 288,
            label_max_len: 64,
        })
    }

    /// Parses config text, then applies `overrides` in order. `preset` is
    /// honoured first wherever it appears. Every bad line is reported.
    pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        Self::parse_in(text, overrides, None)
    }

    /// Reads a config file. Relative paths in the file are taken relative to
    /// the file's directory; override paths stay relative to the working
    /// directory.
    pub fn from_file(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let base = path.parent().filter(|p| !p.as_os_str().is_empty());
        Self::parse_in(&fsutil::read_to_string(path)?, overrides, base)
    }

    fn parse_in(text: &str, overrides: &[(String, String)], base: Option<&Path>) -> Result<Self> {
        let mut entries = Vec::new();
        let mut errors = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line.split_once('=') {
                Some((k, v)) => {
                    let (k, mut v) = (k.trim().to_string(), v.trim().to_string());
                    if let (Some(b), true) = (base, PATH_KEYS.contains(&k.as_str())) {
                        if Path::new(&v).is_relative() {
                            v = b.join(&v).display().to_string();
                        }
                    }
                    entries.push((format!("line {}", n + 1), k, v))
                }
                None => errors.push(format!("line {}: expected key = value", n + 1)),
            }
        }
        entries.extend(overrides.iter().map(|(k, v)| ("override".to_string(), k.clone(), v.clone())));

        let preset = entries
            .iter()
            .rev()
            .find(|(_, k, _)| k == "preset")
            .map_or("desk", |(_, _, v)| v.as_str());
        let mut cfg = match Self::preset(preset) {
            Ok(c) => c,
            Err(Error::Config(mut e)) => {
                errors.append(&mut e);
                Self::preset("desk")?
            }
            Err(e) => return Err(e),
        };
        for (at, k, v) in &entries {
            if k == "preset" {
                continue;
            }
            if let Err(msg) = cfg.set(k, v) {
                errors.push(format!("{at}: {k}: {msg}"));
            }
        }
        if errors.is_empty() {
            if let Err(Error::Config(mut more)) = cfg.validate() {
                errors.append(&mut more);
            }
        }
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(errors))
        }
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: FromStr>(v: &str) -> std::result::Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            v.parse::<T>().map_err(|e| format!("bad value {v:?}: {e}"))
        }
        let path = || Some(PathBuf::from(value));
        let t = &mut self.train;
        match key {
            "instances" => self.instances = path(),
            "labels" => self.labels = path(),
            "pairs" => self.pairs = path(),
            "test_instances" => self.test_instances = path(),
            "test_pairs" => self.test_pairs = path(),
            "vocab" => self.vocab = path(),
            "checkpoint" => self.checkpoint = path(),
            "predictions" => self.predictions = path(),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "batch_size" => t.batch_size = num(value)?,
            "label_batch_size" => t.label_batch_size = num(value)?,
            "k0" => t.schedule.k0 = num(value)?,
            "t_k" => t.schedule.t_k = num(value)?,
            "t_update" => t.schedule.t_update = num(value)?,
            "t_total" => t.schedule.t_total = num(value)?,
            "base_lr" => t.base_lr = num(value)?,
            "warmup_ratio" => t.warmup_ratio = num(value)?,
            "seed" => t.seed = num(value)?,
            "k_pseudo" => t.k_pseudo = num(value)?,
            "stage2_steps" => t.stage2_steps = num(value)?,
            "finetune_lr" => t.finetune_lr = num(value)?,
            "finetune_steps" => t.finetune_steps = num(value)?,
            "kmeans_max_iters" => t.kmeans_max_iters = num(value)?,
            "stratified_batching" => t.stratified_batching = num(value)?,
            "log_every" => t.log_every = num(value)?,
            "token_dim" => self.encoder.token_dim = num(value)?,
            "embed_dim" => self.encoder.embed_dim = num(value)?,
            "dropout_rate" => self.encoder.dropout_rate = num(value)?,
            "fewshot_mode" => self.fewshot_mode = num(value)?,
            "fewshot_ratio" => self.fewshot_ratio = num(value)?,
            "fewshot_seed" => self.fewshot_seed = num(value)?,
            "eval_k" => {
                self.eval_k = value
                    .split(',')
                    .map(|s| num::<usize>(s.trim()))
                    .collect::<std::result::Result<_, _>>()?
            }
            "workers" => self.workers = Some(num(value)?),
            "min_frequency" => self.min_frequency = num(value)?,
            "instance_max_len" => self.instance_max_len = num(value)?,
            "label_max_len" => self.label_max_len = num(value)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if let Err(Error::Config(mut v)) = self.train.validate() {
            bad.append(&mut v);
        }
        if self.encoder.token_dim == 0 || self.encoder.embed_dim == 0 {
            bad.push("token_dim and embed_dim must be positive".into());
        }
        if !(0.0..1.0).contains(&self.encoder.dropout_rate) {
            bad.push(format!("dropout_rate = {} must lie in [0, 1)", self.encoder.dropout_rate));
        }
        if !(self.fewshot_ratio > 0.0 && self.fewshot_ratio <= 1.0) {
            bad.push(format!("fewshot_ratio = {} must lie in (0, 1]", self.fewshot_ratio));
        }
        if let Err(e) = validate_k_list(&self.eval_k) {
            bad.push(format!("eval_k: {e}"));
        }
        if self.workers == Some(0) {
            bad.push("workers must be positive".into());
        }
        if self.min_frequency == 0 {
            bad.push("min_frequency must be at least 1".into());
        }
        if self.instance_max_len == 0 || self.label_max_len == 0 {
            bad.push("instance_max_len and label_max_len must be positive".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad))
        }
    }

    /// Fails with every missing key when `required` paths are unset.
    pub(crate) fn require(&self, command: &str, required: &[(&str, &Option<PathBuf>)]) -> Result<()> {
        let missing: Vec<String> = required
            .iter()
            .filter(|(_, v)| v.is_none())
            .map(|(k, _)| format!("{command} needs {k}"))
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(missing))
        }
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    pub fn vocab_path(&self) -> PathBuf {
        self.vocab.clone().unwrap_or_else(|| self.out("vocab.txt"))
    }

    pub fn max_k(&self) -> usize {
        self.eval_k.iter().copied().max().unwrap_or(1)
    }
}
