use crate::clustering::ScheduleConfig;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EncoderConfig {
    /// Token embedding width d_e.
    pub token_dim: usize,
    /// Output embedding width d.
    pub embed_dim: usize,
    pub dropout_rate: f32,
}

impl EncoderConfig {
    pub fn full() -> Self {
        Self {
            token_dim: 128,
            embed_dim: 512,
            dropout_rate: 0.1,
        }
    }

    pub fn desk() -> Self {
        Self {
            token_dim: 32,
            embed_dim: 64,
            dropout_rate: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Pairs per batch (N).
    pub batch_size: usize,
    /// Sampled real labels per batch for label regularization (M).
    pub label_batch_size: usize,
    /// K schedule; `schedule.t_total` is the Stage I step count.
    pub schedule: ScheduleConfig,
    pub base_lr: f32,
    pub warmup_ratio: f64,
    pub seed: u64,
    /// Candidates per view when mining pseudo pairs.
    pub k_pseudo: usize,
    pub stage2_steps: u64,
    pub finetune_lr: f32,
    pub finetune_steps: u64,
    pub kmeans_max_iters: usize,
    /// Draw half of each clustered-phase batch from one cluster.
    pub stratified_batching: bool,
    /// JSON-lines log interval in steps.
    pub log_every: u64,
}

impl TrainConfig {
    /// Full-scale settings: 100k steps, K_0 = 2048, lr 1e-5.
    pub fn full() -> Self {
        Self {
            batch_size: 32,
            label_batch_size: 32,
            schedule: ScheduleConfig {
                k0: 2048,
                t_k: 10_000,
                t_update: 5_000,
                t_total: 100_000,
            },
            base_lr: 1e-5,
            warmup_ratio: 0.1,
            seed: 0,
            k_pseudo: 3,
            stage2_steps: 100_000,
            finetune_lr: 5e-6,
            finetune_steps: 2_000,
            kmeans_max_iters: 50,
            stratified_batching: false,
            log_every: 100,
        }
    }

    /// Laptop-scale settings used by the examples and the acceptance suite.
    pub fn desk() -> Self {
        Self {
            batch_size: 16,
            label_batch_size: 16,
            schedule: ScheduleConfig {
                k0: 8,
                t_k: 400,
                t_update: 200,
                t_total: 2_000,
            },
            base_lr: 5e-3,
            stage2_steps: 2_000,
            finetune_lr: 2.5e-3,
            finetune_steps: 300,
            log_every: 50,
            ..Self::full()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.batch_size < 2 {
            bad.push(format!("batch_size = {} must be at least 2", self.batch_size));
        }
        if self.label_batch_size < 1 {
            bad.push("label_batch_size must be at least 1".to_string());
        }
        if self.k_pseudo < 1 {
            bad.push("k_pseudo must be at least 1".to_string());
        }
        if !(0.0..1.0).contains(&self.warmup_ratio) {
            bad.push(format!("warmup_ratio = {} must lie in [0, 1)", self.warmup_ratio));
        }
        if !(self.base_lr > 0.0) {
            bad.push(format!("base_lr = {} must be positive", self.base_lr));
        }
        if !(self.finetune_lr > 0.0) {
            bad.push(format!("finetune_lr = {} must be positive", self.finetune_lr));
        }
        if self.stage2_steps == 0 {
            bad.push("stage2_steps must be positive".to_string());
        }
        if self.log_every == 0 {
            bad.push("log_every must be positive".to_string());
        }
        if let Err(Error::Config(mut more)) = self.schedule.validate() {
            bad.append(&mut more);
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad))
        }
    }
}
