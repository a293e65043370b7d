use std::time::Instant;

use super::log::{StepRecord, TrainingLog};
use super::stage1::sample_rows;
use super::step::{draw_masks, pair_step, PairBatch};
use super::{EncoderOptimizer, PseudoPairSet, PseudoSource, TokenizedCorpus, TrainConfig};
use crate::clustering::{positives_by_key, ClusterMode};
use crate::encoder::EncoderParams;
use crate::error::{Error, Result};
use crate::numkit::{rng_for, LrSchedule, Stream};

/// Stage II: cluster-supervised contrastive training on mined pseudo pairs.
/// Batch members that share an instance are mutual positives. The optimizer
/// starts from fresh moments.
///
/// Batches are drawn from the two views' candidate lists mixed together, so
/// a pair proposed by both views is twice as likely as a single-view pair.
pub fn run_stage2(
    corpus: &TokenizedCorpus,
    mut params: EncoderParams<f32>,
    pseudo: &PseudoPairSet,
    config: &TrainConfig,
) -> Result<(EncoderParams<f32>, TrainingLog)> {
    config.validate()?;
    if pseudo.is_empty() {
        return Err(Error::Precondition("stage2 needs at least one pseudo pair".into()));
    }
    let mut resolved: Vec<(usize, usize)> = Vec::with_capacity(pseudo.len() * 2);
    for p in &pseudo.pairs {
        let i = corpus.instance_position(p.instance_id);
        let l = corpus.label_position(p.label_id);
        let at = i.zip(l).ok_or_else(|| {
            Error::Integrity(format!("pseudo pair ({}, {}) does not resolve", p.instance_id, p.label_id))
        })?;
        resolved.push(at);
        if p.source == PseudoSource::Both {
            resolved.push(at);
        }
    }

    let mut log = TrainingLog::new("stage2");
    log.notes.push("optimizer state re-initialized for stage2".into());
    log.notes.push(format!("pseudo pairs {}, {} draws in the mixed pool", pseudo.len(), resolved.len()));
    if resolved.len() < config.batch_size {
        log::warn!(
            "{} pseudo pairs is fewer than the batch size {}; sampling with replacement",
            resolved.len(),
            config.batch_size
        );
        log.notes.push("batches sampled with replacement".into());
    }
    // seed offsets keep the stage streams apart from stage1's
    let seed = config.seed.wrapping_add(0x5eed_0002);
    let mut sampling = rng_for(seed, Stream::Sampling);
    let mut dropout = rng_for(seed, Stream::Dropout);
    let total = config.stage2_steps;
    let lr = LrSchedule::with_warmup_ratio(config.base_lr, config.warmup_ratio, total)?;
    let mut opt = EncoderOptimizer::new(&params)?;
    let started = Instant::now();

    for t in 1..=total {
        let rows = sample_rows(&mut sampling, resolved.len(), config.batch_size);
        let inst: Vec<usize> = rows.iter().map(|&r| resolved[r].0).collect();
        let batch = PairBatch {
            instances: inst.iter().map(|&i| corpus.instance_tokens[i].as_slice()).collect(),
            labels: rows
                .iter()
                .map(|&r| corpus.label_tokens[resolved[r].1].as_slice())
                .collect(),
            positives: Some(positives_by_key(&inst)),
        };
        let xm = draw_masks(&params, rows.len(), &mut dropout)?;
        let ym = draw_masks(&params, rows.len(), &mut dropout)?;
        let (loss, grads) = pair_step(&params, &batch, &xm, &ym)?;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("stage2 loss is {loss} at step {t}")));
        }
        let step_lr = lr.lr_at(t)?;
        opt.step(&mut params, &grads, step_lr)?;
        log.records.push(StepRecord {
            step: t,
            loss: loss as f64,
            loss_cluster: loss as f64,
            loss_label: 0.0,
            k: ClusterMode::Singleton,
            lr: step_lr,
            elapsed_s: started.elapsed().as_secs_f64(),
        });
    }
    Ok((params, log))
}
