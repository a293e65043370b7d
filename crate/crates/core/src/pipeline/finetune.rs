use std::time::Instant;

use super::log::{StepRecord, TrainingLog};
use super::stage1::sample_rows;
use super::step::{draw_masks, pair_step, PairBatch};
use super::{EncoderOptimizer, TokenizedCorpus, TrainConfig};
use crate::clustering::ClusterMode;
use crate::corpus::FewShotSubset;
use crate::encoder::EncoderParams;
use crate::error::{Error, Result};
use crate::numkit::{rng_for, LrSchedule, Stream};

/// Few-shot fine-tuning: in-batch contrastive loss on true pairs for
/// `finetune_steps` steps at `finetune_lr`.
pub fn finetune(
    corpus: &TokenizedCorpus,
    mut params: EncoderParams<f32>,
    fewshot: &FewShotSubset,
    config: &TrainConfig,
) -> Result<(EncoderParams<f32>, TrainingLog)> {
    config.validate()?;
    if fewshot.pairs.is_empty() {
        return Err(Error::Precondition("few-shot subset is empty".into()));
    }
    let resolved = fewshot
        .pairs
        .iter()
        .map(|p| {
            corpus
                .instance_position(p.instance_id)
                .zip(corpus.label_position(p.label_id))
                .ok_or_else(|| {
                    Error::Integrity(format!("pair ({}, {}) does not resolve", p.instance_id, p.label_id))
                })
        })
        .collect::<Result<Vec<(usize, usize)>>>()?;

    let mut log = TrainingLog::new("finetune");
    log.notes.push(format!(
        "lr {:e}, steps {}, subset {} pairs ({} ratio {}, seed {})",
        config.finetune_lr,
        config.finetune_steps,
        resolved.len(),
        fewshot.mode,
        fewshot.ratio,
        fewshot.seed
    ));
    let total = config.finetune_steps;
    if total == 0 {
        return Ok((params, log));
    }
    let seed = config.seed.wrapping_add(0x5eed_0003);
    let mut sampling = rng_for(seed, Stream::Sampling);
    let mut dropout = rng_for(seed, Stream::Dropout);
    let lr = LrSchedule::with_warmup_ratio(config.finetune_lr, config.warmup_ratio, total)?;
    let mut opt = EncoderOptimizer::new(&params)?;
    let started = Instant::now();
    let n = config.batch_size.min(resolved.len()).max(2);

    for t in 1..=total {
        let rows = sample_rows(&mut sampling, resolved.len(), n);
        let batch = PairBatch {
            instances: rows
                .iter()
                .map(|&r| corpus.instance_tokens[resolved[r].0].as_slice())
                .collect(),
            labels: rows
                .iter()
                .map(|&r| corpus.label_tokens[resolved[r].1].as_slice())
                .collect(),
            positives: None,
        };
        let xm = draw_masks(&params, rows.len(), &mut dropout)?;
        let ym = draw_masks(&params, rows.len(), &mut dropout)?;
        let (loss, grads) = pair_step(&params, &batch, &xm, &ym)?;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("finetune loss is {loss} at step {t}")));
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
