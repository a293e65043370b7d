use std::time::Instant;

use rand::seq::index;
use rand::Rng;

use super::log::{ClusterEvent, EventKind, StepRecord, TrainingLog};
use super::step::{stage1_step, Stage1Batch, Stage1Masks};
use super::{EncoderOptimizer, TokenizedCorpus, TrainConfig};
use crate::clustering::{kmeans, positives_in_batch, schedule_k, ClusterMode, ClusterState};
use crate::encoder::{encode_all, EncoderParams};
use crate::error::{Error, Result};
use crate::numkit::{rng_for, LrSchedule, Stream};

pub struct Stage1Output {
    pub params: EncoderParams<f32>,
    pub log: TrainingLog,
}

fn cluster_contexts(
    params: &EncoderParams<f32>,
    corpus: &TokenizedCorpus,
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<ClusterState> {
    let contexts: Vec<&[u32]> = corpus.ict.iter().map(|p| p.context_ids.as_slice()).collect();
    let mut emb = encode_all(params, &contexts)?;
    emb.normalize_rows();
    kmeans(&emb, k, seed, max_iters)
}

/// `n` distinct values from `0..len` (with replacement when `n > len`).
pub(crate) fn sample_rows<R: Rng + ?Sized>(rng: &mut R, len: usize, n: usize) -> Vec<usize> {
    if n <= len {
        index::sample(rng, len, n).into_vec()
    } else {
        (0..n).map(|_| rng.random_range(0..len)).collect()
    }
}

/// Half of the batch from the cluster of a random pair, the rest uniform.
fn sample_stratified<R: Rng + ?Sized>(rng: &mut R, state: &ClusterState, n: usize) -> Vec<usize> {
    let total = state.assignment.len();
    let anchor = state.assignment[rng.random_range(0..total)];
    let members: Vec<usize> = (0..total).filter(|&i| state.assignment[i] == anchor).collect();
    let take = (n / 2).min(members.len());
    let mut rows: Vec<usize> = index::sample(rng, members.len(), take)
        .into_iter()
        .map(|i| members[i])
        .collect();
    let rest: Vec<usize> = (0..total).filter(|i| !rows.contains(i)).collect();
    rows.extend(
        index::sample(rng, rest.len(), n - take)
            .into_iter()
            .map(|i| rest[i]),
    );
    rows
}

/// Stage I: contrastive pre-training on (context, title) pairs with the
/// coarse-to-fine cluster schedule and label regularization.
///
/// Each step samples N distinct pairs and M real labels, builds the positive
/// sets from the current cluster assignment and takes one Adam step on the
/// summed objective. After step `t` (while `2t < T_total`) K doubles when
/// `t % T_K == 0` and the contexts are re-embedded and re-clustered when
/// `t % T_update == 0` or K changed. From `ceil(T_total / 2)` on every pair
/// is its own cluster.
pub fn run_stage1(
    corpus: &TokenizedCorpus,
    mut params: EncoderParams<f32>,
    config: &TrainConfig,
) -> Result<Stage1Output> {
    config.validate()?;
    let n_pairs = corpus.ict.len();
    if n_pairs < config.batch_size {
        return Err(Error::Precondition(format!(
            "{n_pairs} ICT pairs is fewer than the batch size {}",
            config.batch_size
        )));
    }
    if corpus.label_tokens.is_empty() {
        return Err(Error::Precondition("label regularization needs at least one label".into()));
    }
    let sched = &config.schedule;
    let total = sched.t_total;
    let lr = LrSchedule::with_warmup_ratio(config.base_lr, config.warmup_ratio, total)?;
    let mut sampling = rng_for(config.seed, Stream::Sampling);
    let mut dropout = rng_for(config.seed, Stream::Dropout);
    let mut opt = EncoderOptimizer::new(&params)?;
    let mut log = TrainingLog::new("stage1");
    log.notes.push(format!("ict pairs {n_pairs}, skipped instances {}", corpus.ict_skipped));
    let started = Instant::now();

    let mut state: Option<ClusterState> = match schedule_k(sched, 1, n_pairs) {
        ClusterMode::Clusters(k) => {
            let s = cluster_contexts(&params, corpus, k, config.seed, config.kmeans_max_iters)?;
            log.events.push(ClusterEvent { step: 0, k, kind: EventKind::Initial });
            Some(s)
        }
        ClusterMode::Singleton => None,
    };

    for t in 1..=total {
        let mode = schedule_k(sched, t, n_pairs);
        let active = match mode {
            ClusterMode::Singleton => None,
            ClusterMode::Clusters(k) => {
                debug_assert_eq!(state.as_ref().map(|s| s.k), Some(k));
                state.as_ref()
            }
        };
        let rows = match active {
            Some(s) if config.stratified_batching => sample_stratified(&mut sampling, s, config.batch_size),
            _ => sample_rows(&mut sampling, n_pairs, config.batch_size),
        };
        let label_rows = sample_rows(&mut sampling, corpus.label_tokens.len(), config.label_batch_size);
        let batch = Stage1Batch {
            contexts: rows.iter().map(|&r| corpus.ict[r].context_ids.as_slice()).collect(),
            titles: rows.iter().map(|&r| corpus.ict[r].title_ids.as_slice()).collect(),
            negatives: label_rows.iter().map(|&r| corpus.label_tokens[r].as_slice()).collect(),
            positives: positives_in_batch(active, &rows)?,
        };
        let masks = Stage1Masks::draw(&params, &batch, &mut dropout)?;
        let (loss, grads) = stage1_step(&params, &batch, &masks)?;
        if !loss.total.is_finite() {
            return Err(Error::Numeric(format!("stage1 loss is {} at step {t}", loss.total)));
        }
        let step_lr = lr.lr_at(t)?;
        opt.step(&mut params, &grads, step_lr)?;
        log.records.push(StepRecord {
            step: t,
            loss: loss.total as f64,
            loss_cluster: loss.cluster as f64,
            loss_label: loss.label as f64,
            k: mode,
            lr: step_lr,
            elapsed_s: started.elapsed().as_secs_f64(),
        });

        if 2 * t < total {
            let next = schedule_k(sched, t + 1, n_pairs);
            let doubled = t % sched.t_k == 0 && next != mode;
            if let ClusterMode::Clusters(k) = next {
                if t % sched.t_update == 0 || doubled {
                    let seed = config.seed.wrapping_add(t);
                    state = Some(cluster_contexts(&params, corpus, k, seed, config.kmeans_max_iters)?);
                    log.events.push(ClusterEvent { step: t, k, kind: EventKind::Reassign });
                }
            }
        }
        if matches!(schedule_k(sched, (t + 1).min(total), n_pairs), ClusterMode::Singleton) {
            state = None;
        }
    }
    Ok(Stage1Output { params, log })
}
