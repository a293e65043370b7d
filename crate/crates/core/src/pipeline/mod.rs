//! Stage I pre-training, pseudo-pair mining, Stage II self-training and
//! few-shot fine-tuning.

mod config;
mod finetune;
mod log;
mod optim;
mod pseudo;
mod stage1;
mod stage2;
mod step;

use std::collections::HashMap;

pub use config::{EncoderConfig, TrainConfig};
pub use finetune::finetune;
pub use log::{ClusterEvent, EventKind, StepRecord, TrainingLog};
pub use optim::EncoderOptimizer;
pub use pseudo::{build_pseudo_pairs, PseudoPair, PseudoPairSet, PseudoSource};
pub use stage1::{run_stage1, Stage1Output};
pub use stage2::run_stage2;
pub use step::{pair_step, stage1_step, PairBatch, Stage1Batch, Stage1Loss, Stage1Masks};

use crate::corpus::{make_ict_pairs, Corpus, Document, IctPair, Vocabulary};
use crate::encoder::EncoderParams;
use crate::error::Result;
use crate::numkit::{rng_for, Stream};

/// A corpus mapped to vocabulary ids, ready for training and retrieval.
#[derive(Clone, Debug)]
pub struct TokenizedCorpus {
    pub instance_ids: Vec<u64>,
    /// Full instance text, truncated to the instance length.
    pub instance_tokens: Vec<Vec<u32>>,
    pub label_ids: Vec<u64>,
    /// Label text, truncated to the label length.
    pub label_tokens: Vec<Vec<u32>>,
    pub ict: Vec<IctPair>,
    pub ict_skipped: usize,
    instance_pos: HashMap<u64, usize>,
    label_pos: HashMap<u64, usize>,
}

impl TokenizedCorpus {
    pub fn build(corpus: &Corpus, vocab: &Vocabulary, instance_max_len: usize, label_max_len: usize) -> Self {
        Self::from_parts(&corpus.instances, &corpus.labels, vocab, instance_max_len, label_max_len)
    }

    pub fn from_parts(
        instances: &[Document],
        labels: &[Document],
        vocab: &Vocabulary,
        instance_max_len: usize,
        label_max_len: usize,
    ) -> Self {
        let encode = |docs: &[Document], max: usize| -> Vec<Vec<u32>> {
            docs.iter()
                .map(|d| {
                    let mut ids = vocab.encode_text(&d.text);
                    ids.truncate(max);
                    ids
                })
                .collect()
        };
        let ict = make_ict_pairs(instances, vocab, instance_max_len, label_max_len);
        Self {
            instance_ids: instances.iter().map(|d| d.id).collect(),
            instance_tokens: encode(instances, instance_max_len),
            label_ids: labels.iter().map(|d| d.id).collect(),
            label_tokens: encode(labels, label_max_len),
            ict: ict.pairs,
            ict_skipped: ict.skipped,
            instance_pos: crate::corpus::io_position_index(instances),
            label_pos: crate::corpus::io_position_index(labels),
        }
    }

    pub fn instance_position(&self, id: u64) -> Option<usize> {
        self.instance_pos.get(&id).copied()
    }

    pub fn label_position(&self, id: u64) -> Option<usize> {
        self.label_pos.get(&id).copied()
    }
}

/// Fresh encoder for `vocab` drawn from the run seed's init stream.
pub fn init_encoder(vocab_size: usize, config: &EncoderConfig, seed: u64) -> Result<EncoderParams<f32>> {
    EncoderParams::init(
        vocab_size,
        config.token_dim,
        config.embed_dim,
        config.dropout_rate,
        &mut rng_for(seed, Stream::Init),
    )
}
