use std::collections::HashMap;

use rayon::prelude::*;

use super::TokenizedCorpus;
use crate::encoder::EncoderParams;
use crate::error::Result;
use crate::retrieval::{select_top, topk_batch, LabelIndex};
use crate::tfidf::{vectorize, IdfTable, SparseVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PseudoSource {
    Encoder,
    Tfidf,
    /// Proposed by both views.
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PseudoPair {
    pub instance_id: u64,
    pub label_id: u64,
    pub source: PseudoSource,
}

/// Mined (instance, label) pairs, unique on `(instance_id, label_id)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PseudoPairSet {
    pub pairs: Vec<PseudoPair>,
}

impl PseudoPairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Labels proposed for `instance_id` by `view` (pairs tagged `Both` count for either view).
    pub fn labels_from(&self, instance_id: u64, view: PseudoSource) -> Vec<u64> {
        self.pairs
            .iter()
            .filter(|p| p.instance_id == instance_id)
            .filter(|p| p.source == view || p.source == PseudoSource::Both)
            .map(|p| p.label_id)
            .collect()
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for p in &self.pairs {
            let src = match p.source {
                PseudoSource::Encoder => "encoder",
                PseudoSource::Tfidf => "tfidf",
                PseudoSource::Both => "both",
            };
            s.push_str(&format!("{}\t{}\t{src}\n", p.instance_id, p.label_id));
        }
        s
    }
}

/// Top-`k` labels per training instance under the encoder's inner product
/// and under TF-IDF cosine, merged and deduplicated. Both views break score
/// ties toward the smaller label id.
pub fn build_pseudo_pairs(
    corpus: &TokenizedCorpus,
    params: &EncoderParams<f32>,
    idf: &IdfTable,
    k: usize,
) -> Result<PseudoPairSet> {
    let index = LabelIndex::from_encoder(params, &corpus.label_ids, &corpus.label_tokens)?;
    let queries = crate::encoder::encode_all(params, &corpus.instance_tokens)?;
    let encoder_view = topk_batch(&index, &corpus.instance_ids, &queries, k)?;

    let label_vecs: Vec<SparseVector> = corpus.label_tokens.iter().map(|t| vectorize(t, idf)).collect();
    let tfidf_view: Vec<Vec<u64>> = corpus
        .instance_tokens
        .par_iter()
        .map(|toks| {
            let q = vectorize(toks, idf);
            let scored = corpus.label_ids.iter().copied().zip(label_vecs.iter().map(|l| q.dot(l))).collect();
            select_top(scored, k).into_iter().map(|(id, _)| id).collect()
        })
        .collect();

    let mut pairs = Vec::new();
    for (i, &inst) in corpus.instance_ids.iter().enumerate() {
        let mut slot: HashMap<u64, usize> = HashMap::new();
        for &(label, _) in &encoder_view[i].entries {
            slot.insert(label, pairs.len());
            pairs.push(PseudoPair { instance_id: inst, label_id: label, source: PseudoSource::Encoder });
        }
        for &label in &tfidf_view[i] {
            match slot.get(&label) {
                Some(&at) => pairs[at].source = PseudoSource::Both,
                None => {
                    slot.insert(label, pairs.len());
                    pairs.push(PseudoPair { instance_id: inst, label_id: label, source: PseudoSource::Tfidf });
                }
            }
        }
    }
    Ok(PseudoPairSet { pairs })
}
