//! Planted-topic corpora: every instance is drawn from one topic, every label
//! names one topic, and the truth pair is (instance, its topic's label).

use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::corpus::{write_documents, write_pairs, Corpus, Document, PositivePair};
use crate::error::{Error, Result};
use crate::numkit::{rng_for, Stream};

/// Shape of a generated corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantedTopics {
    pub topics: usize,
    /// Training instances.
    pub instances: usize,
    /// Held-out instances.
    pub test_instances: usize,
    /// Words private to each topic.
    pub words_per_topic: usize,
    /// Words shared by every topic.
    pub noise_words: usize,
    /// Inclusive range of sentences per instance.
    pub sentences: (usize, usize),
    /// Inclusive range of words per sentence.
    pub sentence_len: (usize, usize),
    /// Chance a word is drawn from the topic vocabulary rather than noise.
    pub topic_share: f64,
    /// Topic words in each label's text.
    pub label_words: usize,
}

impl Default for PlantedTopics {
    fn default() -> Self {
        Self {
            topics: 20,
            instances: 1500,
            test_instances: 500,
            words_per_topic: 40,
            noise_words: 300,
            sentences: (3, 6),
            sentence_len: (6, 12),
            topic_share: 0.4,
            label_words: 6,
        }
    }
}

impl PlantedTopics {
    fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.topics == 0 {
            bad.push("topics must be positive");
        }
        if self.words_per_topic == 0 || self.label_words == 0 || self.label_words > self.words_per_topic {
            bad.push("label_words must be in 1..=words_per_topic");
        }
        if self.sentences.0 == 0 || self.sentences.0 > self.sentences.1 {
            bad.push("bad sentence count range");
        }
        if self.sentence_len.0 == 0 || self.sentence_len.0 > self.sentence_len.1 {
            bad.push("bad sentence length range");
        }
        if !(0.0..=1.0).contains(&self.topic_share) || (self.noise_words == 0 && self.topic_share < 1.0) {
            bad.push("topic_share must be in [0, 1], and 1 when there are no noise words");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Parameter(bad.join("; ")))
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    /// Training instances and all labels, without pairs.
    pub train: Corpus,
    /// Truth pairs for the training instances, for few-shot sampling.
    pub train_pairs: Vec<PositivePair>,
    pub test_instances: Vec<Document>,
    pub test_pairs: Vec<PositivePair>,
    /// Topic index of every training instance, then every test instance.
    pub topic_of: Vec<usize>,
}

fn topic_word(t: usize, j: usize) -> String {
    format!("topic{t}w{j}")
}

fn noise_word(j: usize) -> String {
    format!("common{j}")
}

impl SyntheticCorpus {
    /// Training instances get ids `0..instances`, test instances follow;
    /// label `t` names topic `t`.
    pub fn generate(shape: &PlantedTopics, seed: u64) -> Result<Self> {
        shape.validate()?;
        let mut rng = rng_for(seed, Stream::Synthetic);
        let labels: Vec<Document> = (0..shape.topics)
            .map(|t| {
                let words: Vec<usize> = (0..shape.words_per_topic).collect();
                let picked: Vec<String> = words
                    .choose_multiple(&mut rng, shape.label_words)
                    .map(|&j| topic_word(t, j))
                    .collect();
                Document { id: t as u64, text: picked.join(" ") }
            })
            .collect();
        let total = shape.instances + shape.test_instances;
        let mut docs = Vec::with_capacity(total);
        let mut topic_of = Vec::with_capacity(total);
        for id in 0..total {
            let t = rng.random_range(0..shape.topics);
            let n_sent = rng.random_range(shape.sentences.0..=shape.sentences.1);
            let sentences: Vec<String> = (0..n_sent)
                .map(|_| {
                    let len = rng.random_range(shape.sentence_len.0..=shape.sentence_len.1);
                    let words: Vec<String> = (0..len)
                        .map(|_| {
                            if rng.random_bool(shape.topic_share) {
                                topic_word(t, rng.random_range(0..shape.words_per_topic))
                            } else {
                                noise_word(rng.random_range(0..shape.noise_words))
                            }
                        })
                        .collect();
                    format!("{}.", words.join(" "))
                })
                .collect();
            docs.push(Document { id: id as u64, text: sentences.join(" ") });
            topic_of.push(t);
        }
        let pair = |i: usize| PositivePair { instance_id: i as u64, label_id: topic_of[i] as u64 };
        let train_pairs = (0..shape.instances).map(pair).collect();
        let test_pairs = (shape.instances..total).map(pair).collect();
        let test_instances = docs.split_off(shape.instances);
        Ok(Self {
            train: Corpus::new(docs, labels, Vec::new())?,
            train_pairs,
            test_instances,
            test_pairs,
            topic_of,
        })
    }

    /// Writes `instances.jsonl`, `labels.jsonl`, `train_pairs.tsv`,
    /// `test_instances.jsonl` and `test_pairs.tsv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        write_documents(&dir.join("instances.jsonl"), &self.train.instances)?;
        write_documents(&dir.join("labels.jsonl"), &self.train.labels)?;
        write_pairs(&dir.join("train_pairs.tsv"), &self.train_pairs)?;
        write_documents(&dir.join("test_instances.jsonl"), &self.test_instances)?;
        write_pairs(&dir.join("test_pairs.tsv"), &self.test_pairs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    #[test]
    fn shape_and_topic_purity() {
        let shape = PlantedTopics { topics: 5, instances: 40, test_instances: 10, ..PlantedTopics::default() };
        let s = SyntheticCorpus::generate(&shape, 9).unwrap();
        assert_eq!((s.train.instances.len(), s.test_instances.len(), s.train.labels.len()), (40, 10, 5));
        assert!(s.train.pairs.is_empty());
        for (doc, &t) in s.train.instances.iter().chain(&s.test_instances).zip(&s.topic_of) {
            let prefix = format!("topic{t}w");
            for tok in tokenize(&doc.text) {
                assert!(tok.starts_with(&prefix) || tok.starts_with("common"), "{tok}");
            }
        }
        assert_eq!(s.test_pairs[0], PositivePair { instance_id: 40, label_id: s.topic_of[40] as u64 });
    }

    #[test]
    fn seeded() {
        let shape = PlantedTopics { instances: 30, test_instances: 5, ..PlantedTopics::default() };
        let a = SyntheticCorpus::generate(&shape, 1).unwrap();
        let b = SyntheticCorpus::generate(&shape, 1).unwrap();
        let c = SyntheticCorpus::generate(&shape, 2).unwrap();
        assert_eq!(a.train.instances, b.train.instances);
        assert_ne!(a.train.instances, c.train.instances);
    }

    #[test]
    fn rejects_bad_shape() {
        let shape = PlantedTopics { label_words: 100, ..PlantedTopics::default() };
        assert!(matches!(SyntheticCorpus::generate(&shape, 0), Err(Error::Parameter(_))));
    }
}
