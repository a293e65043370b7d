//! Zero-shot retrieval on a planted-topic corpus: Stage I pre-training, then
//! pseudo-pair mining and Stage II, scored against held-out truth.
//!
//! cargo run --release --example zero_shot -- [seed]

use std::time::Instant;

use maclr::corpus::build_vocab;
use maclr::pipeline::{build_pseudo_pairs, init_encoder, run_stage1, run_stage2, EncoderConfig, TokenizedCorpus, TrainConfig};
use maclr::retrieval::{evaluate, LabelIndex};
use maclr::synthetic::{PlantedTopics, SyntheticCorpus};
use maclr::tfidf::fit_idf;

fn main() -> maclr::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let data = SyntheticCorpus::generate(&PlantedTopics::default(), seed)?;
    let vocab = build_vocab(&data.train.instances, &data.train.labels, 1)?;
    let train = TokenizedCorpus::build(&data.train, &vocab, 288, 64);
    let test = TokenizedCorpus::from_parts(&data.test_instances, &data.train.labels, &vocab, 288, 64);
    let config = TrainConfig { seed, ..TrainConfig::desk() };

    let score = |params: &_| -> maclr::Result<f64> {
        let index = LabelIndex::from_encoder(params, &test.label_ids, &test.label_tokens)?;
        let r = evaluate(&index, params, &test.instance_ids, &test.instance_tokens, &data.test_pairs, &[1, 5])?;
        Ok(r.recall_at(5).unwrap())
    };

    let t = Instant::now();
    let init = init_encoder(vocab.len(), &EncoderConfig::desk(), seed)?;
    println!("untrained      R@5 = {:.3}", score(&init)?);
    let stage1 = run_stage1(&train, init, &config)?;
    println!("stage I        R@5 = {:.3}  ({:.1?})", score(&stage1.params)?, t.elapsed());

    let idf = fit_idf(&train.instance_tokens)?;
    let pseudo = build_pseudo_pairs(&train, &stage1.params, &idf, config.k_pseudo)?;
    let (stage2, _) = run_stage2(&train, stage1.params, &pseudo, &config)?;
    println!("stage II       R@5 = {:.3}  ({:.1?})", score(&stage2)?, t.elapsed());
    Ok(())
}
