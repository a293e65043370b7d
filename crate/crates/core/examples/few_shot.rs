//! Few-shot fine-tuning after zero-shot pre-training, under both subset schemes.
//!
//! cargo run --release --example few_shot -- [seed]

use maclr::corpus::{build_vocab, sample_fewshot, FewShotMode};
use maclr::pipeline::{build_pseudo_pairs, finetune, init_encoder, run_stage1, run_stage2, EncoderConfig, TokenizedCorpus, TrainConfig};
use maclr::retrieval::{evaluate, LabelIndex};
use maclr::synthetic::{PlantedTopics, SyntheticCorpus};
use maclr::tfidf::fit_idf;

fn main() -> maclr::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    // harder corpus than the default so the zero-shot model has room to improve
    let shape = PlantedTopics { topic_share: 0.2, ..PlantedTopics::default() };
    let data = SyntheticCorpus::generate(&shape, seed)?;
    let vocab = build_vocab(&data.train.instances, &data.train.labels, 1)?;
    let train = TokenizedCorpus::build(&data.train, &vocab, 288, 64);
    let test = TokenizedCorpus::from_parts(&data.test_instances, &data.train.labels, &vocab, 288, 64);
    let config = TrainConfig { seed, ..TrainConfig::desk() };
    let score = |params: &_| -> maclr::Result<String> {
        let index = LabelIndex::from_encoder(params, &test.label_ids, &test.label_tokens)?;
        let r = evaluate(&index, params, &test.instance_ids, &test.instance_tokens, &data.test_pairs, &[1, 5])?;
        Ok(format!("P@1 {:.3}  R@5 {:.3}", r.precision_at(1).unwrap(), r.recall_at(5).unwrap()))
    };

    let stage1 = run_stage1(&train, init_encoder(vocab.len(), &EncoderConfig::desk(), seed)?, &config)?;
    let pseudo = build_pseudo_pairs(&train, &stage1.params, &fit_idf(&train.instance_tokens)?, config.k_pseudo)?;
    let (zero_shot, _) = run_stage2(&train, stage1.params, &pseudo, &config)?;
    println!("zero-shot                 {}", score(&zero_shot)?);

    for (mode, ratio) in [(FewShotMode::PairRatio, 0.01), (FewShotMode::PairRatio, 0.05), (FewShotMode::LabelCoverage, 0.5)] {
        let subset = sample_fewshot(&data.train_pairs, mode, ratio, seed)?;
        let (tuned, _) = finetune(&train, zero_shot.clone(), &subset, &config)?;
        println!("{mode:?} {ratio:<4} ({:>3} pairs) {}", subset.pairs.len(), score(&tuned)?);
    }
    Ok(())
}
