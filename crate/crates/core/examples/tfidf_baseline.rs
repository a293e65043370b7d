//! Sparse TF-IDF retrieval as a zero-shot baseline on the planted-topic corpus.
//!
//! cargo run --release --example tfidf_baseline -- [seed]

use maclr::corpus::build_vocab;
use maclr::retrieval::{evaluate_predictions, select_top, truth_map, RankedPrediction};
use maclr::synthetic::{PlantedTopics, SyntheticCorpus};
use maclr::tfidf::{fit_idf, vectorize};

fn main() -> maclr::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let data = SyntheticCorpus::generate(&PlantedTopics::default(), seed)?;
    let vocab = build_vocab(&data.train.instances, &data.train.labels, 1)?;
    let encode = |text: &str| vocab.encode_text(text);

    // idf comes from the training instances only
    let train: Vec<Vec<u32>> = data.train.instances.iter().map(|d| encode(&d.text)).collect();
    let idf = fit_idf(&train)?;
    let labels: Vec<_> = data.train.labels.iter().map(|l| (l.id, vectorize(&encode(&l.text), &idf))).collect();

    let preds: Vec<RankedPrediction> = data
        .test_instances
        .iter()
        .map(|d| {
            let q = vectorize(&encode(&d.text), &idf);
            let scored = labels.iter().map(|(id, v)| (*id, q.dot(v))).collect();
            RankedPrediction { instance_id: d.id, entries: select_top(scored, 10), k: 10 }
        })
        .collect();
    let report = evaluate_predictions(&preds, &truth_map(&data.test_pairs), &[1, 3, 5, 10])?;
    print!("{}", report.to_json());
    Ok(())
}
