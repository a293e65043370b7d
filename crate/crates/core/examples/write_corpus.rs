//! Writes a planted-topic corpus plus a config file, ready for the command line:
//!
//! cargo run --release --example write_corpus -- data/synth
//! cargo run --release --bin maclr -- --config data/synth/run.conf run

use std::path::PathBuf;

use maclr::synthetic::{PlantedTopics, SyntheticCorpus};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data/synth".into()));
    let data = SyntheticCorpus::generate(&PlantedTopics::default(), 0)?;
    data.write_to(&dir)?;
    let conf = "\
preset = desk
instances = instances.jsonl
labels = labels.jsonl
pairs = train_pairs.tsv
test_instances = test_instances.jsonl
test_pairs = test_pairs.tsv
out_dir = out
";
    std::fs::write(dir.join("run.conf"), conf)?;
    println!("{} train, {} test instances, {} labels in {}", data.train.instances.len(), data.test_instances.len(), data.train.labels.len(), dir.display());
    Ok(())
}
