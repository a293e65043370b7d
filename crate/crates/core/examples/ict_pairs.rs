//! Inverse-cloze pairs: the first sentence of each instance becomes its
//! pseudo label, the remainder its pseudo instance.

use maclr::corpus::{build_vocab, make_ict_pairs, Document};

fn main() -> maclr::Result<()> {
    let docs = vec![
        Document { id: 1, text: "Stainless steel kettle. Boils water fast. Auto shut-off.".into() },
        Document { id: 2, text: "a single sentence without a full stop".into() },
        Document { id: 3, text: "?!".into() },
    ];
    let vocab = build_vocab(&docs, &[], 1)?;
    let out = make_ict_pairs(&docs, &vocab, 288, 64);
    for p in &out.pairs {
        println!("#{}  title {:?}", p.source_instance, vocab.decode(&p.title_ids));
        println!("    context {:?}", vocab.decode(&p.context_ids));
    }
    println!("skipped {}", out.skipped);
    Ok(())
}
