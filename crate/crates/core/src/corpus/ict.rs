use super::io::Document;
use super::text::{split_sentences, tokenize};
use super::vocab::Vocabulary;

/// A pseudo (instance, label) pair: the first sentence of a document acts as
/// the title, the remaining sentences as the context.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IctPair {
    pub context_ids: Vec<u32>,
    pub title_ids: Vec<u32>,
    pub source_instance: u64,
}

#[derive(Clone, Debug, Default)]
pub struct IctOutcome {
    pub pairs: Vec<IctPair>,
    /// Instances whose title or context tokenized to nothing.
    pub skipped: usize,
}

/// Builds at most one (context, title) pair per instance.
///
/// Documents with a single sentence are split in half by token count: the
/// first `ceil(len / 2)` tokens form the title and the rest the context.
pub fn make_ict_pairs(
    instances: &[Document],
    vocab: &Vocabulary,
    instance_max_len: usize,
    label_max_len: usize,
) -> IctOutcome {
    let mut out = IctOutcome::default();
    for doc in instances {
        match split_one(&doc.text, instance_max_len, label_max_len) {
            Some((title, context)) => out.pairs.push(IctPair {
                context_ids: vocab.encode(&context),
                title_ids: vocab.encode(&title),
                source_instance: doc.id,
            }),
            None => out.skipped += 1,
        }
    }
    if out.skipped > 0 {
        log::info!("ict: skipped {} of {} instances", out.skipped, instances.len());
    }
    out
}

fn split_one(text: &str, instance_max_len: usize, label_max_len: usize) -> Option<(Vec<String>, Vec<String>)> {
    let sentences = split_sentences(text);
    let (mut title, mut context) = match sentences.as_slice() {
        [] => return None,
        [only] => {
            let mut toks = tokenize(only);
            let rest = toks.split_off(toks.len().div_ceil(2));
            (toks, rest)
        }
        [first, rest @ ..] => (tokenize(first), tokenize(&rest.join(" "))),
    };
    title.truncate(label_max_len);
    context.truncate(instance_max_len);
    (!title.is_empty() && !context.is_empty()).then_some((title, context))
}
