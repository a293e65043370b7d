//! Raw text in, token ids out: loading, tokenization, vocabulary,
//! inverse-cloze (context, title) pairs and few-shot subsets.

mod fewshot;
mod ict;
mod io;
mod text;
mod vocab;

pub use fewshot::{sample_fewshot, FewShotMode, FewShotSubset};
pub use ict::{make_ict_pairs, IctOutcome, IctPair};
pub use io::{load_corpus, load_documents, load_pairs, write_documents, write_pairs, Corpus, Document, PositivePair};
pub(crate) use io::position_index as io_position_index;
pub use text::{split_sentences, tokenize};
pub use vocab::{build_vocab, Vocabulary, UNK_ID, UNK_TOKEN};

/// Instances and labels share one record shape: an integer id and raw text.
pub type Instance = Document;
pub type Label = Document;
