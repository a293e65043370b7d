//! Self-supervised pre-training of a shared two-tower text encoder for
//! extreme multi-label classification when no (instance, label) pairs exist.
//!
//! The crate is organised bottom-up:
//!
//! - [`numkit`]: dense matrices, Adam, learning-rate schedule, dropout, RNG streams.
//! - [`corpus`]: file loading, tokenization, vocabulary, inverse-cloze pair
//!   construction and few-shot subset sampling.
//! - [`tfidf`]: sparse TF-IDF vectors and exact sparse top-k.
//! - [`encoder`]: the bag-of-embeddings encoder with analytic backward and checkpoints.
//! - [`clustering`]: k-means and the coarse-to-fine cluster schedule.
//! - [`losses`]: in-batch contrastive, cluster-supervised contrastive and
//!   label-regularization losses with analytic gradients.
//! - [`pipeline`]: Stage I pre-training, pseudo-pair mining, Stage II
//!   self-training and few-shot fine-tuning.
//! - [`retrieval`]: exact inner-product top-k and P@k / R@k evaluation.
//! - [`cli`]: the flat-config command-line front end.
//! - [`synthetic`]: planted-topic corpora for demos and tests.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod clustering;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod losses;
pub mod numkit;
pub mod pipeline;
pub mod retrieval;
pub mod synthetic;
pub mod tfidf;

mod fsutil;

pub use error::{Error, Result};
