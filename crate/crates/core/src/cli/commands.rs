use std::path::PathBuf;

use super::RunConfig;
use crate::corpus::{load_corpus, load_documents, load_pairs, sample_fewshot, write_pairs, Corpus, Document, Vocabulary};
use crate::encoder::{encode_all, load_checkpoint, save_checkpoint, EncoderParams};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::pipeline::{build_pseudo_pairs, finetune, init_encoder, run_stage1, run_stage2, TokenizedCorpus, TrainingLog};
use crate::retrieval::{
    check_pairs_resolve, evaluate_predictions, load_predictions, select_top, topk_batch, truth_map, write_predictions,
    LabelIndex, RankedPrediction,
};
use crate::tfidf::{fit_idf, vectorize};

/// Paths written by a command.
pub type Outputs = Vec<PathBuf>;

fn training_corpus(cfg: &RunConfig, command: &str, with_pairs: bool) -> Result<Corpus> {
    cfg.require(command, &[("instances", &cfg.instances), ("labels", &cfg.labels)])?;
    if with_pairs {
        cfg.require(command, &[("pairs", &cfg.pairs)])?;
    }
    load_corpus(
        cfg.instances.as_deref().unwrap(),
        cfg.labels.as_deref().unwrap(),
        if with_pairs { cfg.pairs.as_deref() } else { None },
    )
}

fn vocab(cfg: &RunConfig) -> Result<Vocabulary> {
    Vocabulary::load(&cfg.vocab_path())
}

fn tokenized(cfg: &RunConfig, corpus: &Corpus, vocab: &Vocabulary) -> TokenizedCorpus {
    TokenizedCorpus::build(corpus, vocab, cfg.instance_max_len, cfg.label_max_len)
}

/// Instances to retrieve for: the test split when configured, else training instances.
fn query_documents(cfg: &RunConfig, command: &str) -> Result<Vec<Document>> {
    match (&cfg.test_instances, &cfg.instances) {
        (Some(p), _) | (None, Some(p)) => load_documents(p),
        (None, None) => Err(Error::Config(vec![format!("{command} needs test_instances or instances")])),
    }
}

fn checkpoint(cfg: &RunConfig, default: &[&str], vocab: &Vocabulary) -> Result<EncoderParams<f32>> {
    let path = match &cfg.checkpoint {
        Some(p) => p.clone(),
        None => default
            .iter()
            .map(|n| cfg.out(n))
            .find(|p| p.exists())
            .ok_or_else(|| Error::Precondition(format!("no checkpoint found; looked for {default:?} in {}", cfg.out_dir.display())))?,
    };
    log::info!("loading {}", path.display());
    load_checkpoint(&path, Some(vocab.hash64()))
}

fn write_log(cfg: &RunConfig, name: &str, log: &TrainingLog) -> Result<PathBuf> {
    let p = cfg.out(name);
    fsutil::write_atomic(&p, log.to_jsonl(cfg.train.log_every).as_bytes())?;
    Ok(p)
}

fn write_checkpoint(cfg: &RunConfig, name: &str, params: &EncoderParams<f32>, vocab: &Vocabulary) -> Result<PathBuf> {
    let p = cfg.out(name);
    save_checkpoint(params, vocab.hash64(), &p)?;
    Ok(p)
}

pub fn cmd_build_vocab(cfg: &RunConfig) -> Result<Outputs> {
    let corpus = training_corpus(cfg, "build-vocab", false)?;
    let v = crate::corpus::build_vocab(&corpus.instances, &corpus.labels, cfg.min_frequency)?;
    log::info!("vocabulary of {} tokens", v.len());
    let p = cfg.out("vocab.txt");
    v.save(&p)?;
    Ok(vec![p])
}

/// TF-IDF baseline: idf from the training instances, cosine ranking of labels.
pub fn cmd_tfidf(cfg: &RunConfig) -> Result<Outputs> {
    let corpus = training_corpus(cfg, "tfidf", false)?;
    let v = vocab(cfg)?;
    let train_tokens: Vec<Vec<u32>> = corpus.instances.iter().map(|d| v.encode_text(&d.text)).collect();
    let idf = fit_idf(&train_tokens)?;
    let labels: Vec<_> = corpus.labels.iter().map(|d| (d.id, vectorize(&v.encode_text(&d.text), &idf))).collect();
    let queries = query_documents(cfg, "tfidf")?;
    let k = cfg.max_k();
    let preds: Vec<RankedPrediction> = queries
        .iter()
        .map(|q| {
            let qv = vectorize(&v.encode_text(&q.text), &idf);
            let scored = labels.iter().map(|(id, lv)| (*id, qv.dot(lv))).collect();
            RankedPrediction { instance_id: q.id, entries: select_top(scored, k), k }
        })
        .collect();
    let mut out = vec![cfg.out("tfidf_predictions.tsv")];
    write_predictions(&out[0], &preds)?;
    if let Some(tp) = &cfg.test_pairs {
        let pairs = load_pairs(tp)?;
        let ids: Vec<u64> = queries.iter().map(|d| d.id).collect();
        let label_ids: Vec<u64> = corpus.labels.iter().map(|d| d.id).collect();
        check_pairs_resolve(&pairs, &ids, &label_ids)?;
        let report = evaluate_predictions(&preds, &truth_map(&pairs), &cfg.eval_k)?;
        let p = cfg.out("tfidf_metrics.json");
        fsutil::write_atomic(&p, report.to_json().as_bytes())?;
        out.push(p);
    }
    Ok(out)
}

pub fn cmd_pretrain(cfg: &RunConfig) -> Result<Outputs> {
    let corpus = training_corpus(cfg, "pretrain", false)?;
    let v = vocab(cfg)?;
    let tc = tokenized(cfg, &corpus, &v);
    if tc.ict_skipped > 0 {
        log::warn!("{} instances too short for a (context, title) pair", tc.ict_skipped);
    }
    let params = init_encoder(v.len(), &cfg.encoder, cfg.train.seed)?;
    let out = run_stage1(&tc, params, &cfg.train)?;
    Ok(vec![
        write_checkpoint(cfg, "stage1.ckpt", &out.params, &v)?,
        write_log(cfg, "stage1_log.jsonl", &out.log)?,
    ])
}

/// Mines pseudo pairs with the Stage I encoder and TF-IDF, then runs Stage II.
pub fn cmd_selftrain(cfg: &RunConfig) -> Result<Outputs> {
    let corpus = training_corpus(cfg, "selftrain", false)?;
    let v = vocab(cfg)?;
    let tc = tokenized(cfg, &corpus, &v);
    let params = checkpoint(cfg, &["stage1.ckpt"], &v)?;
    let idf = fit_idf(&tc.instance_tokens)?;
    let pseudo = build_pseudo_pairs(&tc, &params, &idf, cfg.train.k_pseudo)?;
    log::info!("{} pseudo pairs", pseudo.len());
    let (params, log) = run_stage2(&tc, params, &pseudo, &cfg.train)?;
    let pp = cfg.out("pseudo_pairs.tsv");
    fsutil::write_atomic(&pp, pseudo.to_tsv().as_bytes())?;
    Ok(vec![
        pp,
        write_checkpoint(cfg, "stage2.ckpt", &params, &v)?,
        write_log(cfg, "stage2_log.jsonl", &log)?,
    ])
}

pub fn cmd_finetune(cfg: &RunConfig) -> Result<Outputs> {
    let corpus = training_corpus(cfg, "finetune", true)?;
    let v = vocab(cfg)?;
    let tc = tokenized(cfg, &corpus, &v);
    let params = checkpoint(cfg, &["stage2.ckpt", "stage1.ckpt"], &v)?;
    let subset = sample_fewshot(&corpus.pairs, cfg.fewshot_mode, cfg.fewshot_ratio, cfg.fewshot_seed)?;
    log::info!("{} few-shot pairs ({}, ratio {})", subset.pairs.len(), subset.mode, subset.ratio);
    let (params, log) = finetune(&tc, params, &subset, &cfg.train)?;
    let fp = cfg.out("fewshot_pairs.tsv");
    write_pairs(&fp, &subset.pairs)?;
    Ok(vec![
        fp,
        write_checkpoint(cfg, "finetune.ckpt", &params, &v)?,
        write_log(cfg, "finetune_log.jsonl", &log)?,
    ])
}

/// Ranks every label for each query instance with the most advanced
/// checkpoint in `out_dir` unless `checkpoint` names one.
pub fn cmd_predict(cfg: &RunConfig) -> Result<Outputs> {
    cfg.require("predict", &[("labels", &cfg.labels)])?;
    let v = vocab(cfg)?;
    let params = checkpoint(cfg, &["finetune.ckpt", "stage2.ckpt", "stage1.ckpt"], &v)?;
    let labels = load_documents(cfg.labels.as_deref().unwrap())?;
    let queries = query_documents(cfg, "predict")?;
    let tc = TokenizedCorpus::from_parts(&queries, &labels, &v, cfg.instance_max_len, cfg.label_max_len);
    let index = LabelIndex::from_encoder(&params, &tc.label_ids, &tc.label_tokens)?;
    let q = encode_all(&params, &tc.instance_tokens)?;
    let preds = topk_batch(&index, &tc.instance_ids, &q, cfg.max_k())?;
    let p = cfg.out("predictions.tsv");
    write_predictions(&p, &preds)?;
    Ok(vec![p])
}

/// Scores a predictions file against `test_pairs`.
pub fn cmd_eval(cfg: &RunConfig) -> Result<Outputs> {
    cfg.require("eval", &[("test_pairs", &cfg.test_pairs)])?;
    let preds = load_predictions(&cfg.predictions.clone().unwrap_or_else(|| cfg.out("predictions.tsv")))?;
    let pairs = load_pairs(cfg.test_pairs.as_deref().unwrap())?;
    let ids: Vec<u64> = preds.iter().map(|p| p.instance_id).collect();
    let label_ids: Vec<u64> = match &cfg.labels {
        Some(l) => load_documents(l)?.iter().map(|d| d.id).collect(),
        None => pairs.iter().map(|p| p.label_id).collect(),
    };
    check_pairs_resolve(&pairs, &ids, &label_ids)?;
    let report = evaluate_predictions(&preds, &truth_map(&pairs), &cfg.eval_k)?;
    log::info!("{}", report.to_json().replace('\n', " "));
    let p = cfg.out("metrics.json");
    fsutil::write_atomic(&p, report.to_json().as_bytes())?;
    Ok(vec![p])
}

/// build-vocab, pretrain, selftrain, finetune (when `pairs` is set),
/// predict, and eval (when `test_pairs` is set).
pub fn cmd_run(cfg: &RunConfig) -> Result<Outputs> {
    let mut cfg = cfg.clone();
    cfg.vocab = None;
    cfg.checkpoint = None;
    cfg.predictions = None;
    let mut out = cmd_build_vocab(&cfg)?;
    out.extend(cmd_pretrain(&cfg)?);
    out.extend(cmd_selftrain(&cfg)?);
    if cfg.pairs.is_some() {
        out.extend(cmd_finetune(&cfg)?);
    }
    out.extend(cmd_predict(&cfg)?);
    if cfg.test_pairs.is_some() {
        out.extend(cmd_eval(&cfg)?);
    }
    Ok(out)
}
