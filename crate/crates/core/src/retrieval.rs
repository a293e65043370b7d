//! Exact inner-product top-k over label embeddings and the P@k / R@k metrics.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::corpus::PositivePair;
use crate::encoder::{encode_all, EncoderParams};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::numkit::{dot, DenseMatrix};

/// Cut-offs the metrics report supports.
pub const SUPPORTED_K: [usize; 5] = [1, 3, 5, 10, 100];
const PRECISION_K: [usize; 3] = [1, 3, 5];

#[derive(Clone, Debug)]
pub struct LabelIndex {
    embeddings: DenseMatrix<f32>,
    label_ids: Vec<u64>,
}

impl LabelIndex {
    pub fn new(embeddings: DenseMatrix<f32>, label_ids: Vec<u64>) -> Result<Self> {
        if embeddings.rows() != label_ids.len() {
            return Err(Error::Dimension(format!(
                "{} label rows for {} ids",
                embeddings.rows(),
                label_ids.len()
            )));
        }
        if !embeddings.is_finite() {
            return Err(Error::Numeric("non-finite label embedding".into()));
        }
        let mut seen = HashSet::with_capacity(label_ids.len());
        if let Some(dup) = label_ids.iter().find(|id| !seen.insert(**id)) {
            return Err(Error::Integrity(format!("duplicate label id {dup} in index")));
        }
        Ok(Self { embeddings, label_ids })
    }

    /// Eval-mode embeddings of every label.
    pub fn from_encoder<S: AsRef<[u32]> + Sync>(
        params: &EncoderParams<f32>,
        label_ids: &[u64],
        label_tokens: &[S],
    ) -> Result<Self> {
        Self::new(encode_all(params, label_tokens)?, label_ids.to_vec())
    }

    pub fn len(&self) -> usize {
        self.label_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.label_ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.cols()
    }

    pub fn label_ids(&self) -> &[u64] {
        &self.label_ids
    }
}

/// Top-k labels for one instance, best first.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedPrediction {
    pub instance_id: u64,
    pub entries: Vec<(u64, f32)>,
    pub k: usize,
}

impl RankedPrediction {
    pub fn label_ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().map(|(l, _)| *l)
    }
}

/// Score descending, then label id ascending.
fn rank_order(a: &(u64, f32), b: &(u64, f32)) -> std::cmp::Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Keeps the best `k` of `scored` in rank order.
pub fn select_top(mut scored: Vec<(u64, f32)>, k: usize) -> Vec<(u64, f32)> {
    if k == 0 {
        return Vec::new();
    }
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, rank_order);
        scored.truncate(k);
    }
    scored.sort_by(rank_order);
    scored
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Parameter("k must be at least 1".into()));
    }
    Ok(())
}

pub fn topk(index: &LabelIndex, instance_id: u64, query: &[f32], k: usize) -> Result<RankedPrediction> {
    check_k(k)?;
    if query.len() != index.dim() {
        return Err(Error::Dimension(format!(
            "query of width {} against index of width {}",
            query.len(),
            index.dim()
        )));
    }
    let scored = index
        .label_ids
        .iter()
        .enumerate()
        .map(|(r, &id)| (id, dot(query, index.embeddings.row(r))))
        .collect();
    Ok(RankedPrediction {
        instance_id,
        entries: select_top(scored, k),
        k,
    })
}

/// Top-k for many queries; scores come from blocked `Q · Lᵀ` products, each
/// block handled independently.
pub fn topk_batch(
    index: &LabelIndex,
    instance_ids: &[u64],
    queries: &DenseMatrix<f32>,
    k: usize,
) -> Result<Vec<RankedPrediction>> {
    const BLOCK: usize = 256;
    check_k(k)?;
    if queries.rows() != instance_ids.len() {
        return Err(Error::Dimension(format!(
            "{} queries for {} instance ids",
            queries.rows(),
            instance_ids.len()
        )));
    }
    if queries.cols() != index.dim() {
        return Err(Error::Dimension(format!(
            "queries of width {} against index of width {}",
            queries.cols(),
            index.dim()
        )));
    }
    let starts: Vec<usize> = (0..queries.rows()).step_by(BLOCK).collect();
    let blocks = starts
        .par_iter()
        .map(|&s| {
            let e = (s + BLOCK).min(queries.rows());
            let rows: Vec<&[f32]> = (s..e).map(|r| queries.row(r)).collect();
            let block = DenseMatrix::from_rows(&rows, queries.cols())?;
            let scores = block.matmul_transposed(&index.embeddings)?;
            Ok((s..e)
                .map(|r| {
                    let scored = index.label_ids.iter().copied().zip(scores.row(r - s).iter().copied()).collect();
                    RankedPrediction {
                        instance_id: instance_ids[r],
                        entries: select_top(scored, k),
                        k,
                    }
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(blocks.into_iter().flatten().collect())
}

pub fn hits_at_k(pred: &RankedPrediction, truth: &HashSet<u64>, k: usize) -> usize {
    pred.entries.iter().take(k).filter(|(l, _)| truth.contains(l)).count()
}

/// `|top-k ∩ truth| / k`.
pub fn precision_at_k(pred: &RankedPrediction, truth: &HashSet<u64>, k: usize) -> f64 {
    hits_at_k(pred, truth, k) as f64 / k as f64
}

/// `|top-k ∩ truth| / |truth|`; `None` when the truth set is empty.
pub fn recall_at_k(pred: &RankedPrediction, truth: &HashSet<u64>, k: usize) -> Option<f64> {
    (!truth.is_empty()).then(|| hits_at_k(pred, truth, k) as f64 / truth.len() as f64)
}

/// Macro-averaged metrics over instances that have at least one true label.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub precision: Vec<(usize, f64)>,
    pub recall: Vec<(usize, f64)>,
    /// Instances that entered the averages.
    pub instances: usize,
    /// Instances without ground truth, left out of the averages.
    pub excluded: usize,
}

impl MetricsReport {
    pub fn precision_at(&self, k: usize) -> Option<f64> {
        self.precision.iter().find(|(c, _)| *c == k).map(|(_, v)| *v)
    }

    pub fn recall_at(&self, k: usize) -> Option<f64> {
        self.recall.iter().find(|(c, _)| *c == k).map(|(_, v)| *v)
    }

    pub fn to_json(&self) -> String {
        let mut m = Map::new();
        for (k, v) in &self.precision {
            m.insert(format!("P@{k}"), json!(v));
        }
        for (k, v) in &self.recall {
            m.insert(format!("R@{k}"), json!(v));
        }
        m.insert("instances".into(), json!(self.instances));
        m.insert("excluded".into(), json!(self.excluded));
        let mut s = serde_json::to_string_pretty(&Value::Object(m)).expect("plain json");
        s.push('\n');
        s
    }
}

pub fn validate_k_list(k_list: &[usize]) -> Result<Vec<usize>> {
    let set: BTreeSet<usize> = k_list.iter().copied().collect();
    if set.is_empty() {
        return Err(Error::Parameter("empty k list".into()));
    }
    if let Some(bad) = set.iter().find(|k| !SUPPORTED_K.contains(k)) {
        return Err(Error::Parameter(format!("k = {bad} not in {SUPPORTED_K:?}")));
    }
    Ok(set.into_iter().collect())
}

/// Ground truth as instance id → label ids.
pub fn truth_map(pairs: &[PositivePair]) -> HashMap<u64, HashSet<u64>> {
    let mut m: HashMap<u64, HashSet<u64>> = HashMap::new();
    for p in pairs {
        m.entry(p.instance_id).or_default().insert(p.label_id);
    }
    m
}

/// Metrics for precomputed predictions. Reduction runs in prediction order.
pub fn evaluate_predictions(
    predictions: &[RankedPrediction],
    truth: &HashMap<u64, HashSet<u64>>,
    k_list: &[usize],
) -> Result<MetricsReport> {
    let ks = validate_k_list(k_list)?;
    let pks: Vec<usize> = ks.iter().copied().filter(|k| PRECISION_K.contains(k)).collect();
    let mut p_sum = vec![0.0f64; pks.len()];
    let mut r_sum = vec![0.0f64; ks.len()];
    let (mut used, mut excluded) = (0usize, 0usize);
    let empty = HashSet::new();
    for pred in predictions {
        let t = truth.get(&pred.instance_id).unwrap_or(&empty);
        if t.is_empty() {
            excluded += 1;
            continue;
        }
        used += 1;
        for (s, &k) in p_sum.iter_mut().zip(&pks) {
            *s += precision_at_k(pred, t, k);
        }
        for (s, &k) in r_sum.iter_mut().zip(&ks) {
            *s += recall_at_k(pred, t, k).expect("non-empty truth");
        }
    }
    let mean = |s: f64| if used == 0 { 0.0 } else { s / used as f64 };
    Ok(MetricsReport {
        precision: pks.iter().zip(&p_sum).map(|(&k, &s)| (k, mean(s))).collect(),
        recall: ks.iter().zip(&r_sum).map(|(&k, &s)| (k, mean(s))).collect(),
        instances: used,
        excluded,
    })
}

/// Embeds the test instances in eval mode, retrieves the top `max(k_list)`
/// labels and scores them against `test_pairs`.
pub fn evaluate<S: AsRef<[u32]> + Sync>(
    index: &LabelIndex,
    params: &EncoderParams<f32>,
    instance_ids: &[u64],
    instance_tokens: &[S],
    test_pairs: &[PositivePair],
    k_list: &[usize],
) -> Result<MetricsReport> {
    let ks = validate_k_list(k_list)?;
    check_pairs_resolve(test_pairs, instance_ids, index.label_ids())?;
    let queries = encode_all(params, instance_tokens)?;
    let preds = topk_batch(index, instance_ids, &queries, *ks.last().unwrap())?;
    evaluate_predictions(&preds, &truth_map(test_pairs), &ks)
}

pub fn check_pairs_resolve(pairs: &[PositivePair], instance_ids: &[u64], label_ids: &[u64]) -> Result<()> {
    let inst: HashSet<u64> = instance_ids.iter().copied().collect();
    let labs: HashSet<u64> = label_ids.iter().copied().collect();
    for p in pairs {
        if !inst.contains(&p.instance_id) {
            return Err(Error::Integrity(format!("test pair names unknown instance {}", p.instance_id)));
        }
        if !labs.contains(&p.label_id) {
            return Err(Error::Integrity(format!("test pair names unknown label {}", p.label_id)));
        }
    }
    Ok(())
}

/// Tab-separated `instance_id label_id score rank`, rank starting at 1.
pub fn predictions_tsv(predictions: &[RankedPrediction]) -> String {
    let mut s = String::new();
    for p in predictions {
        for (rank, (label, score)) in p.entries.iter().enumerate() {
            let _ = writeln!(s, "{}\t{}\t{:.6}\t{}", p.instance_id, label, score, rank + 1);
        }
    }
    s
}

/// Reads a predictions file back. Lines of one instance must be contiguous
/// with ranks `1, 2, ..`.
pub fn load_predictions(path: &Path) -> Result<Vec<RankedPrediction>> {
    let text = fsutil::read_to_string(path)?;
    let mut out: Vec<RankedPrediction> = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { path: path.to_path_buf(), line: n + 1, message };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(err(format!("expected 4 tab-separated columns, got {}", cols.len())));
        }
        let int = |s: &str| s.trim().parse::<u64>().map_err(|e| err(format!("bad integer {s:?}: {e}")));
        let inst = int(cols[0])?;
        let label = int(cols[1])?;
        let score: f32 = cols[2].trim().parse().map_err(|e| err(format!("bad score {:?}: {e}", cols[2])))?;
        let rank = int(cols[3])? as usize;
        match out.last_mut() {
            Some(p) if p.instance_id == inst => {
                if rank != p.entries.len() + 1 {
                    return Err(err(format!("rank {rank} out of sequence")));
                }
                p.entries.push((label, score));
                p.k += 1;
            }
            _ => {
                if !seen.insert(inst) {
                    return Err(err(format!("instance {inst} is not contiguous")));
                }
                if rank != 1 {
                    return Err(err(format!("first rank is {rank}, expected 1")));
                }
                out.push(RankedPrediction { instance_id: inst, entries: vec![(label, score)], k: 1 });
            }
        }
    }
    Ok(out)
}

pub fn write_predictions(path: &Path, predictions: &[RankedPrediction]) -> Result<()> {
    fsutil::write_atomic(path, predictions_tsv(predictions).as_bytes())
}
