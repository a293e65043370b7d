//! Reference implementations written directly from the definitions, with no
//! shared code paths beyond plain data types.

#![allow(dead_code)]

use std::collections::{HashMap, HashSet};
use std::path::PathBuf;

use maclr::numkit::DenseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn hand_corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/hand5")
}

pub type Mat = Vec<Vec<f64>>;

pub fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Mat {
    (0..rows).map(|_| (0..cols).map(|_| rng.random_range(-scale..scale)).collect()).collect()
}

pub fn to_dense(m: &Mat) -> DenseMatrix<f64> {
    DenseMatrix::from_rows(m, m.first().map_or(0, Vec::len)).unwrap()
}

pub fn from_dense(m: &DenseMatrix<f64>) -> Mat {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn logsumexp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `Σ_i −log( exp(x_i·y_i) / Σ_j exp(x_i·y_j) )`.
pub fn contrastive(x: &Mat, y: &Mat) -> f64 {
    (0..x.len())
        .map(|i| {
            let s: Vec<f64> = y.iter().map(|yj| dotv(&x[i], yj)).collect();
            logsumexp(&s) - s[i]
        })
        .sum()
}

/// `Σ_i (1/|P(i)|) Σ_{p∈P(i)} −log( exp(x_i·y_p) / Σ_j exp(x_i·y_j) )`.
pub fn cluster(x: &Mat, y: &Mat, positives: &[Vec<usize>]) -> f64 {
    (0..x.len())
        .map(|i| {
            let s: Vec<f64> = y.iter().map(|yj| dotv(&x[i], yj)).collect();
            let lse = logsumexp(&s);
            positives[i].iter().map(|&p| lse - s[p]).sum::<f64>() / positives[i].len() as f64
        })
        .sum()
}

/// `Σ_i −log( exp(h_i·h⁺_i) / (exp(h_i·h⁺_i) + Σ_m exp(h_i·z_m)) )`.
pub fn label(h: &Mat, h_plus: &Mat, neg: &Mat) -> f64 {
    (0..h.len())
        .map(|i| {
            let pos = dotv(&h[i], &h_plus[i]);
            let mut s = vec![pos];
            s.extend(neg.iter().map(|z| dotv(&h[i], z)));
            logsumexp(&s) - pos
        })
        .sum()
}

/// Central differences of `f` at every coordinate of `at`.
pub fn numeric_grad(at: &[f64], step: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = at.to_vec();
    (0..at.len())
        .map(|k| {
            let orig = p[k];
            p[k] = orig + step;
            let up = f(&p);
            p[k] = orig - step;
            let down = f(&p);
            p[k] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

pub fn flatten(m: &Mat) -> Vec<f64> {
    m.iter().flatten().copied().collect()
}

pub fn unflatten(v: &[f64], cols: usize) -> Mat {
    v.chunks(cols).map(<[f64]>::to_vec).collect()
}

/// Random positive sets: row `i` always holds `i` plus a few random columns.
pub fn random_positives(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<usize>> {
    (0..n)
        .map(|i| {
            let mut p: Vec<usize> = (0..n).filter(|&j| j != i && rng.random_bool(0.3)).collect();
            p.push(i);
            p.sort_unstable();
            p
        })
        .collect()
}

/// Scores every label, sorts by score then id, keeps `k`.
pub fn brute_topk(scores: &[(u64, f32)], k: usize) -> Vec<u64> {
    let mut all = scores.to_vec();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all.into_iter().take(k).map(|(id, _)| id).collect()
}

pub fn hits(top: &[u64], truth: &HashSet<u64>) -> usize {
    top.iter().filter(|l| truth.contains(l)).count()
}

/// Lowercased whitespace tokens with surrounding ASCII punctuation removed.
pub fn words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| c.is_ascii_punctuation()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Smoothed idf over `docs`: `ln((1 + N) / (1 + df)) + 1`.
pub fn idf(docs: &[Vec<String>]) -> HashMap<String, f64> {
    let mut df: HashMap<String, usize> = HashMap::new();
    for d in docs {
        for w in d.iter().collect::<HashSet<_>>() {
            *df.entry(w.clone()).or_default() += 1;
        }
    }
    let n = docs.len() as f64;
    df.into_iter().map(|(w, c)| (w, ((1.0 + n) / (1.0 + c as f64)).ln() + 1.0)).collect()
}

/// Raw counts times idf, L2-normalized; unknown words dropped.
pub fn tfidf(doc: &[String], idf: &HashMap<String, f64>) -> HashMap<String, f64> {
    let mut v: HashMap<String, f64> = HashMap::new();
    for w in doc {
        if let Some(x) = idf.get(w) {
            *v.entry(w.clone()).or_default() += x;
        }
    }
    let norm = v.values().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.values_mut().for_each(|x| *x /= norm);
    }
    v
}

pub fn sparse_dot(a: &HashMap<String, f64>, b: &HashMap<String, f64>) -> f64 {
    a.iter().filter_map(|(w, x)| b.get(w).map(|y| x * y)).sum()
}

/// Eval-mode encoder forward in f64: mean of token rows, projection, bias.
pub fn encode(embed: &Mat, proj: &Mat, bias: &[f64], ids: &[u32]) -> Vec<f64> {
    let de = proj.len();
    let mut pooled = vec![0.0; de];
    for &t in ids {
        for (p, e) in pooled.iter_mut().zip(&embed[t as usize]) {
            *p += e;
        }
    }
    if !ids.is_empty() {
        pooled.iter_mut().for_each(|p| *p /= ids.len() as f64);
    }
    (0..bias.len())
        .map(|j| bias[j] + (0..de).map(|k| pooled[k] * proj[k][j]).sum::<f64>())
        .collect()
}
