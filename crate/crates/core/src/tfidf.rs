//! Sparse TF-IDF vectors over vocabulary ids and exact sparse top-k.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil;

/// Sorted-index sparse vector with unit L2 norm (or empty).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseVector {
    pub indices: Vec<u32>,
    pub values: Vec<f32>,
}

impl SparseVector {
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt()
    }

    /// Merge-join dot product, accumulated in f64.
    pub fn dot(&self, other: &SparseVector) -> f32 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0f64);
        while i < self.indices.len() && j < other.indices.len() {
            match self.indices[i].cmp(&other.indices[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.values[i] as f64 * other.values[j] as f64;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc as f32
    }
}

/// Smoothed inverse document frequency: `ln((1 + n) / (1 + df)) + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct IdfTable {
    idf: HashMap<u32, f64>,
    n_docs: usize,
}

impl IdfTable {
    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    /// `None` for tokens that appeared in no fitted document.
    pub fn idf(&self, token: u32) -> Option<f64> {
        self.idf.get(&token).copied()
    }

    pub fn len(&self) -> usize {
        self.idf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idf.is_empty()
    }
}

pub fn fit_idf<D: AsRef<[u32]>>(documents: &[D]) -> Result<IdfTable> {
    if documents.is_empty() {
        return Err(Error::Precondition("fit_idf needs at least one document".into()));
    }
    let mut df: HashMap<u32, usize> = HashMap::new();
    for doc in documents {
        let uniq: HashSet<u32> = doc.as_ref().iter().copied().collect();
        for t in uniq {
            *df.entry(t).or_default() += 1;
        }
    }
    let n = documents.len() as f64;
    let idf = df
        .into_iter()
        .map(|(t, d)| (t, ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0))
        .collect();
    Ok(IdfTable {
        idf,
        n_docs: documents.len(),
    })
}

/// Raw counts times idf, L2-normalized. Tokens unknown to `idf` are dropped.
pub fn vectorize(tokens: &[u32], idf: &IdfTable) -> SparseVector {
    let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
    for &t in tokens {
        if idf.idf.contains_key(&t) {
            *counts.entry(t).or_default() += 1;
        }
    }
    let weighted: Vec<(u32, f64)> = counts
        .into_iter()
        .map(|(t, c)| (t, c as f64 * idf.idf[&t]))
        .collect();
    let norm = weighted.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    if norm == 0.0 {
        return SparseVector::default();
    }
    SparseVector {
        indices: weighted.iter().map(|(t, _)| *t).collect(),
        values: weighted.iter().map(|(_, w)| (w / norm) as f32).collect(),
    }
}

/// Exhaustive scoring of `index`; returns up to `k` `(position, score)`
/// entries by descending score, ties to the smaller position.
pub fn sparse_topk(query: &SparseVector, index: &[SparseVector], k: usize) -> Result<Vec<(usize, f32)>> {
    if k == 0 {
        return Err(Error::Parameter("k must be at least 1".into()));
    }
    let mut scored: Vec<(usize, f32)> = index.iter().enumerate().map(|(i, v)| (i, query.dot(v))).collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}

/// Text dump: `doc_id token_id:value ...`, six decimals.
pub fn dump_vectors(path: &Path, vectors: &[(u64, SparseVector)]) -> Result<()> {
    let mut s = String::new();
    for (id, v) in vectors {
        let _ = write!(s, "{id}");
        for (t, x) in v.indices.iter().zip(&v.values) {
            let _ = write!(s, " {t}:{x:.6}");
        }
        s.push('\n');
    }
    fsutil::write_atomic(path, s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn idf_plug_in_values() {
        let t = fit_idf(&[vec![1u32]]).unwrap();
        assert!((t.idf(1).unwrap() - 1.0).abs() < 1e-12);
        let t = fit_idf(&[vec![1u32, 2], vec![1], vec![1, 1]]).unwrap();
        assert!((t.idf(1).unwrap() - 1.0).abs() < 1e-12);
        assert!((t.idf(2).unwrap() - 1.693_147_180_559_945).abs() < 1e-12);
        assert_eq!(t.idf(9), None);
        assert!(matches!(fit_idf::<Vec<u32>>(&[]), Err(Error::Precondition(_))));
    }

    fn table(pairs: &[(u32, f64)]) -> IdfTable {
        IdfTable {
            idf: pairs.iter().copied().collect(),
            n_docs: 1,
        }
    }

    #[test]
    fn vectorize_examples() {
        let t = table(&[(1, 1.0), (2, 2.0)]);
        assert!(vectorize(&[], &t).is_empty());
        assert!(vectorize(&[7, 8], &t).is_empty());
        let v = vectorize(&[1, 1], &t);
        assert_eq!((v.indices.as_slice(), v.values.as_slice()), (&[1u32][..], &[1.0f32][..]));
        let v = vectorize(&[2, 1], &t);
        let s5 = 5f64.sqrt();
        assert_eq!(v.indices, [1, 2]);
        assert!((v.values[0] as f64 - 1.0 / s5).abs() < 1e-7);
        assert!((v.values[1] as f64 - 2.0 / s5).abs() < 1e-7);
    }

    #[test]
    fn self_match_and_orthogonal_ties() {
        let t = table(&(0..20).map(|i| (i, 1.0)).collect::<Vec<_>>());
        let index: Vec<SparseVector> = (0..10).map(|i| vectorize(&[i], &t)).collect();
        let hits = sparse_topk(&vectorize(&[7], &t), &index, 3).unwrap();
        assert_eq!(hits[0], (7, 1.0));
        let hits = sparse_topk(&vectorize(&[15], &t), &index, 4).unwrap();
        assert_eq!(hits, vec![(0, 0.0), (1, 0.0), (2, 0.0), (3, 0.0)]);
        assert_eq!(sparse_topk(&vectorize(&[1], &t), &index[..2], 5).unwrap().len(), 2);
    }

    fn random_docs(rng: &mut ChaCha8Rng, n: usize, vocab: u32) -> Vec<Vec<u32>> {
        (0..n)
            .map(|_| (0..rng.random_range(0..12)).map(|_| rng.random_range(0..vocab)).collect())
            .collect()
    }

    #[test]
    fn topk_matches_brute_force_and_norms_are_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for &(n, vocab) in &[(20usize, 15u32), (1000, 60)] {
            let docs = random_docs(&mut rng, n, vocab);
            let idf = fit_idf(&docs).unwrap();
            let vecs: Vec<SparseVector> = docs.iter().map(|d| vectorize(d, &idf)).collect();
            for v in &vecs {
                assert!(v.is_empty() || (v.norm() - 1.0).abs() < 1e-6);
                assert!(v.indices.windows(2).all(|w| w[0] < w[1]));
            }
            for q in vecs.iter().take(25) {
                let got = sparse_topk(q, &vecs, 5).unwrap();
                // oracle: dense dot products, full sort
                let mut dense_q = vec![0f64; vocab as usize];
                for (t, x) in q.indices.iter().zip(&q.values) {
                    dense_q[*t as usize] = *x as f64;
                }
                let mut all: Vec<(usize, f32)> = vecs
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let s: f64 = v.indices.iter().zip(&v.values).map(|(t, x)| dense_q[*t as usize] * *x as f64).sum();
                        (i, s as f32)
                    })
                    .collect();
                all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
                assert_eq!(got, all[..5].to_vec());
                assert!(got.iter().all(|&(_, s)| (0.0..=1.0 + 1e-6).contains(&s)));
                assert!(got.windows(2).all(|w| w[0].1 >= w[1].1));
            }
        }
    }

    #[test]
    fn dump_format() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.txt");
        let v = SparseVector { indices: vec![2, 5], values: vec![0.6, 0.8] };
        dump_vectors(&p, &[(4, v), (9, SparseVector::default())]).unwrap();
        assert_eq!(std::fs::read_to_string(p).unwrap(), "4 2:0.600000 5:0.800000\n9\n");
    }
}
