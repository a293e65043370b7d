//! In-batch softmax losses with analytic gradients.
//!
//! All losses are sums over the batch (no mean, no temperature). Each one is
//! computed at the logit level first (`*_from_logits`) and then chained
//! through the inner products that produced the logits.

use crate::error::{Error, Result};
use crate::numkit::{dot, DenseMatrix, Real};

/// Loss over an N×N logit matrix `X · Yᵀ` with gradients for both sides.
#[derive(Clone, Debug)]
pub struct PairLoss<T = f32> {
    pub loss: T,
    pub grad_x: DenseMatrix<T>,
    pub grad_y: DenseMatrix<T>,
}

#[derive(Clone, Debug)]
pub struct LabelLoss<T = f32> {
    pub loss: T,
    pub grad_h: DenseMatrix<T>,
    pub grad_h_plus: DenseMatrix<T>,
    pub grad_neg: DenseMatrix<T>,
}

fn check_finite<T: Real>(logits: &[T]) -> Result<()> {
    match logits.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Numeric(format!("non-finite logit at flat index {i}"))),
        None => Ok(()),
    }
}

/// Returns `log Σ exp(row)` and writes `softmax(row)` into `probs`.
fn log_softmax_row<T: Real>(row: &[T], probs: &mut [T]) -> T {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for (p, &v) in probs.iter_mut().zip(row) {
        *p = (v - max).exp();
        sum += *p;
    }
    for p in probs.iter_mut() {
        *p = *p / sum;
    }
    max + sum.ln()
}

fn check_pair_batch<T: Real>(x: &DenseMatrix<T>, y: &DenseMatrix<T>) -> Result<()> {
    if x.shape() != y.shape() {
        return Err(Error::Dimension(format!(
            "context batch {:?} vs title batch {:?}",
            x.shape(),
            y.shape()
        )));
    }
    if x.rows() == 1 {
        log::warn!("batch of one pair: in-batch softmax loss is identically zero");
    }
    Ok(())
}

fn check_positives(positives: &[Vec<usize>], n: usize) -> Result<()> {
    if positives.len() != n {
        return Err(Error::Dimension(format!("{} positive sets for {n} rows", positives.len())));
    }
    for (i, p) in positives.iter().enumerate() {
        if p.is_empty() {
            return Err(Error::Precondition(format!("empty positive set for row {i}")));
        }
        if let Some(&bad) = p.iter().find(|&&j| j >= n) {
            return Err(Error::Precondition(format!("positive index {bad} out of range for row {i}")));
        }
    }
    Ok(())
}

/// `Σ_i −log softmax(S_i)_i` over a square logit matrix; returns `(loss, dL/dS)`.
pub fn contrastive_from_logits<T: Real>(logits: &DenseMatrix<T>) -> Result<(T, DenseMatrix<T>)> {
    let n = logits.rows();
    if logits.cols() != n {
        return Err(Error::Dimension(format!("logits {:?} not square", logits.shape())));
    }
    check_finite(logits.as_slice())?;
    let mut grad = DenseMatrix::zeros(n, n);
    let mut loss = T::zero();
    for i in 0..n {
        let row = logits.row(i);
        let lse = log_softmax_row(row, grad.row_mut(i));
        loss += lse - row[i];
        let g = grad.row_mut(i);
        g[i] -= T::one();
    }
    Ok((loss, grad))
}

/// Supervised-contrastive form: row `i` averages `−log softmax(S_i)_p` over
/// `p ∈ positives[i]`.
pub fn cluster_from_logits<T: Real>(logits: &DenseMatrix<T>, positives: &[Vec<usize>]) -> Result<(T, DenseMatrix<T>)> {
    let n = logits.rows();
    if logits.cols() != n {
        return Err(Error::Dimension(format!("logits {:?} not square", logits.shape())));
    }
    check_positives(positives, n)?;
    check_finite(logits.as_slice())?;
    let mut grad = DenseMatrix::zeros(n, n);
    let mut loss = T::zero();
    for (i, pos) in positives.iter().enumerate() {
        let row = logits.row(i);
        let lse = log_softmax_row(row, grad.row_mut(i));
        let w = T::one() / T::from_usize(pos.len()).unwrap();
        let g = grad.row_mut(i);
        for &p in pos {
            loss += w * (lse - row[p]);
            g[p] -= w;
        }
    }
    Ok((loss, grad))
}

/// Label regularization at the logit level: row `i` is a softmax over
/// `[positive[i], negatives[i, ..]]` with the positive as target.
/// Returns `(loss, dL/dpositive, dL/dnegatives)`.
pub fn label_from_logits<T: Real>(positive: &[T], negatives: &DenseMatrix<T>) -> Result<(T, Vec<T>, DenseMatrix<T>)> {
    let n = positive.len();
    if negatives.rows() != n {
        return Err(Error::Dimension(format!(
            "{n} positive logits vs {} negative rows",
            negatives.rows()
        )));
    }
    if negatives.cols() == 0 {
        return Err(Error::Precondition("label regularization needs M >= 1 negatives".into()));
    }
    check_finite(positive)?;
    check_finite(negatives.as_slice())?;
    let m = negatives.cols();
    let mut loss = T::zero();
    let mut g_pos = vec![T::zero(); n];
    let mut g_neg = DenseMatrix::zeros(n, m);
    let mut row = vec![T::zero(); m + 1];
    let mut probs = vec![T::zero(); m + 1];
    for i in 0..n {
        row[0] = positive[i];
        row[1..].copy_from_slice(negatives.row(i));
        let lse = log_softmax_row(&row, &mut probs);
        loss += lse - positive[i];
        g_pos[i] = probs[0] - T::one();
        g_neg.row_mut(i).copy_from_slice(&probs[1..]);
    }
    Ok((loss, g_pos, g_neg))
}

/// Chains `dL/dS` for `S = X · Yᵀ` back to `X` and `Y`.
fn chain_pair<T: Real>(grad_s: &DenseMatrix<T>, x: &DenseMatrix<T>, y: &DenseMatrix<T>) -> Result<(DenseMatrix<T>, DenseMatrix<T>)> {
    let gx = grad_s.matmul(y)?;
    let gy = grad_s.transpose().matmul(x)?;
    Ok((gx, gy))
}

/// In-batch contrastive loss over pairs `(x_i, y_i)`: the titles of the
/// other pairs in the batch are the negatives.
pub fn contrastive<T: Real>(x: &DenseMatrix<T>, y: &DenseMatrix<T>) -> Result<PairLoss<T>> {
    check_pair_batch(x, y)?;
    let logits = x.matmul_transposed(y)?;
    let (loss, gs) = contrastive_from_logits(&logits)?;
    let (grad_x, grad_y) = chain_pair(&gs, x, y)?;
    Ok(PairLoss { loss, grad_x, grad_y })
}

/// Cluster-supervised contrastive loss; `positives[i]` lists the batch
/// columns counted as positives for row `i`.
pub fn cluster<T: Real>(x: &DenseMatrix<T>, y: &DenseMatrix<T>, positives: &[Vec<usize>]) -> Result<PairLoss<T>> {
    check_pair_batch(x, y)?;
    let logits = x.matmul_transposed(y)?;
    let (loss, gs) = cluster_from_logits(&logits, positives)?;
    let (grad_x, grad_y) = chain_pair(&gs, x, y)?;
    Ok(PairLoss { loss, grad_x, grad_y })
}

/// Label regularization: `h_i` against its dropout twin `h⁺_i` (positive)
/// and M sampled label embeddings (negatives).
pub fn label_regularization<T: Real>(
    h: &DenseMatrix<T>,
    h_plus: &DenseMatrix<T>,
    negatives: &DenseMatrix<T>,
) -> Result<LabelLoss<T>> {
    if h.shape() != h_plus.shape() || negatives.cols() != h.cols() {
        return Err(Error::Dimension(format!(
            "h {:?}, h+ {:?}, negatives {:?}",
            h.shape(),
            h_plus.shape(),
            negatives.shape()
        )));
    }
    let pos: Vec<T> = (0..h.rows()).map(|i| dot(h.row(i), h_plus.row(i))).collect();
    let neg_logits = h.matmul_transposed(negatives)?;
    let (loss, g_pos, g_neg) = label_from_logits(&pos, &neg_logits)?;

    let mut grad_h = g_neg.matmul(negatives)?;
    let mut grad_h_plus = DenseMatrix::zeros(h.rows(), h.cols());
    for i in 0..h.rows() {
        let gp = g_pos[i];
        let (hp, hi) = (h_plus.row(i).to_vec(), h.row(i).to_vec());
        for (g, v) in grad_h.row_mut(i).iter_mut().zip(&hp) {
            *g += gp * *v;
        }
        for (g, v) in grad_h_plus.row_mut(i).iter_mut().zip(&hi) {
            *g = gp * *v;
        }
    }
    let grad_neg = g_neg.transpose().matmul(h)?;
    Ok(LabelLoss {
        loss,
        grad_h,
        grad_h_plus,
        grad_neg,
    })
}

/// Stage I objective: unweighted sum of the two parts.
pub fn stage1_objective<T: Real>(cluster_part: &PairLoss<T>, label_part: &LabelLoss<T>) -> T {
    cluster_part.loss + label_part.loss
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DenseMatrix<f64> {
        let data = (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect();
        DenseMatrix::from_vec(r, c, data).unwrap()
    }

    #[test]
    fn uniform_logits() {
        let z = DenseMatrix::<f64>::zeros(2, 3);
        let l = contrastive(&z, &z).unwrap();
        assert!((l.loss - 2.0 * 2f64.ln()).abs() < 1e-12);
        let l = cluster(&z, &z, &[vec![0, 1], vec![0, 1]]).unwrap();
        assert!((l.loss - 2.0 * 2f64.ln()).abs() < 1e-12);
        let neg = DenseMatrix::<f64>::zeros(4, 3);
        let l = label_regularization(&z, &z, &neg).unwrap();
        assert!((l.loss - 2.0 * 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn saturated_logits() {
        let mut s = DenseMatrix::<f64>::zeros(3, 3);
        for i in 0..3 {
            s.set(i, i, 40.0);
        }
        assert!(contrastive_from_logits(&s).unwrap().0 < 1e-10);
        let neg = DenseMatrix::<f64>::zeros(3, 5);
        assert!(label_from_logits(&[40.0; 3], &neg).unwrap().0 < 1e-10);
    }

    fn direct_cluster(x: &DenseMatrix<f64>, y: &DenseMatrix<f64>, p: &[Vec<usize>]) -> f64 {
        let n = x.rows();
        let mut total = 0.0;
        for i in 0..n {
            let s: Vec<f64> = (0..n).map(|j| dot(x.row(i), y.row(j))).collect();
            let denom: f64 = s.iter().map(|v| v.exp()).sum();
            let inner: f64 = p[i].iter().map(|&q| (s[q].exp() / denom).ln()).sum();
            total += -inner / p[i].len() as f64;
        }
        total
    }

    #[test]
    fn cluster_matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let x = random(&mut rng, 6, 4);
            let y = random(&mut rng, 6, 4);
            let labels: Vec<u8> = (0..6).map(|_| rng.random_range(0..3)).collect();
            let p = crate::clustering::positives_by_key(&labels);
            let l = cluster(&x, &y, &p).unwrap();
            assert!((l.loss - direct_cluster(&x, &y, &p)).abs() < 1e-6);
        }
    }

    #[test]
    fn singleton_cluster_is_contrastive() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random(&mut rng, 5, 3);
        let y = random(&mut rng, 5, 3);
        let single: Vec<Vec<usize>> = (0..5).map(|i| vec![i]).collect();
        let a = contrastive(&x, &y).unwrap();
        let b = cluster(&x, &y, &single).unwrap();
        assert!((a.loss - b.loss).abs() < 1e-12);
        assert_eq!(a.grad_x.as_slice().len(), b.grad_x.as_slice().len());
        for (u, v) in a.grad_y.as_slice().iter().zip(b.grad_y.as_slice()) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn shift_invariance_at_the_logit_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = random(&mut rng, 5, 5);
        let p = crate::clustering::positives_by_key(&[0, 1, 0, 2, 1]);
        let mut shifted = s.clone();
        for i in 0..5 {
            let c = rng.random_range(-30.0..30.0);
            shifted.row_mut(i).iter_mut().for_each(|v| *v += c);
        }
        let close = |a: f64, b: f64| (a - b).abs() < 1e-6;
        assert!(close(contrastive_from_logits(&s).unwrap().0, contrastive_from_logits(&shifted).unwrap().0));
        assert!(close(cluster_from_logits(&s, &p).unwrap().0, cluster_from_logits(&shifted, &p).unwrap().0));
        let pos: Vec<f64> = (0..5).map(|i| s.get(i, i)).collect();
        let neg = random(&mut rng, 5, 3);
        let base = label_from_logits(&pos, &neg).unwrap().0;
        let pos2: Vec<f64> = pos.iter().map(|v| v + 12.5).collect();
        let mut neg2 = neg.clone();
        neg2.as_mut_slice().iter_mut().for_each(|v| *v += 12.5);
        assert!(close(base, label_from_logits(&pos2, &neg2).unwrap().0));
    }

    #[test]
    fn precondition_and_numeric_errors() {
        let z = DenseMatrix::<f64>::zeros(2, 3);
        assert!(matches!(cluster(&z, &z, &[vec![0], vec![]]), Err(Error::Precondition(_))));
        assert!(matches!(cluster(&z, &z, &[vec![0], vec![2]]), Err(Error::Precondition(_))));
        let mut s = DenseMatrix::<f64>::zeros(2, 2);
        s.set(0, 1, f64::INFINITY);
        assert!(matches!(contrastive_from_logits(&s), Err(Error::Numeric(_))));
        let y = DenseMatrix::<f64>::zeros(3, 3);
        assert!(matches!(contrastive(&z, &y), Err(Error::Dimension(_))));
        let empty = DenseMatrix::<f64>::zeros(0, 3);
        assert!(matches!(label_regularization(&z, &z, &empty), Err(Error::Precondition(_))));
    }

    #[test]
    fn losses_are_non_negative() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let x = random(&mut rng, 4, 3);
            let y = random(&mut rng, 4, 3);
            let n = random(&mut rng, 2, 3);
            assert!(contrastive(&x, &y).unwrap().loss >= 0.0);
            assert!(label_regularization(&x, &y, &n).unwrap().loss >= 0.0);
            let p = crate::clustering::positives_by_key(&[1, 1, 2, 1]);
            assert!(cluster(&x, &y, &p).unwrap().loss >= 0.0);
        }
    }
}
