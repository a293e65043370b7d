//! Bag-of-embeddings sentence encoder: token lookup, mean pooling, dropout on
//! the pooled vector, affine projection. One encoder embeds both instances
//! and labels; relevance is the raw inner product of the outputs.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fsutil;
use crate::numkit::{dropout_mask, DenseMatrix, Real};

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams<T = f32> {
    /// V × d_e token embeddings.
    pub embed: DenseMatrix<T>,
    /// d_e × d projection.
    pub proj: DenseMatrix<T>,
    /// Length d.
    pub bias: Vec<T>,
    pub dropout_rate: f32,
}

/// Train mode carries the dropout mask applied to the pooled vector.
#[derive(Clone, Copy, Debug)]
pub enum Mode<'a, T> {
    Eval,
    Train(&'a [T]),
}

/// Everything the backward pass needs from one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace<T = f32> {
    pub token_ids: Vec<u32>,
    pub pooled: Vec<T>,
    pub mask: Option<Vec<T>>,
    pub output: Vec<T>,
}

/// Accumulated gradients. Embedding rows are stored sparsely; only rows that
/// occurred in some forward pass appear.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderGrads<T = f32> {
    pub embed_rows: BTreeMap<u32, Vec<T>>,
    pub proj: DenseMatrix<T>,
    pub bias: Vec<T>,
}

impl<T: Real> EncoderGrads<T> {
    pub fn zeros_like(params: &EncoderParams<T>) -> Self {
        Self {
            embed_rows: BTreeMap::new(),
            proj: DenseMatrix::zeros(params.proj.rows(), params.proj.cols()),
            bias: vec![T::zero(); params.bias.len()],
        }
    }

    /// Dense V × d_e view of the embedding gradient.
    pub fn embed_dense(&self, vocab_size: usize) -> DenseMatrix<T> {
        let cols = self.proj.rows();
        let mut out = DenseMatrix::zeros(vocab_size, cols);
        for (&r, g) in &self.embed_rows {
            out.row_mut(r as usize).copy_from_slice(g);
        }
        out
    }
}

impl EncoderParams<f32> {
    /// Embeddings uniform in [-0.05, 0.05], projection normal with std
    /// `1/sqrt(d_e)`, zero bias.
    pub fn init<R: Rng + ?Sized>(
        vocab_size: usize,
        token_dim: usize,
        embed_dim: usize,
        dropout_rate: f32,
        rng: &mut R,
    ) -> Result<Self> {
        if vocab_size == 0 || token_dim == 0 || embed_dim == 0 {
            return Err(Error::Parameter("encoder dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::Parameter(format!("dropout rate {dropout_rate} not in [0, 1)")));
        }
        let uni = Uniform::new_inclusive(-0.05f32, 0.05).expect("valid range");
        let embed = (0..vocab_size * token_dim).map(|_| uni.sample(rng)).collect();
        let normal = Normal::new(0.0f32, 1.0 / (token_dim as f32).sqrt()).expect("valid std");
        let proj = (0..token_dim * embed_dim).map(|_| normal.sample(rng)).collect();
        Ok(Self {
            embed: DenseMatrix::from_vec(vocab_size, token_dim, embed)?,
            proj: DenseMatrix::from_vec(token_dim, embed_dim, proj)?,
            bias: vec![0.0; embed_dim],
            dropout_rate,
        })
    }
}

impl<T: Real> EncoderParams<T> {
    pub fn vocab_size(&self) -> usize {
        self.embed.rows()
    }

    pub fn token_dim(&self) -> usize {
        self.embed.cols()
    }

    pub fn embed_dim(&self) -> usize {
        self.proj.cols()
    }

    pub fn cast<U: Real>(&self) -> EncoderParams<U> {
        EncoderParams {
            embed: self.embed.cast(),
            proj: self.proj.cast(),
            bias: self
                .bias
                .iter()
                .map(|v| U::from_f64_lossy(v.to_f64().unwrap_or(f64::NAN)))
                .collect(),
            dropout_rate: self.dropout_rate,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.embed.is_finite() && self.proj.is_finite() && self.bias.iter().all(|v| v.is_finite())
    }

    fn check_shapes(&self) -> Result<()> {
        if self.proj.rows() != self.embed.cols() || self.bias.len() != self.proj.cols() {
            return Err(Error::Dimension(format!(
                "embed {:?}, proj {:?}, bias {}",
                self.embed.shape(),
                self.proj.shape(),
                self.bias.len()
            )));
        }
        Ok(())
    }

    /// Draws one dropout mask for the pooled vector.
    pub fn draw_mask<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<T>> {
        dropout_mask(rng, self.token_dim(), self.dropout_rate)
    }
}

fn mean_pool<T: Real>(params: &EncoderParams<T>, token_ids: &[u32]) -> Result<Vec<T>> {
    let mut pooled = vec![T::zero(); params.token_dim()];
    for &t in token_ids {
        if t as usize >= params.vocab_size() {
            return Err(Error::Range(format!(
                "token id {t} outside vocabulary of {}",
                params.vocab_size()
            )));
        }
        for (p, e) in pooled.iter_mut().zip(params.embed.row(t as usize)) {
            *p += *e;
        }
    }
    if !token_ids.is_empty() {
        let inv = T::one() / T::from_usize(token_ids.len()).unwrap();
        pooled.iter_mut().for_each(|p| *p *= inv);
    }
    Ok(pooled)
}

fn project<T: Real>(params: &EncoderParams<T>, q: &[T]) -> Vec<T> {
    let mut out = params.bias.clone();
    for (k, &qk) in q.iter().enumerate() {
        if qk == T::zero() {
            continue;
        }
        for (o, w) in out.iter_mut().zip(params.proj.row(k)) {
            *o += qk * *w;
        }
    }
    out
}

/// Embeds one token sequence; the trace is returned in train mode only.
pub fn encode<T: Real>(
    params: &EncoderParams<T>,
    token_ids: &[u32],
    mode: Mode<'_, T>,
) -> Result<(Vec<T>, Option<ForwardTrace<T>>)> {
    params.check_shapes()?;
    let pooled = mean_pool(params, token_ids)?;
    match mode {
        Mode::Eval => Ok((project(params, &pooled), None)),
        Mode::Train(mask) => {
            if mask.len() != pooled.len() {
                return Err(Error::Dimension(format!(
                    "dropout mask of length {} for pooled width {}",
                    mask.len(),
                    pooled.len()
                )));
            }
            let q: Vec<T> = pooled.iter().zip(mask).map(|(p, m)| *p * *m).collect();
            let output = project(params, &q);
            let trace = ForwardTrace {
                token_ids: token_ids.to_vec(),
                pooled,
                mask: Some(mask.to_vec()),
                output: output.clone(),
            };
            Ok((output, Some(trace)))
        }
    }
}

/// Convenience wrapper: train-mode forward returning only the trace.
pub fn encode_train<T: Real>(params: &EncoderParams<T>, token_ids: &[u32], mask: &[T]) -> Result<ForwardTrace<T>> {
    let (_, trace) = encode(params, token_ids, Mode::Train(mask))?;
    Ok(trace.expect("train mode yields a trace"))
}

/// Two forward passes over the same input with independent dropout masks.
pub fn encode_pair_dropout<T: Real, R: Rng + ?Sized>(
    params: &EncoderParams<T>,
    token_ids: &[u32],
    rng: &mut R,
) -> Result<(ForwardTrace<T>, ForwardTrace<T>)> {
    if params.dropout_rate == 0.0 {
        log::warn!("dropout rate is 0: both views of the pair are identical");
    }
    let m1 = params.draw_mask(rng)?;
    let m2 = params.draw_mask(rng)?;
    Ok((encode_train(params, token_ids, &m1)?, encode_train(params, token_ids, &m2)?))
}

/// Accumulates the gradient of `grad_outᵀ · output` into `grads`.
pub fn encode_backward_into<T: Real>(
    trace: &ForwardTrace<T>,
    params: &EncoderParams<T>,
    grad_out: &[T],
    grads: &mut EncoderGrads<T>,
) -> Result<()> {
    let (de, d) = params.proj.shape();
    if grad_out.len() != d || trace.pooled.len() != de || grads.proj.shape() != (de, d) {
        return Err(Error::Dimension(format!(
            "backward: grad_out {}, pooled {}, proj {:?}",
            grad_out.len(),
            trace.pooled.len(),
            params.proj.shape()
        )));
    }
    let q: Vec<T> = match &trace.mask {
        Some(m) => trace.pooled.iter().zip(m).map(|(p, m)| *p * *m).collect(),
        None => trace.pooled.clone(),
    };
    for (b, g) in grads.bias.iter_mut().zip(grad_out) {
        *b += *g;
    }
    for (k, &qk) in q.iter().enumerate() {
        for (gw, g) in grads.proj.row_mut(k).iter_mut().zip(grad_out) {
            *gw += qk * *g;
        }
    }
    if trace.token_ids.is_empty() {
        return Ok(());
    }
    // d pooled = (W · g) ⊙ mask, then spread evenly over the tokens
    let inv_n = T::one() / T::from_usize(trace.token_ids.len()).unwrap();
    let mut dpooled: Vec<T> = (0..de)
        .map(|k| crate::numkit::dot(params.proj.row(k), grad_out) * inv_n)
        .collect();
    if let Some(m) = &trace.mask {
        dpooled.iter_mut().zip(m).for_each(|(v, m)| *v *= *m);
    }
    for &t in &trace.token_ids {
        let row = grads.embed_rows.entry(t).or_insert_with(|| vec![T::zero(); de]);
        for (r, v) in row.iter_mut().zip(&dpooled) {
            *r += *v;
        }
    }
    Ok(())
}

pub fn encode_backward<T: Real>(
    trace: &ForwardTrace<T>,
    params: &EncoderParams<T>,
    grad_out: &[T],
) -> Result<EncoderGrads<T>> {
    let mut g = EncoderGrads::zeros_like(params);
    encode_backward_into(trace, params, grad_out, &mut g)?;
    Ok(g)
}

/// Eval-mode embeddings of many sequences, one row each. Rows are computed
/// in parallel and collected in input order.
pub fn encode_all<S: AsRef<[u32]> + Sync>(params: &EncoderParams<f32>, seqs: &[S]) -> Result<DenseMatrix<f32>> {
    let rows: Vec<Vec<f32>> = seqs
        .par_iter()
        .map(|s| encode(params, s.as_ref(), Mode::Eval).map(|(e, _)| e))
        .collect::<Result<_>>()?;
    DenseMatrix::from_rows(&rows, params.embed_dim())
}

const MAGIC: &[u8; 4] = b"MACL";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 * 3 + 4 + 8;

/// Serialized checkpoint: magic, version, V, d_e, d, dropout rate, vocab
/// hash, then embed / proj / bias as little-endian f32.
pub fn checkpoint_bytes(params: &EncoderParams<f32>, vocab_hash: u64) -> Vec<u8> {
    let n = params.embed.as_slice().len() + params.proj.as_slice().len() + params.bias.len();
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * n);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    for dim in [params.vocab_size(), params.token_dim(), params.embed_dim()] {
        buf.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    buf.extend_from_slice(&params.dropout_rate.to_le_bytes());
    buf.extend_from_slice(&vocab_hash.to_le_bytes());
    for v in params
        .embed
        .as_slice()
        .iter()
        .chain(params.proj.as_slice())
        .chain(&params.bias)
    {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn save_checkpoint(params: &EncoderParams<f32>, vocab_hash: u64, path: &Path) -> Result<()> {
    fsutil::write_atomic(path, &checkpoint_bytes(params, vocab_hash))
}

/// Parses a checkpoint, returning the parameters and the recorded vocab hash.
pub fn parse_checkpoint(bytes: &[u8]) -> Result<(EncoderParams<f32>, u64)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let (v, de, d) = (u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize);
    let dropout_rate = f32::from_le_bytes(bytes[20..24].try_into().unwrap());
    let vocab_hash = u64::from_le_bytes(bytes[24..32].try_into().unwrap());
    let n = v
        .checked_mul(de)
        .and_then(|a| de.checked_mul(d).and_then(|b| a.checked_add(b)))
        .and_then(|a| a.checked_add(d))
        .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != 4 * n {
        return Err(Error::Format(format!(
            "expected {} parameter bytes, found {}",
            4 * n,
            body.len()
        )));
    }
    let mut floats = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()));
    let embed: Vec<f32> = floats.by_ref().take(v * de).collect();
    let proj: Vec<f32> = floats.by_ref().take(de * d).collect();
    let bias: Vec<f32> = floats.collect();
    let params = EncoderParams {
        embed: DenseMatrix::from_vec(v, de, embed)?,
        proj: DenseMatrix::from_vec(de, d, proj)?,
        bias,
        dropout_rate,
    };
    Ok((params, vocab_hash))
}

/// Loads a checkpoint, refusing it when `expected_vocab_hash` is given and differs.
pub fn load_checkpoint(path: &Path, expected_vocab_hash: Option<u64>) -> Result<EncoderParams<f32>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (params, hash) = parse_checkpoint(&bytes)?;
    if let Some(want) = expected_vocab_hash {
        if want != hash {
            return Err(Error::Compatibility(format!(
                "{} was saved with vocabulary {hash:016x}, current vocabulary is {want:016x}",
                path.display()
            )));
        }
    }
    Ok(params)
}
