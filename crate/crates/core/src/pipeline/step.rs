use rand::Rng;

use crate::encoder::{encode_backward_into, encode_train, EncoderGrads, EncoderParams, ForwardTrace};
use crate::error::Result;
use crate::losses;
use crate::numkit::{DenseMatrix, Real};

/// Token sequences and positive sets for one Stage I step.
#[derive(Clone, Debug)]
pub struct Stage1Batch<'a> {
    pub contexts: Vec<&'a [u32]>,
    pub titles: Vec<&'a [u32]>,
    /// The M sampled real labels.
    pub negatives: Vec<&'a [u32]>,
    /// In-batch positive columns per row.
    pub positives: Vec<Vec<usize>>,
}

/// One dropout mask per forward pass. Contexts are encoded twice; the first
/// pass feeds both loss terms, the second is the label-regularization twin.
#[derive(Clone, Debug)]
pub struct Stage1Masks<T> {
    pub context: Vec<Vec<T>>,
    pub context_plus: Vec<Vec<T>>,
    pub titles: Vec<Vec<T>>,
    pub negatives: Vec<Vec<T>>,
}

impl<T: Real> Stage1Masks<T> {
    pub fn draw<R: Rng + ?Sized>(params: &EncoderParams<T>, batch: &Stage1Batch<'_>, rng: &mut R) -> Result<Self> {
        let mut draw_n = |n: usize| -> Result<Vec<Vec<T>>> { (0..n).map(|_| params.draw_mask(rng)).collect() };
        let n = batch.contexts.len();
        Ok(Self {
            context: draw_n(n)?,
            context_plus: draw_n(n)?,
            titles: draw_n(n)?,
            negatives: draw_n(batch.negatives.len())?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stage1Loss<T> {
    pub total: T,
    pub cluster: T,
    pub label: T,
}

fn forward<T: Real>(
    params: &EncoderParams<T>,
    seqs: &[&[u32]],
    masks: &[Vec<T>],
) -> Result<(DenseMatrix<T>, Vec<ForwardTrace<T>>)> {
    let traces = seqs
        .iter()
        .zip(masks)
        .map(|(s, m)| encode_train(params, s, m))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<&[T]> = traces.iter().map(|t| t.output.as_slice()).collect();
    Ok((DenseMatrix::from_rows(&rows, params.embed_dim())?, traces))
}

fn backward<T: Real>(
    params: &EncoderParams<T>,
    traces: &[ForwardTrace<T>],
    grad: &DenseMatrix<T>,
    acc: &mut EncoderGrads<T>,
) -> Result<()> {
    for (i, t) in traces.iter().enumerate() {
        encode_backward_into(t, params, grad.row(i), acc)?;
    }
    Ok(())
}

/// Stage I objective (cluster loss + label regularization) for one batch
/// with fixed dropout masks, and its gradient with respect to every encoder
/// parameter.
pub fn stage1_step<T: Real>(
    params: &EncoderParams<T>,
    batch: &Stage1Batch<'_>,
    masks: &Stage1Masks<T>,
) -> Result<(Stage1Loss<T>, EncoderGrads<T>)> {
    let (h, h_tr) = forward(params, &batch.contexts, &masks.context)?;
    let (h_plus, hp_tr) = forward(params, &batch.contexts, &masks.context_plus)?;
    let (y, y_tr) = forward(params, &batch.titles, &masks.titles)?;
    let (neg, neg_tr) = forward(params, &batch.negatives, &masks.negatives)?;

    let cl = losses::cluster(&h, &y, &batch.positives)?;
    let lb = losses::label_regularization(&h, &h_plus, &neg)?;

    let mut grad_h = cl.grad_x.clone();
    grad_h.add_assign(&lb.grad_h)?;
    let mut grads = EncoderGrads::zeros_like(params);
    backward(params, &h_tr, &grad_h, &mut grads)?;
    backward(params, &hp_tr, &lb.grad_h_plus, &mut grads)?;
    backward(params, &y_tr, &cl.grad_y, &mut grads)?;
    backward(params, &neg_tr, &lb.grad_neg, &mut grads)?;
    let loss = Stage1Loss {
        total: losses::stage1_objective(&cl, &lb),
        cluster: cl.loss,
        label: lb.loss,
    };
    Ok((loss, grads))
}

/// (instance, label) batch for the pair losses of Stage II and fine-tuning.
#[derive(Clone, Debug)]
pub struct PairBatch<'a> {
    pub instances: Vec<&'a [u32]>,
    pub labels: Vec<&'a [u32]>,
    /// `None`: plain in-batch contrastive loss (diagonal positives).
    pub positives: Option<Vec<Vec<usize>>>,
}

pub fn pair_step<T: Real>(
    params: &EncoderParams<T>,
    batch: &PairBatch<'_>,
    instance_masks: &[Vec<T>],
    label_masks: &[Vec<T>],
) -> Result<(T, EncoderGrads<T>)> {
    let (x, x_tr) = forward(params, &batch.instances, instance_masks)?;
    let (y, y_tr) = forward(params, &batch.labels, label_masks)?;
    let out = match &batch.positives {
        Some(p) => losses::cluster(&x, &y, p)?,
        None => losses::contrastive(&x, &y)?,
    };
    let mut grads = EncoderGrads::zeros_like(params);
    backward(params, &x_tr, &out.grad_x, &mut grads)?;
    backward(params, &y_tr, &out.grad_y, &mut grads)?;
    Ok((out.loss, grads))
}

pub(crate) fn draw_masks<T: Real, R: Rng + ?Sized>(
    params: &EncoderParams<T>,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Vec<T>>> {
    (0..n).map(|_| params.draw_mask(rng)).collect()
}
