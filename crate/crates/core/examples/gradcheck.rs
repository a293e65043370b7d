//! Analytic gradients of the Stage I objective against central differences,
//! in f64, through the encoder.

use maclr::encoder::EncoderParams;
use maclr::pipeline::{stage1_step, Stage1Batch, Stage1Masks};
use rand_chacha::rand_core::SeedableRng;

fn main() -> maclr::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let params: EncoderParams<f64> = EncoderParams::<f32>::init(12, 6, 4, 0.2, &mut rng)?.cast();
    let docs: [&[u32]; 6] = [&[1, 2, 3], &[4, 5], &[6, 7, 1], &[8], &[9, 10], &[11, 2]];
    let batch = Stage1Batch {
        contexts: docs[..3].to_vec(),
        titles: docs[3..].to_vec(),
        negatives: vec![&[3, 4], &[7]],
        positives: vec![vec![0, 2], vec![1], vec![0, 2]],
    };
    let masks = Stage1Masks::draw(&params, &batch, &mut rng)?;
    let (loss, grads) = stage1_step(&params, &batch, &masks)?;
    println!("loss {:.6} (cluster {:.6}, label {:.6})", loss.total, loss.cluster, loss.label);

    let h = 1e-3;
    let mut worst = 0.0f64;
    for (i, analytic) in grads.proj.as_slice().iter().enumerate() {
        let at = |delta: f64| {
            let mut p = params.clone();
            p.proj.as_mut_slice()[i] += delta;
            stage1_step(&p, &batch, &masks).unwrap().0.total
        };
        let numeric = (at(h) - at(-h)) / (2.0 * h);
        worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8));
    }
    println!("projection: worst elementwise relative error {worst:.2e}");
    Ok(())
}
