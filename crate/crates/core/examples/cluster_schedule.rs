//! The coarse-to-fine cluster schedule and one k-means pass at each granularity.

use maclr::clustering::{kmeans, schedule_k, ClusterMode, ScheduleConfig};
use maclr::numkit::DenseMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;

fn main() -> maclr::Result<()> {
    let full = ScheduleConfig { k0: 2048, t_k: 10_000, t_update: 5_000, t_total: 100_000 };
    let mut prev = None;
    for step in 1..=full.t_total {
        let k = schedule_k(&full, step, usize::MAX);
        if prev != Some(k) {
            println!("step {step:>6}: K = {k}");
            prev = Some(k);
        }
    }

    // 400 points on the unit circle around 8 directions
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let rows: Vec<[f32; 2]> = (0..400)
        .map(|i| {
            let a = (i % 8) as f32 * std::f32::consts::TAU / 8.0 + rng.random_range(-0.1..0.1);
            [a.cos(), a.sin()]
        })
        .collect();
    let mut data = DenseMatrix::from_rows(&rows, 2)?;
    data.normalize_rows();

    let desk = ScheduleConfig { k0: 2, t_k: 40, t_update: 20, t_total: 200 };
    for step in [1, 41, 81] {
        if let ClusterMode::Clusters(k) = schedule_k(&desk, step, rows.len()) {
            let s = kmeans(&data, k, 0, 100)?;
            println!("K = {k}: objective {:.3} after {} iterations", s.objective, s.iterations);
        }
    }
    Ok(())
}
