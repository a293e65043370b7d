//! K-means over instance embeddings and the coarse-to-fine cluster schedule.

use std::collections::HashMap;
use std::hash::Hash;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numkit::{rng_for, DenseMatrix, Stream};

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterState {
    pub k: usize,
    /// Cluster id per input row.
    pub assignment: Vec<usize>,
    pub centroids: DenseMatrix<f64>,
    /// Sum of squared distances to the assigned centroids.
    pub objective: f64,
    /// Objective after seeding and after each Lloyd iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

impl ClusterState {
    /// Each row its own cluster.
    pub fn singleton(n: usize) -> Self {
        Self {
            k: n,
            assignment: (0..n).collect(),
            centroids: DenseMatrix::zeros(0, 0),
            objective: 0.0,
            objective_trace: Vec::new(),
            iterations: 0,
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid per point; ties go to the lower centroid index.
fn assign_nearest(data: &DenseMatrix<f64>, centroids: &DenseMatrix<f64>) -> Vec<(usize, f64)> {
    (0..data.rows())
        .into_par_iter()
        .map(|i| {
            let p = data.row(i);
            let mut best = (0, f64::INFINITY);
            for c in 0..centroids.rows() {
                let d = sq_dist(p, centroids.row(c));
                if d < best.1 {
                    best = (c, d);
                }
            }
            best
        })
        .collect()
}

fn kmeans_pp<R: Rng>(data: &DenseMatrix<f64>, k: usize, rng: &mut R) -> DenseMatrix<f64> {
    let n = data.rows();
    let mut centroids = DenseMatrix::zeros(k, data.cols());
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    centroids.row_mut(0).copy_from_slice(data.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(data.row(i), data.row(first))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            pick.expect("positive total weight")
        } else {
            // every remaining point coincides with a centroid
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        centroids.row_mut(c).copy_from_slice(data.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(data.row(i), data.row(pick)));
        }
    }
    centroids
}

/// Moves the point farthest from its centroid (taken from a cluster with
/// more than one member) into each empty cluster.
fn repair_empty(assign: &mut [(usize, f64)], centroids: &mut DenseMatrix<f64>, data: &DenseMatrix<f64>) {
    let k = centroids.rows();
    let mut sizes = vec![0usize; k];
    for &(c, _) in assign.iter() {
        sizes[c] += 1;
    }
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let victim = assign
            .iter()
            .enumerate()
            .filter(|(_, (c, _))| sizes[*c] > 1)
            .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .expect("k <= n guarantees a cluster with two members");
        sizes[assign[victim].0] -= 1;
        sizes[empty] += 1;
        assign[victim] = (empty, 0.0);
        centroids.row_mut(empty).copy_from_slice(data.row(victim));
    }
}

fn update_means(data: &DenseMatrix<f64>, assign: &[(usize, f64)], k: usize) -> DenseMatrix<f64> {
    let mut sums = DenseMatrix::<f64>::zeros(k, data.cols());
    let mut counts = vec![0usize; k];
    for (i, &(c, _)) in assign.iter().enumerate() {
        counts[c] += 1;
        for (s, x) in sums.row_mut(c).iter_mut().zip(data.row(i)) {
            *s += *x;
        }
    }
    for (c, &n) in counts.iter().enumerate() {
        if n > 0 {
            sums.row_mut(c).iter_mut().for_each(|s| *s /= n as f64);
        }
    }
    sums
}

/// Lloyd's k-means with k-means++ seeding.
///
/// Runs until the assignment stops changing or `max_iters` iterations. The
/// returned assignment is nearest-centroid with respect to the returned
/// centroids. Callers cluster L2-normalized rows.
pub fn kmeans(embeddings: &DenseMatrix<f32>, k: usize, seed: u64, max_iters: usize) -> Result<ClusterState> {
    let n = embeddings.rows();
    if k == 0 || k > n {
        return Err(Error::Precondition(format!("k-means with k = {k} over {n} points")));
    }
    if !embeddings.is_finite() {
        return Err(Error::Numeric("non-finite embedding passed to k-means".into()));
    }
    let data: DenseMatrix<f64> = embeddings.cast();
    let mut rng = rng_for(seed, Stream::Clustering);
    let mut centroids = kmeans_pp(&data, k, &mut rng);
    let mut assign = assign_nearest(&data, &centroids);
    repair_empty(&mut assign, &mut centroids, &data);
    let objective = |a: &[(usize, f64)]| a.iter().map(|(_, d)| d).sum::<f64>();
    let mut trace = vec![objective(&assign)];
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        centroids = update_means(&data, &assign, k);
        let mut next = assign_nearest(&data, &centroids);
        let changed = next.iter().zip(&assign).any(|(a, b)| a.0 != b.0);
        repair_empty(&mut next, &mut centroids, &data);
        assign = next;
        trace.push(objective(&assign));
        if !changed {
            break;
        }
    }
    Ok(ClusterState {
        k,
        assignment: assign.iter().map(|(c, _)| *c).collect(),
        centroids,
        objective: *trace.last().unwrap(),
        objective_trace: trace,
        iterations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScheduleConfig {
    pub k0: usize,
    /// Steps between doublings of K.
    pub t_k: u64,
    /// Steps between reassignments.
    pub t_update: u64,
    pub t_total: u64,
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.k0 == 0 {
            bad.push("k0 must be positive".to_string());
        }
        if self.t_total == 0 {
            bad.push("total_steps must be positive".to_string());
        }
        if self.t_k == 0 || self.t_k > self.t_total {
            bad.push(format!("t_k = {} must lie in 1..=total_steps", self.t_k));
        }
        if self.t_update == 0 || self.t_update > self.t_total {
            bad.push(format!("t_update = {} must lie in 1..=total_steps", self.t_update));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad))
        }
    }

    /// First step of the singleton phase, `ceil(t_total / 2)`.
    pub fn switch_step(&self) -> u64 {
        self.t_total.div_ceil(2)
    }
}

/// Granularity in force at one training step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ClusterMode {
    Clusters(usize),
    Singleton,
}

impl std::fmt::Display for ClusterMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Clusters(k) => write!(f, "{k}"),
            Self::Singleton => f.write_str("singleton"),
        }
    }
}

/// K in force at `step` (1-based): `K_0 · 2^floor((step-1)/T_K)` clamped to
/// `n_instances` during the first half, singleton from `ceil(T_total/2)` on.
pub fn schedule_k(config: &ScheduleConfig, step: u64, n_instances: usize) -> ClusterMode {
    if 2 * step >= config.t_total {
        return ClusterMode::Singleton;
    }
    let doublings = (step.saturating_sub(1) / config.t_k.max(1)).min(63) as u32;
    let k = (config.k0 as u128) << doublings;
    ClusterMode::Clusters(k.min(n_instances as u128) as usize)
}

/// In-batch positive sets: members sharing a key are mutual positives.
/// Every member is its own positive.
pub fn positives_by_key<K: Eq + Hash>(keys: &[K]) -> Vec<Vec<usize>> {
    let mut groups: HashMap<&K, Vec<usize>> = HashMap::new();
    for (i, k) in keys.iter().enumerate() {
        groups.entry(k).or_default().push(i);
    }
    keys.iter().map(|k| groups[k].clone()).collect()
}

/// `P_Y(i)` for a batch of clustered rows. `None` means singleton mode.
pub fn positives_in_batch(state: Option<&ClusterState>, batch_rows: &[usize]) -> Result<Vec<Vec<usize>>> {
    match state {
        None => Ok((0..batch_rows.len()).map(|i| vec![i]).collect()),
        Some(s) => {
            let keys = batch_rows
                .iter()
                .map(|&r| {
                    s.assignment
                        .get(r)
                        .copied()
                        .ok_or_else(|| Error::Range(format!("batch row {r} not clustered")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(positives_by_key(&keys))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn random(seed: u64, n: usize, d: usize) -> DenseMatrix<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * d).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        DenseMatrix::from_vec(n, d, data).unwrap()
    }

    #[test]
    fn single_cluster_centroid_is_the_mean() {
        let x = random(1, 30, 4);
        let s = kmeans(&x, 1, 0, 50).unwrap();
        for j in 0..4 {
            let mean: f64 = (0..30).map(|i| x.get(i, j) as f64).sum::<f64>() / 30.0;
            assert!((s.centroids.get(0, j) - mean).abs() < 1e-12);
        }
        assert!(s.assignment.iter().all(|&c| c == 0));
    }

    #[test]
    fn separated_groups() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let noise = Normal::new(0.0f32, 0.01).unwrap();
        let rows: Vec<Vec<f32>> = (0..40)
            .map(|i| {
                let c = if i < 20 { -5.0 } else { 5.0 };
                vec![c + noise.sample(&mut rng), noise.sample(&mut rng)]
            })
            .collect();
        let x = DenseMatrix::from_rows(&rows, 2).unwrap();
        let s = kmeans(&x, 2, 9, 50).unwrap();
        assert!(s.assignment[..20].iter().all(|&c| c == s.assignment[0]));
        assert!(s.assignment[20..].iter().all(|&c| c == s.assignment[20]));
        assert_ne!(s.assignment[0], s.assignment[20]);
    }

    #[test]
    fn monotone_objective_and_nearest_assignment() {
        let x = random(3, 100, 8);
        let s = kmeans(&x, 5, 4, 50).unwrap();
        assert!(s.objective_trace.windows(2).all(|w| w[1] <= w[0]));
        let data: DenseMatrix<f64> = x.cast();
        for i in 0..100 {
            let d_own = sq_dist(data.row(i), s.centroids.row(s.assignment[i]));
            for c in 0..5 {
                assert!(d_own <= sq_dist(data.row(i), s.centroids.row(c)));
            }
        }
    }

    #[test]
    fn too_many_clusters() {
        let x = random(0, 3, 2);
        assert!(matches!(kmeans(&x, 4, 0, 10), Err(Error::Precondition(_))));
        assert!(matches!(kmeans(&x, 0, 0, 10), Err(Error::Precondition(_))));
    }

    #[test]
    fn duplicate_points_still_fill_every_cluster() {
        let x = DenseMatrix::from_rows(&vec![vec![1.0f32, 0.0]; 6], 2).unwrap();
        let s = kmeans(&x, 3, 0, 10).unwrap();
        let mut sizes = [0; 3];
        s.assignment.iter().for_each(|&c| sizes[c] += 1);
        assert!(sizes.iter().all(|&n| n > 0));
    }

    fn full_schedule() -> ScheduleConfig {
        ScheduleConfig { k0: 2048, t_k: 10_000, t_update: 5_000, t_total: 100_000 }
    }

    #[test]
    fn schedule_examples() {
        let c = full_schedule();
        assert_eq!(schedule_k(&c, 25_000, 1 << 20), ClusterMode::Clusters(8192));
        assert_eq!(schedule_k(&c, 50_000, 1 << 20), ClusterMode::Singleton);
        assert_eq!(schedule_k(&c, 10_000, 1 << 20), ClusterMode::Clusters(2048));
        assert_eq!(schedule_k(&c, 10_001, 1 << 20), ClusterMode::Clusters(4096));
        assert_eq!(schedule_k(&c, 49_999, 1 << 20), ClusterMode::Clusters(32768));
        let clamp = ScheduleConfig { k0: 100, ..c };
        for step in [1, 20_000, 49_999] {
            assert_eq!(schedule_k(&clamp, step, 100), ClusterMode::Clusters(100));
        }
    }

    #[test]
    fn schedule_is_monotone_then_singleton() {
        let c = ScheduleConfig { k0: 3, t_k: 7, t_update: 5, t_total: 101 };
        let mut last = 0;
        for step in 1..=101 {
            match schedule_k(&c, step, 1000) {
                ClusterMode::Clusters(k) => {
                    assert!(step < c.switch_step());
                    assert!(k >= last);
                    last = k;
                }
                ClusterMode::Singleton => assert!(step >= c.switch_step()),
            }
        }
        assert_eq!(c.switch_step(), 51);
    }

    #[test]
    fn positive_sets() {
        assert_eq!(positives_in_batch(None, &[5, 6, 7, 8]).unwrap(), vec![vec![0], vec![1], vec![2], vec![3]]);
        let mut s = ClusterState::singleton(4);
        s.assignment = vec![7, 7, 3, 7];
        let p = positives_in_batch(Some(&s), &[0, 1, 2, 3]).unwrap();
        assert_eq!(p[0], vec![0, 1, 3]);
        assert_eq!(p[2], vec![2]);
        s.assignment = vec![1; 4];
        let p = positives_in_batch(Some(&s), &[3, 2, 1]).unwrap();
        assert!(p.iter().all(|q| q == &vec![0, 1, 2]));
        assert!(positives_in_batch(Some(&s), &[9]).is_err());
    }

    #[test]
    fn keyed_positives_are_reflexive_and_symmetric() {
        let keys = [4, 9, 4, 1, 9, 4];
        let p = positives_by_key(&keys);
        for i in 0..keys.len() {
            assert!(p[i].contains(&i));
            for &j in &p[i] {
                assert!(p[j].contains(&i));
            }
        }
    }
}
