use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random streams, one per purpose, all derived from the run seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Init = 1,
    Sampling = 2,
    Dropout = 3,
    Clustering = 4,
    FewShot = 5,
    Synthetic = 6,
}

pub fn rng_for(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
