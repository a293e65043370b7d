use rand::Rng;

use super::Real;
use crate::error::{Error, Result};

/// Inverted-dropout mask: each entry is 0 with probability `rate`, otherwise
/// `1 / (1 - rate)`, so the mask has unit expectation and inference needs no
/// rescaling.
pub fn dropout_mask<T: Real, R: Rng + ?Sized>(rng: &mut R, len: usize, rate: f32) -> Result<Vec<T>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Parameter(format!("dropout rate {rate} not in [0, 1)")));
    }
    if rate == 0.0 {
        return Ok(vec![T::one(); len]);
    }
    let keep = T::from_f64_lossy(1.0 / (1.0 - rate as f64));
    Ok((0..len)
        .map(|_| {
            if rng.random::<f32>() < rate {
                T::zero()
            } else {
                keep
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{rng_for, Stream};

    #[test]
    fn zero_rate_is_all_ones() {
        let m: Vec<f32> = dropout_mask(&mut rng_for(0, Stream::Dropout), 16, 0.0).unwrap();
        assert!(m.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn half_rate_drops_about_half() {
        let m: Vec<f32> = dropout_mask(&mut rng_for(11, Stream::Dropout), 10_000, 0.5).unwrap();
        let zeros = m.iter().filter(|&&v| v == 0.0).count() as f64 / 10_000.0;
        assert!((0.47..=0.53).contains(&zeros), "{zeros}");
        assert!(m.iter().all(|&v| v == 0.0 || v == 2.0));
    }

    #[test]
    fn entries_are_zero_or_scaled_with_unit_mean() {
        let rate = 0.2;
        let m: Vec<f64> = dropout_mask(&mut rng_for(5, Stream::Dropout), 50_000, rate).unwrap();
        let keep = 1.0 / (1.0 - rate as f64);
        assert!(m.iter().all(|&v| v == 0.0 || v == keep));
        let mean = m.iter().sum::<f64>() / m.len() as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn same_seed_same_mask() {
        let a: Vec<f32> = dropout_mask(&mut rng_for(9, Stream::Dropout), 128, 0.1).unwrap();
        let b: Vec<f32> = dropout_mask(&mut rng_for(9, Stream::Dropout), 128, 0.1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rate_one_is_rejected() {
        assert!(dropout_mask::<f32, _>(&mut rng_for(0, Stream::Dropout), 4, 1.0).is_err());
        assert!(dropout_mask::<f32, _>(&mut rng_for(0, Stream::Dropout), 4, -0.1).is_err());
    }
}
