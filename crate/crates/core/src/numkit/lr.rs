use crate::error::{Error, Result};

/// Linear warm-up to `base_lr`, then linear decay to zero at `total_steps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrSchedule {
    pub base_lr: f32,
    pub warmup_steps: u64,
    pub total_steps: u64,
}

impl LrSchedule {
    pub fn new(base_lr: f32, warmup_steps: u64, total_steps: u64) -> Result<Self> {
        if !(base_lr > 0.0 && base_lr.is_finite()) {
            return Err(Error::Parameter(format!("base_lr must be positive, got {base_lr}")));
        }
        if warmup_steps > total_steps {
            return Err(Error::Parameter(format!(
                "warmup_steps {warmup_steps} exceeds total_steps {total_steps}"
            )));
        }
        Ok(Self {
            base_lr,
            warmup_steps,
            total_steps,
        })
    }

    /// Warm-up length is `floor(ratio * total)`.
    pub fn with_warmup_ratio(base_lr: f32, warmup_ratio: f64, total_steps: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&warmup_ratio) {
            return Err(Error::Parameter(format!("warmup_ratio {warmup_ratio} not in [0, 1)")));
        }
        Self::new(base_lr, (warmup_ratio * total_steps as f64).floor() as u64, total_steps)
    }

    pub fn lr_at(&self, step: u64) -> Result<f32> {
        if step > self.total_steps {
            return Err(Error::Range(format!(
                "step {step} past total_steps {}",
                self.total_steps
            )));
        }
        let base = self.base_lr as f64;
        let lr = if step < self.warmup_steps {
            base * step as f64 / self.warmup_steps as f64
        } else if self.total_steps == self.warmup_steps {
            base
        } else {
            base * (self.total_steps - step) as f64 / (self.total_steps - self.warmup_steps) as f64
        };
        Ok(lr as f32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_scale() -> LrSchedule {
        LrSchedule::new(1e-5, 10_000, 100_000).unwrap()
    }

    #[test]
    fn apex_terminus_and_midramp() {
        let s = full_scale();
        assert_eq!(s.lr_at(10_000).unwrap(), 1e-5);
        assert_eq!(s.lr_at(100_000).unwrap(), 0.0);
        assert!((s.lr_at(5_000).unwrap() - 5e-6).abs() < 1e-12);
        assert_eq!(s.lr_at(0).unwrap(), 0.0);
        assert!(matches!(s.lr_at(100_001), Err(Error::Range(_))));
    }

    #[test]
    fn ratio_constructor() {
        assert_eq!(LrSchedule::with_warmup_ratio(1e-5, 0.1, 100_000).unwrap(), full_scale());
    }

    #[test]
    fn piecewise_linear_with_single_maximum() {
        let s = LrSchedule::new(2.0, 30, 130).unwrap();
        let lrs: Vec<f32> = (0..=130).map(|t| s.lr_at(t).unwrap()).collect();
        let max = lrs.iter().cloned().fold(f32::MIN, f32::max);
        assert_eq!(lrs[30], max);
        assert!(lrs.iter().all(|&v| v >= 0.0));
        for w in lrs[..=30].windows(2) {
            assert!(w[1] >= w[0]);
        }
        for w in lrs[30..].windows(2) {
            assert!(w[1] <= w[0]);
            // constant slope on each piece
            assert!(((w[0] - w[1]) - 0.02).abs() < 1e-5);
        }
    }

    #[test]
    fn zero_warmup_starts_at_base() {
        let s = LrSchedule::new(1.0, 0, 10).unwrap();
        assert_eq!(s.lr_at(0).unwrap(), 1.0);
        assert_eq!(s.lr_at(5).unwrap(), 0.5);
    }
}
