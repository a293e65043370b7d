use std::collections::BTreeSet;

use rand::seq::index;

use super::io::PositivePair;
use crate::error::{Error, Result};
use crate::numkit::{rng_for, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FewShotMode {
    /// Sample a fraction of the labels that occur in the pairs, keep every pair touching them.
    LabelCoverage,
    /// Sample a fraction of the pairs directly.
    PairRatio,
}

impl std::str::FromStr for FewShotMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "label-coverage" | "label_coverage" => Ok(Self::LabelCoverage),
            "pair-ratio" | "pair_ratio" => Ok(Self::PairRatio),
            _ => Err(Error::Parameter(format!(
                "unknown few-shot mode {s:?} (expected label-coverage or pair-ratio)"
            ))),
        }
    }
}

impl std::fmt::Display for FewShotMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::LabelCoverage => "label-coverage",
            Self::PairRatio => "pair-ratio",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FewShotSubset {
    pub pairs: Vec<PositivePair>,
    pub mode: FewShotMode,
    pub ratio: f64,
    pub seed: u64,
}

/// `ceil(ratio * n)`, robust to representation error such as `0.07 * 100`.
pub(crate) fn ceil_fraction(ratio: f64, n: usize) -> usize {
    let raw = ratio * n as f64;
    let rounded = raw.round();
    let c = if (raw - rounded).abs() < 1e-9 { rounded } else { raw.ceil() };
    (c as usize).clamp(1, n.max(1))
}

/// Deterministic subset of `pairs`; the selected pairs keep their input order.
pub fn sample_fewshot(pairs: &[PositivePair], mode: FewShotMode, ratio: f64, seed: u64) -> Result<FewShotSubset> {
    if pairs.is_empty() {
        return Err(Error::Precondition("few-shot sampling needs at least one pair".into()));
    }
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::Parameter(format!("few-shot ratio {ratio} not in (0, 1]")));
    }
    let mut rng = rng_for(seed, Stream::FewShot);
    let chosen = match mode {
        FewShotMode::PairRatio => {
            let take = ceil_fraction(ratio, pairs.len());
            let mut idx = index::sample(&mut rng, pairs.len(), take).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| pairs[i]).collect()
        }
        FewShotMode::LabelCoverage => {
            let labels: Vec<u64> = pairs.iter().map(|p| p.label_id).collect::<BTreeSet<_>>().into_iter().collect();
            let take = ceil_fraction(ratio, labels.len());
            let keep: BTreeSet<u64> = index::sample(&mut rng, labels.len(), take)
                .into_iter()
                .map(|i| labels[i])
                .collect();
            pairs.iter().filter(|p| keep.contains(&p.label_id)).copied().collect()
        }
    };
    Ok(FewShotSubset {
        pairs: chosen,
        mode,
        ratio,
        seed,
    })
}
