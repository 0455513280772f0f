use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::harness::Sample;
use crate::math::{binary_preference, Probability};

/// Two sample indices and, for labeled pairs, the preference label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedExample {
    pub x: usize,
    pub y: usize,
    pub label: Option<Probability>,
}

/// Uniform index in `0..n` other than `anchor`.
fn partner(rng: &mut impl Rng, n: usize, anchor: usize) -> usize {
    let j = rng.random_range(0..n - 1);
    if j >= anchor {
        j + 1
    } else {
        j
    }
}

pub(crate) fn labeled_pairs_with(samples: &[Sample], rng: &mut impl Rng) -> Result<Vec<PairedExample>> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 labeled samples, got {n}")));
    }
    let moss: Vec<f64> = samples
        .iter()
        .map(|s| {
            s.mos
                .ok_or_else(|| Error::invalid(format!("sample `{}` has no MOS", s.id)))
        })
        .collect::<Result<_>>()?;
    let mut pairs: Vec<PairedExample> = (0..n)
        .map(|x| {
            let y = partner(rng, n, x);
            PairedExample {
                x,
                y,
                label: Some(binary_preference(moss[x], moss[y])),
            }
        })
        .collect();
    pairs.shuffle(rng);
    Ok(pairs)
}

pub(crate) fn unlabeled_pairs_with(
    samples: &[Sample],
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<PairedExample>> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 unlabeled samples, got {n}")));
    }
    Ok((0..count)
        .map(|_| {
            let x = rng.random_range(0..n);
            PairedExample {
                x,
                y: partner(rng, n, x),
                label: None,
            }
        })
        .collect())
}

/// One pair per sample: every sample is the first member exactly once and
/// its partner is drawn uniformly from the others. The list is shuffled.
pub fn make_labeled_pairs(samples: &[Sample], seed: u64) -> Result<Vec<PairedExample>> {
    labeled_pairs_with(samples, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// `count` uniformly drawn pairs of distinct samples.
pub fn make_unlabeled_pairs(samples: &[Sample], count: usize, seed: u64) -> Result<Vec<PairedExample>> {
    unlabeled_pairs_with(samples, count, &mut ChaCha8Rng::seed_from_u64(seed))
}
