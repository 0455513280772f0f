use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    /// Train, validation and test fractions.
    pub fractions: [f64; 3],
    /// One shuffle seed per repeat.
    pub seeds: Vec<u64>,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            fractions: [0.6, 0.2, 0.2],
            seeds: vec![101, 202, 303],
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.fractions.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
            return Err(Error::invalid("split fractions must lie in (0, 1)"));
        }
        if (self.fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("split fractions must sum to 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("split needs at least one repeat seed"));
        }
        Ok(())
    }

    /// Part sizes for `n` samples: train and validation are rounded down,
    /// the test part takes the rest.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let cut = |f: f64| ((f * n as f64) + 1e-9).floor() as usize;
        let train = cut(self.fractions[0]);
        let val = cut(self.fractions[1]);
        (train, val, n - train - val)
    }
}

/// Seeded shuffle followed by a train/validation/test cut.
pub fn split(ds: &Dataset, spec: &SplitSpec, repeat_index: usize) -> Result<(Dataset, Dataset, Dataset)> {
    spec.validate()?;
    let Some(&seed) = spec.seeds.get(repeat_index) else {
        return Err(Error::invalid(format!(
            "repeat index {repeat_index} out of range for {} repeats",
            spec.seeds.len()
        )));
    };
    let n = ds.len();
    if n < 5 {
        return Err(Error::invalid(format!("need at least 5 samples to split, got {n}")));
    }
    let (train, val, _) = spec.sizes(n);
    if train == 0 || val == 0 || train + val == n {
        return Err(Error::invalid(format!("split of {n} samples leaves an empty part")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok((
        ds.subset(&order[..train]),
        ds.subset(&order[train..train + val]),
        ds.subset(&order[train + val..]),
    ))
}
