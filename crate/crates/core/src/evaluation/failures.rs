//! Failure spotting by committee disagreement.
//!
//! Disagreement of a sample is the variance of its head scores around the
//! ensemble score, `(1/M) sum_i (f_i - f)^2`. This is the magnitude of the
//! variance diversity term (which is its negation).

use crate::error::{Error, Result};
use crate::harness::Sample;
use crate::model::{EnsembleParams, Mode};

#[derive(Debug, Clone, PartialEq)]
pub struct DisagreementRanking {
    /// `(id, variance)`, variance nonincreasing, ties by ascending id.
    pub entries: Vec<(String, f64)>,
}

impl DisagreementRanking {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(id, _)| id.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Population variance of one sample's head scores.
pub fn head_variance(scores: &[f64]) -> f64 {
    let m = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / m;
    scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / m
}

/// Ranks samples by head-score variance and keeps the top `k`.
pub fn rank_disagreement(
    ids: &[String],
    head_scores: &[Vec<f64>],
    k: usize,
) -> Result<DisagreementRanking> {
    if ids.len() != head_scores.len() {
        return Err(Error::invalid("one score row per id required"));
    }
    if k > ids.len() {
        return Err(Error::invalid(format!("k = {k} exceeds pool size {}", ids.len())));
    }
    let mut entries: Vec<(String, f64)> = ids
        .iter()
        .zip(head_scores)
        .map(|(id, s)| (id.clone(), head_variance(s)))
        .collect();
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    entries.truncate(k);
    Ok(DisagreementRanking { entries })
}

/// Runs the model in inference mode over `pool` and returns the `k` samples
/// its heads disagree on most.
pub fn spot_failures(
    params: &EnsembleParams,
    pool: &[Sample],
    k: usize,
) -> Result<DisagreementRanking> {
    if k > pool.len() {
        return Err(Error::invalid(format!("k = {k} exceeds pool size {}", pool.len())));
    }
    if pool.is_empty() {
        return Ok(DisagreementRanking { entries: Vec::new() });
    }
    let features: Vec<&[f64]> = pool.iter().map(|s| s.features.as_slice()).collect();
    let trace = params.forward(&features, Mode::Inference)?;
    let ids: Vec<String> = pool.iter().map(|s| s.id.clone()).collect();
    rank_disagreement(&ids, trace.scores(), k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init, ArchitectureConfig};

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i:03}")).collect()
    }

    #[test]
    fn identical_heads_rank_by_id() {
        let scores = vec![vec![0.5, 0.5, 0.5]; 5];
        let mut names = ids(5);
        names.reverse();
        let r = rank_disagreement(&names, &scores, 5).unwrap();
        assert!(r.entries.iter().all(|(_, v)| *v == 0.0));
        let got: Vec<&str> = r.ids().collect();
        assert_eq!(got, vec!["s000", "s001", "s002", "s003", "s004"]);
    }

    #[test]
    fn planted_spread_ranks_first() {
        let mut scores = vec![vec![0.1, 0.12, 0.09]; 6];
        scores[4] = vec![-2.0, 0.0, 2.0];
        let r = rank_disagreement(&ids(6), &scores, 2).unwrap();
        assert_eq!(r.entries[0].0, "s004");
        assert_eq!(r.len(), 2);
        assert!(rank_disagreement(&ids(6), &scores, 7).is_err());
    }

    #[test]
    fn shift_of_one_sample_keeps_its_variance() {
        assert!((head_variance(&[0.3, -1.0, 2.5]) - head_variance(&[10.3, 9.0, 12.5])).abs() < 1e-12);
    }

    #[test]
    fn full_pool_is_a_permutation() {
        let arch = ArchitectureConfig {
            input_dim: 4,
            shared_widths: vec![5],
            head_widths: vec![3, 1],
            num_heads: 4,
        };
        let params = init(&arch, 3).unwrap();
        let pool: Vec<Sample> = (0..12)
            .map(|i| Sample {
                id: format!("p{i:02}"),
                features: (0..4).map(|j| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0).collect(),
                mos: None,
            })
            .collect();
        let r = spot_failures(&params, &pool, 12).unwrap();
        let mut got: Vec<&str> = r.ids().collect();
        got.sort();
        let want: Vec<String> = pool.iter().map(|s| s.id.clone()).collect();
        assert_eq!(got, want.iter().map(|s| s.as_str()).collect::<Vec<_>>());
        for w in r.entries.windows(2) {
            assert!(w[0].1 >= w[1].1);
        }
        // Identical heads: every variance vanishes.
        let mut same = params.clone();
        same.clone_first_head();
        let r = spot_failures(&same, &pool, 12).unwrap();
        assert!(r.entries.iter().all(|(_, v)| *v == 0.0));
        assert_eq!(r.entries[0].0, "p00");
    }
}
