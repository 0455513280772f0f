//! Training objectives over per-head quality scores.
//!
//! The accuracy term scores labeled pairs with the fidelity loss on both the
//! ensemble prediction and every head's own prediction. Diversity terms score
//! unlabeled pairs (values are `<= 0`, more negative means more diverse).
//! The semi-supervised objective is `acc + gamma * div`.
//!
//! Functions that take probabilities evaluate the fidelity loss exactly.
//! Functions that take scores clamp each derived probability to
//! `[PROB_EPS, 1 - PROB_EPS]` first, and their gradients are the exact
//! derivatives of the clamped expression.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::math::{
    clamp_prob, fidelity_dq, fidelity_raw, mean, thurstone_dgap, thurstone_raw, Probability,
    PROB_EPS,
};

/// Which disagreement measure is used as the diversity term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiversityVariant {
    /// Negative mean fidelity loss over unordered head pairs.
    #[default]
    PairwiseFidelity,
    /// Negative variance of the head scores around the ensemble score.
    Variance,
    /// Negative mean fidelity loss between each head and the ensemble.
    ToEnsemble,
}

impl DiversityVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            DiversityVariant::PairwiseFidelity => "pairwise_fidelity",
            DiversityVariant::Variance => "variance",
            DiversityVariant::ToEnsemble => "to_ensemble",
        }
    }
}

impl fmt::Display for DiversityVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DiversityVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pairwise_fidelity" | "pairwise" => Ok(DiversityVariant::PairwiseFidelity),
            "variance" => Ok(DiversityVariant::Variance),
            "to_ensemble" => Ok(DiversityVariant::ToEnsemble),
            other => Err(Error::invalid(format!("unknown diversity variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveConfig {
    /// Weight of the mean individual-head loss in the accuracy term.
    pub lambda: f64,
    /// Weight of the diversity term.
    pub gamma: f64,
    pub diversity: DiversityVariant,
    /// Also apply the diversity term to labeled pairs, with labels ignored.
    pub include_labeled_in_diversity: bool,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig {
            lambda: 1.0,
            gamma: 0.06,
            diversity: DiversityVariant::PairwiseFidelity,
            include_labeled_in_diversity: true,
        }
    }
}

impl ObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// Head scores of the two members of a pair.
#[derive(Debug, Clone, Copy)]
pub struct PairScores<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
}

/// A labeled pair referring to rows of a score matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPair {
    pub x: usize,
    pub y: usize,
    pub p: Probability,
}

/// An unlabeled pair referring to rows of a score matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnlabeledPair {
    pub x: usize,
    pub y: usize,
}

/// Objective value split into its parts. `total = acc + gamma * div`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObjectiveTerms {
    pub acc: f64,
    pub div: f64,
    pub total: f64,
}

fn check_rows(x: usize, y: usize, rows: usize) -> Result<()> {
    if x == y {
        return Err(Error::invalid(format!("pair of row {x} with itself")));
    }
    if x >= rows || y >= rows {
        return Err(Error::invalid(format!("pair ({x}, {y}) out of range for {rows} rows")));
    }
    Ok(())
}

fn check_heads(x: &[f64], y: &[f64], m: usize) -> Result<()> {
    if x.len() != m || y.len() != m {
        return Err(Error::invalid(format!(
            "pair has {}/{} head scores, expected {m}",
            x.len(),
            y.len()
        )));
    }
    Ok(())
}

/// Clamped Thurstone probability of a score gap and its derivative.
#[inline]
fn clamped_prob(gap: f64) -> (f64, f64) {
    let raw = thurstone_raw(gap);
    if raw < PROB_EPS || raw > 1.0 - PROB_EPS {
        (clamp_prob(raw), 0.0)
    } else {
        (raw, thurstone_dgap(gap))
    }
}

/// Per-pair accuracy term. Adds `weight * d/ds` into the gradient slices.
fn acc_pair(
    sx: &[f64],
    sy: &[f64],
    p: f64,
    lambda: f64,
    grad: Option<(&mut [f64], &mut [f64])>,
    weight: f64,
) -> f64 {
    let m = sx.len() as f64;
    let gap = mean(sx) - mean(sy);
    let (pe, dpe) = clamped_prob(gap);
    let mut value = fidelity_raw(p, pe);
    let d_ens = fidelity_dq(p, pe) * dpe;

    let (mut gx, mut gy) = match grad {
        Some((gx, gy)) => (Some(gx), Some(gy)),
        None => (None, None),
    };
    for i in 0..sx.len() {
        let (pi, dpi) = clamped_prob(sx[i] - sy[i]);
        value += lambda / m * fidelity_raw(p, pi);
        if let (Some(gx), Some(gy)) = (gx.as_deref_mut(), gy.as_deref_mut()) {
            let d = d_ens / m + lambda / m * fidelity_dq(p, pi) * dpi;
            gx[i] += weight * d;
            gy[i] -= weight * d;
        }
    }
    value
}

/// Per-pair pairwise-fidelity diversity.
fn div_pairwise_pair(
    sx: &[f64],
    sy: &[f64],
    grad: Option<(&mut [f64], &mut [f64])>,
    weight: f64,
) -> f64 {
    let m = sx.len();
    let norm = (m * (m - 1) / 2) as f64;
    let probs: Vec<(f64, f64)> = (0..m).map(|i| clamped_prob(sx[i] - sy[i])).collect();
    let mut sum = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            sum += fidelity_raw(probs[i].0, probs[j].0);
        }
    }
    if let Some((gx, gy)) = grad {
        for i in 0..m {
            let (pi, dpi) = probs[i];
            if dpi == 0.0 {
                continue;
            }
            let mut dl = 0.0;
            for (j, &(pj, _)) in probs.iter().enumerate() {
                if j != i {
                    dl += fidelity_dq(pj, pi);
                }
            }
            let d = -dl / norm * dpi;
            gx[i] += weight * d;
            gy[i] -= weight * d;
        }
    }
    -sum / norm
}

/// Per-sample variance diversity `-(1/M) sum (s_i - mean)^2`.
fn div_variance_sample(s: &[f64], grad: Option<&mut [f64]>, weight: f64) -> f64 {
    let m = s.len() as f64;
    // Deviations are taken relative to the first head so identical heads
    // give exactly zero.
    let d: Vec<f64> = s.iter().map(|v| v - s[0]).collect();
    let md = mean(&d);
    let value = -d.iter().map(|v| (v - md) * (v - md)).sum::<f64>() / m;
    if let Some(g) = grad {
        for (gi, v) in g.iter_mut().zip(&d) {
            *gi += weight * (-2.0 / m) * (v - md);
        }
    }
    value
}

/// Per-pair to-ensemble diversity.
fn div_to_ensemble_pair(
    sx: &[f64],
    sy: &[f64],
    grad: Option<(&mut [f64], &mut [f64])>,
    weight: f64,
) -> f64 {
    let m = sx.len();
    let mf = m as f64;
    let (pe, dpe) = clamped_prob(mean(sx) - mean(sy));
    let mut sum = 0.0;
    let mut d_ens = 0.0;
    let mut d_heads = vec![0.0; m];
    for i in 0..m {
        let (pi, dpi) = clamped_prob(sx[i] - sy[i]);
        sum += fidelity_raw(pi, pe);
        d_heads[i] = -fidelity_dq(pe, pi) * dpi / mf;
        d_ens += -fidelity_dq(pi, pe) / mf;
    }
    if let Some((gx, gy)) = grad {
        let de = d_ens * dpe / mf;
        for i in 0..m {
            let d = d_heads[i] + de;
            gx[i] += weight * d;
            gy[i] -= weight * d;
        }
    }
    -sum / mf
}

/// Mean over labeled pairs of the ensemble fidelity loss plus `lambda / M`
/// times the summed per-head fidelity losses.
pub fn accuracy_loss(pairs: &[PairScores<'_>], labels: &[Probability], lambda: f64) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::invalid("accuracy_loss on an empty batch"));
    }
    if labels.len() != pairs.len() {
        return Err(Error::invalid("one label per pair required"));
    }
    let m = pairs[0].x.len();
    if m == 0 {
        return Err(Error::invalid("pair with zero heads"));
    }
    let mut sum = 0.0;
    for (pair, label) in pairs.iter().zip(labels) {
        check_heads(pair.x, pair.y, m)?;
        sum += acc_pair(pair.x, pair.y, label.value(), lambda, None, 0.0);
    }
    Ok(sum / pairs.len() as f64)
}

/// Negative mean fidelity loss over unordered head pairs, averaged over the
/// batch of item pairs. Takes per-pair head probabilities. In `[-1, 0]`.
pub fn diversity_pairwise(pair_probs: &[Vec<Probability>]) -> Result<f64> {
    if pair_probs.is_empty() {
        return Err(Error::invalid("diversity_pairwise on an empty batch"));
    }
    let m = pair_probs[0].len();
    if m < 2 {
        return Err(Error::invalid("diversity_pairwise needs at least two heads"));
    }
    let norm = (m * (m - 1) / 2) as f64;
    let mut sum = 0.0;
    for probs in pair_probs {
        if probs.len() != m {
            return Err(Error::invalid("inconsistent head count across pairs"));
        }
        for i in 0..m {
            for j in i + 1..m {
                sum += fidelity_raw(probs[i].value(), probs[j].value());
            }
        }
    }
    Ok(-sum / (norm * pair_probs.len() as f64))
}

/// Negative prediction variance around the ensemble score, averaged over
/// samples. Always `<= 0`.
pub fn diversity_variance(sample_scores: &[Vec<f64>]) -> Result<f64> {
    if sample_scores.is_empty() {
        return Err(Error::invalid("diversity_variance on an empty batch"));
    }
    let mut sum = 0.0;
    for s in sample_scores {
        if s.is_empty() {
            return Err(Error::invalid("sample with zero heads"));
        }
        sum += div_variance_sample(s, None, 0.0);
    }
    Ok(sum / sample_scores.len() as f64)
}

/// Negative mean fidelity loss between each head's probability and the
/// ensemble probability, averaged over pairs. In `[-1, 0]`.
pub fn diversity_to_ensemble(
    pair_probs: &[Vec<Probability>],
    ensemble: &[Probability],
) -> Result<f64> {
    if pair_probs.is_empty() {
        return Err(Error::invalid("diversity_to_ensemble on an empty batch"));
    }
    if ensemble.len() != pair_probs.len() {
        return Err(Error::invalid("one ensemble probability per pair required"));
    }
    let mut sum = 0.0;
    for (probs, pe) in pair_probs.iter().zip(ensemble) {
        if probs.is_empty() {
            return Err(Error::invalid("pair with zero heads"));
        }
        let s: f64 = probs.iter().map(|p| fidelity_raw(p.value(), pe.value())).sum();
        sum += s / probs.len() as f64;
    }
    Ok(-sum / pair_probs.len() as f64)
}

/// `acc + gamma * div`.
pub fn semi_loss(acc: f64, div: f64, gamma: f64) -> f64 {
    acc + gamma * div
}

/// Ensemble probability as the mean of the head probabilities. An
/// alternative to applying the Thurstone model to the averaged score; not
/// used by the trainer.
pub fn prob_average(pair_probs: &[Probability]) -> Result<Probability> {
    if pair_probs.is_empty() {
        return Err(Error::invalid("prob_average of zero heads"));
    }
    let s: f64 = pair_probs.iter().map(|p| p.value()).sum();
    Probability::new((s / pair_probs.len() as f64).clamp(0.0, 1.0))
}

/// Score-level diversity over pairs of rows of `scores`; returns the sum of
/// per-pair values (caller normalises) and accumulates `weight * d/ds`.
pub(crate) fn diversity_sum(
    variant: DiversityVariant,
    scores: &[Vec<f64>],
    pairs: &[UnlabeledPair],
    mut grad: Option<&mut [Vec<f64>]>,
    weight: f64,
) -> Result<f64> {
    let mut sum = 0.0;
    for pair in pairs {
        check_rows(pair.x, pair.y, scores.len())?;
        let (sx, sy) = (&scores[pair.x], &scores[pair.y]);
        check_heads(sx, sy, scores[0].len())?;
        let g = grad.as_deref_mut().map(|g| two_rows(g, pair.x, pair.y));
        sum += match variant {
            DiversityVariant::PairwiseFidelity => {
                if sx.len() < 2 {
                    return Err(Error::invalid("pairwise diversity needs at least two heads"));
                }
                div_pairwise_pair(sx, sy, g, weight)
            }
            DiversityVariant::ToEnsemble => div_to_ensemble_pair(sx, sy, g, weight),
            DiversityVariant::Variance => {
                // Each pair contributes its two members as samples.
                let (gx, gy) = match g {
                    Some((gx, gy)) => (Some(gx), Some(gy)),
                    None => (None, None),
                };
                0.5 * (div_variance_sample(sx, gx, 0.5 * weight)
                    + div_variance_sample(sy, gy, 0.5 * weight))
            }
        };
    }
    Ok(sum)
}

/// Score-level accuracy sum over labeled pairs.
pub(crate) fn accuracy_sum(
    scores: &[Vec<f64>],
    pairs: &[LabeledPair],
    lambda: f64,
    mut grad: Option<&mut [Vec<f64>]>,
    weight: f64,
) -> Result<f64> {
    let mut sum = 0.0;
    for pair in pairs {
        check_rows(pair.x, pair.y, scores.len())?;
        let (sx, sy) = (&scores[pair.x], &scores[pair.y]);
        check_heads(sx, sy, scores[0].len())?;
        let g = grad.as_deref_mut().map(|g| two_rows(g, pair.x, pair.y));
        sum += acc_pair(sx, sy, pair.p.value(), lambda, g, weight);
    }
    Ok(sum)
}

/// Disjoint mutable borrows of two distinct gradient rows.
fn two_rows(g: &mut [Vec<f64>], a: usize, b: usize) -> (&mut [f64], &mut [f64]) {
    use std::cmp::Ordering;
    match a.cmp(&b) {
        Ordering::Less => {
            let (lo, hi) = g.split_at_mut(b);
            (&mut lo[a], &mut hi[0])
        }
        Ordering::Greater => {
            let (lo, hi) = g.split_at_mut(a);
            (&mut hi[0], &mut lo[b])
        }
        Ordering::Equal => unreachable!("self-pairs are rejected before this point"),
    }
}

/// Full objective over one labeled and one diversity score matrix.
///
/// `labeled_scores` rows are the labeled batch images, `unlabeled_scores`
/// rows the unlabeled batch images. When `include_labeled_in_diversity` is
/// set, the labeled pairs (labels dropped) join the diversity batch. Returns
/// the terms and, if requested, writes `d total / d score` into the two
/// gradient matrices (which must be zero-initialised and shaped like the
/// score matrices).
pub fn semi_objective(
    cfg: &ObjectiveConfig,
    labeled_scores: &[Vec<f64>],
    labeled_pairs: &[LabeledPair],
    unlabeled_scores: &[Vec<f64>],
    unlabeled_pairs: &[UnlabeledPair],
    grads: Option<(&mut [Vec<f64>], &mut [Vec<f64>])>,
) -> Result<ObjectiveTerms> {
    if labeled_pairs.is_empty() {
        return Err(Error::invalid("empty labeled batch"));
    }
    let (mut gl, mut gu) = match grads {
        Some((gl, gu)) => (Some(gl), Some(gu)),
        None => (None, None),
    };

    let inv_b = 1.0 / labeled_pairs.len() as f64;
    let acc = accuracy_sum(labeled_scores, labeled_pairs, cfg.lambda, gl.as_deref_mut(), inv_b)?
        * inv_b;

    let div_labeled: Vec<UnlabeledPair> = if cfg.include_labeled_in_diversity {
        labeled_pairs
            .iter()
            .map(|p| UnlabeledPair { x: p.x, y: p.y })
            .collect()
    } else {
        Vec::new()
    };
    let n_div = unlabeled_pairs.len() + div_labeled.len();
    let m = labeled_scores[0].len();
    let div = if n_div == 0
        || (m < 2 && cfg.diversity == DiversityVariant::PairwiseFidelity && cfg.gamma == 0.0)
    {
        0.0
    } else {
        let w = cfg.gamma / n_div as f64;
        let s_u = diversity_sum(cfg.diversity, unlabeled_scores, unlabeled_pairs, gu.as_deref_mut(), w)?;
        let s_l = diversity_sum(cfg.diversity, labeled_scores, &div_labeled, gl.as_deref_mut(), w)?;
        (s_u + s_l) / n_div as f64
    };

    Ok(ObjectiveTerms {
        acc,
        div,
        total: semi_loss(acc, div, cfg.gamma),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{std_normal_cdf, fidelity_loss};
    use std::f64::consts::SQRT_2;

    fn p(v: f64) -> Probability {
        Probability::new(v).unwrap()
    }

    #[test]
    fn accuracy_examples() {
        // Large gap with p = 1 on every head.
        let x = [50.0, 50.0, 50.0];
        let y = [-50.0, -50.0, -50.0];
        let v = accuracy_loss(&[PairScores { x: &x, y: &y }], &[Probability::ONE], 1.0).unwrap();
        assert!(v < 2.0 * (1.0 - (1.0 - PROB_EPS).sqrt()) + 1e-15);

        // lambda = 0 leaves only the ensemble term.
        let x = [1.0, 0.0];
        let y = [0.0, 1.0];
        let pairs = [PairScores { x: &x, y: &y }];
        let v0 = accuracy_loss(&pairs, &[Probability::ONE], 0.0).unwrap();
        assert!((v0 - (1.0 - 0.5f64.sqrt())).abs() < 1e-15);

        // Hand evaluation through the CDF oracle (mpmath, 40 digits).
        let v1 = accuracy_loss(&pairs, &[Probability::ONE], 1.0).unwrap();
        assert!((v1 - 0.612_110_260_814_429_9).abs() < 1e-13, "{v1}");
        let a = std_normal_cdf(1.0 / SQRT_2).unwrap();
        let b = std_normal_cdf(-1.0 / SQRT_2).unwrap();
        let by_formula = fidelity_loss(p(1.0), p(0.5))
            + 0.5 * (fidelity_loss(p(1.0), a) + fidelity_loss(p(1.0), b));
        assert!((v1 - by_formula).abs() < 1e-15);

        assert!(accuracy_loss(&[], &[], 1.0).is_err());
    }

    #[test]
    fn pairwise_examples() {
        let same = vec![vec![p(0.3), p(0.3), p(0.3)], vec![p(0.9), p(0.9), p(0.9)]];
        assert_eq!(diversity_pairwise(&same).unwrap(), 0.0);
        assert_eq!(diversity_pairwise(&[vec![p(1.0), p(0.0)]]).unwrap(), -1.0);
        let a = diversity_pairwise(&[vec![p(0.1), p(0.5), p(0.8)]]).unwrap();
        let b = diversity_pairwise(&[vec![p(0.8), p(0.1), p(0.5)]]).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert!(diversity_pairwise(&[vec![p(0.4)]]).is_err());
        assert!(diversity_pairwise(&[]).is_err());
    }

    #[test]
    fn variance_examples() {
        assert_eq!(diversity_variance(&[vec![0.4, 0.4, 0.4]]).unwrap(), 0.0);
        assert_eq!(diversity_variance(&[vec![0.0, 2.0]]).unwrap(), -1.0);
        let a = diversity_variance(&[vec![0.1, 0.7, -0.3]]).unwrap();
        let b = diversity_variance(&[vec![10.1, 10.7, 9.7]]).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(diversity_variance(&[]).is_err());
    }

    #[test]
    fn to_ensemble_examples() {
        let probs = vec![vec![p(0.2), p(0.2)]];
        assert_eq!(diversity_to_ensemble(&probs, &[p(0.2)]).unwrap(), 0.0);
        assert_eq!(diversity_to_ensemble(&[vec![p(0.7)]], &[p(0.7)]).unwrap(), 0.0);
        let a = std_normal_cdf(1.0 / SQRT_2).unwrap();
        let b = std_normal_cdf(-1.0 / SQRT_2).unwrap();
        let v = diversity_to_ensemble(&[vec![a, b]], &[Probability::HALF]).unwrap();
        assert!((v - -0.037_227_507_765_309_13).abs() < 1e-14, "{v}");
        assert!(diversity_to_ensemble(&[], &[]).is_err());
    }

    #[test]
    fn semi_loss_examples() {
        assert_eq!(semi_loss(0.4, -0.5, 0.0), 0.4);
        assert!((semi_loss(0.4, -0.5, 0.06) - 0.37).abs() < 1e-15);
        assert_eq!(semi_loss(0.4, 0.0, 3.0), 0.4);
    }

    #[test]
    fn prob_average_examples() {
        assert_eq!(prob_average(&[p(0.3), p(0.3)]).unwrap().value(), 0.3);
        assert_eq!(prob_average(&[p(1.0), p(0.0)]).unwrap().value(), 0.5);
        // Asymmetric gaps (+2 sqrt 2, 0): the two ensemble rules differ.
        let heads = [std_normal_cdf(2.0).unwrap(), Probability::HALF];
        let avg = prob_average(&heads).unwrap().value();
        assert!((avg - 0.738_624_934_025_910_4).abs() < 1e-14);
        let on_scores = std_normal_cdf((2.0 * SQRT_2) / 2.0 / SQRT_2).unwrap().value();
        assert!((on_scores - 0.841_344_746_068_542_9).abs() < 1e-14);
        assert!(prob_average(&[]).is_err());
    }

    #[test]
    fn score_level_gradients_match_differences() {
        let labeled = vec![
            vec![0.3, -0.2, 1.1],
            vec![-0.4, 0.5, 0.2],
            vec![1.3, 0.9, -0.7],
        ];
        let unlabeled = vec![vec![0.1, 0.6, -0.5], vec![-1.0, 0.2, 0.8]];
        let lp = [
            LabeledPair { x: 0, y: 1, p: Probability::ONE },
            LabeledPair { x: 2, y: 0, p: Probability::ZERO },
        ];
        let up = [UnlabeledPair { x: 0, y: 1 }, UnlabeledPair { x: 1, y: 0 }];
        for variant in [
            DiversityVariant::PairwiseFidelity,
            DiversityVariant::Variance,
            DiversityVariant::ToEnsemble,
        ] {
            let cfg = ObjectiveConfig {
                lambda: 0.7,
                gamma: 0.9,
                diversity: variant,
                include_labeled_in_diversity: true,
            };
            let mut gl = vec![vec![0.0; 3]; 3];
            let mut gu = vec![vec![0.0; 3]; 2];
            semi_objective(&cfg, &labeled, &lp, &unlabeled, &up, Some((&mut gl, &mut gu))).unwrap();
            let h = 1e-6;
            let total = |l: &[Vec<f64>], u: &[Vec<f64>]| {
                semi_objective(&cfg, l, &lp, u, &up, None).unwrap().total
            };
            for r in 0..3 {
                for c in 0..3 {
                    let (mut a, mut b) = (labeled.clone(), labeled.clone());
                    a[r][c] += h;
                    b[r][c] -= h;
                    let fd = (total(&a, &unlabeled) - total(&b, &unlabeled)) / (2.0 * h);
                    assert!((fd - gl[r][c]).abs() < 1e-8, "{variant} labeled {r},{c}");
                }
            }
            for r in 0..2 {
                for c in 0..3 {
                    let (mut a, mut b) = (unlabeled.clone(), unlabeled.clone());
                    a[r][c] += h;
                    b[r][c] -= h;
                    let fd = (total(&labeled, &a) - total(&labeled, &b)) / (2.0 * h);
                    assert!((fd - gu[r][c]).abs() < 1e-8, "{variant} unlabeled {r},{c}");
                }
            }
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for v in [
            DiversityVariant::PairwiseFidelity,
            DiversityVariant::Variance,
            DiversityVariant::ToEnsemble,
        ] {
            assert_eq!(v.as_str().parse::<DiversityVariant>().unwrap(), v);
        }
        assert!("nope".parse::<DiversityVariant>().is_err());
    }
}
