//! Closed-form probabilistic primitives: the standard normal CDF, the
//! fidelity loss between two-outcome distributions, Thurstone Case V
//! preference probabilities and ensemble averaging.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use crate::error::{Error, Result};

/// Lower/upper clamp applied to predicted probabilities before any fidelity
/// evaluation inside the training objectives. `1/sqrt(p)` in the gradient is
/// unbounded at the endpoints.
pub const PROB_EPS: f64 = 1e-6;

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const HALF: Probability = Probability(0.5);
    pub const ONE: Probability = Probability(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(Error::invalid(format!("probability {value} outside [0, 1]")))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn complement(self) -> Self {
        Probability(1.0 - self.0)
    }

    /// The value restricted to `[PROB_EPS, 1 - PROB_EPS]`.
    #[inline]
    pub fn clamped(self) -> f64 {
        clamp_prob(self.0)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// A finite score on the (dimensionless) perceptual scale.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct QualityScore(f64);

impl QualityScore {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() {
            Ok(QualityScore(value))
        } else {
            Err(Error::invalid(format!("quality score {value} is not finite")))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

#[inline]
pub(crate) fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Complementary error function.
///
/// For `|x| < 2` the positive-term series
/// `erf(x) = 2/sqrt(pi) * exp(-x^2) * sum_n 2^n x^(2n+1) / (1*3*...*(2n+1))`
/// is summed until terms fall below one ulp; it has no cancellation, so the
/// absolute error of `1 - erf` stays at the 1e-16 level. For `x >= 2` the
/// Laplace continued fraction
/// `erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))`
/// is evaluated with the modified Lentz method. Negative arguments use
/// `erfc(-x) = 2 - erfc(x)`. Absolute error is below 1e-15 everywhere.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.0 {
        1.0 - erf_series(x)
    } else if x > 27.3 {
        0.0
    } else {
        erfc_continued_fraction(x)
    }
}

fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term <= sum * f64::EPSILON * 0.25 {
            break;
        }
    }
    2.0 / PI.sqrt() * (-x2).exp() * sum
}

fn erfc_continued_fraction(x: f64) -> f64 {
    // b0 = x, a_k = k/2, b_k = x.
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64 * 0.5;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (PI.sqrt() * f)
}

/// `Phi(z)` without argument checks.
#[inline]
pub(crate) fn phi(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal density.
#[inline]
pub(crate) fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Standard normal cumulative distribution function.
pub fn std_normal_cdf(z: f64) -> Result<Probability> {
    if !z.is_finite() {
        return Err(Error::invalid(format!("std_normal_cdf of non-finite {z}")));
    }
    Ok(Probability(phi(z).clamp(0.0, 1.0)))
}

/// Fidelity loss `1 - sqrt(p q) - sqrt((1-p)(1-q))` between the Bernoulli
/// distributions with success probabilities `p` and `q`. Lies in `[0, 1]`.
pub fn fidelity_loss(p: Probability, phat: Probability) -> f64 {
    fidelity_raw(p.0, phat.0)
}

#[inline]
pub(crate) fn fidelity_raw(p: f64, q: f64) -> f64 {
    (1.0 - (p * q).sqrt() - ((1.0 - p) * (1.0 - q)).sqrt()).clamp(0.0, 1.0)
}

/// Partial derivative of the fidelity loss with respect to its second
/// argument. Callers pass a clamped `q`.
#[inline]
pub(crate) fn fidelity_dq(p: f64, q: f64) -> f64 {
    -0.5 * (p / q).sqrt() + 0.5 * ((1.0 - p) / (1.0 - q)).sqrt()
}

/// Preference label: 1 when `mu_x >= mu_y`, else 0.
pub fn binary_preference(mu_x: f64, mu_y: f64) -> Probability {
    if mu_x >= mu_y {
        Probability::ONE
    } else {
        Probability::ZERO
    }
}

/// Thurstone Case V probability that `x` is preferred over `y`, with unit
/// variance on each latent quality: `Phi((fx - fy) / sqrt(2))`.
pub fn thurstone_prob(fx: QualityScore, fy: QualityScore) -> Probability {
    Probability(thurstone_raw(fx.0 - fy.0).clamp(0.0, 1.0))
}

#[inline]
pub(crate) fn thurstone_raw(gap: f64) -> f64 {
    phi(gap / SQRT_2)
}

/// `d/d(gap) Phi(gap / sqrt 2)`.
#[inline]
pub(crate) fn thurstone_dgap(gap: f64) -> f64 {
    normal_pdf(gap / SQRT_2) / SQRT_2
}

/// Arithmetic mean of the head scores.
pub fn ensemble_score(head_scores: &[QualityScore]) -> Result<QualityScore> {
    if head_scores.is_empty() {
        return Err(Error::invalid("ensemble of zero heads"));
    }
    let sum: f64 = head_scores.iter().map(|s| s.0).sum();
    Ok(QualityScore(sum / head_scores.len() as f64))
}

#[inline]
pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: f64) -> Probability {
        Probability::new(v).unwrap()
    }

    fn q(v: f64) -> QualityScore {
        QualityScore::new(v).unwrap()
    }

    #[test]
    fn probability_rejects_out_of_range() {
        assert!(Probability::new(-1e-9).is_err());
        assert!(Probability::new(1.0 + 1e-9).is_err());
        assert!(Probability::new(f64::NAN).is_err());
        assert!(QualityScore::new(f64::INFINITY).is_err());
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(std_normal_cdf(0.0).unwrap().value(), 0.5);
        assert!(std_normal_cdf(8.0).unwrap().value() >= 1.0 - 1e-12);
        // mpmath, 40 digits
        let frozen = [
            (1.0, 0.841_344_746_068_542_9),
            (-1.0, 0.158_655_253_931_457_05),
            (2.0, 0.977_249_868_051_820_8),
            (0.3, 0.617_911_422_188_952_6),
            (-3.5, 2.326_290_790_355_250_4e-4),
            (5.0, 0.999_999_713_348_428_1),
            (-8.0, 6.220_960_574_271_784e-16),
        ];
        for (z, want) in frozen {
            let got = std_normal_cdf(z).unwrap().value();
            assert!((got - want).abs() < 1e-14, "Phi({z}) = {got}, want {want}");
        }
        assert!(std_normal_cdf(f64::NAN).is_err());
        assert!(std_normal_cdf(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn cdf_symmetry_and_monotonicity() {
        let mut prev = 0.0;
        for i in -1000..=1000 {
            let z = i as f64 * 0.01;
            let a = std_normal_cdf(z).unwrap().value();
            let b = std_normal_cdf(-z).unwrap().value();
            assert!((a + b - 1.0).abs() <= 1e-12, "z={z}");
            if i > -1000 {
                // Strict in the bulk; the tails run out of resolution.
                assert!(a >= prev, "z={z}");
                if z.abs() <= 6.0 {
                    assert!(a > prev, "z={z}");
                }
            }
            prev = a;
        }
    }

    #[test]
    fn fidelity_examples() {
        assert_eq!(fidelity_loss(p(0.5), p(0.5)), 0.0);
        assert_eq!(fidelity_loss(p(1.0), p(0.0)), 1.0);
        let v = fidelity_loss(p(1.0), p(0.5));
        assert!((v - 0.292_893_218_813_452_5).abs() < 1e-15);
    }

    #[test]
    fn fidelity_derivative_matches_difference_quotient() {
        for &(pv, qv) in &[(1.0, 0.3), (0.0, 0.7), (0.4, 0.9), (0.25, 0.25)] {
            let h = 1e-6;
            let fd = (fidelity_raw(pv, qv + h) - fidelity_raw(pv, qv - h)) / (2.0 * h);
            assert!((fd - fidelity_dq(pv, qv)).abs() < 1e-7, "p={pv} q={qv}");
        }
    }

    #[test]
    fn preference_examples() {
        assert_eq!(binary_preference(72.0, 48.0), Probability::ONE);
        assert_eq!(binary_preference(3.0, 3.0), Probability::ONE);
        assert_eq!(binary_preference(23.0, 72.0), Probability::ZERO);
    }

    #[test]
    fn thurstone_examples() {
        assert_eq!(thurstone_prob(q(0.7), q(0.7)).value(), 0.5);
        let up = thurstone_prob(q(SQRT_2), q(0.0)).value();
        let down = thurstone_prob(q(0.0), q(SQRT_2)).value();
        assert!((up - 0.841_344_746_068_542_9).abs() < 1e-14);
        assert!((down - 0.158_655_253_931_457_05).abs() < 1e-14);
    }

    #[test]
    fn thurstone_derivative() {
        for gap in [-3.0, -0.5, 0.0, 1.2, 4.0] {
            let h = 1e-6;
            let fd = (thurstone_raw(gap + h) - thurstone_raw(gap - h)) / (2.0 * h);
            assert!((fd - thurstone_dgap(gap)).abs() < 1e-9);
        }
    }

    #[test]
    fn ensemble_examples() {
        assert_eq!(ensemble_score(&[q(0.37)]).unwrap().value(), 0.37);
        assert_eq!(ensemble_score(&[q(1.0), q(3.0)]).unwrap().value(), 2.0);
        let v = ensemble_score(&[q(0.1), q(0.2), q(0.3), q(0.4)]).unwrap().value();
        assert!((v - 0.25).abs() < 1e-15);
        assert!(ensemble_score(&[]).is_err());
    }
}
