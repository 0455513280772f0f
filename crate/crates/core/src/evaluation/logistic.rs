//! Four-parameter logistic mapping fitted by Levenberg-Marquardt.
//!
//! `g(f) = (eta1 - eta2) / (1 + exp(-(f - eta3) / |eta4|)) + eta2`

use crate::error::{Error, Result};

use super::correlation::pearson;

pub const MAX_ITERATIONS: usize = 500;
/// Stop once an accepted step changes the residual sum of squares by less
/// than this fraction.
pub const REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticFit {
    /// `eta4` is stored as the optimiser left it; the model uses `|eta4|`.
    pub eta: [f64; 4],
    pub converged: bool,
    /// Root-mean-square residual of the fitted curve against the targets.
    pub residual: f64,
    pub iterations: usize,
}

impl LogisticFit {
    pub fn apply(&self, f: f64) -> f64 {
        logistic4(&self.eta, f)
    }
}

pub fn logistic4(eta: &[f64; 4], f: f64) -> f64 {
    let s = 1.0 / (1.0 + (-(f - eta[2]) / eta[3].abs()).exp());
    (eta[0] - eta[1]) * s + eta[1]
}

fn sse(eta: &[f64; 4], x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&f, &t)| {
            let r = logistic4(eta, f) - t;
            r * r
        })
        .sum()
}

/// Solves the 4x4 system `a z = b` by Gaussian elimination with partial
/// pivoting; `None` when singular.
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 || !a[piv][col].is_finite() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..4 {
            let factor = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut z = [0.0; 4];
    for row in (0..4).rev() {
        let mut s = b[row];
        for k in row + 1..4 {
            s -= a[row][k] * z[k];
        }
        z[row] = s / a[row][row];
    }
    z.iter().all(|v| v.is_finite()).then_some(z)
}

/// Fits the logistic to `(preds, moss)`; starts from
/// `eta = (max moss, min moss, mean preds, std preds)`.
pub fn fit_logistic(preds: &[f64], moss: &[f64]) -> Result<LogisticFit> {
    if preds.len() != moss.len() {
        return Err(Error::invalid("length mismatch"));
    }
    let n = preds.len();
    if n < 5 {
        return Err(Error::invalid(format!("logistic fit needs at least 5 samples, got {n}")));
    }
    if preds.iter().chain(moss).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in logistic fit input"));
    }
    let nf = n as f64;
    let mean_p = preds.iter().sum::<f64>() / nf;
    let std_p = (preds.iter().map(|p| (p - mean_p) * (p - mean_p)).sum::<f64>() / nf).sqrt();
    let max_m = moss.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_m = moss.iter().copied().fold(f64::INFINITY, f64::min);
    if std_p == 0.0 || max_m == min_m {
        return Err(Error::Degenerate("constant input to logistic fit".into()));
    }

    let mut eta = [max_m, min_m, mean_p, std_p];
    let mut cost = sse(&eta, preds, moss);
    let mut mu = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    // Sum of squares small enough to count as an exact fit.
    let floor = 1e-28 * moss.iter().map(|m| m * m).sum::<f64>().max(1.0);

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        if cost <= floor {
            converged = true;
            break;
        }
        let mut jtj = [[0.0; 4]; 4];
        let mut jtr = [0.0; 4];
        let scale = eta[3].abs();
        let sign = if eta[3] < 0.0 { -1.0 } else { 1.0 };
        for (&f, &t) in preds.iter().zip(moss) {
            let u = (f - eta[2]) / scale;
            let s = 1.0 / (1.0 + (-u).exp());
            let r = (eta[0] - eta[1]) * s + eta[1] - t;
            let ds = (eta[0] - eta[1]) * s * (1.0 - s);
            let j = [s, 1.0 - s, -ds / scale, -ds * u / scale * sign];
            for a in 0..4 {
                jtr[a] += j[a] * r;
                for b in 0..4 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }

        let mut accepted = false;
        while mu < 1e20 {
            let mut lhs = jtj;
            for (d, row) in lhs.iter_mut().enumerate() {
                row[d] += mu * jtj[d][d].max(1e-12);
            }
            let rhs = jtr.map(|v| -v);
            if let Some(step) = solve4(lhs, rhs) {
                let mut trial = eta;
                for k in 0..4 {
                    trial[k] += step[k];
                }
                let trial_cost = sse(&trial, preds, moss);
                if trial_cost.is_finite() && trial_cost < cost {
                    let rel = (cost - trial_cost) / cost;
                    eta = trial;
                    cost = trial_cost;
                    mu = (mu / 10.0).max(1e-15);
                    accepted = true;
                    if rel < REL_TOL {
                        converged = true;
                    }
                    break;
                }
            }
            mu *= 10.0;
        }
        if !accepted {
            // No damped step decreases the cost: a numerical minimum.
            converged = true;
        }
        if converged {
            break;
        }
    }

    Ok(LogisticFit {
        eta,
        converged,
        residual: (cost / nf).sqrt(),
        iterations,
    })
}

/// PLCC between the logistic-mapped predictions and the targets. When the
/// fit does not converge the raw Pearson correlation is returned instead and
/// the fit is marked `converged = false`.
pub fn plcc_with_logistic(preds: &[f64], moss: &[f64]) -> Result<(f64, LogisticFit)> {
    let fit = fit_logistic(preds, moss)?;
    if fit.converged {
        let mapped: Vec<f64> = preds.iter().map(|&f| fit.apply(f)).collect();
        if let Ok(r) = pearson(&mapped, moss) {
            return Ok((r, fit));
        }
    }
    let fallback = pearson(preds, moss)?;
    Ok((fallback, LogisticFit { converged: false, ..fit }))
}
