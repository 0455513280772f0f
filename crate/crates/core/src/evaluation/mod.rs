//! Evaluation and diagnosis of quality predictions.

mod correlation;
mod failures;
mod gmad;
pub mod io;
mod logistic;

pub use correlation::{fractional_ranks, pearson, srcc};
pub use failures::{head_variance, rank_disagreement, spot_failures, DisagreementRanking};
pub use gmad::{defender_levels, gmad_pairs, GmadLevel, GmadPair};
pub use logistic::{fit_logistic, logistic4, plcc_with_logistic, LogisticFit};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n: usize,
    pub srcc: f64,
    pub plcc: f64,
    pub fit: LogisticFit,
}

impl EvalReport {
    /// `name<TAB>value` records in a fixed order.
    pub fn to_records(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("n".to_string(), self.n.to_string()),
            ("srcc".to_string(), self.srcc.to_string()),
            ("plcc".to_string(), self.plcc.to_string()),
        ];
        for (i, e) in self.fit.eta.iter().enumerate() {
            out.push((format!("eta{}", i + 1), e.to_string()));
        }
        out.push(("fit_converged".into(), self.fit.converged.to_string()));
        out.push(("fit_residual".into(), self.fit.residual.to_string()));
        out
    }
}

/// SRCC and logistic-mapped PLCC of `preds` against `moss`.
///
/// With fewer than 5 samples the logistic fit is not attempted; the raw
/// Pearson correlation is reported and the fit is marked unconverged.
pub fn evaluate(preds: &[f64], moss: &[f64]) -> Result<EvalReport> {
    if preds.len() < 3 {
        return Err(Error::invalid(format!("evaluation needs at least 3 samples, got {}", preds.len())));
    }
    let s = srcc(preds, moss)?;
    let (plcc, fit) = if preds.len() >= 5 {
        plcc_with_logistic(preds, moss)?
    } else {
        let fit = LogisticFit {
            eta: [f64::NAN; 4],
            converged: false,
            residual: f64::NAN,
            iterations: 0,
        };
        (pearson(preds, moss)?, fit)
    };
    Ok(EvalReport {
        n: preds.len(),
        srcc: s,
        plcc,
        fit,
    })
}
