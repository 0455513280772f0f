use crate::error::{Error, Result};
use crate::objectives::{semi_objective, LabeledPair, ObjectiveConfig, ObjectiveTerms, UnlabeledPair};

use super::{EnsembleParams, ForwardTrace, Mode, Weights};

/// Distinct images plus labeled pairs indexing into them.
#[derive(Debug, Clone, Default)]
pub struct LabeledBatch<'a> {
    pub images: Vec<&'a [f64]>,
    pub pairs: Vec<LabeledPair>,
}

/// Distinct images plus unlabeled pairs indexing into them. May be empty.
#[derive(Debug, Clone, Default)]
pub struct UnlabeledBatch<'a> {
    pub images: Vec<&'a [f64]>,
    pub pairs: Vec<UnlabeledPair>,
}

impl UnlabeledBatch<'_> {
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

pub struct GradOutput {
    pub grads: Weights,
    pub terms: ObjectiveTerms,
    /// Training-mode trace of the labeled images; its batch statistics feed
    /// the running statistics.
    pub labeled_trace: ForwardTrace,
}

struct Traces {
    labeled: ForwardTrace,
    unlabeled: Option<ForwardTrace>,
}

fn forward_both(
    params: &EnsembleParams,
    labeled: &LabeledBatch<'_>,
    unlabeled: &UnlabeledBatch<'_>,
) -> Result<Traces> {
    if labeled.pairs.is_empty() {
        return Err(Error::invalid("empty labeled batch"));
    }
    let labeled_trace = params.forward(&labeled.images, Mode::Training)?;
    let unlabeled_trace = if unlabeled.is_empty() {
        None
    } else {
        Some(params.forward(&unlabeled.images, Mode::Training)?)
    };
    Ok(Traces {
        labeled: labeled_trace,
        unlabeled: unlabeled_trace,
    })
}

/// Value of the semi-supervised objective, both batches in training mode.
pub fn objective(
    params: &EnsembleParams,
    labeled: &LabeledBatch<'_>,
    unlabeled: &UnlabeledBatch<'_>,
    cfg: &ObjectiveConfig,
) -> Result<ObjectiveTerms> {
    let traces = forward_both(params, labeled, unlabeled)?;
    let empty: Vec<Vec<f64>> = Vec::new();
    let u_scores = traces.unlabeled.as_ref().map(|t| t.scores()).unwrap_or(&empty);
    semi_objective(
        cfg,
        traces.labeled.scores(),
        &labeled.pairs,
        u_scores,
        &unlabeled.pairs,
        None,
    )
}

/// Exact gradient of the semi-supervised objective with respect to every
/// trainable parameter.
///
/// The labeled and unlabeled images are normalised with their own batch
/// statistics. The unlabeled backward pass is skipped when `gamma == 0`
/// since its contribution is identically zero.
pub fn grad(
    params: &EnsembleParams,
    labeled: &LabeledBatch<'_>,
    unlabeled: &UnlabeledBatch<'_>,
    cfg: &ObjectiveConfig,
) -> Result<GradOutput> {
    let traces = forward_both(params, labeled, unlabeled)?;
    let m = params.num_heads();
    let mut d_lab = vec![vec![0.0; m]; traces.labeled.batch_size()];
    let n_u = traces.unlabeled.as_ref().map(|t| t.batch_size()).unwrap_or(0);
    let mut d_unl = vec![vec![0.0; m]; n_u];
    let empty: Vec<Vec<f64>> = Vec::new();
    let u_scores = traces.unlabeled.as_ref().map(|t| t.scores()).unwrap_or(&empty);
    let terms = semi_objective(
        cfg,
        traces.labeled.scores(),
        &labeled.pairs,
        u_scores,
        &unlabeled.pairs,
        Some((&mut d_lab, &mut d_unl)),
    )?;

    let mut grads = Weights::zeros(&params.arch);
    params.backward(&traces.labeled, &d_lab, &mut grads);
    if let Some(trace) = &traces.unlabeled {
        if cfg.gamma != 0.0 {
            params.backward(trace, &d_unl, &mut grads);
        }
    }
    Ok(GradOutput {
        grads,
        terms,
        labeled_trace: traces.labeled,
    })
}
