//! Mini-batch training of the ensemble with Adam, a halving learning-rate
//! schedule and best-epoch selection on a validation set.

mod adam;
mod pairs;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use pairs::{make_labeled_pairs, make_unlabeled_pairs, PairedExample};

use crate::error::{Error, Result};
use crate::evaluation::{plcc_with_logistic, srcc};
use crate::fsutil::write_atomic;
use crate::harness::Sample;
use crate::model::{grad, init, ArchitectureConfig, EnsembleParams, LabeledBatch, UnlabeledBatch};
use crate::objectives::{LabeledPair, ObjectiveConfig, UnlabeledPair};

/// Validation statistic used to pick the returned epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionMetric {
    #[default]
    Srcc,
    Plcc,
}

impl FromStr for SelectionMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "srcc" => Ok(SelectionMetric::Srcc),
            "plcc" => Ok(SelectionMetric::Plcc),
            other => Err(Error::invalid(format!("unknown selection metric `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub objective: ObjectiveConfig,
    pub arch: ArchitectureConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub lr_halving: bool,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Global-norm gradient clipping threshold. Off by default.
    pub clip_norm: Option<f64>,
    pub selection: SelectionMetric,
}

impl TrainConfig {
    pub fn new(arch: ArchitectureConfig) -> Self {
        TrainConfig {
            objective: ObjectiveConfig::default(),
            arch,
            batch_size: 16,
            epochs: 12,
            initial_lr: 1e-4,
            lr_halving: true,
            adam: AdamConfig::default(),
            seed: 0,
            clip_norm: None,
            selection: SelectionMetric::Srcc,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.objective.validate()?;
        self.arch.validate()?;
        if self.batch_size < 2 {
            return Err(Error::invalid(format!("batch_size must be >= 2, got {}", self.batch_size)));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be positive"));
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::invalid(format!("initial_lr must be positive, got {}", self.initial_lr)));
        }
        let a = &self.adam;
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.eps > 0.0) {
            return Err(Error::invalid("adam needs beta1, beta2 in [0, 1) and eps > 0"));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::invalid(format!("clip_norm must be positive, got {c}")));
            }
        }
        Ok(())
    }

    /// Learning rate of the 1-based `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        if self.lr_halving {
            self.initial_lr * 0.5f64.powi(epoch as i32 - 1)
        } else {
            self.initial_lr
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub lr: f64,
    /// Means over the epoch's steps.
    pub loss_total: f64,
    pub loss_acc: f64,
    pub loss_div: f64,
    pub val_srcc: f64,
    /// Value of the selection metric (equals `val_srcc` for SRCC selection).
    pub val_selection: f64,
    pub wall_secs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were returned.
    pub best_epoch: usize,
}

impl TrainHistory {
    /// One tab-separated record per epoch:
    /// `epoch lr loss_total loss_acc loss_div val_srcc`, preceded by a
    /// `#`-prefixed header. Wall-clock times are left out so the file is
    /// reproducible; see [`TrainHistory::format_timing`].
    pub fn format(&self) -> String {
        let mut out = String::from("#epoch\tlr\tloss_total\tloss_acc\tloss_div\tval_srcc\n");
        for r in &self.epochs {
            writeln!(
                out,
                "{}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}",
                r.epoch, r.lr, r.loss_total, r.loss_acc, r.loss_div, r.val_srcc
            )
            .expect("write to string");
        }
        writeln!(out, "#best_epoch\t{}", self.best_epoch).expect("write to string");
        out
    }

    pub fn format_timing(&self) -> String {
        let mut out = String::from("#epoch\twall_secs\n");
        for r in &self.epochs {
            writeln!(out, "{}\t{:.6}", r.epoch, r.wall_secs).expect("write to string");
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.format().as_bytes())
    }
}

/// SplitMix64 finaliser, used to derive independent stream seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    mix(mix(mix(base) ^ stream) ^ index)
}

const LABELED_STREAM: u64 = 1;
const UNLABELED_STREAM: u64 = 2;

/// Distinct images referenced by a chunk of pairs, in first-use order.
struct Slots<'a> {
    images: Vec<&'a [f64]>,
    index: HashMap<usize, usize>,
}

impl<'a> Slots<'a> {
    fn new() -> Self {
        Slots {
            images: Vec::new(),
            index: HashMap::new(),
        }
    }

    fn slot(&mut self, samples: &'a [Sample], i: usize) -> usize {
        *self.index.entry(i).or_insert_with(|| {
            self.images.push(&samples[i].features);
            self.images.len() - 1
        })
    }
}

fn check_dims(samples: &[Sample], dim: usize, what: &str) -> Result<()> {
    for s in samples {
        if s.features.len() != dim {
            return Err(Error::invalid(format!(
                "{what} sample `{}` has {} features, model expects {dim}",
                s.id,
                s.features.len()
            )));
        }
    }
    Ok(())
}

fn labels_of(samples: &[Sample], what: &str) -> Result<Vec<f64>> {
    samples
        .iter()
        .map(|s| s.mos.ok_or_else(|| Error::invalid(format!("{what} sample `{}` has no MOS", s.id))))
        .collect()
}

fn validation_scores(params: &EnsembleParams, val: &[Sample], moss: &[f64], metric: SelectionMetric) -> (f64, f64) {
    let preds = match params.predict(&val.iter().map(|s| s.features.as_slice()).collect::<Vec<_>>()) {
        Ok(p) => p,
        Err(_) => return (f64::NAN, f64::NAN),
    };
    let s = srcc(&preds, moss).unwrap_or(f64::NAN);
    let sel = match metric {
        SelectionMetric::Srcc => s,
        SelectionMetric::Plcc => plcc_with_logistic(&preds, moss).map(|(v, _)| v).unwrap_or(f64::NAN),
    };
    (s, sel)
}

/// `a` is a strict improvement over `b`; NaN ranks below everything.
fn improves(a: f64, b: f64) -> bool {
    if a.is_nan() {
        false
    } else {
        b.is_nan() || a > b
    }
}

/// Trains from a fresh initialisation drawn with `config.seed`.
pub fn train(
    config: &TrainConfig,
    labeled: &[Sample],
    unlabeled: &[Sample],
    validation: &[Sample],
) -> Result<(EnsembleParams, TrainHistory)> {
    config.validate()?;
    let params = init(&config.arch, config.seed)?;
    train_from(params, config, labeled, unlabeled, validation)
}

/// Trains starting from `params`, which must match `config.arch`.
pub fn train_from(
    mut params: EnsembleParams,
    config: &TrainConfig,
    labeled: &[Sample],
    unlabeled: &[Sample],
    validation: &[Sample],
) -> Result<(EnsembleParams, TrainHistory)> {
    config.validate()?;
    if params.arch != config.arch {
        return Err(Error::invalid("initial parameters do not match the configured architecture"));
    }
    if labeled.len() < 2 {
        return Err(Error::invalid(format!("need at least 2 labeled training samples, got {}", labeled.len())));
    }
    if validation.is_empty() {
        return Err(Error::invalid("empty validation set"));
    }
    if unlabeled.len() == 1 {
        return Err(Error::invalid("an unlabeled pool needs at least 2 samples"));
    }
    let dim = config.arch.input_dim;
    check_dims(labeled, dim, "labeled")?;
    check_dims(unlabeled, dim, "unlabeled")?;
    check_dims(validation, dim, "validation")?;
    labels_of(labeled, "labeled")?;
    let val_moss = labels_of(validation, "validation")?;

    let bs = config.batch_size;
    let mut adam = AdamState::new(&config.arch);
    let mut records = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, EnsembleParams)> = None;

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let lr = config.lr_at(epoch);
        let mut lrng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, LABELED_STREAM, epoch as u64));
        let lpairs = pairs::labeled_pairs_with(labeled, &mut lrng)?;
        let steps = lpairs.len().div_ceil(bs);
        let upairs = if unlabeled.is_empty() {
            Vec::new()
        } else {
            let mut urng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, UNLABELED_STREAM, epoch as u64));
            pairs::unlabeled_pairs_with(unlabeled, steps * bs, &mut urng)?
        };

        let (mut sum_total, mut sum_acc, mut sum_div) = (0.0, 0.0, 0.0);
        for step in 0..steps {
            let chunk = &lpairs[step * bs..((step + 1) * bs).min(lpairs.len())];
            let mut ls = Slots::new();
            let lp: Vec<LabeledPair> = chunk
                .iter()
                .map(|p| LabeledPair {
                    x: ls.slot(labeled, p.x),
                    y: ls.slot(labeled, p.y),
                    p: p.label.expect("labeled pair"),
                })
                .collect();
            let mut us = Slots::new();
            let up: Vec<UnlabeledPair> = if upairs.is_empty() {
                Vec::new()
            } else {
                upairs[step * bs..(step + 1) * bs]
                    .iter()
                    .map(|p| UnlabeledPair {
                        x: us.slot(unlabeled, p.x),
                        y: us.slot(unlabeled, p.y),
                    })
                    .collect()
            };
            let lb = LabeledBatch { images: ls.images, pairs: lp };
            let ub = UnlabeledBatch { images: us.images, pairs: up };
            let mut out = grad(&params, &lb, &ub, &config.objective)?;
            let t = out.terms;
            if !(t.total.is_finite() && t.acc.is_finite() && t.div.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    step: step + 1,
                    acc: t.acc,
                    div: t.div,
                });
            }
            if let Some(c) = config.clip_norm {
                let norm = out.grads.global_norm();
                if norm > c {
                    out.grads.scale_by(c / norm);
                }
            }
            adam_step(&mut params.weights, &out.grads, &mut adam, lr, &config.adam)?;
            params.update_running_stats(&out.labeled_trace);
            sum_total += t.total;
            sum_acc += t.acc;
            sum_div += t.div;
        }

        let (val_srcc, val_selection) = validation_scores(&params, validation, &val_moss, config.selection);
        let n = steps as f64;
        records.push(EpochRecord {
            epoch,
            lr,
            loss_total: sum_total / n,
            loss_acc: sum_acc / n,
            loss_div: sum_div / n,
            val_srcc,
            val_selection,
            wall_secs: started.elapsed().as_secs_f64(),
        });
        let better = match &best {
            None => true,
            Some((_, b, _)) => improves(val_selection, *b),
        };
        if better {
            best = Some((epoch, val_selection, params.clone()));
        }
    }

    let (best_epoch, _, best_params) = best.expect("at least one epoch");
    Ok((
        best_params,
        TrainHistory {
            epochs: records,
            best_epoch,
        },
    ))
}
