//! Experiment configuration: flat `key = value` entries grouped in sections
//! (TOML syntax).
//!
//! ```text
//! [data]          labeled, unlabeled, unlabeled_blind  (or a [synthetic] section)
//! [synthetic]     n_labeled, n_unlabeled, dim, rule, noise_std, ood_fraction, ood_shift, seed
//! [model]         shared_widths, head_widths, num_heads
//! [objective]     lambda, gamma, diversity, include_labeled_in_diversity
//! [train]         batch_size, epochs, initial_lr, lr_halving, beta1, beta2, eps, seed,
//!                 clip_norm, selection
//! [split]         fractions, seeds
//! [analysis]      spot_k, gmad_levels
//! [sweep]         param (gamma | lambda | num_heads), values
//! [output]        dir
//! ```
//!
//! Relative paths are resolved against the directory holding the config.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::split::SplitSpec;
use super::synthetic::SyntheticSpec;
use crate::error::{Error, Result};
use crate::fsutil::read_to_string;
use crate::model::ArchitectureConfig;
use crate::objectives::ObjectiveConfig;
use crate::trainer::{AdamConfig, TrainConfig};

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawData {
    labeled: Option<PathBuf>,
    unlabeled: Option<PathBuf>,
    #[serde(default)]
    unlabeled_blind: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSynthetic {
    n_labeled: Option<usize>,
    n_unlabeled: Option<usize>,
    dim: Option<usize>,
    rule: Option<String>,
    noise_std: Option<f64>,
    ood_fraction: Option<f64>,
    ood_shift: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawModel {
    shared_widths: Option<Vec<usize>>,
    head_widths: Option<Vec<usize>>,
    num_heads: Option<usize>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawObjective {
    lambda: Option<f64>,
    gamma: Option<f64>,
    diversity: Option<String>,
    include_labeled_in_diversity: Option<bool>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawTrain {
    batch_size: Option<usize>,
    epochs: Option<usize>,
    initial_lr: Option<f64>,
    lr_halving: Option<bool>,
    beta1: Option<f64>,
    beta2: Option<f64>,
    eps: Option<f64>,
    seed: Option<u64>,
    clip_norm: Option<f64>,
    selection: Option<String>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSplit {
    fractions: Option<[f64; 3]>,
    seeds: Option<Vec<u64>>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawAnalysis {
    #[serde(default)]
    spot_k: usize,
    #[serde(default)]
    gmad_levels: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    param: String,
    values: Vec<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw {
    #[serde(default)]
    data: RawData,
    synthetic: Option<RawSynthetic>,
    #[serde(default)]
    model: RawModel,
    #[serde(default)]
    objective: RawObjective,
    #[serde(default)]
    train: RawTrain,
    #[serde(default)]
    split: RawSplit,
    #[serde(default)]
    analysis: RawAnalysis,
    sweep: Option<RawSweep>,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Files {
        labeled: PathBuf,
        unlabeled: Option<PathBuf>,
        /// The unlabeled file carries MOS that training must ignore; they
        /// are still used to score failure spotting.
        unlabeled_blind: bool,
    },
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Gamma,
    Lambda,
    NumHeads,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Gamma => "gamma",
            SweepParam::Lambda => "lambda",
            SweepParam::NumHeads => "num_heads",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AnalysisConfig {
    /// Size of the failure-spotting selection; 0 disables it.
    pub spot_k: usize,
    /// Number of gMAD defender levels; 0 disables it.
    pub gmad_levels: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataSource,
    /// Base training configuration. `arch.input_dim` is taken from the data.
    pub train: TrainConfig,
    pub split: SplitSpec,
    pub analysis: AnalysisConfig,
    pub sweep: Option<Sweep>,
    pub output_dir: PathBuf,
}

/// One grid point of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    /// `param_value`, or `base` without a sweep. Used as a directory name.
    pub label: String,
    pub param: Option<SweepParam>,
    pub value: Option<f64>,
    pub train: TrainConfig,
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn resolve(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: Raw = toml::from_str(text).map_err(|e| cfg_err(e.to_string().replace('\n', " ")))?;

        let data = match (raw.data.labeled, raw.synthetic) {
            (Some(_), Some(_)) => return Err(cfg_err("give either [data] labeled or [synthetic], not both")),
            (None, None) => return Err(cfg_err("no data: set [data] labeled or add a [synthetic] section")),
            (Some(labeled), None) => DataSource::Files {
                labeled: resolve(base_dir, labeled),
                unlabeled: raw.data.unlabeled.map(|p| resolve(base_dir, p)),
                unlabeled_blind: raw.data.unlabeled_blind,
            },
            (None, Some(s)) => {
                if raw.data.unlabeled.is_some() {
                    return Err(cfg_err("[data] unlabeled cannot be combined with [synthetic]"));
                }
                let d = SyntheticSpec::default();
                let spec = SyntheticSpec {
                    n_labeled: s.n_labeled.unwrap_or(d.n_labeled),
                    n_unlabeled: s.n_unlabeled.unwrap_or(d.n_unlabeled),
                    dim: s.dim.unwrap_or(d.dim),
                    rule: match s.rule {
                        Some(r) => r.parse().map_err(|e: Error| cfg_err(e.to_string()))?,
                        None => d.rule,
                    },
                    noise_std: s.noise_std.unwrap_or(d.noise_std),
                    ood_fraction: s.ood_fraction.unwrap_or(d.ood_fraction),
                    ood_shift: s.ood_shift.unwrap_or(d.ood_shift),
                    seed: s.seed.unwrap_or(d.seed),
                };
                spec.validate().map_err(|e| cfg_err(e.to_string()))?;
                DataSource::Synthetic(spec)
            }
        };

        let da = ArchitectureConfig::desk_default(0);
        let arch = ArchitectureConfig {
            input_dim: 0,
            shared_widths: raw.model.shared_widths.unwrap_or(da.shared_widths),
            head_widths: raw.model.head_widths.unwrap_or(da.head_widths),
            num_heads: raw.model.num_heads.unwrap_or(da.num_heads),
        };
        let od = ObjectiveConfig::default();
        let objective = ObjectiveConfig {
            lambda: raw.objective.lambda.unwrap_or(od.lambda),
            gamma: raw.objective.gamma.unwrap_or(od.gamma),
            diversity: match raw.objective.diversity {
                Some(v) => v.parse().map_err(|e: Error| cfg_err(e.to_string()))?,
                None => od.diversity,
            },
            include_labeled_in_diversity: raw
                .objective
                .include_labeled_in_diversity
                .unwrap_or(od.include_labeled_in_diversity),
        };
        let td = TrainConfig::new(arch.clone());
        let t = raw.train;
        let train = TrainConfig {
            objective,
            arch,
            batch_size: t.batch_size.unwrap_or(td.batch_size),
            epochs: t.epochs.unwrap_or(td.epochs),
            initial_lr: t.initial_lr.unwrap_or(td.initial_lr),
            lr_halving: t.lr_halving.unwrap_or(td.lr_halving),
            adam: AdamConfig {
                beta1: t.beta1.unwrap_or(td.adam.beta1),
                beta2: t.beta2.unwrap_or(td.adam.beta2),
                eps: t.eps.unwrap_or(td.adam.eps),
            },
            seed: t.seed.unwrap_or(td.seed),
            clip_norm: t.clip_norm,
            selection: match t.selection {
                Some(s) => s.parse().map_err(|e: Error| cfg_err(e.to_string()))?,
                None => td.selection,
            },
        };

        let sd = SplitSpec::default();
        let split = SplitSpec {
            fractions: raw.split.fractions.unwrap_or(sd.fractions),
            seeds: raw.split.seeds.unwrap_or(sd.seeds),
        };
        split.validate().map_err(|e| cfg_err(e.to_string()))?;

        let sweep = match raw.sweep {
            None => None,
            Some(s) => {
                let param = match s.param.as_str() {
                    "gamma" => SweepParam::Gamma,
                    "lambda" => SweepParam::Lambda,
                    "num_heads" => SweepParam::NumHeads,
                    other => return Err(cfg_err(format!("cannot sweep `{other}`"))),
                };
                if s.values.is_empty() {
                    return Err(cfg_err("sweep values are empty"));
                }
                Some(Sweep { param, values: s.values })
            }
        };

        let cfg = ExperimentConfig {
            data,
            train,
            split,
            analysis: AnalysisConfig {
                spot_k: raw.analysis.spot_k,
                gmad_levels: raw.analysis.gmad_levels,
            },
            sweep,
            output_dir: resolve(base_dir, raw.output.dir.unwrap_or_else(|| PathBuf::from("out"))),
        };
        // Surface invalid values now rather than at the first repeat.
        for p in cfg.grid(1)? {
            p.train.validate().map_err(|e| cfg_err(format!("{}: {e}", p.label)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Training configurations of every grid point, for data of dimension `dim`.
    pub fn grid(&self, dim: usize) -> Result<Vec<GridPoint>> {
        let mut base = self.train.clone();
        base.arch.input_dim = dim;
        let Some(sweep) = &self.sweep else {
            return Ok(vec![GridPoint {
                label: "base".into(),
                param: None,
                value: None,
                train: base,
            }]);
        };
        sweep
            .values
            .iter()
            .map(|&v| {
                let mut t = base.clone();
                match sweep.param {
                    SweepParam::Gamma => t.objective.gamma = v,
                    SweepParam::Lambda => t.objective.lambda = v,
                    SweepParam::NumHeads => {
                        if !(v >= 1.0 && v.fract() == 0.0) {
                            return Err(cfg_err(format!("num_heads sweep value {v} is not a positive integer")));
                        }
                        t.arch.num_heads = v as usize;
                    }
                }
                Ok(GridPoint {
                    label: format!("{}_{v}", sweep.param.as_str()),
                    param: Some(sweep.param),
                    value: Some(v),
                    train: t,
                })
            })
            .collect()
    }
}
