//! Multi-head quality predictor.
//!
//! A shared trunk of dense ReLU layers feeds `M` head stacks. Each head may
//! have its own dense ReLU layers; its final layer is a bias-free linear map
//! applied to the l2-normalised head feature. The raw head outputs are batch
//! normalised per head with zero bias and one learnable scale shared by all
//! heads, which puts every head on the same perceptual scale.

mod checkpoint;
mod forward;
mod grad;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use forward::{ForwardTrace, Mode};
pub use grad::{grad, objective, GradOutput, LabeledBatch, UnlabeledBatch};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Batch-normalisation epsilon.
pub const BN_EPS: f64 = 1e-5;
/// Weight of the current batch in the running statistics.
pub const BN_MOMENTUM: f64 = 0.1;
/// Floor on the norm used by l2 normalisation.
pub const L2_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchitectureConfig {
    pub input_dim: usize,
    /// Widths of the shared trunk layers; its length is the splitting point.
    pub shared_widths: Vec<usize>,
    /// Widths of each head's layers. A trailing `1` denotes the final
    /// bias-free output layer and may be omitted.
    pub head_widths: Vec<usize>,
    pub num_heads: usize,
}

impl ArchitectureConfig {
    /// Shared `[128, 64]`, heads `[32, 1]`, eight heads.
    pub fn desk_default(input_dim: usize) -> Self {
        ArchitectureConfig {
            input_dim,
            shared_widths: vec![128, 64],
            head_widths: vec![32, 1],
            num_heads: 8,
        }
    }

    /// Hidden (biased, ReLU) widths inside each head.
    pub fn head_hidden(&self) -> &[usize] {
        match self.head_widths.split_last() {
            Some((1, rest)) => rest,
            _ => &self.head_widths,
        }
    }

    /// Width of the vector entering each head's final layer.
    pub fn head_feature_dim(&self) -> usize {
        self.head_hidden()
            .last()
            .or(self.shared_widths.last())
            .copied()
            .unwrap_or(self.input_dim)
    }

    pub fn trunk_output_dim(&self) -> usize {
        self.shared_widths.last().copied().unwrap_or(self.input_dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::invalid("input_dim must be positive"));
        }
        if self.num_heads == 0 {
            return Err(Error::invalid("num_heads must be positive"));
        }
        if self.shared_widths.iter().chain(&self.head_widths).any(|&w| w == 0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        Ok(())
    }
}

/// A dense layer `out = W in + b`, `W` stored row-major as `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Dense {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    fn he(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut layer = Dense::zeros(in_dim, out_dim);
        he_fill(&mut layer.weight, in_dim, rng);
        layer
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub hidden: Vec<Dense>,
    /// Final bias-free layer, one weight per feature.
    pub output: Vec<f64>,
}

/// Trainable parameters. Gradients use the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub trunk: Vec<Dense>,
    pub heads: Vec<Head>,
    /// Scale applied after output normalisation, shared by all heads.
    pub output_scale: f64,
}

impl Weights {
    pub fn zeros(arch: &ArchitectureConfig) -> Self {
        let mut trunk = Vec::new();
        let mut prev = arch.input_dim;
        for &w in &arch.shared_widths {
            trunk.push(Dense::zeros(prev, w));
            prev = w;
        }
        let heads = (0..arch.num_heads)
            .map(|_| {
                let mut p = prev;
                let hidden = arch
                    .head_hidden()
                    .iter()
                    .map(|&w| {
                        let d = Dense::zeros(p, w);
                        p = w;
                        d
                    })
                    .collect();
                Head {
                    hidden,
                    output: vec![0.0; p],
                }
            })
            .collect();
        Weights {
            trunk,
            heads,
            output_scale: 0.0,
        }
    }

    /// All tensors in a fixed order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for d in &self.trunk {
            out.push(&d.weight);
            out.push(&d.bias);
        }
        for h in &self.heads {
            for d in &h.hidden {
                out.push(&d.weight);
                out.push(&d.bias);
            }
            out.push(&h.output);
        }
        out.push(std::slice::from_ref(&self.output_scale));
        out
    }

    /// Mutable view matching [`Weights::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for d in &mut self.trunk {
            out.push(&mut d.weight);
            out.push(&mut d.bias);
        }
        for h in &mut self.heads {
            for d in &mut h.hidden {
                out.push(&mut d.weight);
                out.push(&mut d.bias);
            }
            out.push(&mut h.output);
        }
        out.push(std::slice::from_mut(&mut self.output_scale));
        out
    }

    /// Names matching [`Weights::tensors`].
    pub fn tensor_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for i in 0..self.trunk.len() {
            out.push(format!("trunk.{i}.weight"));
            out.push(format!("trunk.{i}.bias"));
        }
        for (h, head) in self.heads.iter().enumerate() {
            for i in 0..head.hidden.len() {
                out.push(format!("head.{h}.{i}.weight"));
                out.push(format!("head.{h}.{i}.bias"));
            }
            out.push(format!("head.{h}.output"));
        }
        out.push("output_scale".to_string());
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Euclidean norm over every entry.
    pub fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale_by(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, other: &Weights, factor: f64) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += factor * y;
            }
        }
    }
}

/// Everything needed to evaluate the model.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleParams {
    pub arch: ArchitectureConfig,
    pub seed: u64,
    pub weights: Weights,
    /// Per-head running mean of the raw head output.
    pub running_mean: Vec<f64>,
    /// Per-head running variance of the raw head output.
    pub running_var: Vec<f64>,
}

fn he_fill(values: &mut [f64], fan_in: usize, rng: &mut ChaCha8Rng) {
    let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("valid std");
    for v in values {
        *v = normal.sample(rng);
    }
}

/// He (fan-in) initialisation. Biases start at zero, the shared output scale
/// at one, running statistics at mean 0 / variance 1.
pub fn init(arch: &ArchitectureConfig, seed: u64) -> Result<EnsembleParams> {
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trunk = Vec::new();
    let mut prev = arch.input_dim;
    for &w in &arch.shared_widths {
        trunk.push(Dense::he(prev, w, &mut rng));
        prev = w;
    }
    let mut heads = Vec::with_capacity(arch.num_heads);
    for _ in 0..arch.num_heads {
        let mut p = prev;
        let mut hidden = Vec::new();
        for &w in arch.head_hidden() {
            hidden.push(Dense::he(p, w, &mut rng));
            p = w;
        }
        let mut output = vec![0.0; p];
        he_fill(&mut output, p, &mut rng);
        heads.push(Head { hidden, output });
    }
    Ok(EnsembleParams {
        arch: arch.clone(),
        seed,
        weights: Weights {
            trunk,
            heads,
            output_scale: 1.0,
        },
        running_mean: vec![0.0; arch.num_heads],
        running_var: vec![1.0; arch.num_heads],
    })
}

impl EnsembleParams {
    pub fn num_heads(&self) -> usize {
        self.arch.num_heads
    }

    /// Folds a training-mode trace's batch statistics into the running
    /// statistics: `new = (1 - momentum) * old + momentum * batch`, with the
    /// unbiased batch variance.
    pub fn update_running_stats(&mut self, trace: &ForwardTrace) {
        if trace.mode() != Mode::Training {
            return;
        }
        let n = trace.batch_size() as f64;
        let correction = n / (n - 1.0);
        for h in 0..self.num_heads() {
            let (mean, var) = trace.head_stats(h);
            self.running_mean[h] = (1.0 - BN_MOMENTUM) * self.running_mean[h] + BN_MOMENTUM * mean;
            self.running_var[h] =
                (1.0 - BN_MOMENTUM) * self.running_var[h] + BN_MOMENTUM * var * correction;
        }
    }

    /// Copies head 0 into every other head (weights and running stats).
    pub fn clone_first_head(&mut self) {
        let first = self.weights.heads[0].clone();
        for h in self.weights.heads.iter_mut().skip(1) {
            *h = first.clone();
        }
        let (m, v) = (self.running_mean[0], self.running_var[0]);
        self.running_mean.iter_mut().for_each(|x| *x = m);
        self.running_var.iter_mut().for_each(|x| *x = v);
    }

    /// Ensemble scores (mean over heads) in inference mode.
    pub fn predict<S: AsRef<[f64]>>(&self, features: &[S]) -> Result<Vec<f64>> {
        let trace = self.forward(features, Mode::Inference)?;
        Ok(trace.ensemble_scores())
    }

    pub fn is_finite(&self) -> bool {
        self.weights.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
            && self.running_mean.iter().chain(&self.running_var).all(|v| v.is_finite())
    }
}
