use crate::error::{Error, Result};

use super::{Dense, EnsembleParams, Weights, BN_EPS, L2_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Output normalisation uses the statistics of the current batch.
    Training,
    /// Output normalisation uses the running statistics.
    Inference,
}

/// Row-major `rows x cols` activations.
#[derive(Debug, Clone)]
struct Act {
    cols: usize,
    data: Vec<f64>,
}

impl Act {
    fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

#[derive(Debug, Clone)]
struct LayerCache {
    /// Pre-activation.
    pre: Act,
    /// ReLU output.
    post: Act,
}

#[derive(Debug, Clone)]
struct HeadCache {
    hidden: Vec<LayerCache>,
    /// Norm of each sample's head feature before l2 normalisation.
    norms: Vec<f64>,
    /// l2-normalised head features.
    unit: Act,
    raw: Vec<f64>,
    mean: f64,
    var: f64,
    xhat: Vec<f64>,
}

/// Result of a forward pass, with the activations needed for backward.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    mode: Mode,
    batch: usize,
    input: Act,
    trunk: Vec<LayerCache>,
    heads: Vec<HeadCache>,
    /// `batch x M` normalised head scores.
    scores: Vec<Vec<f64>>,
}

fn dense_forward(layer: &Dense, input: &Act, batch: usize) -> LayerCache {
    let mut pre = vec![0.0; batch * layer.out_dim];
    for b in 0..batch {
        let x = input.row(b);
        let out = &mut pre[b * layer.out_dim..(b + 1) * layer.out_dim];
        for (o, slot) in out.iter_mut().enumerate() {
            let w = &layer.weight[o * layer.in_dim..(o + 1) * layer.in_dim];
            *slot = layer.bias[o] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    let post = pre.iter().map(|&v| v.max(0.0)).collect();
    LayerCache {
        pre: Act {
            cols: layer.out_dim,
            data: pre,
        },
        post: Act {
            cols: layer.out_dim,
            data: post,
        },
    }
}

/// Accumulates parameter gradients of a ReLU dense layer and returns the
/// gradient with respect to its input.
fn dense_backward(
    layer: &Dense,
    cache: &LayerCache,
    input: &Act,
    d_post: &[f64],
    batch: usize,
    g: &mut Dense,
    need_input_grad: bool,
) -> Vec<f64> {
    let (n_in, n_out) = (layer.in_dim, layer.out_dim);
    let mut d_in = if need_input_grad {
        vec![0.0; batch * n_in]
    } else {
        Vec::new()
    };
    for b in 0..batch {
        let x = input.row(b);
        let pre = cache.pre.row(b);
        for o in 0..n_out {
            let d = if pre[o] > 0.0 { d_post[b * n_out + o] } else { 0.0 };
            if d == 0.0 {
                continue;
            }
            g.bias[o] += d;
            let gw = &mut g.weight[o * n_in..(o + 1) * n_in];
            for (gwi, xi) in gw.iter_mut().zip(x) {
                *gwi += d * xi;
            }
            if need_input_grad {
                let w = &layer.weight[o * n_in..(o + 1) * n_in];
                let di = &mut d_in[b * n_in..(b + 1) * n_in];
                for (dii, wi) in di.iter_mut().zip(w) {
                    *dii += d * wi;
                }
            }
        }
    }
    d_in
}

impl EnsembleParams {
    /// Evaluates every head on a batch of feature vectors.
    pub fn forward<S: AsRef<[f64]>>(&self, batch: &[S], mode: Mode) -> Result<ForwardTrace> {
        let n = batch.len();
        if n == 0 {
            return Err(Error::invalid("forward on an empty batch"));
        }
        if mode == Mode::Training && n < 2 {
            return Err(Error::invalid("training-mode forward needs at least 2 samples"));
        }
        let dim = self.arch.input_dim;
        let mut data = Vec::with_capacity(n * dim);
        for (i, row) in batch.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::invalid(format!(
                    "sample {i} has {} features, model expects {dim}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        let input = Act { cols: dim, data };

        let w = &self.weights;
        let mut trunk = Vec::with_capacity(w.trunk.len());
        for layer in &w.trunk {
            let prev = trunk.last().map(|c: &LayerCache| &c.post).unwrap_or(&input);
            let cache = dense_forward(layer, prev, n);
            trunk.push(cache);
        }
        let trunk_out = trunk.last().map(|c| &c.post).unwrap_or(&input);

        let m = self.num_heads();
        let mut heads = Vec::with_capacity(m);
        let mut scores = vec![vec![0.0; m]; n];
        for (h, head) in w.heads.iter().enumerate() {
            let mut hidden: Vec<LayerCache> = Vec::with_capacity(head.hidden.len());
            for layer in &head.hidden {
                let prev = hidden.last().map(|c| &c.post).unwrap_or(trunk_out);
                let cache = dense_forward(layer, prev, n);
                hidden.push(cache);
            }
            let feat = hidden.last().map(|c| &c.post).unwrap_or(trunk_out);
            let k = feat.cols;
            let mut norms = Vec::with_capacity(n);
            let mut unit = Vec::with_capacity(n * k);
            let mut raw = Vec::with_capacity(n);
            for b in 0..n {
                let v = feat.row(b);
                let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                let denom = norm.max(L2_FLOOR);
                let start = unit.len();
                unit.extend(v.iter().map(|a| a / denom));
                let u = &unit[start..];
                raw.push(head.output.iter().zip(u).map(|(a, b)| a * b).sum::<f64>());
                norms.push(norm);
            }
            let (mean, var) = match mode {
                Mode::Training => {
                    let mean = raw.iter().sum::<f64>() / n as f64;
                    let var = raw.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n as f64;
                    (mean, var)
                }
                Mode::Inference => (self.running_mean[h], self.running_var[h]),
            };
            let inv_std = 1.0 / (var + BN_EPS).sqrt();
            let xhat: Vec<f64> = raw.iter().map(|r| (r - mean) * inv_std).collect();
            for (b, xh) in xhat.iter().enumerate() {
                scores[b][h] = w.output_scale * xh;
            }
            heads.push(HeadCache {
                hidden,
                norms,
                unit: Act { cols: k, data: unit },
                raw,
                mean,
                var,
                xhat,
            });
        }

        Ok(ForwardTrace {
            mode,
            batch: n,
            input,
            trunk,
            heads,
            scores,
        })
    }

    /// Reverse-mode pass: adds `d loss / d params` into `grads`, given
    /// `d loss / d scores` (`batch x M`).
    pub fn backward(&self, trace: &ForwardTrace, d_scores: &[Vec<f64>], grads: &mut Weights) {
        let n = trace.batch;
        let w = &self.weights;
        let scale = w.output_scale;
        let trunk_out = trace.trunk.last().map(|c| &c.post).unwrap_or(&trace.input);
        let mut d_trunk_out = vec![0.0; n * trunk_out.cols];

        for (h, (head, cache)) in w.heads.iter().zip(&trace.heads).enumerate() {
            let inv_std = 1.0 / (cache.var + BN_EPS).sqrt();
            let ds: Vec<f64> = (0..n).map(|b| d_scores[b][h]).collect();
            let mut d_scale = 0.0;
            for (d, xh) in ds.iter().zip(&cache.xhat) {
                d_scale += d * xh;
            }
            grads.output_scale += d_scale;

            let d_xhat: Vec<f64> = ds.iter().map(|d| d * scale).collect();
            let d_raw: Vec<f64> = match trace.mode {
                Mode::Training => {
                    let nf = n as f64;
                    let sum_d: f64 = d_xhat.iter().sum();
                    let sum_dx: f64 = d_xhat.iter().zip(&cache.xhat).map(|(a, b)| a * b).sum();
                    d_xhat
                        .iter()
                        .zip(&cache.xhat)
                        .map(|(d, xh)| inv_std / nf * (nf * d - sum_d - xh * sum_dx))
                        .collect()
                }
                Mode::Inference => d_xhat.iter().map(|d| d * inv_std).collect(),
            };

            let k = cache.unit.cols;
            let g_head = &mut grads.heads[h];
            let mut d_feat = vec![0.0; n * k];
            for b in 0..n {
                let u = cache.unit.row(b);
                let dr = d_raw[b];
                for (go, ui) in g_head.output.iter_mut().zip(u) {
                    *go += dr * ui;
                }
                // d unit = dr * w; back through x / max(|x|, floor).
                let du: Vec<f64> = head.output.iter().map(|wi| dr * wi).collect();
                let df = &mut d_feat[b * k..(b + 1) * k];
                let norm = cache.norms[b];
                if norm > L2_FLOOR {
                    let proj: f64 = u.iter().zip(&du).map(|(a, b)| a * b).sum();
                    for i in 0..k {
                        df[i] = (du[i] - u[i] * proj) / norm;
                    }
                } else {
                    for i in 0..k {
                        df[i] = du[i] / L2_FLOOR;
                    }
                }
            }

            let mut d = d_feat;
            for l in (0..head.hidden.len()).rev() {
                let input = if l == 0 { trunk_out } else { &cache.hidden[l - 1].post };
                d = dense_backward(
                    &head.hidden[l],
                    &cache.hidden[l],
                    input,
                    &d,
                    n,
                    &mut g_head.hidden[l],
                    true,
                );
            }
            for (acc, v) in d_trunk_out.iter_mut().zip(&d) {
                *acc += v;
            }
        }

        let mut d = d_trunk_out;
        for l in (0..w.trunk.len()).rev() {
            let input = if l == 0 { &trace.input } else { &trace.trunk[l - 1].post };
            d = dense_backward(&w.trunk[l], &trace.trunk[l], input, &d, n, &mut grads.trunk[l], l > 0);
        }
    }
}

impl ForwardTrace {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn batch_size(&self) -> usize {
        self.batch
    }

    pub fn num_heads(&self) -> usize {
        self.heads.len()
    }

    /// Normalised head scores, one row of `M` per sample.
    pub fn scores(&self) -> &[Vec<f64>] {
        &self.scores
    }

    /// Per-sample mean over heads.
    pub fn ensemble_scores(&self) -> Vec<f64> {
        self.scores
            .iter()
            .map(|row| row.iter().sum::<f64>() / row.len() as f64)
            .collect()
    }

    /// Raw (pre-normalisation) outputs of head `h`.
    pub fn raw_scores(&self, h: usize) -> &[f64] {
        &self.heads[h].raw
    }

    /// Mean and (biased) variance used to normalise head `h`.
    pub fn head_stats(&self, h: usize) -> (f64, f64) {
        (self.heads[h].mean, self.heads[h].var)
    }

    /// l2-normalised features that entered head `h`'s final layer.
    pub fn head_unit_features(&self, h: usize, sample: usize) -> &[f64] {
        self.heads[h].unit.row(sample)
    }

    /// Norm of the head feature before normalisation.
    pub fn head_feature_norm(&self, h: usize, sample: usize) -> f64 {
        self.heads[h].norms[sample]
    }

    /// Sign pattern of every ReLU pre-activation (`true` = active).
    pub fn activation_pattern(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for c in &self.trunk {
            out.extend(c.pre.data.iter().map(|&v| v > 0.0));
        }
        for h in &self.heads {
            for c in &h.hidden {
                out.extend(c.pre.data.iter().map(|&v| v > 0.0));
            }
        }
        out
    }
}
