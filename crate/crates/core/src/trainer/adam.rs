use crate::error::{Error, Result};
use crate::model::{ArchitectureConfig, Weights};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment accumulators and the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Weights,
    pub v: Weights,
    pub step: u64,
}

impl AdamState {
    pub fn new(arch: &ArchitectureConfig) -> Self {
        AdamState {
            m: Weights::zeros(arch),
            v: Weights::zeros(arch),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update. Nothing is modified if any gradient
/// entry is non-finite.
pub fn adam_step(
    params: &mut Weights,
    grads: &Weights,
    state: &mut AdamState,
    lr: f64,
    cfg: &AdamConfig,
) -> Result<()> {
    let g_tensors = grads.tensors();
    for (t, (name, g)) in grads.tensor_names().iter().zip(&g_tensors).enumerate() {
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            let path = if g_tensors[t].len() == 1 { name.clone() } else { format!("{name}[{i}]") };
            return Err(Error::NonFiniteGradient { path });
        }
    }
    state.step += 1;
    let bc1 = 1.0 - cfg.beta1.powi(state.step as i32);
    let bc2 = 1.0 - cfg.beta2.powi(state.step as i32);
    let ps = params.tensors_mut();
    let ms = state.m.tensors_mut();
    let vs = state.v.tensors_mut();
    for (((p, g), m), v) in ps.into_iter().zip(g_tensors).zip(ms).zip(vs) {
        for i in 0..p.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
