use crate::denoiser::{DenoiserModel, GradientBundle};
use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Mean squared difference.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::Dimension(format!(
            "prediction has {} values, target {}",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InvalidArgument("mse of empty tensors".into()));
    }
    let sum: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / pred.len() as f64)
}

/// Adam moments, laid out block-for-block like the model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn new(model: &DenoiserModel) -> Self {
        let shapes: Vec<Vec<f64>> = model
            .blocks()
            .iter()
            .map(|(_, b)| vec![0.0; b.len()])
            .collect();
        Self {
            m: shapes.clone(),
            v: shapes,
            step: 0,
        }
    }
}

/// One bias-corrected Adam update, in place. Nothing is modified when any
/// gradient entry is non-finite.
pub fn adam_step(
    params: &mut [&mut [f64]],
    grads: &GradientBundle,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "learning rate {lr} must be positive"
        )));
    }
    let congruent = params.len() == grads.blocks.len()
        && params.len() == state.m.len()
        && params
            .iter()
            .zip(&grads.blocks)
            .zip(&state.m)
            .all(|((p, g), m)| p.len() == g.len() && p.len() == m.len());
    if !congruent {
        return Err(Error::Dimension(
            "parameters, gradients and Adam moments differ in shape".into(),
        ));
    }
    for (name, g) in grads.names.iter().zip(&grads.blocks) {
        if let Some(k) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient(format!("{name}[{k}]")));
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    for (b, p) in params.iter_mut().enumerate() {
        let (m, v, g) = (&mut state.m[b], &mut state.v[b], &grads.blocks[b]);
        for i in 0..p.len() {
            m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
            v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
        }
    }
    Ok(())
}
