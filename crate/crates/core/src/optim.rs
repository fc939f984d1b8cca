//! AdamW and the sharpness-aware wrapper around it.
//!
//! A SAM step ascends to the worst nearby point along the current gradient
//! direction (radius rho, single global L2 norm), takes the gradient there,
//! restores the original weights exactly, and applies the base update with
//! the perturbed-point gradient. Exactly two gradient evaluations per step;
//! the state tracks that cost so step-count comparisons stay honest.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Gradients, ModelParams, ParamSet};
use crate::tensor::Tensor;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("gradient norm is zero; the perturbation direction is undefined")]
    ZeroGradient,
    #[error("gradient oracle failed: {0}")]
    Oracle(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimKind {
    Adamw,
    Sam,
}

fn default_betas() -> (f32, f32) {
    (0.9, 0.999)
}

fn default_eps() -> f32 {
    1e-8
}

fn default_weight_decay() -> f32 {
    0.01
}

fn default_rho() -> f32 {
    0.05
}

fn default_lr() -> f32 {
    3e-4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    #[serde(rename = "optimizer")]
    pub kind: OptimKind,
    #[serde(default = "default_lr")]
    pub lr: f32,
    #[serde(default = "default_betas")]
    pub betas: (f32, f32),
    #[serde(default = "default_eps")]
    pub eps: f32,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f32,
    #[serde(default = "default_rho")]
    pub rho: f32,
}

impl OptimConfig {
    pub fn adamw() -> OptimConfig {
        OptimConfig {
            kind: OptimKind::Adamw,
            lr: default_lr(),
            betas: default_betas(),
            eps: default_eps(),
            weight_decay: default_weight_decay(),
            rho: 0.0,
        }
    }

    pub fn sam() -> OptimConfig {
        OptimConfig {
            kind: OptimKind::Sam,
            rho: default_rho(),
            ..OptimConfig::adamw()
        }
    }

    pub fn use_sam(&self) -> bool {
        self.kind == OptimKind::Sam
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.lr > 0.0) {
            return Err(format!("lr must be positive, got {}", self.lr));
        }
        if self.rho < 0.0 || self.weight_decay < 0.0 {
            return Err("rho and weight_decay must be non-negative".into());
        }
        Ok(())
    }
}

/// First/second moment accumulators plus step and cost counters.
#[derive(Debug, Clone)]
pub struct OptimState {
    pub step: u64,
    /// Number of gradient evaluations consumed so far (2 per SAM step).
    pub grad_evals: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl OptimState {
    pub fn new(params: &ParamSet) -> OptimState {
        OptimState {
            step: 0,
            grad_evals: 0,
            m: params.tensors.iter().map(|t| Tensor::zeros(&t.shape)).collect(),
            v: params.tensors.iter().map(|t| Tensor::zeros(&t.shape)).collect(),
        }
    }
}

/// One AdamW update: decoupled weight decay followed by the bias-corrected
/// Adam step.
pub fn adamw_step(
    params: &mut ParamSet,
    grads: &Gradients,
    state: &mut OptimState,
    config: &OptimConfig,
) -> Result<(), OptimError> {
    if !grads.is_finite() {
        return Err(OptimError::NonFiniteGradient);
    }
    state.step += 1;
    state.grad_evals += 1;
    let (b1, b2) = config.betas;
    let t = state.step as i32;
    let bc1 = 1.0 - b1.powi(t);
    let bc2 = 1.0 - b2.powi(t);
    let lr = config.lr;
    let decay = lr * config.weight_decay;
    for (i, p) in params.tensors.iter_mut().enumerate() {
        let g = &grads.tensors[i].data;
        let m = &mut state.m[i].data;
        let v = &mut state.v[i].data;
        for j in 0..p.data.len() {
            let w = &mut p.data[j];
            if decay != 0.0 {
                *w -= decay * *w;
            }
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            *w -= lr * m_hat / (v_hat.sqrt() + config.eps);
        }
    }
    Ok(())
}

/// Move params to the adversarial point: params += rho * g / ||g||, with one
/// global L2 norm over all gradient tensors. Returns the saved originals for
/// exact restoration.
pub fn sam_perturb(
    params: &mut ParamSet,
    grads: &Gradients,
    rho: f32,
) -> Result<ParamSet, OptimError> {
    if !grads.is_finite() {
        return Err(OptimError::NonFiniteGradient);
    }
    let norm = grads.global_norm();
    if norm == 0.0 {
        return Err(OptimError::ZeroGradient);
    }
    let saved = params.clone();
    let scale = (rho as f64 / norm) as f32;
    params.add_scaled(grads, scale);
    Ok(saved)
}

/// A single SAM optimizer step with AdamW as the base update rule.
///
/// Phase 1 takes the gradient at the current weights; phase 2 takes it at
/// the perturbed weights; the weights are restored bit-exactly before the
/// base update consumes the phase-2 gradient. A zero phase-1 gradient falls
/// back to a plain AdamW step. Returns the phase-1 loss.
pub fn sam_step(
    params: &mut ModelParams,
    state: &mut OptimState,
    config: &OptimConfig,
    mut loss_and_grad: impl FnMut(&ModelParams) -> Result<(f64, Gradients), OptimError>,
) -> Result<f64, OptimError> {
    let (loss, g1) = loss_and_grad(params)?;
    if !g1.is_finite() {
        return Err(OptimError::NonFiniteGradient);
    }
    if g1.global_norm() == 0.0 {
        adamw_step(&mut params.set, &g1, state, config)?;
        return Ok(loss);
    }
    let g2 = if config.rho > 0.0 {
        let saved = sam_perturb(&mut params.set, &g1, config.rho)?;
        let res = loss_and_grad(params);
        params.set.copy_from(&saved);
        res?.1
    } else {
        // rho = 0: the perturbation is the zero vector, so evaluate in place.
        loss_and_grad(params)?.1
    };
    state.grad_evals += 1;
    adamw_step(&mut params.set, &g2, state, config)?;
    Ok(loss)
}

/// Plain-SGD variant of the two-phase step, exposed for analytic checks on
/// toy objectives (no moments, no decay): theta -= lr * grad(theta + eps).
pub fn sam_step_sgd(
    params: &mut ParamSet,
    rho: f32,
    lr: f32,
    mut loss_and_grad: impl FnMut(&ParamSet) -> Result<(f64, Gradients), OptimError>,
) -> Result<f64, OptimError> {
    let (loss, g1) = loss_and_grad(params)?;
    if g1.global_norm() == 0.0 {
        params.add_scaled(&g1, -lr);
        return Ok(loss);
    }
    let g2 = if rho > 0.0 {
        let saved = sam_perturb(params, &g1, rho)?;
        let res = loss_and_grad(params);
        params.copy_from(&saved);
        res?.1
    } else {
        loss_and_grad(params)?.1
    };
    params.add_scaled(&g2, -lr);
    Ok(loss)
}
