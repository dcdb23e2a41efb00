//! SGD and Adam with a positivity projection on activation gains.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activations::ActivationParams;
use crate::engine::{ParamId, Tensor};
use crate::nn::ParamStore;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimError {
    #[error("invalid optimizer config: {0}")]
    Config(String),
    #[error("gradient for {id:?} does not match its parameter: {detail}")]
    Misaligned { id: ParamId, detail: String },
}

pub type Result<T> = std::result::Result<T, OptimError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Global gradient-norm clip; off when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_norm: Option<f64>,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl OptimizerConfig {
    pub fn adam(lr: f64) -> Self {
        Self {
            kind: OptimizerKind::Adam,
            lr,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
            clip_norm: None,
        }
    }

    pub fn sgd(lr: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            ..Self::adam(lr)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.eps > 0.0
            && self.clip_norm.is_none_or(|c| c > 0.0);
        if ok {
            Ok(())
        } else {
            Err(OptimError::Config(format!("{self:?}")))
        }
    }
}

/// Optimizer state: config, step counter and (for Adam) first and second
/// moments per parameter.
#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    step: u64,
    m: BTreeMap<ParamId, Vec<f64>>,
    v: BTreeMap<ParamId, Vec<f64>>,
}

/// Floors both gains at the positivity floor.
pub fn project_positive(a: f64, b: f64) -> ActivationParams {
    ActivationParams::projected(a, b)
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            step: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    /// Number of completed steps.
    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update to every parameter that has a gradient, then
    /// projects activation gains onto the positivity floor. Parameters
    /// without a gradient are left untouched.
    pub fn step(&mut self, params: &mut ParamStore, grads: &BTreeMap<ParamId, Tensor>) -> Result<()> {
        for (id, g) in grads {
            let Some(entry) = params.get(*id) else {
                return Err(OptimError::Misaligned {
                    id: *id,
                    detail: "no such parameter".into(),
                });
            };
            if entry.value.shape() != g.shape() {
                return Err(OptimError::Misaligned {
                    id: *id,
                    detail: format!("{:?} vs {:?}", entry.value.shape(), g.shape()),
                });
            }
        }
        let clip = self.clip_scale(grads);
        self.step += 1;
        let c = self.config.clone();
        let t = self.step as i32;
        for (id, g) in grads {
            let w = params.value_mut(*id).expect("checked above").data_mut();
            match c.kind {
                OptimizerKind::Sgd => {
                    for (wi, gi) in w.iter_mut().zip(g.data()) {
                        *wi -= c.lr * gi * clip;
                    }
                }
                OptimizerKind::Adam => {
                    let m = self.m.entry(*id).or_insert_with(|| vec![0.0; g.len()]);
                    let v = self.v.entry(*id).or_insert_with(|| vec![0.0; g.len()]);
                    let bc1 = 1.0 - c.beta1.powi(t);
                    let bc2 = 1.0 - c.beta2.powi(t);
                    for i in 0..w.len() {
                        let gi = g.data()[i] * clip;
                        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
                        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
                        let m_hat = m[i] / bc1;
                        let v_hat = v[i] / bc2;
                        w[i] -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
                    }
                }
            }
        }
        params.project_gains();
        Ok(())
    }

    fn clip_scale(&self, grads: &BTreeMap<ParamId, Tensor>) -> f64 {
        let Some(max_norm) = self.config.clip_norm else {
            return 1.0;
        };
        let norm = grads
            .values()
            .flat_map(|g| g.data())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt();
        if norm > max_norm {
            max_norm / norm
        } else {
            1.0
        }
    }
}
