//! Parameter update rules: plain SGD and Adam.

use serde::{Deserialize, Serialize};

use super::{DuelingNet, LayerGrads, NeuralError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate: 1e-4,
        }
    }
}

/// `p <- p - lr * g`, elementwise.
pub fn sgd_update(params: &mut [f64], grads: &[f64], lr: f64) -> Result<(), NeuralError> {
    if params.len() != grads.len() {
        return Err(NeuralError::ShapeMismatch {
            expected: format!("{} gradients", params.len()),
            got: format!("{}", grads.len()),
        });
    }
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= lr * g;
    }
    Ok(())
}

/// Stateful optimizer over a network's flat parameter vector.
#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Optimizer {
    pub fn new(config: OptimizerConfig, param_count: usize) -> Self {
        Self {
            config,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            t: 0,
        }
    }

    pub fn config(&self) -> OptimizerConfig {
        self.config
    }

    pub fn step(&mut self, net: &mut DuelingNet, grads: &LayerGrads) -> Result<(), NeuralError> {
        let g = grads.flat();
        let mut p = net.params_flat();
        if g.len() != p.len() {
            return Err(NeuralError::ShapeMismatch {
                expected: format!("{} gradients", p.len()),
                got: format!("{}", g.len()),
            });
        }
        match self.config.kind {
            OptimizerKind::Sgd => sgd_update(&mut p, &g, self.config.learning_rate)?,
            OptimizerKind::Adam => {
                self.t += 1;
                let b1t = 1.0 - ADAM_BETA1.powi(self.t as i32);
                let b2t = 1.0 - ADAM_BETA2.powi(self.t as i32);
                for i in 0..p.len() {
                    self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * g[i];
                    self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                    let m_hat = self.m[i] / b1t;
                    let v_hat = self.v[i] / b2t;
                    p[i] -= self.config.learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPS);
                }
            }
        }
        net.set_params_flat(&p)
    }
}
