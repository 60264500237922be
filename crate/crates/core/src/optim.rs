//! First-order optimizers over a flat parameter vector.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    PlainSgd,
    AdaptiveMoment { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub const fn adam() -> Self {
        Self::AdaptiveMoment {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn state(&self, len: usize) -> OptimizerState {
        OptimizerState {
            method: *self,
            t: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

impl Default for Optimizer {
    fn default() -> Self {
        Self::adam()
    }
}

/// Step-size schedule over a fixed iteration budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSchedule {
    /// The base step size on every iteration.
    Constant,
    /// The base step size for the first half of the budget, then a linear ramp
    /// down that reaches `base / (T - T/2)` on the last iteration.
    #[default]
    Anneal,
}

impl StepSchedule {
    /// Step size for the 0-based iteration `t` out of `total`.
    pub fn step_size(&self, base: f64, t: usize, total: usize) -> f64 {
        match self {
            Self::Constant => base,
            Self::Anneal => {
                let hold = total / 2;
                if t < hold {
                    base
                } else {
                    base * (total - t) as f64 / (total - hold) as f64
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    method: Optimizer,
    t: u32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl OptimizerState {
    /// One descent step `params -= lr * direction(grad)`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        debug_assert_eq!(params.len(), grad.len());
        match self.method {
            Optimizer::PlainSgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            Optimizer::AdaptiveMoment { beta1, beta2, eps } => {
                self.t += 1;
                let bc1 = 1.0 - beta1.powi(self.t as i32);
                let bc2 = 1.0 - beta2.powi(self.t as i32);
                for i in 0..params.len() {
                    let g = grad[i];
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
                    let m_hat = self.m[i] / bc1;
                    let v_hat = self.v[i] / bc2;
                    params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
    }
}
