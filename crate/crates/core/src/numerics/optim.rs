//! Gradient-descent update rules over a [`ParameterStore`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::params::ParameterStore;

/// Optimizer selection with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OptimizerSettings {
    Sgd { lr: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerSettings {
    pub fn adam(lr: f64) -> Self {
        OptimizerSettings::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        match self {
            OptimizerSettings::Sgd { lr } => *lr,
            OptimizerSettings::Adam { lr, .. } => *lr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lr = self.learning_rate();
        if !lr.is_finite() || lr < 0.0 {
            return Err(Error::arg(format!("learning rate must be >= 0, got {lr}")));
        }
        if let OptimizerSettings::Adam { beta1, beta2, eps, .. } = self {
            if !(0.0..1.0).contains(beta1) || !(0.0..1.0).contains(beta2) {
                return Err(Error::arg("Adam betas must lie in [0, 1)"));
            }
            if *eps <= 0.0 {
                return Err(Error::arg("Adam eps must be positive"));
            }
        }
        Ok(())
    }
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings::adam(1e-3)
    }
}

/// Stateful optimizer. SGD is stateless; Adam keeps per-entry first and
/// second moment estimates laid out to match the store.
#[derive(Debug)]
pub struct Optimizer {
    settings: OptimizerSettings,
    moments: Option<AdamState>,
}

#[derive(Debug)]
struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Optimizer {
    pub fn new(settings: OptimizerSettings) -> Result<Self> {
        settings.validate()?;
        Ok(Optimizer {
            settings,
            moments: None,
        })
    }

    pub fn settings(&self) -> OptimizerSettings {
        self.settings
    }

    /// Applies one update from the accumulated gradients and zeroes them.
    /// A non-finite gradient aborts the step, naming the parameter.
    pub fn step(&mut self, store: &mut ParameterStore) -> Result<()> {
        for idx in 0..store.len() {
            if store.grad_at(idx).iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "gradient of parameter '{}'",
                    store.name_at(idx)
                )));
            }
        }
        match self.settings {
            OptimizerSettings::Sgd { lr } => {
                for idx in 0..store.len() {
                    let grad = store.grad_at(idx).to_vec();
                    let value = store.value_mut_at(idx);
                    for (p, g) in value.iter_mut().zip(grad) {
                        *p -= lr * g;
                    }
                }
            }
            OptimizerSettings::Adam { lr, beta1, beta2, eps } => {
                let state = self.moments.get_or_insert_with(|| AdamState {
                    m: (0..store.len())
                        .map(|i| vec![0.0; store.grad_at(i).len()])
                        .collect(),
                    v: (0..store.len())
                        .map(|i| vec![0.0; store.grad_at(i).len()])
                        .collect(),
                    t: 0,
                });
                if state.m.len() != store.len() {
                    return Err(Error::arg(
                        "parameter store layout changed between optimizer steps",
                    ));
                }
                state.t += 1;
                let bc1 = 1.0 - beta1.powi(state.t as i32);
                let bc2 = 1.0 - beta2.powi(state.t as i32);
                for idx in 0..store.len() {
                    let grad = store.grad_at(idx).to_vec();
                    let m = &mut state.m[idx];
                    let v = &mut state.v[idx];
                    let value = store.value_mut_at(idx);
                    for k in 0..value.len() {
                        let g = grad[k];
                        m[k] = beta1 * m[k] + (1.0 - beta1) * g;
                        v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
                        let m_hat = m[k] / bc1;
                        let v_hat = v[k] / bc2;
                        value[k] -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        store.zero_grads();
        Ok(())
    }
}
