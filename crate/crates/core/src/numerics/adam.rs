//! Adam with decoupled weight decay.

use super::tensor::Tensor;
use super::NumericsError;

/// Optimizer hyperparameters and per-parameter moment state.
///
/// Defaults follow the training configuration this project targets:
/// learning rate 1e-4 and weight decay 1e-3, with the usual
/// (0.9, 0.999, 1e-8) moment constants. Weight decay is decoupled from
/// the moment update (AdamW style).
#[derive(Debug, Clone)]
pub struct AdamState {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(learning_rate: f64, weight_decay: f64) -> Self {
        AdamState {
            learning_rate,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Table-default optimizer: lr 1e-4, weight decay 1e-3.
    pub fn with_defaults() -> Self {
        AdamState::new(1e-4, 1e-3)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update over a parameter list. `params[i]` pairs with
    /// `grads[i]`; a missing gradient leaves that parameter untouched by
    /// the moment update (weight decay still applies).
    ///
    /// Moment buffers are allocated lazily on the first call and must
    /// keep matching shapes afterwards.
    pub fn step(
        &mut self,
        params: &mut [&mut Tensor],
        grads: &[Option<Tensor>],
    ) -> Result<(), NumericsError> {
        if params.len() != grads.len() {
            return Err(NumericsError::ParamCountMismatch {
                params: params.len(),
                grads: grads.len(),
            });
        }
        if self.m.is_empty() {
            self.m = params
                .iter()
                .map(|p| Tensor::zeros(p.rows(), p.cols()))
                .collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() {
            return Err(NumericsError::ParamCountMismatch {
                params: params.len(),
                grads: self.m.len(),
            });
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            if param.shape() != m.shape() {
                return Err(NumericsError::ShapeMismatch {
                    op: "adam_step",
                    lhs: param.shape(),
                    rhs: m.shape(),
                });
            }
            if let Some(g) = grad {
                if g.shape() != param.shape() {
                    return Err(NumericsError::ShapeMismatch {
                        op: "adam_step",
                        lhs: param.shape(),
                        rhs: g.shape(),
                    });
                }
                for i in 0..g.len() {
                    let gi = g.data()[i];
                    m.data_mut()[i] = self.beta1 * m.data()[i] + (1.0 - self.beta1) * gi;
                    v.data_mut()[i] = self.beta2 * v.data()[i] + (1.0 - self.beta2) * gi * gi;
                    let m_hat = m.data()[i] / bc1;
                    let v_hat = v.data()[i] / bc2;
                    param.data_mut()[i] -=
                        self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
                }
            }
            if self.weight_decay != 0.0 {
                let k = self.learning_rate * self.weight_decay;
                for p in param.data_mut() {
                    *p -= k * *p;
                }
            }
            if !param.all_finite() {
                return Err(NumericsError::NonFinite { op: "adam_step" });
            }
        }
        Ok(())
    }
}
