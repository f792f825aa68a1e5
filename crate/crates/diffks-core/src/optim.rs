//! Adam with bias correction, plus global-norm gradient clipping.

use std::fmt;

use crate::model::ParamGroup;
use crate::tensor::dot_slices;

#[derive(Debug)]
pub enum OptimError {
    /// A parameter received a NaN/Inf gradient; training must not continue.
    NonFiniteGrad { param: String },
}

impl fmt::Display for OptimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OptimError::NonFiniteGrad { param } => {
                write!(f, "non-finite gradient in parameter {param}")
            }
        }
    }
}

impl std::error::Error for OptimError {}

#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Adam {
        Adam { learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, step: 0 }
    }

    /// Scale all gradients down if their global L2 norm exceeds `max_norm`.
    /// Returns the pre-clip norm.
    pub fn clip_global_norm(groups: &[ParamGroup], max_norm: f64) -> f64 {
        let mut sq = 0.0;
        for g in groups {
            for e in &g.entries {
                if let Some(grad) = e.tensor.grad() {
                    sq += dot_slices(&grad, &grad);
                }
            }
        }
        let norm = sq.sqrt();
        if norm > max_norm && norm > 0.0 {
            let factor = max_norm / norm;
            for g in groups {
                for e in &g.entries {
                    if let Some(mut grad) = e.tensor.grad() {
                        for x in grad.iter_mut() {
                            *x *= factor;
                        }
                        e.tensor.set_grad(grad);
                    }
                }
            }
        }
        norm
    }

    /// One bias-corrected update over every unfrozen entry; parameters with
    /// no gradient are treated as zero-gradient. All grads are zeroed
    /// afterwards.
    pub fn step(&mut self, groups: &mut [ParamGroup]) -> Result<(), OptimError> {
        // fail fast before touching any moments
        for g in groups.iter() {
            for e in &g.entries {
                if let Some(grad) = e.tensor.grad() {
                    if grad.iter().any(|x| !x.is_finite()) {
                        return Err(OptimError::NonFiniteGrad { param: e.name.clone() });
                    }
                }
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for g in groups.iter_mut() {
            for e in g.entries.iter_mut() {
                let grad = match e.tensor.grad() {
                    Some(g) => g,
                    None => vec![0.0; e.tensor.len()],
                };
                if !e.frozen {
                    let mut values = e.tensor.to_vec();
                    for i in 0..values.len() {
                        let gi = grad[i];
                        e.moment1[i] = self.beta1 * e.moment1[i] + (1.0 - self.beta1) * gi;
                        e.moment2[i] = self.beta2 * e.moment2[i] + (1.0 - self.beta2) * gi * gi;
                        let mhat = e.moment1[i] / c1;
                        let vhat = e.moment2[i] / c2;
                        values[i] -= self.learning_rate * mhat / (vhat.sqrt() + self.epsilon);
                    }
                    e.tensor.set_values(&values);
                }
                e.tensor.zero_grad();
            }
        }
        Ok(())
    }
}
