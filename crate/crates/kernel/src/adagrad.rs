use crate::error::{check_len, KernelError};
use crate::params::Parameterized;

pub const ADAGRAD_EPSILON: f64 = 1e-8;

/// Per-parameter Adagrad: `acc += g^2; theta -= lr * g / (sqrt(acc) + eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdagradState {
    pub learning_rate: f64,
    pub epsilon: f64,
    pub accumulators: Vec<f64>,
}

impl AdagradState {
    pub fn new(num_params: usize, learning_rate: f64) -> Self {
        AdagradState {
            learning_rate,
            epsilon: ADAGRAD_EPSILON,
            accumulators: vec![0.0; num_params],
        }
    }

    pub fn for_model<P: Parameterized>(model: &P, learning_rate: f64) -> Self {
        Self::new(model.num_params(), learning_rate)
    }

    /// Starts every accumulator at `initial` instead of zero, which keeps
    /// early steps proportional to the gradient instead of a full `lr`.
    pub fn with_initial_accumulator(mut self, initial: f64) -> Self {
        self.accumulators.iter_mut().for_each(|a| *a = initial);
        self
    }

    /// Flat-slice update.
    pub fn step_slice(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), KernelError> {
        check_len("adagrad params", self.accumulators.len(), params.len())?;
        check_len("adagrad grads", self.accumulators.len(), grads.len())?;
        for ((p, &g), acc) in params
            .iter_mut()
            .zip(grads)
            .zip(self.accumulators.iter_mut())
        {
            *acc += g * g;
            *p -= self.learning_rate * g / (acc.sqrt() + self.epsilon);
        }
        Ok(())
    }

    pub fn step<P: Parameterized>(&mut self, params: &mut P, grads: &P) -> Result<(), KernelError> {
        let g = grads.flatten();
        check_len(
            "adagrad params",
            self.accumulators.len(),
            params.num_params(),
        )?;
        check_len("adagrad grads", self.accumulators.len(), g.len())?;
        let mut offset = 0;
        let lr = self.learning_rate;
        let eps = self.epsilon;
        let accs = &mut self.accumulators;
        params.visit_mut(&mut |v| {
            for (i, p) in v.iter_mut().enumerate() {
                let gi = g[offset + i];
                let acc = &mut accs[offset + i];
                *acc += gi * gi;
                *p -= lr * gi / (acc.sqrt() + eps);
            }
            offset += v.len();
        });
        Ok(())
    }
}
