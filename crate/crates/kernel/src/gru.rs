//! Three-gate recurrent cell:
//!
//! ```text
//! z  = sigmoid(Wz x + Uz h + bz)
//! r  = sigmoid(Wr x + Ur h + br)
//! n  = tanh(Wn x + Un (r * h) + bn)
//! h' = (1 - z) * n + z * h
//! ```

use rand::Rng;

use crate::error::{check_len, KernelError};
use crate::params::{join, visit_tensor, visit_vec, Parameterized, Visitor};
use crate::tensor::Tensor2D;

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub w: Tensor2D,
    pub u: Tensor2D,
    pub b: Vec<f64>,
}

impl Gate {
    fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        Gate {
            w: Tensor2D::glorot(hidden, input, rng),
            u: Tensor2D::glorot(hidden, hidden, rng),
            b: vec![0.0; hidden],
        }
    }

    fn zeros_like(&self) -> Self {
        Gate {
            w: Tensor2D::zeros(self.w.rows, self.w.cols),
            u: Tensor2D::zeros(self.u.rows, self.u.cols),
            b: vec![0.0; self.b.len()],
        }
    }

    fn preactivation(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        let mut a = self.b.clone();
        self.w.matvec_acc(x, &mut a);
        self.u.matvec_acc(h, &mut a);
        a
    }

    /// Accumulates gradients for a pre-activation gradient `da` and returns
    /// nothing; the caller routes the hidden-state gradient itself.
    fn accumulate(&self, grads: &mut Gate, da: &[f64], x: &[f64], h: &[f64]) {
        grads.w.outer_acc(da, x);
        grads.u.outer_acc(da, h);
        for (b, d) in grads.b.iter_mut().zip(da) {
            *b += d;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruCell {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub update: Gate,
    pub reset: Gate,
    pub candidate: Gate,
}

#[derive(Debug, Clone, PartialEq)]
struct StepRecord {
    x: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
    rh: Vec<f64>,
}

/// Saved activations of a sequence forward pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GruTrace {
    recorded: bool,
    /// `hidden[0]` is the initial zero state; `hidden[t + 1]` follows input `t`.
    hidden: Vec<Vec<f64>>,
    steps: Vec<StepRecord>,
}

impl GruTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Hidden state after consuming the first `t` inputs.
    pub fn state(&self, t: usize) -> &[f64] {
        &self.hidden[t]
    }

    pub fn last_state(&self) -> &[f64] {
        self.hidden.last().expect("trace holds the initial state")
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl GruCell {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        GruCell {
            input_dim,
            hidden_dim,
            update: Gate::new(input_dim, hidden_dim, rng),
            reset: Gate::new(input_dim, hidden_dim, rng),
            candidate: Gate::new(input_dim, hidden_dim, rng),
        }
    }

    pub fn initial_state(&self) -> Vec<f64> {
        vec![0.0; self.hidden_dim]
    }

    fn step_record(&self, x: &[f64], h: &[f64]) -> Result<(Vec<f64>, StepRecord), KernelError> {
        check_len("recurrent input", self.input_dim, x.len())?;
        check_len("recurrent hidden", self.hidden_dim, h.len())?;
        let z: Vec<f64> = self
            .update
            .preactivation(x, h)
            .into_iter()
            .map(sigmoid)
            .collect();
        let r: Vec<f64> = self
            .reset
            .preactivation(x, h)
            .into_iter()
            .map(sigmoid)
            .collect();
        let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
        let n: Vec<f64> = self
            .candidate
            .preactivation(x, &rh)
            .into_iter()
            .map(f64::tanh)
            .collect();
        let next = (0..self.hidden_dim)
            .map(|i| (1.0 - z[i]) * n[i] + z[i] * h[i])
            .collect();
        Ok((
            next,
            StepRecord {
                x: x.to_vec(),
                z,
                r,
                n,
                rh,
            },
        ))
    }

    /// One recurrence step.
    pub fn step(&self, x: &[f64], h_prev: &[f64]) -> Result<Vec<f64>, KernelError> {
        Ok(self.step_record(x, h_prev)?.0)
    }

    /// Final state after consuming `inputs` from the zero state.
    pub fn encode(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>, KernelError> {
        inputs
            .iter()
            .try_fold(self.initial_state(), |h, x| self.step(x, &h))
    }

    pub fn forward_sequence(&self, inputs: &[Vec<f64>]) -> Result<GruTrace, KernelError> {
        let mut hidden = Vec::with_capacity(inputs.len() + 1);
        hidden.push(self.initial_state());
        let mut steps = Vec::with_capacity(inputs.len());
        for x in inputs {
            let (next, rec) = self.step_record(x, hidden.last().unwrap())?;
            hidden.push(next);
            steps.push(rec);
        }
        Ok(GruTrace {
            recorded: true,
            hidden,
            steps,
        })
    }

    /// Backpropagation through time. `grad_states[t]` is the loss gradient
    /// with respect to `trace.state(t)`, for `t` in `0..=len`. Gradients on
    /// the initial state are ignored.
    pub fn backward(
        &self,
        trace: &GruTrace,
        grad_states: &[Vec<f64>],
        grads: &mut GruCell,
    ) -> Result<(), KernelError> {
        if !trace.recorded {
            return Err(KernelError::NoForwardRecord);
        }
        check_len(
            "recurrent state gradients",
            trace.len() + 1,
            grad_states.len(),
        )?;
        let hd = self.hidden_dim;
        let mut carry = vec![0.0; hd];
        for t in (0..trace.len()).rev() {
            let rec = &trace.steps[t];
            let h = &trace.hidden[t];
            let dh: Vec<f64> = carry
                .iter()
                .zip(&grad_states[t + 1])
                .map(|(a, b)| a + b)
                .collect();

            let mut dh_prev = vec![0.0; hd];
            let mut da_z = vec![0.0; hd];
            let mut da_n = vec![0.0; hd];
            for i in 0..hd {
                let (z, n) = (rec.z[i], rec.n[i]);
                dh_prev[i] = dh[i] * z;
                da_z[i] = dh[i] * (h[i] - n) * z * (1.0 - z);
                da_n[i] = dh[i] * (1.0 - z) * (1.0 - n * n);
            }
            self.candidate
                .accumulate(&mut grads.candidate, &da_n, &rec.x, &rec.rh);
            let mut d_rh = vec![0.0; hd];
            self.candidate.u.matvec_t_acc(&da_n, &mut d_rh);
            let mut da_r = vec![0.0; hd];
            for i in 0..hd {
                let r = rec.r[i];
                dh_prev[i] += d_rh[i] * r;
                da_r[i] = d_rh[i] * h[i] * r * (1.0 - r);
            }
            self.update.accumulate(&mut grads.update, &da_z, &rec.x, h);
            self.reset.accumulate(&mut grads.reset, &da_r, &rec.x, h);
            self.update.u.matvec_t_acc(&da_z, &mut dh_prev);
            self.reset.u.matvec_t_acc(&da_r, &mut dh_prev);
            carry = dh_prev;
        }
        Ok(())
    }
}

impl Parameterized for GruCell {
    fn visit(&self, prefix: &str, f: &mut Visitor<'_>) {
        for (name, g) in [
            ("update", &self.update),
            ("reset", &self.reset),
            ("candidate", &self.candidate),
        ] {
            let p = join(prefix, name);
            visit_tensor(&p, "w", &g.w, f);
            visit_tensor(&p, "u", &g.u, f);
            visit_vec(&p, "b", &g.b, f);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        for g in [&mut self.update, &mut self.reset, &mut self.candidate] {
            f(&mut g.w.data);
            f(&mut g.u.data);
            f(&mut g.b);
        }
    }

    fn zeros_like(&self) -> Self {
        GruCell {
            input_dim: self.input_dim,
            hidden_dim: self.hidden_dim,
            update: self.update.zeros_like(),
            reset: self.reset.zeros_like(),
            candidate: self.candidate.zeros_like(),
        }
    }
}
