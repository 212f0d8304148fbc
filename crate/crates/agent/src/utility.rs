//! Recurrent utility models: encode an interaction history into a hidden
//! state and regress the discounted return of the next action onto
//! `[state, action features]`.

use ecosim_kernel::{huber_loss, Activation, GruCell, KernelError, Mlp, Parameterized, Visitor};
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct UtilityModel {
    pub encoder: GruCell,
    pub head: Mlp,
}

/// One trajectory prepared for regression. `inputs[t]` is what step `t`
/// adds to the history; the prediction at step `t` uses the state built from
/// `inputs[..t]` together with `actions[t]`, and is regressed onto
/// `targets[t]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UtilitySequence {
    pub inputs: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl UtilitySequence {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

impl UtilityModel {
    /// `head_widths` are the hidden ReLU layers; a linear scalar output is
    /// appended.
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        action_dim: usize,
        hidden_dim: usize,
        head_widths: &[usize],
        rng: &mut R,
    ) -> Self {
        let encoder = GruCell::new(input_dim, hidden_dim, rng);
        let mut widths = head_widths.to_vec();
        widths.push(1);
        let head = Mlp::new(
            hidden_dim + action_dim,
            &widths,
            Activation::ReLU,
            Activation::Identity,
            rng,
        );
        UtilityModel { encoder, head }
    }

    pub fn hidden_dim(&self) -> usize {
        self.encoder.hidden_dim
    }

    pub fn encode(&self, history: &[Vec<f64>]) -> Result<Vec<f64>, KernelError> {
        self.encoder.encode(history)
    }

    pub fn predict(&self, state: &[f64], action: &[f64]) -> Result<f64, KernelError> {
        let mut x = Vec::with_capacity(state.len() + action.len());
        x.extend_from_slice(state);
        x.extend_from_slice(action);
        Ok(self.head.forward(&x)?[0])
    }

    /// Hidden states after each prefix of `inputs`, starting with the empty
    /// history.
    pub fn states(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, KernelError> {
        let trace = self.encoder.forward_sequence(inputs)?;
        Ok((0..=trace.len()).map(|t| trace.state(t).to_vec()).collect())
    }

    /// Mean Huber loss over every prediction in `seqs`.
    pub fn loss(&self, seqs: &[UtilitySequence], delta: f64) -> Result<f64, KernelError> {
        let mut total = 0.0;
        let mut n = 0usize;
        for s in seqs {
            let states = self.states(&s.inputs)?;
            for t in 0..s.len() {
                total += huber_loss(
                    self.predict(&states[t], &s.actions[t])?,
                    s.targets[t],
                    delta,
                )
                .0;
                n += 1;
            }
        }
        Ok(if n == 0 { 0.0 } else { total / n as f64 })
    }

    /// Mean Huber loss and its gradient with respect to every parameter.
    pub fn loss_and_grad(
        &self,
        seqs: &[UtilitySequence],
        delta: f64,
    ) -> Result<(f64, UtilityModel), KernelError> {
        let mut grads = self.zeros_like();
        let n: usize = seqs.iter().map(|s| s.len()).sum();
        if n == 0 {
            return Ok((0.0, grads));
        }
        let inv_n = 1.0 / n as f64;
        let hd = self.hidden_dim();
        let mut total = 0.0;
        for s in seqs {
            let trace = self.encoder.forward_sequence(&s.inputs[..s.len()])?;
            let mut grad_states = vec![vec![0.0; hd]; trace.len() + 1];
            for t in 0..s.len() {
                let mut x = trace.state(t).to_vec();
                x.extend_from_slice(&s.actions[t]);
                let ht = self.head.forward_trace(&x)?;
                let (l, dl) = huber_loss(ht.output()[0], s.targets[t], delta);
                total += l;
                let gin = self.head.backward(&ht, &[dl * inv_n], &mut grads.head)?;
                grad_states[t].copy_from_slice(&gin[..hd]);
            }
            self.encoder
                .backward(&trace, &grad_states, &mut grads.encoder)?;
        }
        Ok((total * inv_n, grads))
    }
}

impl Parameterized for UtilityModel {
    fn visit(&self, prefix: &str, f: &mut Visitor<'_>) {
        let p = |n: &str| {
            if prefix.is_empty() {
                n.to_string()
            } else {
                format!("{prefix}.{n}")
            }
        };
        self.encoder.visit(&p("encoder"), f);
        self.head.visit(&p("head"), f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.encoder.visit_mut(f);
        self.head.visit_mut(f);
    }

    fn zeros_like(&self) -> Self {
        UtilityModel {
            encoder: self.encoder.zeros_like(),
            head: self.head.zeros_like(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ecosim_core::{Purpose, RngStream};
    use ecosim_kernel::{finite_difference_check, AdagradState};

    fn model(seed: u64) -> UtilityModel {
        let mut rng = RngStream::new(seed, Purpose::Test, 0, 0);
        UtilityModel::new(4, 3, 8, &[8, 8, 4], &mut rng)
    }

    fn random_sequence(rng: &mut RngStream, len: usize, target: Option<f64>) -> UtilitySequence {
        let v = |rng: &mut RngStream, n: usize| {
            (0..n)
                .map(|_| rng.uniform_range(-1.0, 1.0))
                .collect::<Vec<_>>()
        };
        UtilitySequence {
            inputs: (0..len).map(|_| v(rng, 4)).collect(),
            actions: (0..len).map(|_| v(rng, 3)).collect(),
            targets: (0..len)
                .map(|_| target.unwrap_or_else(|| rng.uniform_range(-3.0, 3.0)))
                .collect(),
        }
    }

    #[test]
    fn empty_history_is_zero_state() {
        assert_eq!(model(0).encode(&[]).unwrap(), vec![0.0; 8]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..5 {
            let m = model(seed);
            let mut rng = RngStream::new(seed, Purpose::Test, 1, 0);
            // Targets and Huber delta at 1e-2 scale keep the loss small, so
            // its roundoff stays below the checker's 1e-8 denominator floor.
            let seqs: Vec<_> = (0..3)
                .map(|i| {
                    let mut s = random_sequence(&mut rng, 2 + i, None);
                    s.targets.iter_mut().for_each(|t| *t *= 0.01);
                    s
                })
                .collect();
            let report =
                finite_difference_check(&m, |m| m.loss_and_grad(&seqs, 0.01).unwrap(), 1e-5);
            assert!(report.passes(1e-4), "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn converges_to_constant_target() {
        let mut m = model(3);
        let mut rng = RngStream::new(3, Purpose::Test, 2, 0);
        let seqs: Vec<_> = (0..8)
            .map(|_| random_sequence(&mut rng, 5, Some(1.7)))
            .collect();
        let mut opt = AdagradState::for_model(&m, 0.05);
        let before = m.loss(&seqs, 1.0).unwrap();
        for _ in 0..400 {
            let (_, g) = m.loss_and_grad(&seqs, 1.0).unwrap();
            opt.step(&mut m, &g).unwrap();
        }
        assert!(m.loss(&seqs, 1.0).unwrap() < before);
        for s in &seqs {
            let states = m.states(&s.inputs).unwrap();
            for t in 0..s.len() {
                let p = m.predict(&states[t], &s.actions[t]).unwrap();
                assert!((p - 1.7).abs() < 0.05, "prediction {p}");
            }
        }
    }

    #[test]
    fn loss_matches_loss_and_grad() {
        let m = model(4);
        let mut rng = RngStream::new(4, Purpose::Test, 3, 0);
        let seqs: Vec<_> = (0..3).map(|_| random_sequence(&mut rng, 4, None)).collect();
        let a = m.loss(&seqs, 1.0).unwrap();
        let (b, _) = m.loss_and_grad(&seqs, 1.0).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}
