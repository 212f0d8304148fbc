use rand::Rng;

use crate::error::{check_len, KernelError};
use crate::params::{join, visit_tensor, visit_vec, Parameterized, Visitor};
use crate::tensor::Tensor2D;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    ReLU,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::ReLU => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the pre-activation and the output.
    fn derivative(self, pre: f64, out: f64) -> f64 {
        match self {
            Activation::ReLU => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - out * out,
            Activation::Identity => 1.0,
        }
    }
}

/// `activation(W x + b)` with `W` of shape (out, in).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: Tensor2D,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

/// Values saved by a forward pass for the matching backward pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DenseTrace {
    pub input: Vec<f64>,
    pub pre: Vec<f64>,
    pub output: Vec<f64>,
}

impl DenseLayer {
    pub fn new<R: Rng + ?Sized>(
        input: usize,
        output: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        DenseLayer {
            weight: Tensor2D::glorot(output, input, rng),
            bias: vec![0.0; output],
            activation,
        }
    }

    pub fn from_parts(
        weight: Tensor2D,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self, KernelError> {
        check_len("DenseLayer bias", weight.rows, bias.len())?;
        Ok(DenseLayer {
            weight,
            bias,
            activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, KernelError> {
        Ok(self.forward_trace(x)?.output)
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<DenseTrace, KernelError> {
        check_len("dense input", self.input_dim(), x.len())?;
        let mut pre = self.bias.clone();
        self.weight.matvec_acc(x, &mut pre);
        let output = pre.iter().map(|&z| self.activation.apply(z)).collect();
        Ok(DenseTrace {
            input: x.to_vec(),
            pre,
            output,
        })
    }

    /// Accumulates parameter gradients into `grads` and returns the gradient
    /// with respect to the input.
    pub fn backward(
        &self,
        trace: &DenseTrace,
        grad_out: &[f64],
        grads: &mut DenseLayer,
    ) -> Result<Vec<f64>, KernelError> {
        if trace.output.is_empty() && self.output_dim() > 0 {
            return Err(KernelError::NoForwardRecord);
        }
        check_len("dense grad_out", self.output_dim(), grad_out.len())?;
        let delta: Vec<f64> = grad_out
            .iter()
            .zip(trace.pre.iter().zip(&trace.output))
            .map(|(g, (&p, &o))| g * self.activation.derivative(p, o))
            .collect();
        for (b, d) in grads.bias.iter_mut().zip(&delta) {
            *b += d;
        }
        grads.weight.outer_acc(&delta, &trace.input);
        let mut grad_in = vec![0.0; self.input_dim()];
        self.weight.matvec_t_acc(&delta, &mut grad_in);
        Ok(grad_in)
    }
}

impl Parameterized for DenseLayer {
    fn visit(&self, prefix: &str, f: &mut Visitor<'_>) {
        visit_tensor(prefix, "weight", &self.weight, f);
        visit_vec(prefix, "bias", &self.bias, f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        f(&mut self.weight.data);
        f(&mut self.bias);
    }

    fn zeros_like(&self) -> Self {
        DenseLayer {
            weight: Tensor2D::zeros(self.weight.rows, self.weight.cols),
            bias: vec![0.0; self.bias.len()],
            activation: self.activation,
        }
    }
}

/// A stack of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MlpTrace {
    pub layers: Vec<DenseTrace>,
}

impl MlpTrace {
    pub fn output(&self) -> &[f64] {
        self.layers
            .last()
            .map(|l| l.output.as_slice())
            .unwrap_or(&[])
    }
}

impl Mlp {
    /// Hidden layers use `hidden`; the last layer uses `last`.
    pub fn new<R: Rng + ?Sized>(
        input: usize,
        widths: &[usize],
        hidden: Activation,
        last: Activation,
        rng: &mut R,
    ) -> Self {
        let mut layers = Vec::with_capacity(widths.len());
        let mut prev = input;
        for (i, &w) in widths.iter().enumerate() {
            let act = if i + 1 == widths.len() { last } else { hidden };
            layers.push(DenseLayer::new(prev, w, act, rng));
            prev = w;
        }
        Mlp { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.input_dim())
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.output_dim())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, KernelError> {
        let mut h = x.to_vec();
        for l in &self.layers {
            h = l.forward(&h)?;
        }
        Ok(h)
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<MlpTrace, KernelError> {
        let mut traces: Vec<DenseTrace> = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let input = traces.last().map_or(x, |t| t.output.as_slice());
            let t = l.forward_trace(input)?;
            traces.push(t);
        }
        Ok(MlpTrace { layers: traces })
    }

    pub fn backward(
        &self,
        trace: &MlpTrace,
        grad_out: &[f64],
        grads: &mut Mlp,
    ) -> Result<Vec<f64>, KernelError> {
        if trace.layers.len() != self.layers.len() {
            return Err(KernelError::NoForwardRecord);
        }
        let mut g = grad_out.to_vec();
        for ((layer, t), gl) in self
            .layers
            .iter()
            .zip(&trace.layers)
            .zip(grads.layers.iter_mut())
            .rev()
        {
            g = layer.backward(t, &g, gl)?;
        }
        Ok(g)
    }
}

impl Parameterized for Mlp {
    fn visit(&self, prefix: &str, f: &mut Visitor<'_>) {
        for (i, l) in self.layers.iter().enumerate() {
            l.visit(&join(prefix, &format!("layer{i}")), f);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        for l in &mut self.layers {
            l.visit_mut(f);
        }
    }

    fn zeros_like(&self) -> Self {
        Mlp {
            layers: self.layers.iter().map(|l| l.zeros_like()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdcheck::finite_difference_check;
    use crate::ops::huber_loss;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_layer_passes_through() {
        let l = DenseLayer::from_parts(Tensor2D::identity(3), vec![0.0; 3], Activation::Identity)
            .unwrap();
        assert_eq!(l.forward(&[1.0, -2.0, 3.5]).unwrap(), vec![1.0, -2.0, 3.5]);
    }

    #[test]
    fn relu_rectifies() {
        let l =
            DenseLayer::from_parts(Tensor2D::identity(2), vec![0.0; 2], Activation::ReLU).unwrap();
        assert_eq!(l.forward(&[-1.0, 2.0]).unwrap(), vec![0.0, 2.0]);
    }

    #[test]
    fn hand_matmul() {
        let w = Tensor2D::from_vec(1, 2, vec![1.0, 2.0]).unwrap();
        let l = DenseLayer::from_parts(w, vec![0.5], Activation::Identity).unwrap();
        assert_eq!(l.forward(&[1.0, 1.0]).unwrap(), vec![3.5]);
    }

    #[test]
    fn wrong_input_length_is_shape_error() {
        let l =
            DenseLayer::from_parts(Tensor2D::identity(2), vec![0.0; 2], Activation::ReLU).unwrap();
        assert!(matches!(l.forward(&[1.0]), Err(KernelError::Shape { .. })));
    }

    #[test]
    fn backward_without_forward_is_usage_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mlp = Mlp::new(3, &[4, 1], Activation::ReLU, Activation::Identity, &mut rng);
        let mut g = mlp.zeros_like();
        assert_eq!(
            mlp.backward(&MlpTrace::default(), &[1.0], &mut g),
            Err(KernelError::NoForwardRecord)
        );
    }

    fn huber_of_mlp(mlp: &Mlp, x: &[f64], target: f64) -> (f64, Mlp) {
        let trace = mlp.forward_trace(x).unwrap();
        let (loss, dl) = huber_loss(trace.output()[0], target, 1.0);
        let mut grads = mlp.zeros_like();
        mlp.backward(&trace, &[dl], &mut grads).unwrap();
        (loss, grads)
    }

    #[test]
    fn huber_of_dense_matches_finite_differences() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mlp = Mlp::new(
                5,
                &[8, 6, 1],
                Activation::Tanh,
                Activation::Identity,
                &mut rng,
            );
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let report = finite_difference_check(&mlp, |m| huber_of_mlp(m, &x, 3.0), 1e-5);
            assert!(report.max_relative_error < 1e-4, "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn constant_loss_gives_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mlp = Mlp::new(3, &[4, 1], Activation::ReLU, Activation::Identity, &mut rng);
        let trace = mlp.forward_trace(&[0.1, 0.2, 0.3]).unwrap();
        let mut g = mlp.zeros_like();
        mlp.backward(&trace, &[0.0], &mut g).unwrap();
        assert!(g.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mlp = Mlp::new(
            4,
            &[7, 7, 1],
            Activation::ReLU,
            Activation::Identity,
            &mut rng,
        );
        let x = [0.3, -0.2, 0.9, 0.0];
        assert_eq!(huber_of_mlp(&mlp, &x, 1.0), huber_of_mlp(&mlp, &x, 1.0));
    }
}
