use ecosim_kernel::{
    finite_difference_check, huber_loss, Activation, AdagradState, Checkpoint, GruCell, Mlp,
    Parameterized, Visitor,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A recurrent encoder feeding a small head, the shape used by the
/// utility models downstream.
#[derive(Debug, Clone, PartialEq)]
struct Stack {
    gru: GruCell,
    head: Mlp,
}

impl Parameterized for Stack {
    fn visit(&self, prefix: &str, f: &mut Visitor<'_>) {
        self.gru.visit(&format!("{prefix}gru"), f);
        self.head.visit(&format!("{prefix}head"), f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.gru.visit_mut(f);
        self.head.visit_mut(f);
    }

    fn zeros_like(&self) -> Self {
        Stack {
            gru: self.gru.zeros_like(),
            head: self.head.zeros_like(),
        }
    }
}

impl Stack {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Stack {
            gru: GruCell::new(3, 5, &mut rng),
            head: Mlp::new(5, &[4, 1], Activation::ReLU, Activation::Identity, &mut rng),
        }
    }

    /// Huber loss of the head's output on the final state, against `target`.
    fn loss_and_grad(&self, seq: &[Vec<f64>], target: f64) -> (f64, Stack) {
        let mut grads = self.zeros_like();
        let trace = self.gru.forward_sequence(seq).unwrap();
        let ht = self.head.forward_trace(trace.last_state()).unwrap();
        let (l, dl) = huber_loss(ht.output()[0], target, 0.05);
        let g_state = self.head.backward(&ht, &[dl], &mut grads.head).unwrap();
        let mut grad_states = vec![vec![0.0; 5]; seq.len() + 1];
        grad_states[seq.len()] = g_state;
        self.gru
            .backward(&trace, &grad_states, &mut grads.gru)
            .unwrap();
        (l, grads)
    }
}

fn sequence(seed: u64) -> Vec<Vec<f64>> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..4)
        .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

#[test]
fn composed_model_gradients_check_out() {
    for seed in 0..5 {
        let model = Stack::new(seed);
        let seq = sequence(seed + 100);
        let report = finite_difference_check(&model, |m| m.loss_and_grad(&seq, 0.01), 1e-5);
        assert!(report.passes(1e-4), "seed {seed}: {report:?}");
    }
}

#[test]
fn adagrad_fits_a_linear_map() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mlp = Mlp::new(
        2,
        &[1],
        Activation::Identity,
        Activation::Identity,
        &mut rng,
    );
    let data: Vec<([f64; 2], f64)> = (0..20)
        .map(|i| {
            let x = [i as f64 / 10.0 - 1.0, ((i * 7) % 20) as f64 / 10.0 - 1.0];
            (x, 0.5 * x[0] - 0.25 * x[1] + 0.1)
        })
        .collect();
    let mut opt = AdagradState::for_model(&mlp, 0.1);
    let mse = |m: &Mlp| {
        data.iter()
            .map(|(x, y)| (m.forward(x).unwrap()[0] - y).powi(2))
            .sum::<f64>()
            / 20.0
    };
    let before = mse(&mlp);
    for _ in 0..2000 {
        let mut grads = mlp.zeros_like();
        for (x, y) in &data {
            let t = mlp.forward_trace(x).unwrap();
            let d = 2.0 * (t.output()[0] - y) / 20.0;
            mlp.backward(&t, &[d], &mut grads).unwrap();
        }
        opt.step(&mut mlp, &grads).unwrap();
    }
    let after = mse(&mlp);
    assert!(after < 1e-6 && after < before, "mse {before} -> {after}");
}

#[test]
fn checkpoint_restores_a_composite() {
    let a = Stack::new(1);
    let mut ck = Checkpoint::from_model("gru", &a.gru);
    ck.append("head", &a.head);
    let bytes = ck.to_bytes();
    let back = Checkpoint::from_bytes(&bytes).unwrap();
    let mut b = Stack::new(2);
    assert_ne!(a, b);
    back.load_into("gru", &mut b.gru).unwrap();
    back.load_into("head", &mut b.head).unwrap();
    assert_eq!(a, b);
    assert_eq!(back.to_bytes(), bytes);
}
