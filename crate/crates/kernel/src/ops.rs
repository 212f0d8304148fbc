/// Temperature softmax with max-subtraction.
pub fn softmax(logits: &[f64], temperature: f64) -> Vec<f64> {
    assert!(temperature > 0.0, "temperature must be positive");
    if logits.is_empty() {
        return Vec::new();
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits
        .iter()
        .map(|&z| ((z - max) / temperature).exp())
        .collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Log of [`softmax`], computed without forming the probabilities.
pub fn log_softmax(logits: &[f64], temperature: f64) -> Vec<f64> {
    assert!(temperature > 0.0, "temperature must be positive");
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = logits
        .iter()
        .map(|&z| ((z - max) / temperature).exp())
        .sum::<f64>()
        .ln();
    logits
        .iter()
        .map(|&z| (z - max) / temperature - lse)
        .collect()
}

/// Huber loss and its derivative with respect to `pred`.
pub fn huber_loss(pred: f64, target: f64, delta: f64) -> (f64, f64) {
    let e = pred - target;
    if e.abs() <= delta {
        (0.5 * e * e, e)
    } else {
        (delta * (e.abs() - 0.5 * delta), delta * e.signum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn equal_logits_uniform() {
        for t in [0.1, 1.0, 7.0] {
            let p = softmax(&[2.0, 2.0, 2.0, 2.0], t);
            assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-15));
        }
    }

    #[test]
    fn ln2_logits() {
        let p = softmax(&[0.0, 2f64.ln()], 1.0);
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn huge_gap_no_overflow() {
        let p = softmax(&[5.0, 1005.0], 1.0);
        assert!(p[0] < 1e-300 && (p[1] - 1.0).abs() < 1e-15);
        assert!(p.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn huber_branches() {
        assert_eq!(huber_loss(1.3, 1.3, 1.0), (0.0, 0.0));
        assert_eq!(huber_loss(0.5, 0.0, 1.0), (0.125, 0.5));
        assert_eq!(huber_loss(2.0, 0.0, 1.0), (1.5, 1.0));
        assert_eq!(huber_loss(-2.0, 0.0, 1.0), (1.5, -1.0));
    }

    proptest! {
        #[test]
        fn softmax_is_a_distribution(logits in prop::collection::vec(-500.0f64..500.0, 1..40), t in 0.05f64..10.0) {
            let p = softmax(&logits, t);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn log_softmax_agrees(logits in prop::collection::vec(-20.0f64..20.0, 1..10)) {
            let p = softmax(&logits, 1.0);
            let lp = log_softmax(&logits, 1.0);
            for (a, b) in p.iter().zip(&lp) {
                prop_assert!((a.ln() - b).abs() < 1e-9);
            }
        }
    }
}
