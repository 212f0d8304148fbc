use crate::params::Parameterized;

#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    pub num_params: usize,
    pub max_relative_error: f64,
    /// Flat index of the worst parameter, if any.
    pub worst_index: Option<usize>,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
}

impl FdReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_relative_error < tolerance
    }
}

/// Compares analytic gradients from `loss_and_grad` with central differences
/// of step `h` on every parameter. Relative error uses the denominator
/// `max(|analytic|, |numeric|, 1e-8)`.
pub fn finite_difference_check<M, F>(model: &M, loss_and_grad: F, h: f64) -> FdReport
where
    M: Parameterized + Clone,
    F: Fn(&M) -> (f64, M),
{
    let (_, grads) = loss_and_grad(model);
    let analytic = grads.flatten();
    let base = model.flatten();
    let mut probe = model.clone();
    let mut flat = base.clone();
    let mut report = FdReport {
        num_params: base.len(),
        max_relative_error: 0.0,
        worst_index: None,
        analytic_at_worst: 0.0,
        numeric_at_worst: 0.0,
    };
    for i in 0..base.len() {
        flat[i] = base[i] + h;
        probe.assign_flat(&flat);
        let plus = loss_and_grad(&probe).0;
        flat[i] = base[i] - h;
        probe.assign_flat(&flat);
        let minus = loss_and_grad(&probe).0;
        flat[i] = base[i];
        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        if rel > report.max_relative_error || report.worst_index.is_none() {
            report.max_relative_error = rel;
            report.worst_index = Some(i);
            report.analytic_at_worst = a;
            report.numeric_at_worst = numeric;
        }
    }
    report
}
