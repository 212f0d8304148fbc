use crate::tensor::Tensor2D;

/// Receives `(name, shape, values)` for one parameter array.
pub type Visitor<'a> = dyn FnMut(&str, &[usize], &[f64]) + 'a;

/// A bundle of named parameter arrays visited in a fixed order. Gradients
/// use the same type as the model they belong to.
pub trait Parameterized {
    /// Visits `(name, shape, values)` for every parameter array.
    fn visit(&self, prefix: &str, f: &mut Visitor<'_>);

    /// Visits every parameter array mutably, in the same order as `visit`.
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64]));

    /// A structurally identical value with every entry zero.
    fn zeros_like(&self) -> Self
    where
        Self: Sized;

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, _, v| n += v.len());
        n
    }

    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.visit("", &mut |_, _, v| out.extend_from_slice(v));
        out
    }

    /// Overwrites all parameters from a flat slice in visit order.
    fn assign_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        self.visit_mut(&mut |v| {
            let n = v.len();
            v.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        });
        assert_eq!(offset, flat.len(), "flat parameter length mismatch");
    }

    /// `self += scale * other`, matched by visit order.
    fn add_scaled(&mut self, other: &Self, scale: f64)
    where
        Self: Sized,
    {
        let flat = other.flatten();
        let mut offset = 0;
        self.visit_mut(&mut |v| {
            let n = v.len();
            for (x, g) in v.iter_mut().zip(&flat[offset..offset + n]) {
                *x += scale * g;
            }
            offset += n;
        });
    }

    fn scale(&mut self, s: f64) {
        self.visit_mut(&mut |v| v.iter_mut().for_each(|x| *x *= s));
    }

    fn all_finite(&self) -> bool {
        let mut ok = true;
        self.visit("", &mut |_, _, v| ok &= v.iter().all(|x| x.is_finite()));
        ok
    }

    /// Names and shapes of every array, in visit order.
    fn named_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        self.visit("", &mut |n, s, _| out.push((n.to_string(), s.to_vec())));
        out
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

pub(crate) fn visit_tensor(prefix: &str, name: &str, t: &Tensor2D, f: &mut Visitor<'_>) {
    f(&join(prefix, name), &[t.rows, t.cols], &t.data);
}

pub(crate) fn visit_vec(prefix: &str, name: &str, v: &[f64], f: &mut Visitor<'_>) {
    f(&join(prefix, name), &[v.len()], v);
}
