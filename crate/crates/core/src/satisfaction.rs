use serde::{Deserialize, Serialize};

/// Shape of the map from accumulated feedback to provider satisfaction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SatisfactionKind {
    /// `slope * x`
    Linear { slope: f64 },
    /// `scale * ln(1 + x)` for `x >= 0`, continued linearly with slope
    /// `scale` below zero.
    SaturatedLog { scale: f64 },
}

/// Satisfaction as a function of accumulated feedback, shifted by a
/// per-provider offset so that providers can start at different points on
/// the same curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SatisfactionFn {
    pub kind: SatisfactionKind,
    pub offset_x0: f64,
}

impl SatisfactionFn {
    pub fn linear(slope: f64, offset_x0: f64) -> Self {
        SatisfactionFn {
            kind: SatisfactionKind::Linear { slope },
            offset_x0,
        }
    }

    pub fn saturated_log(scale: f64, offset_x0: f64) -> Self {
        SatisfactionFn {
            kind: SatisfactionKind::SaturatedLog { scale },
            offset_x0,
        }
    }

    /// Satisfaction at the given accumulated feedback.
    pub fn value(&self, accumulated_feedback: f64) -> f64 {
        let x = accumulated_feedback + self.offset_x0;
        match self.kind {
            SatisfactionKind::Linear { slope } => slope * x,
            SatisfactionKind::SaturatedLog { scale } => {
                if x >= 0.0 {
                    scale * x.ln_1p()
                } else {
                    scale * x
                }
            }
        }
    }

    /// Checks the curve parameters; returns a description of the problem.
    pub fn check(&self) -> Result<(), String> {
        let p = match self.kind {
            SatisfactionKind::Linear { slope } => slope,
            SatisfactionKind::SaturatedLog { scale } => scale,
        };
        if !(p > 0.0 && p.is_finite()) {
            return Err(format!(
                "curve parameter must be positive and finite, got {p}"
            ));
        }
        if !self.offset_x0.is_finite() {
            return Err("offset_x0 must be finite".into());
        }
        Ok(())
    }
}

/// Free-function form of [`SatisfactionFn::value`].
pub fn satisfaction_value(f: &SatisfactionFn, accumulated_feedback: f64) -> f64 {
    f.value(accumulated_feedback)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn linear_hand_value() {
        assert_eq!(
            satisfaction_value(&SatisfactionFn::linear(2.0, 0.0), 3.0),
            6.0
        );
    }

    #[test]
    fn log_at_origin_is_zero() {
        assert_eq!(SatisfactionFn::saturated_log(1.0, 0.0).value(0.0), 0.0);
    }

    #[test]
    fn log_negative_branch_is_linear() {
        assert_eq!(SatisfactionFn::saturated_log(1.0, 0.0).value(-0.5), -0.5);
    }

    #[test]
    fn offset_shifts_the_argument() {
        let f = SatisfactionFn::saturated_log(2.0, 1.0);
        assert!((f.value(0.0) - 2.0 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn log_is_continuous_and_slope_matched_at_zero() {
        let f = SatisfactionFn::saturated_log(1.5, 0.0);
        let h = 1e-7;
        let left = (f.value(0.0) - f.value(-h)) / h;
        let right = (f.value(h) - f.value(0.0)) / h;
        assert!((left - 1.5).abs() < 1e-6);
        assert!((right - 1.5).abs() < 1e-6);
    }

    #[test]
    fn nonpositive_parameters_rejected() {
        assert!(SatisfactionFn::linear(0.0, 0.0).check().is_err());
        assert!(SatisfactionFn::saturated_log(-1.0, 0.0).check().is_err());
        assert!(SatisfactionFn::saturated_log(1.0, 0.0).check().is_ok());
    }

    fn any_fn() -> impl Strategy<Value = SatisfactionFn> {
        (0.01f64..5.0, -3.0f64..3.0, any::<bool>()).prop_map(|(p, x0, log)| {
            if log {
                SatisfactionFn::saturated_log(p, x0)
            } else {
                SatisfactionFn::linear(p, x0)
            }
        })
    }

    proptest! {
        #[test]
        fn monotone_nondecreasing(f in any_fn(), a in -20.0f64..20.0, b in -20.0f64..20.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(f.value(lo) <= f.value(hi));
        }

        #[test]
        fn log_increments_shrink(scale in 0.01f64..5.0, x in 0.0f64..50.0, dx in 0.01f64..5.0, delta in 0.01f64..5.0) {
            let f = SatisfactionFn::saturated_log(scale, 0.0);
            let near = f.value(x + delta) - f.value(x);
            let far = f.value(x + dx + delta) - f.value(x + dx);
            prop_assert!(far < near);
        }
    }
}
