//! Summary statistics: mean with standard error, Pearson and Spearman
//! correlation.

use serde::{Deserialize, Serialize};

/// Mean and standard error of the mean. `se` is `None` when fewer than two
/// samples make it undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: Option<f64>,
    pub n: usize,
}

impl MeanSe {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return MeanSe {
                mean: f64::NAN,
                se: None,
                n,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let se = (n >= 2).then(|| {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        });
        MeanSe { mean, se, n }
    }

    /// Standard error, treating an undefined one as zero.
    pub fn se_or_zero(&self) -> f64 {
        self.se.unwrap_or(0.0)
    }
}

/// Root mean square of the standard errors. `None` if any is undefined.
pub fn pooled_se(xs: &[MeanSe]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut sum = 0.0;
    for x in xs {
        sum += x.se?.powi(2);
    }
    Some((sum / xs.len() as f64).sqrt())
}

/// Range of the means (max - min) divided by their pooled standard error.
pub fn spread_in_pooled_se(xs: &[MeanSe]) -> Option<f64> {
    let pooled = pooled_se(xs)?;
    let max = xs.iter().map(|x| x.mean).fold(f64::NEG_INFINITY, f64::max);
    let min = xs.iter().map(|x| x.mean).fold(f64::INFINITY, f64::min);
    if pooled > 0.0 {
        Some((max - min) / pooled)
    } else if max == min {
        Some(0.0)
    } else {
        Some(f64::INFINITY)
    }
}

/// Pearson correlation; `None` with fewer than two points or zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (dx, dy) = (x[i] - mx, y[i] - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len().min(y.len());
    pearson(&ranks(&x[..n]), &ranks(&y[..n]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pooled_se_and_spread() {
        let a = MeanSe {
            mean: 1.0,
            se: Some(0.3),
            n: 10,
        };
        let b = MeanSe {
            mean: 2.0,
            se: Some(0.4),
            n: 10,
        };
        let pooled = pooled_se(&[a, b]).unwrap();
        assert!((pooled - (0.125f64).sqrt()).abs() < 1e-12);
        assert!((spread_in_pooled_se(&[a, b]).unwrap() - 1.0 / pooled).abs() < 1e-12);
        assert_eq!(pooled_se(&[a, MeanSe { se: None, ..b }]), None);
        assert_eq!(pooled_se(&[]), None);
    }

    #[test]
    fn mean_and_se() {
        let m = MeanSe::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        // sample sd = sqrt(5/3), se = sd / 2
        assert!((m.se.unwrap() - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn single_sample_has_undefined_se() {
        let m = MeanSe::of(&[3.0]);
        assert_eq!(m.mean, 3.0);
        assert_eq!(m.se, None);
    }

    #[test]
    fn perfect_anticorrelation() {
        let sat = [1.0, 2.0, 3.0];
        let up = [-1.0, -2.0, -3.0];
        assert!((pearson(&sat, &up).unwrap() + 1.0).abs() < 1e-15);
        assert!((spearman(&sat, &up).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_correlations_are_undefined() {
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[0.5, 0.5, 0.5]), None);
        assert_eq!(pearson(&[1.0], &[2.0]), None);
    }

    #[test]
    fn ties_share_ranks() {
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn spearman_is_rank_based() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 10.0, 100.0, 1000.0];
        assert!((spearman(&x, &y).unwrap() - 1.0).abs() < 1e-15);
        assert!(pearson(&x, &y).unwrap() < 1.0);
    }
}
