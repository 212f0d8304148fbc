use serde::{Deserialize, Serialize};

/// A real vector over the K topics: user and provider preferences, or a
/// content topic when one-hot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TopicVector(pub Vec<f64>);

impl TopicVector {
    pub fn zeros(k: usize) -> Self {
        TopicVector(vec![0.0; k])
    }

    pub fn one_hot(index: usize, k: usize) -> Self {
        let mut v = vec![0.0; k];
        v[index] = 1.0;
        TopicVector(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &TopicVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Returns the unit vector in the same direction, or `None` for the zero
    /// vector (or a vector too small to normalize).
    pub fn normalized(&self) -> Option<TopicVector> {
        let n = self.norm();
        if n > 0.0 && n.is_finite() {
            Some(TopicVector(self.0.iter().map(|x| x / n).collect()))
        } else {
            None
        }
    }

    /// Index of the hot entry when this is a one-hot vector.
    pub fn hot_index(&self) -> Option<usize> {
        let mut found = None;
        for (i, &x) in self.0.iter().enumerate() {
            if x == 1.0 {
                if found.is_some() {
                    return None;
                }
                found = Some(i);
            } else if x != 0.0 {
                return None;
            }
        }
        found
    }
}

impl std::ops::Index<usize> for TopicVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_round_trips_index() {
        assert_eq!(TopicVector::one_hot(3, 5).hot_index(), Some(3));
        assert_eq!(TopicVector(vec![0.5, 0.5]).hot_index(), None);
        assert_eq!(TopicVector(vec![1.0, 1.0]).hot_index(), None);
        assert_eq!(TopicVector::zeros(3).hot_index(), None);
    }

    #[test]
    fn zero_vector_does_not_normalize() {
        assert!(TopicVector::zeros(4).normalized().is_none());
    }
}
