//! Model inputs built from what the agent can observe.

use ecosim_core::Recommendation;

/// Scale applied to recommendation counts and summed rewards.
pub const COUNT_SCALE: f64 = 0.1;
/// Scale applied to inventory sizes.
pub const INVENTORY_SCALE: f64 = 0.05;

/// One past step of a user's history: topic one-hot followed by the reward.
pub fn user_step_input(topic: usize, reward: f64, num_topics: usize) -> Vec<f64> {
    let mut v = vec![0.0; num_topics + 1];
    v[topic] = 1.0;
    v[num_topics] = reward;
    v
}

pub fn topic_one_hot(topic: usize, num_topics: usize) -> Vec<f64> {
    let mut v = vec![0.0; num_topics];
    v[topic] = 1.0;
    v
}

/// Summary of what happened to a provider's content at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct ProviderStepFeature {
    pub count: usize,
    pub sum_reward: f64,
    /// Topic bag weighted by user reward, normalized by the summed absolute
    /// reward. Zero when there were no recommendations or all rewards were 0.
    pub weighted_topic_bag: Vec<f64>,
    pub inventory_size: usize,
}

impl ProviderStepFeature {
    /// Builds the feature from `(topic, user reward)` pairs.
    pub fn from_pairs<'a, I>(pairs: I, inventory_size: usize, num_topics: usize) -> Self
    where
        I: IntoIterator<Item = (usize, f64)>,
        I::IntoIter: 'a,
    {
        let mut bag = vec![0.0; num_topics];
        let mut count = 0;
        let mut sum = 0.0;
        let mut abs_sum = 0.0;
        for (topic, r) in pairs {
            count += 1;
            sum += r;
            abs_sum += r.abs();
            bag[topic] += r;
        }
        if abs_sum > 0.0 {
            bag.iter_mut().for_each(|b| *b /= abs_sum);
        } else {
            bag.iter_mut().for_each(|b| *b = 0.0);
        }
        ProviderStepFeature {
            count,
            sum_reward: sum,
            weighted_topic_bag: bag,
            inventory_size,
        }
    }

    pub fn from_recommendations(
        recs: &[Recommendation],
        inventory_size: usize,
        num_topics: usize,
    ) -> Self {
        Self::from_pairs(
            recs.iter().map(|r| (r.topic, r.user_reward)),
            inventory_size,
            num_topics,
        )
    }

    /// The same step with recommendation `removed` taken out: the
    /// counterfactual in which that user was shown something else.
    pub fn without(
        recs: &[Recommendation],
        removed: usize,
        inventory_size: usize,
        num_topics: usize,
    ) -> Self {
        Self::from_pairs(
            recs.iter()
                .enumerate()
                .filter(|(i, _)| *i != removed)
                .map(|(_, r)| (r.topic, r.user_reward)),
            inventory_size,
            num_topics,
        )
    }

    /// Scaled model input of length `K + 3`.
    pub fn to_input(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.weighted_topic_bag.len() + 3);
        v.push(self.count as f64 * COUNT_SCALE);
        v.push(self.sum_reward * COUNT_SCALE);
        v.extend_from_slice(&self.weighted_topic_bag);
        v.push(self.inventory_size as f64 * INVENTORY_SCALE);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(topic: usize, user_id: usize, r: f64) -> Recommendation {
        Recommendation {
            doc_id: 0,
            topic,
            user_id,
            user_reward: r,
        }
    }

    #[test]
    fn empty_step_has_zero_bag() {
        let f = ProviderStepFeature::from_recommendations(&[], 7, 3);
        assert_eq!(f.count, 0);
        assert_eq!(f.sum_reward, 0.0);
        assert_eq!(f.weighted_topic_bag, vec![0.0; 3]);
        assert_eq!(f.to_input().len(), 6);
    }

    #[test]
    fn removing_the_only_recommendation_empties_the_step() {
        let recs = [rec(1, 4, 0.6)];
        let f = ProviderStepFeature::without(&recs, 0, 9, 3);
        assert_eq!(f, ProviderStepFeature::from_recommendations(&[], 9, 3));
    }

    #[test]
    fn bag_weights_by_reward() {
        let recs = [rec(0, 0, 0.6), rec(2, 1, 0.2)];
        let f = ProviderStepFeature::from_recommendations(&recs, 5, 3);
        assert_eq!(f.count, 2);
        assert!((f.sum_reward - 0.8).abs() < 1e-15);
        assert!((f.weighted_topic_bag[0] - 0.75).abs() < 1e-15);
        assert!((f.weighted_topic_bag[2] - 0.25).abs() < 1e-15);
        let cf = ProviderStepFeature::without(&recs, 0, 5, 3);
        assert_eq!(cf.count, 1);
        assert_eq!(cf.weighted_topic_bag, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn cancelling_rewards_stay_bounded() {
        let recs = [rec(0, 0, 0.5), rec(1, 1, -0.5)];
        let f = ProviderStepFeature::from_recommendations(&recs, 5, 2);
        assert_eq!(f.sum_reward, 0.0);
        assert!(f.weighted_topic_bag.iter().all(|b| b.abs() <= 1.0));
    }

    #[test]
    fn user_input_layout() {
        assert_eq!(user_step_input(1, -0.25, 3), vec![0.0, 1.0, 0.0, -0.25]);
    }
}
