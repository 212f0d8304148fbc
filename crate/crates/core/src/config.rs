use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::satisfaction::SatisfactionFn;

/// Closed interval sampled uniformly; `lo == hi` is a point mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformRange {
    pub lo: f64,
    pub hi: f64,
}

impl UniformRange {
    pub fn new(lo: f64, hi: f64) -> Self {
        UniformRange { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        UniformRange { lo: x, hi: x }
    }

    fn check(&self, field: &str) -> Result<(), ConfigError> {
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.lo > self.hi {
            return Err(ConfigError::invalid(
                field,
                format!("bad range [{}, {}]", self.lo, self.hi),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserParamConfig {
    pub quality_sensitivity: UniformRange,
    pub preference_drift: UniformRange,
}

/// Parameters shared by every provider in one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderGroupConfig {
    pub name: String,
    pub size: usize,
    pub satisfaction_fn: SatisfactionFn,
    /// Each provider's offset is drawn from
    /// `[offset_x0, offset_x0 + offset_x0_spread]`.
    pub offset_x0_spread: f64,
    pub no_rec_drift: f64,
    pub exposure_sensitivity: f64,
    pub feedback_sensitivity: f64,
    pub preference_drift: f64,
    pub viability_threshold: f64,
    pub creation_rate: f64,
    pub quality_mean: f64,
    pub quality_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub num_topics: usize,
    pub num_users: usize,
    pub num_providers: usize,
    pub initial_docs_per_provider: usize,
    pub horizon: usize,
    pub user_params: UserParamConfig,
    pub provider_groups: Vec<ProviderGroupConfig>,
    pub user_discount: f64,
    pub provider_discount: f64,
    pub seed: u64,
}

fn nonneg(field: &str, x: f64) -> Result<(), ConfigError> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(
            field,
            format!("must be finite and >= 0, got {x}"),
        ))
    }
}

fn unit_interval(field: &str, x: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(ConfigError::invalid(
            field,
            format!("must lie in [0, 1], got {x}"),
        ))
    }
}

impl EnvironmentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.num_topics < 2 {
            return Err(ConfigError::TooFewTopics(self.num_topics));
        }
        if self.num_users == 0 {
            return Err(ConfigError::invalid("num_users", "must be at least 1"));
        }
        if self.num_providers == 0 {
            return Err(ConfigError::invalid("num_providers", "must be at least 1"));
        }
        if self.initial_docs_per_provider == 0 {
            return Err(ConfigError::invalid(
                "initial_docs_per_provider",
                "must be at least 1, otherwise the candidate set starts empty",
            ));
        }
        if self.horizon == 0 {
            return Err(ConfigError::invalid("horizon", "must be at least 1"));
        }
        let up = &self.user_params;
        up.quality_sensitivity
            .check("user_params.quality_sensitivity")?;
        unit_interval(
            "user_params.quality_sensitivity.lo",
            up.quality_sensitivity.lo,
        )?;
        unit_interval(
            "user_params.quality_sensitivity.hi",
            up.quality_sensitivity.hi,
        )?;
        up.preference_drift.check("user_params.preference_drift")?;
        nonneg("user_params.preference_drift.lo", up.preference_drift.lo)?;
        unit_interval("user_discount", self.user_discount)?;
        unit_interval("provider_discount", self.provider_discount)?;

        if self.provider_groups.is_empty() {
            return Err(ConfigError::invalid(
                "provider_groups",
                "at least one group required",
            ));
        }
        let total: usize = self.provider_groups.iter().map(|g| g.size).sum();
        if total != self.num_providers {
            return Err(ConfigError::invalid(
                "provider_groups",
                format!(
                    "group sizes sum to {total}, num_providers is {}",
                    self.num_providers
                ),
            ));
        }
        for (i, g) in self.provider_groups.iter().enumerate() {
            let f = |name: &str| format!("provider_groups[{i}].{name}");
            g.satisfaction_fn
                .check()
                .map_err(|r| ConfigError::invalid(f("satisfaction_fn"), r))?;
            nonneg(&f("offset_x0_spread"), g.offset_x0_spread)?;
            if !(g.no_rec_drift < 0.0 && g.no_rec_drift.is_finite()) {
                return Err(ConfigError::invalid(
                    f("no_rec_drift"),
                    format!("must be strictly negative, got {}", g.no_rec_drift),
                ));
            }
            nonneg(&f("exposure_sensitivity"), g.exposure_sensitivity)?;
            nonneg(&f("feedback_sensitivity"), g.feedback_sensitivity)?;
            nonneg(&f("preference_drift"), g.preference_drift)?;
            nonneg(&f("creation_rate"), g.creation_rate)?;
            nonneg(&f("quality_std"), g.quality_std)?;
            if !g.viability_threshold.is_finite() {
                return Err(ConfigError::invalid(
                    f("viability_threshold"),
                    "must be finite",
                ));
            }
            if !g.quality_mean.is_finite() {
                return Err(ConfigError::invalid(f("quality_mean"), "must be finite"));
            }
        }
        Ok(())
    }

    /// Parses and validates a JSON document. Unknown fields are rejected.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: EnvironmentConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::Json(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Group index for each provider id, in id order.
    pub fn provider_group_of(&self) -> Vec<usize> {
        self.provider_groups
            .iter()
            .enumerate()
            .flat_map(|(g, cfg)| std::iter::repeat_n(g, cfg.size))
            .collect()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn small_config() -> EnvironmentConfig {
        EnvironmentConfig {
            num_topics: 3,
            num_users: 4,
            num_providers: 2,
            initial_docs_per_provider: 3,
            horizon: 5,
            user_params: UserParamConfig {
                quality_sensitivity: UniformRange::new(0.2, 0.5),
                preference_drift: UniformRange::point(0.1),
            },
            provider_groups: vec![ProviderGroupConfig {
                name: "all".into(),
                size: 2,
                satisfaction_fn: SatisfactionFn::saturated_log(1.0, 2.0),
                offset_x0_spread: 1.0,
                no_rec_drift: -0.3,
                exposure_sensitivity: 0.1,
                feedback_sensitivity: 0.2,
                preference_drift: 0.1,
                viability_threshold: 0.0,
                creation_rate: 2.0,
                quality_mean: 0.0,
                quality_std: 0.3,
            }],
            user_discount: 0.99,
            provider_discount: 0.99,
            seed: 1,
        }
    }

    #[test]
    fn small_config_is_valid() {
        small_config().validate().unwrap();
    }

    #[test]
    fn one_topic_rejected() {
        let mut c = small_config();
        c.num_topics = 1;
        assert_eq!(c.validate(), Err(ConfigError::TooFewTopics(1)));
    }

    #[test]
    fn group_sizes_must_sum() {
        let mut c = small_config();
        c.num_providers = 3;
        assert!(matches!(c.validate(), Err(ConfigError::Invalid { .. })));
    }

    #[test]
    fn nonnegative_drift_rejected() {
        let mut c = small_config();
        c.provider_groups[0].no_rec_drift = 0.0;
        let err = c.validate().unwrap_err();
        assert!(err.to_string().contains("provider_groups[0].no_rec_drift"));
    }

    #[test]
    fn json_round_trip() {
        let c = small_config();
        let back = EnvironmentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_fields_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&small_config().to_json()).unwrap();
        v["surprise"] = serde_json::json!(1);
        assert!(matches!(
            EnvironmentConfig::from_json(&v.to_string()),
            Err(ConfigError::Json(_))
        ));
    }
}
