//! Built-in scenarios and scenario files.
//!
//! Concrete dynamics parameters (sensitivities, drift, thresholds, creation
//! rate) are artifact choices tuned so that the qualitative effects under
//! study are visible at desk scale; only the population sizes, topic count,
//! horizon and discounts follow the original experimental setup.

use std::path::Path;

use ecosim_core::{
    EnvironmentConfig, ProviderGroupConfig, SatisfactionFn, UniformRange, UserParamConfig,
};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    SaturatedLog,
    Linear,
    SubgroupInit,
    SubgroupSlope,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 4] = [
        ScenarioName::SaturatedLog,
        ScenarioName::Linear,
        ScenarioName::SubgroupInit,
        ScenarioName::SubgroupSlope,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::SaturatedLog => "saturated_log",
            ScenarioName::Linear => "linear",
            ScenarioName::SubgroupInit => "subgroup_init",
            ScenarioName::SubgroupSlope => "subgroup_slope",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|n| n.as_str() == name)
    }

    pub fn valid_names() -> String {
        Self::ALL.map(|n| n.as_str()).join(", ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: ScenarioName,
    pub description: String,
    pub config: EnvironmentConfig,
}

fn users() -> UserParamConfig {
    UserParamConfig {
        quality_sensitivity: UniformRange::new(0.1, 0.5),
        preference_drift: UniformRange::point(0.05),
    }
}

/// Saturating-satisfaction dynamics: providers slowly lose satisfaction
/// without recommendations and leave once it drops below zero.
fn group(name: &str, size: usize, satisfaction_fn: SatisfactionFn) -> ProviderGroupConfig {
    ProviderGroupConfig {
        name: name.into(),
        size,
        satisfaction_fn,
        offset_x0_spread: 0.0,
        no_rec_drift: -0.3,
        exposure_sensitivity: 0.1,
        feedback_sensitivity: 0.05,
        preference_drift: 0.05,
        viability_threshold: 0.0,
        creation_rate: 2.0,
        quality_mean: 0.0,
        quality_std: 0.3,
    }
}

/// Linear-satisfaction dynamics. With a linear curve, leaving ends a
/// provider's negative drift, so reachable churn would reward pushing
/// providers out; the threshold is set below anything reachable within
/// the horizon. User feedback carries full weight so that provider
/// utility tracks the quality of the recommendations.
fn linear_group(name: &str, size: usize, slope: f64) -> ProviderGroupConfig {
    ProviderGroupConfig {
        feedback_sensitivity: 1.0,
        viability_threshold: -100.0,
        ..group(name, size, SatisfactionFn::linear(slope, 0.1))
    }
}

fn base(groups: Vec<ProviderGroupConfig>) -> EnvironmentConfig {
    EnvironmentConfig {
        num_topics: 10,
        num_users: 50,
        num_providers: groups.iter().map(|g| g.size).sum(),
        initial_docs_per_provider: 20,
        horizon: 20,
        user_params: users(),
        provider_groups: groups,
        user_discount: 0.99,
        provider_discount: 0.99,
        seed: 0,
    }
}

impl Scenario {
    pub fn builtin(name: ScenarioName) -> Scenario {
        let (description, config) = match name {
            ScenarioName::SaturatedLog => (
                "Providers with saturating (logarithmic) satisfaction: exposure helps less established providers more.",
                base(vec![group("all", 10, SatisfactionFn::saturated_log(1.0, 0.1))]),
            ),
            ScenarioName::Linear => (
                "Providers with linear satisfaction: marginal exposure is worth the same to every provider.",
                base(vec![linear_group("all", 10, 1.0)]),
            ),
            ScenarioName::SubgroupInit => (
                "Two provider groups identical except for their initial satisfaction (group B starts higher).",
                base(vec![
                    group("A", 5, SatisfactionFn::saturated_log(1.0, 0.1)),
                    group("B", 5, SatisfactionFn::saturated_log(1.0, 1.0)),
                ]),
            ),
            ScenarioName::SubgroupSlope => (
                "Two provider groups with linear satisfaction, identical except that group B's slope is steeper.",
                base(vec![
                    linear_group("A", 5, 0.5),
                    linear_group("B", 5, 1.5),
                ]),
            ),
        };
        Scenario {
            name,
            description: description.into(),
            config,
        }
    }

    /// A built-in name, or a path to a scenario JSON file.
    pub fn load(name_or_path: &str) -> Result<Scenario, HarnessError> {
        if let Some(name) = ScenarioName::parse(name_or_path) {
            return Ok(Scenario::builtin(name));
        }
        let path = Path::new(name_or_path);
        if !path.exists() {
            return Err(HarnessError::UnknownScenario {
                name: name_or_path.into(),
                valid: ScenarioName::valid_names(),
            });
        }
        Scenario::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_json(json: &str) -> Result<Scenario, HarnessError> {
        let s: Scenario =
            serde_json::from_str(json).map_err(|e| HarnessError::ScenarioFile(e.to_string()))?;
        s.config.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn num_groups(&self) -> usize {
        self.config.provider_groups.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_valid_and_round_trip() {
        for name in ScenarioName::ALL {
            let s = Scenario::builtin(name);
            s.config.validate().unwrap();
            assert_eq!(Scenario::from_json(&s.to_json()).unwrap(), s);
            assert_eq!(Scenario::load(name.as_str()).unwrap(), s);
        }
    }

    #[test]
    fn paper_population() {
        let c = Scenario::builtin(ScenarioName::SaturatedLog).config;
        assert_eq!(
            (c.num_users, c.num_providers, c.initial_docs_per_provider),
            (50, 10, 20)
        );
        assert_eq!((c.num_topics, c.horizon), (10, 20));
        assert_eq!((c.user_discount, c.provider_discount), (0.99, 0.99));
    }

    #[test]
    fn subgroups_differ_only_where_intended() {
        let strip = |mut g: ProviderGroupConfig| {
            g.name.clear();
            g.satisfaction_fn = SatisfactionFn::linear(1.0, 0.0);
            g
        };
        let init = Scenario::builtin(ScenarioName::SubgroupInit)
            .config
            .provider_groups;
        assert_eq!(strip(init[0].clone()), strip(init[1].clone()));
        assert_eq!(init[0].satisfaction_fn.kind, init[1].satisfaction_fn.kind);
        assert!(init[1].satisfaction_fn.offset_x0 > init[0].satisfaction_fn.offset_x0);

        let slope = Scenario::builtin(ScenarioName::SubgroupSlope)
            .config
            .provider_groups;
        assert_eq!(strip(slope[0].clone()), strip(slope[1].clone()));
        let eta = |g: &ProviderGroupConfig| match g.satisfaction_fn.kind {
            ecosim_core::SatisfactionKind::Linear { slope } => slope,
            _ => panic!("expected linear"),
        };
        assert!(eta(&slope[1]) > eta(&slope[0]));
    }

    #[test]
    fn unknown_name_lists_valid_ones() {
        let err = Scenario::load("nope").unwrap_err().to_string();
        assert!(err.contains("saturated_log") && err.contains("subgroup_slope"));
    }

    #[test]
    fn one_topic_rejected() {
        let mut s = Scenario::builtin(ScenarioName::Linear);
        s.config.num_topics = 1;
        assert!(matches!(
            Scenario::from_json(&s.to_json()),
            Err(HarnessError::Config(_))
        ));
    }
}
