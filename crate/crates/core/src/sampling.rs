use crate::error::ConfigError;
use crate::rng::RngStream;
use crate::topic::TopicVector;

/// Isotropic unit vector: a standard Gaussian draw, normalized.
pub fn sample_unit_preference(rng: &mut RngStream, k: usize) -> Result<TopicVector, ConfigError> {
    if k < 2 {
        return Err(ConfigError::TooFewTopics(k));
    }
    loop {
        let raw = TopicVector((0..k).map(|_| rng.standard_normal()).collect());
        if let Some(unit) = raw.normalized() {
            return Ok(unit);
        }
    }
}

/// Normal(mu, sigma) conditioned on `[lo, hi]`, by rejection.
///
/// With `sigma == 0` the draw is `mu` clamped into the interval. If the
/// interval carries almost no mass, rejection gives up after a fixed budget
/// and falls back to a uniform draw on `[lo, hi]`.
pub fn sample_truncated_normal(
    rng: &mut RngStream,
    mu: f64,
    sigma: f64,
    lo: f64,
    hi: f64,
) -> Result<f64, ConfigError> {
    if sigma.is_nan() || sigma < 0.0 {
        return Err(ConfigError::invalid(
            "sigma",
            format!("must be >= 0, got {sigma}"),
        ));
    }
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(ConfigError::invalid(
            "bounds",
            format!("need lo < hi, got [{lo}, {hi}]"),
        ));
    }
    if sigma == 0.0 {
        return Ok(mu.clamp(lo, hi));
    }
    for _ in 0..10_000 {
        let x = mu + sigma * rng.standard_normal();
        if (lo..=hi).contains(&x) {
            return Ok(x);
        }
    }
    Ok(rng.uniform_range(lo, hi))
}
