use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::instance::{ArmSpec, FrequencyConstraint, Instance, InstanceError, InstanceParams};
use super::kernel::TransitionKernel;
use crate::scalar::Scalar;

/// Parameters of the Beta-sampled synthetic population. `p00` (stay failing)
/// and `p10` (pass to fail) are drawn per arm; the other two entries are
/// complements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_arms: usize,
    pub seed: u64,
    pub p00_alpha: f64,
    pub p00_beta: f64,
    pub p10_alpha: f64,
    pub p10_beta: f64,
    pub budget_fraction: f64,
    pub horizon: usize,
    pub period: usize,
    pub gamma: f64,
    pub frequency: FrequencyConstraint,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_arms: 1000,
            seed: 0,
            p00_alpha: 5.0,
            p00_beta: 1.0,
            p10_alpha: 1.0,
            p10_beta: 5.0,
            budget_fraction: 0.09,
            horizon: 60,
            period: 12,
            gamma: super::instance::DEFAULT_GAMMA,
            frequency: FrequencyConstraint::Exactly(1),
        }
    }
}

impl SyntheticConfig {
    pub fn with_arms(n_arms: usize, seed: u64) -> Self {
        Self { n_arms, seed, ..Default::default() }
    }

    /// `floor(fraction * n)`, never below one pull per step.
    pub fn budget(&self) -> usize {
        budget_from_fraction(self.n_arms, self.budget_fraction)
    }
}

pub fn budget_from_fraction(n_arms: usize, fraction: f64) -> usize {
    // The small bias keeps e.g. 0.09 * 100 from flooring to 8.
    (((n_arms as f64) * fraction) + 1e-9).floor().max(1.0) as usize
}

#[derive(Debug, Error)]
pub enum SyntheticError {
    #[error("need at least one arm")]
    NoArms,
    #[error("invalid Beta parameters ({0}, {1})")]
    Beta(f64, f64),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

pub fn generate_synthetic_instance<T: Scalar>(cfg: &SyntheticConfig) -> Result<Instance<T>, SyntheticError> {
    if cfg.n_arms == 0 {
        return Err(SyntheticError::NoArms);
    }
    let d00 = Beta::new(cfg.p00_alpha, cfg.p00_beta).map_err(|_| SyntheticError::Beta(cfg.p00_alpha, cfg.p00_beta))?;
    let d10 = Beta::new(cfg.p10_alpha, cfg.p10_beta).map_err(|_| SyntheticError::Beta(cfg.p10_alpha, cfg.p10_beta))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let arms = (0..cfg.n_arms)
        .map(|i| {
            let p00 = T::lit(d00.sample(&mut rng));
            let p10 = T::lit(d10.sample(&mut rng));
            let kernel = TransitionKernel { p00, p01: T::one() - p00, p10, p11: T::one() - p10 };
            ArmSpec::new(i as u32, kernel)
        })
        .collect();
    let params = InstanceParams {
        horizon: cfg.horizon,
        period: cfg.period,
        budget: cfg.budget(),
        gamma: cfg.gamma,
        frequency: cfg.frequency,
    };
    Ok(Instance::new(arms, &params)?)
}
