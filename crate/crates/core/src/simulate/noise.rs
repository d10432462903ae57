use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::arm_model::{Instance, TransitionKernel};
use crate::scalar::Scalar;

const NOISE_SALT: u64 = 0x006e_6f69_7365;

/// Adds zero-mean Gaussian noise of deviation `sigma` to each arm's failure
/// probabilities, clamped to [0, 1], with the complements recomputed. Each arm
/// draws from its own stream keyed by its id.
pub fn perturb_parameters<T: Scalar>(instance: &Instance<T>, sigma: f64, seed: u64) -> Instance<T> {
    assert!(sigma >= 0.0 && sigma.is_finite(), "noise deviation must be finite and non-negative");
    let mut out = instance.clone();
    if sigma == 0.0 {
        return out;
    }
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    for arm in &mut out.arms {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ NOISE_SALT);
        rng.set_stream(arm.arm_id as u64);
        let mut jitter = |p: T| T::lit((p.to_f64_lossy() + normal.sample(&mut rng)).clamp(0.0, 1.0));
        let p00 = jitter(arm.kernel.p00);
        let p10 = jitter(arm.kernel.p10);
        arm.kernel = TransitionKernel::from_fail_probs(p00, p10).expect("clamped probabilities form a kernel");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arm_model::{generate_synthetic_instance, SyntheticConfig};

    #[test]
    fn zero_sigma_is_identity() {
        let inst = generate_synthetic_instance::<f64>(&SyntheticConfig::with_arms(23, 3)).unwrap();
        assert_eq!(perturb_parameters(&inst, 0.0, 9), inst);
    }

    #[test]
    fn noise_is_seeded_and_valid() {
        let inst = generate_synthetic_instance::<f64>(&SyntheticConfig::with_arms(34, 3)).unwrap();
        let a = perturb_parameters(&inst, 0.2, 9);
        assert_eq!(a, perturb_parameters(&inst, 0.2, 9));
        assert_ne!(a, perturb_parameters(&inst, 0.2, 10));
        assert!(a.validate().is_ok());
        assert!(a.arms.iter().zip(&inst.arms).any(|(x, y)| x.kernel != y.kernel));
    }
}
