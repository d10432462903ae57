//! Random planner instances shared by the oracle and acceptance tests.

use inspection_rmab::arm_model::FrequencyConstraint;
use inspection_rmab::planner::{add_fairness, FairnessGroup, LookaheadProblem};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Multiples of 1/8 so every objective sum is exact.
pub fn dyadic(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(0..=32) as f64 / 8.0
}

pub fn random_problem(rng: &mut ChaCha8Rng, mode: u32) -> LookaheadProblem<f64> {
    let (n, h) = if mode >= 2 {
        (rng.random_range(1..=4), rng.random_range(1..=5))
    } else {
        (rng.random_range(1..=6), rng.random_range(1..=6))
    };
    let w: Vec<Vec<f64>> = (0..n).map(|_| (0..h).map(|_| dyadic(rng)).collect()).collect();
    let mask: Vec<Vec<bool>> = (0..n).map(|_| (0..h).map(|_| rng.random_bool(0.7)).collect()).collect();
    let budgets: Vec<usize> = (0..h).map(|_| rng.random_range(1..=2)).collect();
    let freq = match mode {
        0 => FrequencyConstraint::Exactly(1),
        1 => FrequencyConstraint::AtMost(1),
        _ => FrequencyConstraint::Between(rng.random_range(0..=1), 2),
    };
    let post: Vec<Vec<Vec<f64>>> =
        (0..n).map(|_| (0..h).map(|_| (0..h).map(|_| dyadic(rng)).collect()).collect()).collect();
    let mut p =
        LookaheadProblem::new(w, 1).with_mask(mask).with_step_budgets(budgets).with_frequency(freq).with_post(post);
    if rng.random_bool(0.3) {
        let arms: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
        let fraction = rng.random_range(0..=4) as f64 / 8.0;
        p = add_fairness(p, vec![FairnessGroup { arms, fraction }]);
    }
    p
}
