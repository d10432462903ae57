use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::lp::WindowDistribution;
use super::virtual_seq::VirtualSequence;
use crate::arm_model::Window;
use crate::scalar::Scalar;

/// Windows per arm, one per virtual inspection.
pub type WindowAssignment = Vec<Vec<Window>>;

fn arm_rng(seed: u64, arm_id: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(arm_id as u64);
    rng
}

/// Draws a window start for every virtual pull from that step's fractions.
/// Each arm has its own stream, so the result does not depend on the order
/// arms are processed in.
pub fn sample_windows<T: Scalar>(
    dist: &WindowDistribution<T>,
    seq: &VirtualSequence,
    arm_ids: &[u32],
    seed: u64,
) -> WindowAssignment {
    seq.actions
        .iter()
        .zip(arm_ids)
        .map(|(row, &id)| {
            let mut rng = arm_rng(seed, id);
            row.iter()
                .enumerate()
                .filter(|(_, &a)| a)
                .map(|(t, _)| {
                    let opts = &dist.f[t];
                    let weights = opts.iter().map(|(_, v)| v.to_f64_lossy().max(0.0));
                    let start = match WeightedIndex::new(weights) {
                        Ok(d) => opts[d.sample(&mut rng)].0,
                        Err(_) => t + 1,
                    };
                    Window::new(start, dist.len)
                })
                .collect()
        })
        .collect()
}

/// `mask[i][t]` (0-based step) is true when step `t + 1` lies in one of arm
/// `i`'s windows.
pub fn eligibility_mask(windows: &[Vec<Window>], period: usize) -> Vec<Vec<bool>> {
    windows.iter().map(|ws| (1..=period).map(|t| ws.iter().any(|w| w.contains(t))).collect()).collect()
}
