use super::kernel::{belief_update, TransitionKernel};
use crate::scalar::Scalar;

/// Default stopping tolerance on consecutive beliefs.
pub const DEFAULT_CHAIN_TOLERANCE: f64 = 1e-4;

/// Beliefs reachable from the passing state under passive steps, truncated once
/// consecutive beliefs differ by less than the tolerance. Position 0 is the
/// post-inspection belief 1; the last position loops onto itself.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefChain<T = f64> {
    beliefs: Vec<T>,
    terminal_self_loop: bool,
    kernel: TransitionKernel<T>,
}

impl<T: Scalar> BeliefChain<T> {
    pub fn beliefs(&self) -> &[T] {
        &self.beliefs
    }

    pub fn kernel(&self) -> &TransitionKernel<T> {
        &self.kernel
    }

    pub fn terminal_self_loop(&self) -> bool {
        self.terminal_self_loop
    }

    pub fn len(&self) -> usize {
        self.beliefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beliefs.is_empty()
    }

    pub fn tail(&self) -> usize {
        self.beliefs.len() - 1
    }

    pub fn belief(&self, pos: usize) -> T {
        self.beliefs[pos.min(self.tail())]
    }

    /// Position after one passive step.
    #[inline]
    pub fn successor(&self, pos: usize) -> usize {
        (pos + 1).min(self.tail())
    }

    /// Position reached after `steps` passive steps from `pos`.
    #[inline]
    pub fn advance(&self, pos: usize, steps: usize) -> usize {
        pos.saturating_add(steps).min(self.tail())
    }
}

/// Iterates the belief map from 1 until the one-step change drops below
/// `tolerance` or the chain holds `cap` beliefs.
pub fn build_belief_chain<T: Scalar>(kernel: &TransitionKernel<T>, tolerance: T, cap: usize) -> BeliefChain<T> {
    assert!(tolerance > T::zero(), "chain tolerance must be positive");
    let cap = cap.max(1);
    let mut beliefs = vec![T::one()];
    while beliefs.len() < cap {
        let last = *beliefs.last().unwrap();
        let next = belief_update(last, kernel);
        if (next - last).abs() < tolerance {
            break;
        }
        beliefs.push(next);
    }
    BeliefChain { beliefs, terminal_self_loop: true, kernel: *kernel }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kern(p00: f64, p10: f64) -> TransitionKernel<f64> {
        TransitionKernel::from_fail_probs(p00, p10).unwrap()
    }

    #[test]
    fn absorbing_pass_is_single_state() {
        let c = build_belief_chain(&kern(1.0, 0.0), 1e-4, 60);
        assert_eq!(c.beliefs(), &[1.0]);
        assert!(c.terminal_self_loop());
        assert_eq!(c.successor(0), 0);
    }

    #[test]
    fn one_step_mixing_has_length_two() {
        let c = build_belief_chain(&kern(0.5, 0.5), 1e-4, 60);
        assert_eq!(c.beliefs(), &[1.0, 0.5]);
    }

    #[test]
    fn symmetric_kernel_prefix_and_stop() {
        // b' = 0.1 + 0.8 b, hand-iterated: 1, 0.9, 0.82, 0.756, 0.7048
        let c = build_belief_chain(&kern(0.9, 0.1), 1e-4, 1000);
        let expect = [1.0, 0.9, 0.82, 0.756, 0.7048];
        for (got, want) in c.beliefs().iter().zip(expect) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        // Differences are 0.1 * 0.8^j; the first below 1e-4 is j = 31, so positions 0..=31 remain.
        assert_eq!(c.len(), 32);
        let last = *c.beliefs().last().unwrap();
        assert!((belief_update(last, c.kernel()) - last).abs() < 1e-4);
        assert!((last - 0.5).abs() < 1e-3);
    }

    #[test]
    fn cap_bounds_length() {
        let c = build_belief_chain(&kern(0.99, 0.01), 1e-4, 12);
        assert_eq!(c.len(), 12);
        assert_eq!(c.advance(3, 100), 11);
    }

    #[test]
    fn oscillating_kernel_terminates() {
        // p11 < p01: beliefs alternate around the fixed point.
        let c = build_belief_chain(&kern(0.1, 0.9), 1e-4, 500);
        assert!(c.len() < 500);
        assert!(c.beliefs().iter().all(|b| (0.0..=1.0).contains(b)));
    }
}
