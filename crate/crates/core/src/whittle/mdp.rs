use thiserror::Error;

use crate::arm_model::{row_sum_tolerance, BeliefChain};
use crate::scalar::Scalar;

/// Sparse distribution over successor states.
pub type Row<T> = Vec<(usize, T)>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MdpError {
    #[error("state {state}: {action} row sums to {sum}")]
    RowSum { state: usize, action: &'static str, sum: f64 },
    #[error("state {state}: successor {next} out of range")]
    Successor { state: usize, next: usize },
    #[error("state {state}: reward {reward} outside [0, 1]")]
    Reward { state: usize, reward: f64 },
    #[error("passive, active and reward tables disagree in length")]
    Shape,
    #[error("empty state space")]
    Empty,
}

/// Two-action arm MDP: per-state passive and active successor distributions
/// and a base reward in [0, 1] earned under either action.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmMdp<T = f64> {
    passive: Vec<Row<T>>,
    active: Vec<Row<T>>,
    reward: Vec<T>,
    deterministic: Option<(Vec<usize>, Vec<usize>)>,
}

impl<T: Scalar> ArmMdp<T> {
    pub fn new(passive: Vec<Row<T>>, active: Vec<Row<T>>, reward: Vec<T>) -> Result<Self, MdpError> {
        let n = reward.len();
        if n == 0 {
            return Err(MdpError::Empty);
        }
        if passive.len() != n || active.len() != n {
            return Err(MdpError::Shape);
        }
        let tol = row_sum_tolerance::<T>();
        for s in 0..n {
            for (rows, action) in [(&passive, "passive"), (&active, "active")] {
                let mut sum = T::zero();
                for &(next, p) in &rows[s] {
                    if next >= n {
                        return Err(MdpError::Successor { state: s, next });
                    }
                    sum = sum + p;
                }
                if (sum - T::one()).abs() > tol {
                    return Err(MdpError::RowSum { state: s, action, sum: sum.to_f64_lossy() });
                }
            }
            let r = reward[s];
            if !(r >= T::zero() && r <= T::one()) {
                return Err(MdpError::Reward { state: s, reward: r.to_f64_lossy() });
            }
        }
        let deterministic = single_successors(&passive).zip(single_successors(&active));
        Ok(Self { passive, active, reward, deterministic })
    }

    /// Deterministic MDP from successor maps.
    pub fn from_successors(passive: Vec<usize>, active: Vec<usize>, reward: Vec<T>) -> Result<Self, MdpError> {
        let p = passive.iter().map(|&s| vec![(s, T::one())]).collect();
        let a = active.iter().map(|&s| vec![(s, T::one())]).collect();
        Self::new(p, a, reward)
    }

    /// Belief-chain arm: passive advances along the chain, active restores the
    /// arm so the next belief is the chain head.
    pub fn from_chain(chain: &BeliefChain<T>) -> Self {
        let n = chain.len();
        let passive = (0..n).map(|s| chain.successor(s)).collect();
        let active = vec![0; n];
        Self::from_successors(passive, active, chain.beliefs().to_vec()).expect("belief chain yields a valid MDP")
    }

    pub fn n_states(&self) -> usize {
        self.reward.len()
    }

    pub fn reward(&self, s: usize) -> T {
        self.reward[s]
    }

    pub fn rewards(&self) -> &[T] {
        &self.reward
    }

    pub fn passive(&self, s: usize) -> &[(usize, T)] {
        &self.passive[s]
    }

    pub fn active(&self, s: usize) -> &[(usize, T)] {
        &self.active[s]
    }

    /// `(passive successor, active successor)` maps when every row is a point mass.
    pub fn successor_maps(&self) -> Option<(&[usize], &[usize])> {
        self.deterministic.as_ref().map(|(p, a)| (p.as_slice(), a.as_slice()))
    }

    /// True when both actions lead to the same distribution from `s`.
    pub fn actions_coincide(&self, s: usize) -> bool {
        self.passive[s] == self.active[s]
    }
}

fn single_successors<T: Scalar>(rows: &[Row<T>]) -> Option<Vec<usize>> {
    rows.iter()
        .map(|r| match r.as_slice() {
            [(s, p)] if *p == T::one() => Some(*s),
            _ => None,
        })
        .collect()
}

/// Arm MDP with the passive reward raised by `subsidy`.
#[derive(Debug, Clone, Copy)]
pub struct SubsidizedMdp<'a, T = f64> {
    pub mdp: &'a ArmMdp<T>,
    pub subsidy: T,
}

impl<'a, T: Scalar> SubsidizedMdp<'a, T> {
    pub fn new(mdp: &'a ArmMdp<T>, subsidy: T) -> Self {
        Self { mdp, subsidy }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arm_model::{build_belief_chain, TransitionKernel};

    #[test]
    fn chain_mdp_structure() {
        let k = TransitionKernel::<f64>::from_fail_probs(0.9, 0.1).unwrap();
        let chain = build_belief_chain(&k, 1e-4, 5);
        let mdp = ArmMdp::from_chain(&chain);
        let (p, a) = mdp.successor_maps().unwrap();
        assert_eq!(p, &[1, 2, 3, 4, 4]);
        assert_eq!(a, &[0, 0, 0, 0, 0]);
        assert_eq!(mdp.reward(1), 0.9);
    }

    #[test]
    fn rejects_bad_rows() {
        let err = ArmMdp::<f64>::new(vec![vec![(0, 0.5)]], vec![vec![(0, 1.0)]], vec![0.5]).unwrap_err();
        assert!(matches!(err, MdpError::RowSum { state: 0, action: "passive", .. }));
        assert!(ArmMdp::<f64>::from_successors(vec![1], vec![0], vec![0.5]).is_err());
        assert!(ArmMdp::<f64>::from_successors(vec![0], vec![0], vec![1.5]).is_err());
    }

    #[test]
    fn stochastic_rows_are_not_deterministic() {
        let mdp = ArmMdp::<f64>::new(
            vec![vec![(0, 0.5), (1, 0.5)], vec![(1, 1.0)]],
            vec![vec![(0, 1.0)], vec![(0, 1.0)]],
            vec![1.0, 0.0],
        )
        .unwrap();
        assert!(mdp.successor_maps().is_none());
    }
}
