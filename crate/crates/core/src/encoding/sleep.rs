use std::collections::{HashMap, VecDeque};

use super::window::{zero_check_with, ZeroIndexReport};
use crate::arm_model::BeliefChain;
use crate::scalar::Scalar;
use crate::whittle::{ArmMdp, IndexTable};

/// Chain position and steps remaining before another pull takes effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SleepState {
    pub belief_pos: usize,
    pub countdown: usize,
}

#[derive(Debug, Clone)]
pub struct SleepMdp<T = f64> {
    states: Vec<SleepState>,
    ids: HashMap<SleepState, usize>,
    mdp: ArmMdp<T>,
    sleep: usize,
}

/// After a pull the arm sleeps for `sleep` steps, during which acting has
/// the passive effect. States are the pairs reachable from `(pos, 0)`.
pub fn encode_sleep<T: Scalar>(chain: &BeliefChain<T>, sleep: usize) -> SleepMdp<T> {
    let passive = |s: SleepState| SleepState {
        belief_pos: chain.successor(s.belief_pos),
        countdown: s.countdown.saturating_sub(1),
    };
    let active = |s: SleepState| {
        if s.countdown == 0 {
            SleepState { belief_pos: 0, countdown: sleep }
        } else {
            passive(s)
        }
    };
    let mut states = Vec::new();
    let mut ids = HashMap::new();
    let mut queue = VecDeque::new();
    for pos in 0..chain.len() {
        let s = SleepState { belief_pos: pos, countdown: 0 };
        if !ids.contains_key(&s) {
            ids.insert(s, states.len());
            states.push(s);
            queue.push_back(s);
        }
        while let Some(s) = queue.pop_front() {
            for nx in [passive(s), active(s)] {
                if !ids.contains_key(&nx) {
                    ids.insert(nx, states.len());
                    states.push(nx);
                    queue.push_back(nx);
                }
            }
        }
    }
    let p = states.iter().map(|&s| ids[&passive(s)]).collect();
    let a = states.iter().map(|&s| ids[&active(s)]).collect();
    let r = states.iter().map(|s| chain.belief(s.belief_pos)).collect();
    let mdp = ArmMdp::from_successors(p, a, r).expect("sleep encoding yields a valid MDP");
    SleepMdp { states, ids, mdp, sleep }
}

impl<T: Scalar> SleepMdp<T> {
    pub fn mdp(&self) -> &ArmMdp<T> {
        &self.mdp
    }

    pub fn states(&self) -> &[SleepState] {
        &self.states
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn sleep(&self) -> usize {
        self.sleep
    }

    pub fn state_id(&self, s: &SleepState) -> Option<usize> {
        self.ids.get(s).copied()
    }

    pub fn is_eligible(&self, id: usize) -> bool {
        self.states[id].countdown == 0
    }
}

pub fn zero_while_sleeping_check<T: Scalar>(enc: &SleepMdp<T>, table: &IndexTable<T>) -> ZeroIndexReport<T> {
    zero_check_with(table, |s| enc.is_eligible(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arm_model::{build_belief_chain, TransitionKernel};

    fn chain(cap: usize) -> BeliefChain<f64> {
        build_belief_chain(&TransitionKernel::<f64>::from_fail_probs(0.9, 0.1).unwrap(), 1e-4, cap)
    }

    #[test]
    fn zero_sleep_is_plain_chain() {
        let c = chain(6);
        let enc = encode_sleep(&c, 0);
        assert_eq!(enc.n_states(), c.len());
        let plain = ArmMdp::from_chain(&c);
        for (id, s) in enc.states().iter().enumerate() {
            assert_eq!(s.belief_pos, id);
            assert_eq!(enc.mdp().passive(id), plain.passive(id));
            assert_eq!(enc.mdp().active(id), plain.active(id));
        }
    }

    #[test]
    fn sleep_blocks_following_pulls() {
        let enc = encode_sleep(&chain(8), 2);
        let mut s = enc.state_id(&SleepState { belief_pos: 5, countdown: 0 }).unwrap();
        let step = |s: usize| enc.mdp().active(s)[0].0;
        s = step(s);
        assert_eq!(enc.states()[s], SleepState { belief_pos: 0, countdown: 2 });
        s = step(s);
        assert_eq!(enc.states()[s], SleepState { belief_pos: 1, countdown: 1 });
        s = step(s);
        assert_eq!(enc.states()[s], SleepState { belief_pos: 2, countdown: 0 });
        s = step(s);
        assert_eq!(enc.states()[s], SleepState { belief_pos: 0, countdown: 2 });
    }

    #[test]
    fn state_count_bounded() {
        let enc = encode_sleep(&chain(5), 3);
        // Count by hand: every (pos, 0) plus (0,3), (1,2), (2,1).
        assert_eq!(enc.n_states(), 8);
        assert!(enc.n_states() <= 20);
    }
}
