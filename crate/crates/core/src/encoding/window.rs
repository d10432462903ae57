use std::fmt::Write as _;

use thiserror::Error;

use crate::arm_model::{BeliefChain, Window};
use crate::scalar::Scalar;
use crate::whittle::{ArmMdp, IndexTable};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodingError {
    #[error("window {start}+{len} does not fit in period {period}")]
    Window { start: usize, len: usize, period: usize },
    #[error("per-window allowance must be at least 1")]
    Allowance,
}

/// Chain position, step within the period (1-based) and pulls still allowed
/// in the current window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EncodedState {
    pub belief_pos: usize,
    pub timer: usize,
    pub pulls_left: u32,
}

/// Arm MDP augmented with a period timer and a window pull counter so that
/// the active action only has an effect inside the window while pulls remain.
#[derive(Debug, Clone)]
pub struct EncodedMdp<T = f64> {
    states: Vec<EncodedState>,
    mdp: ArmMdp<T>,
    beliefs: Vec<T>,
    window: Window,
    period: usize,
    allowance: u32,
}

/// Counter carried into `timer`: refreshed on window entry, kept inside,
/// cleared outside.
fn carry(window: Window, timer: usize, left: u32, allowance: u32) -> u32 {
    if timer == window.start {
        allowance
    } else if window.contains(timer) {
        left
    } else {
        0
    }
}

pub fn encode_action_window<T: Scalar>(
    chain: &BeliefChain<T>,
    window: Window,
    period: usize,
    allowance: u32,
) -> Result<EncodedMdp<T>, EncodingError> {
    if window.len == 0 || window.start == 0 || !window.fits(period) {
        return Err(EncodingError::Window { start: window.start, len: window.len, period });
    }
    if allowance == 0 {
        return Err(EncodingError::Allowance);
    }
    let stride = period + window.len * allowance as usize;
    let mut states = Vec::with_capacity(chain.len() * stride);
    for pos in 0..chain.len() {
        for timer in 1..=period {
            let top = if window.contains(timer) { allowance } else { 0 };
            for pulls_left in 0..=top {
                states.push(EncodedState { belief_pos: pos, timer, pulls_left });
            }
        }
    }
    let lookup = StateLookup::new(window, period, allowance, chain.len());
    let mut passive = Vec::with_capacity(states.len());
    let mut active = Vec::with_capacity(states.len());
    for s in &states {
        let timer = s.timer % period + 1;
        let p = EncodedState {
            belief_pos: chain.successor(s.belief_pos),
            timer,
            pulls_left: carry(window, timer, s.pulls_left, allowance),
        };
        let a = if window.contains(s.timer) && s.pulls_left > 0 {
            EncodedState { belief_pos: 0, timer, pulls_left: carry(window, timer, s.pulls_left - 1, allowance) }
        } else {
            p
        };
        passive.push(lookup.id(&p).expect("passive successor in product"));
        active.push(lookup.id(&a).expect("active successor in product"));
    }
    let beliefs: Vec<T> = states.iter().map(|s| chain.belief(s.belief_pos)).collect();
    let mdp = ArmMdp::from_successors(passive, active, beliefs.clone()).expect("encoding yields a valid MDP");
    Ok(EncodedMdp { states, mdp, beliefs, window, period, allowance })
}

/// Arithmetic state numbering matching the enumeration order above.
#[derive(Debug, Clone, Copy)]
struct StateLookup {
    window: Window,
    period: usize,
    allowance: u32,
    n_pos: usize,
}

impl StateLookup {
    fn new(window: Window, period: usize, allowance: u32, n_pos: usize) -> Self {
        Self { window, period, allowance, n_pos }
    }

    fn id(&self, s: &EncodedState) -> Option<usize> {
        if s.belief_pos >= self.n_pos || s.timer == 0 || s.timer > self.period {
            return None;
        }
        let m = self.allowance as usize;
        let inside = self.window.contains(s.timer);
        if s.pulls_left as usize > if inside { m } else { 0 } {
            return None;
        }
        let stride = self.period + self.window.len * m;
        // Offset of `timer` within one position block.
        let before = s.timer - 1;
        let in_window_before = before.saturating_sub(self.window.start - 1).min(self.window.len);
        let offset = before + in_window_before * m;
        Some(s.belief_pos * stride + offset + s.pulls_left as usize)
    }
}

impl<T: Scalar> EncodedMdp<T> {
    pub fn mdp(&self) -> &ArmMdp<T> {
        &self.mdp
    }

    pub fn states(&self) -> &[EncodedState] {
        &self.states
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn allowance(&self) -> u32 {
        self.allowance
    }

    pub fn belief(&self, id: usize) -> T {
        self.beliefs[id]
    }

    pub fn state_id(&self, s: &EncodedState) -> Option<usize> {
        StateLookup::new(self.window, self.period, self.allowance, self.n_states() / self.stride()).id(s)
    }

    fn stride(&self) -> usize {
        self.period + self.window.len * self.allowance as usize
    }

    /// The active action changes something in this state.
    pub fn is_eligible(&self, id: usize) -> bool {
        let s = self.states[id];
        self.window.contains(s.timer) && s.pulls_left > 0
    }

    /// State an arm is in at `timer` with a fresh or carried counter.
    pub fn state_at(&self, belief_pos: usize, timer: usize, pulls_left: u32) -> Option<usize> {
        self.state_id(&EncodedState { belief_pos, timer, pulls_left })
    }

    pub fn passive_next(&self, id: usize) -> usize {
        self.mdp.passive(id)[0].0
    }

    pub fn active_next(&self, id: usize) -> usize {
        self.mdp.active(id)[0].0
    }

    /// Human-readable listing of states and both transitions.
    pub fn debug_dump(&self) -> String {
        let mut out = String::new();
        for (id, s) in self.states.iter().enumerate() {
            let p = self.states[self.passive_next(id)];
            let a = self.states[self.active_next(id)];
            let _ = writeln!(
                out,
                "{id}: pos={} timer={} left={} r={} | passive -> ({},{},{}) | active -> ({},{},{})",
                s.belief_pos,
                s.timer,
                s.pulls_left,
                self.beliefs[id],
                p.belief_pos,
                p.timer,
                p.pulls_left,
                a.belief_pos,
                a.timer,
                a.pulls_left,
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroIndexReport<T = f64> {
    pub violations: Vec<(usize, T)>,
    pub max_ineligible: T,
}

impl<T> ZeroIndexReport<T> {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

fn zero_check<T: Scalar>(table: &IndexTable<T>, eligible: impl Fn(usize) -> bool) -> ZeroIndexReport<T> {
    let mut violations = Vec::new();
    let mut max_ineligible = T::zero();
    for (s, &v) in table.values.iter().enumerate() {
        if eligible(s) {
            continue;
        }
        max_ineligible = max_ineligible.max(v.abs());
        if v.abs() > table.tolerance {
            violations.push((s, v));
        }
    }
    ZeroIndexReport { violations, max_ineligible }
}

/// Every state where acting is a no-op must have index within tolerance of 0.
pub fn zero_outside_window_check<T: Scalar>(enc: &EncodedMdp<T>, table: &IndexTable<T>) -> ZeroIndexReport<T> {
    zero_check(table, |s| enc.is_eligible(s))
}

pub(super) fn zero_check_with<T: Scalar>(
    table: &IndexTable<T>,
    eligible: impl Fn(usize) -> bool,
) -> ZeroIndexReport<T> {
    zero_check(table, eligible)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arm_model::{build_belief_chain, TransitionKernel};

    fn chain(cap: usize) -> BeliefChain<f64> {
        build_belief_chain(&TransitionKernel::<f64>::from_fail_probs(0.9, 0.1).unwrap(), 1e-4, cap)
    }

    #[test]
    fn product_size_is_fourteen_per_position() {
        let enc = encode_action_window(&chain(5), Window::new(3, 2), 12, 1).unwrap();
        assert_eq!(enc.n_states(), 70);
        for (id, s) in enc.states().iter().enumerate() {
            assert_eq!(enc.state_id(s), Some(id));
        }
    }

    #[test]
    fn period_wrap_keeps_advancing_chain() {
        let enc = encode_action_window(&chain(5), Window::new(3, 2), 12, 1).unwrap();
        let id = enc.state_at(4, 12, 0).unwrap();
        let next = enc.states()[enc.passive_next(id)];
        assert_eq!(next, EncodedState { belief_pos: 4, timer: 1, pulls_left: 0 });
        let id = enc.state_at(1, 12, 0).unwrap();
        assert_eq!(enc.states()[enc.passive_next(id)].belief_pos, 2);
    }

    #[test]
    fn outside_window_active_is_passive() {
        let enc = encode_action_window(&chain(5), Window::new(3, 2), 12, 1).unwrap();
        for id in 0..enc.n_states() {
            if !enc.is_eligible(id) {
                assert_eq!(enc.passive_next(id), enc.active_next(id));
            }
        }
        let id = enc.state_at(3, 3, 1).unwrap();
        let a = enc.states()[enc.active_next(id)];
        assert_eq!(a, EncodedState { belief_pos: 0, timer: 4, pulls_left: 0 });
        let p = enc.states()[enc.passive_next(id)];
        assert_eq!(p, EncodedState { belief_pos: 4, timer: 4, pulls_left: 1 });
    }

    #[test]
    fn window_entry_refreshes_counter() {
        let enc = encode_action_window(&chain(5), Window::new(3, 2), 12, 2).unwrap();
        let id = enc.state_at(2, 2, 0).unwrap();
        assert_eq!(enc.states()[enc.passive_next(id)].pulls_left, 2);
        assert_eq!(enc.n_states(), 5 * (12 + 2 * 2));
    }

    #[test]
    fn invalid_window_rejected() {
        assert!(encode_action_window(&chain(5), Window::new(12, 2), 12, 1).is_err());
        assert!(encode_action_window(&chain(5), Window::new(0, 2), 12, 1).is_err());
        assert_eq!(encode_action_window(&chain(5), Window::new(1, 2), 12, 0).unwrap_err(), EncodingError::Allowance);
    }

    #[test]
    fn dump_lists_every_state() {
        let enc = encode_action_window(&chain(2), Window::new(1, 1), 2, 1).unwrap();
        let dump = enc.debug_dump();
        assert_eq!(dump.lines().count(), enc.n_states());
        assert!(dump.starts_with("0: pos=0 timer=1 left=0"));
    }
}
