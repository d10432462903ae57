//! Timer/counter augmentations of an arm MDP that make window caps and sleep
//! periods structural: where a pull is not allowed, acting equals waiting.

mod sleep;
mod window;

pub use sleep::{encode_sleep, zero_while_sleeping_check, SleepMdp, SleepState};
pub use window::{
    encode_action_window, zero_outside_window_check, EncodedMdp, EncodedState, EncodingError, ZeroIndexReport,
};
