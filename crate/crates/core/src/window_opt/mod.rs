//! Window placement: plan a virtual schedule with the whole period open,
//! spread each virtual inspection over the window starts that contain it
//! via a balancing LP, then sample each arm's window.

mod io;
mod lp;
mod sample;
mod virtual_seq;

pub use io::{read_windows, write_windows, WindowIoError};
pub use lp::{admissible_starts, build_window_lp, solve_window_lp, WindowDistribution, WindowLp};
pub use sample::{eligibility_mask, sample_windows, WindowAssignment};
pub use virtual_seq::{simulate_virtual_sequence, simulate_virtual_sequence_with, VirtualSequence, WindowError};
