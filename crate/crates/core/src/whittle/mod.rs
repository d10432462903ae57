//! Subsidised Q-values, Whittle indices by subsidy bisection, index forecasts
//! for the planner and empirical indexability scans.

mod cache;
mod index;
mod io;
mod mdp;
mod solve;

pub use cache::{IndexCache, IndexKey};
pub use index::{
    check_indexability, forecast_indices, index_table, subsidy_grid, whittle_index, Forecast, IndexOptions, IndexTable,
    IndexabilityReport, IndexabilityViolation, WhittleError, DEFAULT_SUBSIDY_TOLERANCE,
};
pub use io::{write_index_rows, IndexRow};
pub use mdp::{ArmMdp, MdpError, Row, SubsidizedMdp};
pub use solve::{
    value_iteration_q, value_iteration_warm, DeterministicSolver, QSolver, QTable, DEFAULT_MAX_SWEEPS,
    DEFAULT_VI_TOLERANCE,
};
