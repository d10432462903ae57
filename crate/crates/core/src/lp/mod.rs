//! Dense bounded-variable primal simplex. Sized for the small and medium LPs
//! that come up in lookahead planning and window placement.

mod simplex;

pub use simplex::{solve_lp, Constraint, LinearProgram, LpError, LpSolution, LpStatus, Sense};
