//! Floating-point scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar the solvers are generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + FromStr + Default + Send + Sync + 'static
{
    /// Pivot / integrality slack appropriate for the precision.
    fn solver_eps() -> Self;

    /// Converts an `f64` literal. Panics only for values the type cannot hold at all.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal not representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    #[inline]
    fn solver_eps() -> f32 {
        1e-4
    }
}

impl Scalar for f64 {
    #[inline]
    fn solver_eps() -> f64 {
        1e-9
    }
}
