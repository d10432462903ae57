use thiserror::Error;

use crate::scalar::Scalar;

/// Passive dynamics of one arm. State 1 is passing, state 0 failing; row is the
/// current state and column the next one. The active kernel is fixed: every
/// state moves to passing with probability 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionKernel<T = f64> {
    pub p00: T,
    pub p01: T,
    pub p10: T,
    pub p11: T,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("entry out of range: p{row}{col} = {value}")]
    OutOfRange { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum}")]
    RowSum { row: usize, sum: f64 },
}

/// Absolute slack on row sums. `f32` cannot resolve 1e-9, so the slack widens
/// to a few ulps there.
pub fn row_sum_tolerance<T: Scalar>() -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(4.0))
}

impl<T: Scalar> TransitionKernel<T> {
    pub fn new(p00: T, p01: T, p10: T, p11: T) -> Result<Self, KernelError> {
        let k = Self { p00, p01, p10, p11 };
        validate_kernel(&k)?;
        Ok(k)
    }

    /// Builds a kernel from the two failure probabilities; the passing
    /// columns are filled in as complements.
    pub fn from_fail_probs(p00: T, p10: T) -> Result<Self, KernelError> {
        Self::new(p00, T::one() - p00, p10, T::one() - p10)
    }

    pub fn entries(&self) -> [[T; 2]; 2] {
        [[self.p00, self.p01], [self.p10, self.p11]]
    }

    /// Contraction factor of the belief map `b -> p01 + (p11 - p01) b`.
    pub fn mixing_rate(&self) -> T {
        self.p11 - self.p01
    }

    /// Fixed point of the belief map, i.e. the long-run passing probability.
    /// For the identity kernel every belief is fixed and 1 is returned.
    pub fn stationary_pass(&self) -> T {
        let denom = self.p01 + self.p10;
        if denom <= T::zero() {
            T::one()
        } else {
            self.p01 / denom
        }
    }

    pub fn cast<U: Scalar>(&self) -> TransitionKernel<U> {
        TransitionKernel {
            p00: U::lit(self.p00.to_f64_lossy()),
            p01: U::lit(self.p01.to_f64_lossy()),
            p10: U::lit(self.p10.to_f64_lossy()),
            p11: U::lit(self.p11.to_f64_lossy()),
        }
    }
}

pub fn validate_kernel<T: Scalar>(kernel: &TransitionKernel<T>) -> Result<(), KernelError> {
    let rows = kernel.entries();
    for (r, row) in rows.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(KernelError::OutOfRange { row: r, col: c, value: v.to_f64_lossy() });
            }
        }
    }
    let tol = row_sum_tolerance::<T>();
    for (r, row) in rows.iter().enumerate() {
        let sum = row[0] + row[1];
        if (sum - T::one()).abs() > tol {
            return Err(KernelError::RowSum { row: r, sum: sum.to_f64_lossy() });
        }
    }
    Ok(())
}

/// One passive step of the passing probability.
#[inline]
pub fn belief_update<T: Scalar>(b: T, kernel: &TransitionKernel<T>) -> T {
    let next = kernel.p01 * (T::one() - b) + kernel.p11 * b;
    next.max(T::zero()).min(T::one())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(p00: f64, p01: f64, p10: f64, p11: f64) -> TransitionKernel<f64> {
        TransitionKernel { p00, p01, p10, p11 }
    }

    #[test]
    fn stochastic_rows_accepted() {
        assert!(validate_kernel(&k(0.9, 0.1, 0.1, 0.9)).is_ok());
    }

    #[test]
    fn bad_row_sum_names_row() {
        let err = validate_kernel(&k(0.5, 0.6, 0.1, 0.9)).unwrap_err();
        assert_eq!(err, KernelError::RowSum { row: 0, sum: 1.1 });
        assert_eq!(err.to_string(), "row 0 sums to 1.1");
        let err = validate_kernel(&k(0.5, 0.5, 0.3, 0.9)).unwrap_err();
        assert!(err.to_string().starts_with("row 1 sums to"));
    }

    #[test]
    fn negative_entry_rejected() {
        let err = validate_kernel(&k(-0.1, 1.1, 0.1, 0.9)).unwrap_err();
        assert!(err.to_string().starts_with("entry out of range"));
        assert!(validate_kernel(&k(f64::NAN, 0.5, 0.1, 0.9)).is_err());
    }

    #[test]
    fn belief_update_examples() {
        let kern = k(0.9, 0.1, 0.1, 0.9);
        assert_eq!(belief_update(1.0, &kern), 0.9);
        // 0.1 + 0.8 * 0.9
        assert!((belief_update(0.9, &kern) - 0.82).abs() < 1e-15);
        let flat = k(0.5, 0.5, 0.5, 0.5);
        for b in [0.0, 0.13, 0.77, 1.0] {
            assert_eq!(belief_update(b, &flat), 0.5);
        }
    }

    #[test]
    fn f32_kernel_validates() {
        let kern = TransitionKernel::<f32>::from_fail_probs(0.83, 0.17).unwrap();
        assert!((belief_update(1.0f32, &kern) - 0.83).abs() < 1e-6);
    }
}
