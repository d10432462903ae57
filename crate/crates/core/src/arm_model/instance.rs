use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::kernel::{validate_kernel, KernelError, TransitionKernel};
use crate::scalar::Scalar;

/// Contiguous action window inside one period. `start` is the 1-based step of
/// the period on which the window opens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub len: usize,
}

impl Window {
    pub fn new(start: usize, len: usize) -> Self {
        Self { start, len }
    }

    /// Last step (inclusive) covered by the window.
    pub fn end(&self) -> usize {
        self.start + self.len - 1
    }

    /// `step` is 1-based within the period.
    pub fn contains(&self, step: usize) -> bool {
        step >= self.start && step <= self.end()
    }

    pub fn fits(&self, period: usize) -> bool {
        self.len >= 1 && self.start >= 1 && self.end() <= period
    }
}

/// Number of pulls each arm must receive per period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FrequencyConstraint {
    AtMost(u32),
    Exactly(u32),
    Between(u32, u32),
}

impl FrequencyConstraint {
    pub fn min_pulls(&self) -> u32 {
        match *self {
            Self::AtMost(_) => 0,
            Self::Exactly(c) => c,
            Self::Between(lo, _) => lo,
        }
    }

    pub fn max_pulls(&self) -> u32 {
        match *self {
            Self::AtMost(c) | Self::Exactly(c) => c,
            Self::Between(_, hi) => hi,
        }
    }

    pub fn bounds(&self) -> (u32, u32) {
        (self.min_pulls(), self.max_pulls())
    }

    /// Short tag used in policy labels: `=1`, `<=1`, `[1,2]`.
    pub fn short_label(&self) -> String {
        match *self {
            Self::AtMost(c) => format!("<={c}"),
            Self::Exactly(c) => format!("={c}"),
            Self::Between(lo, hi) => format!("[{lo},{hi}]"),
        }
    }
}

impl fmt::Display for FrequencyConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::AtMost(c) => write!(f, "at_most({c})"),
            Self::Exactly(c) => write!(f, "exactly({c})"),
            Self::Between(lo, hi) => write!(f, "between({lo},{hi})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid frequency constraint `{0}` (expected exactly(c), at_most(c) or between(lo,hi))")]
pub struct ParseFrequencyError(pub String);

impl FromStr for FrequencyConstraint {
    type Err = ParseFrequencyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseFrequencyError(s.to_string());
        let t = s.trim();
        let open = t.find('(').ok_or_else(err)?;
        if !t.ends_with(')') {
            return Err(err());
        }
        let name = t[..open].trim();
        let args: Vec<u32> = t[open + 1..t.len() - 1]
            .split(',')
            .map(|a| a.trim().parse::<u32>())
            .collect::<Result<_, _>>()
            .map_err(|_| err())?;
        match (name, args.as_slice()) {
            ("at_most", [c]) => Ok(Self::AtMost(*c)),
            ("exactly", [c]) => Ok(Self::Exactly(*c)),
            ("between", [lo, hi]) if lo <= hi => Ok(Self::Between(*lo, *hi)),
            _ => Err(err()),
        }
    }
}

impl TryFrom<String> for FrequencyConstraint {
    type Error = ParseFrequencyError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<FrequencyConstraint> for String {
    fn from(f: FrequencyConstraint) -> String {
        f.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmSpec<T = f64> {
    pub arm_id: u32,
    pub kernel: TransitionKernel<T>,
    pub window: Option<Window>,
    pub group_id: Option<u32>,
}

impl<T: Scalar> ArmSpec<T> {
    pub fn new(arm_id: u32, kernel: TransitionKernel<T>) -> Self {
        Self { arm_id, kernel, window: None, group_id: None }
    }
}

/// Instance-wide parameters, stored next to the arm CSV as a flat key-value file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceParams {
    pub horizon: usize,
    pub period: usize,
    pub budget: usize,
    pub gamma: f64,
    pub frequency: FrequencyConstraint,
}

impl Default for InstanceParams {
    fn default() -> Self {
        Self { horizon: 60, period: 12, budget: 1, gamma: DEFAULT_GAMMA, frequency: FrequencyConstraint::Exactly(1) }
    }
}

pub const DEFAULT_GAMMA: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstanceError {
    #[error("instance has no arms")]
    NoArms,
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("period must be at least 1")]
    ZeroPeriod,
    #[error("horizon {horizon} is not a positive multiple of period {period}")]
    HorizonNotMultiple { horizon: usize, period: usize },
    #[error("discount {0} outside (0, 1)")]
    Discount(f64),
    #[error("arm {arm_id}: {source}")]
    Kernel { arm_id: u32, source: KernelError },
    #[error("arm {arm_id}: window {start}+{len} does not fit in period {period}")]
    WindowOutsidePeriod { arm_id: u32, start: usize, len: usize, period: usize },
    #[error("duplicate arm id {0}")]
    DuplicateArm(u32),
    #[error("infeasible: {required} pulls required per period but budget allows {capacity}")]
    BudgetTooSmall { required: usize, capacity: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance<T = f64> {
    pub arms: Vec<ArmSpec<T>>,
    pub horizon: usize,
    pub period: usize,
    pub budget: usize,
    pub gamma: T,
    pub frequency: FrequencyConstraint,
}

impl<T: Scalar> Instance<T> {
    pub fn new(arms: Vec<ArmSpec<T>>, params: &InstanceParams) -> Result<Self, InstanceError> {
        let inst = Self {
            arms,
            horizon: params.horizon,
            period: params.period,
            budget: params.budget,
            gamma: T::lit(params.gamma),
            frequency: params.frequency,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn n_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn n_periods(&self) -> usize {
        self.horizon / self.period
    }

    pub fn params(&self) -> InstanceParams {
        InstanceParams {
            horizon: self.horizon,
            period: self.period,
            budget: self.budget,
            gamma: self.gamma.to_f64_lossy(),
            frequency: self.frequency,
        }
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        if self.arms.is_empty() {
            return Err(InstanceError::NoArms);
        }
        if self.budget == 0 {
            return Err(InstanceError::ZeroBudget);
        }
        if self.period == 0 {
            return Err(InstanceError::ZeroPeriod);
        }
        if self.horizon == 0 || !self.horizon.is_multiple_of(self.period) {
            return Err(InstanceError::HorizonNotMultiple { horizon: self.horizon, period: self.period });
        }
        if !(self.gamma > T::zero() && self.gamma < T::one()) {
            return Err(InstanceError::Discount(self.gamma.to_f64_lossy()));
        }
        let mut seen = std::collections::HashSet::new();
        for arm in &self.arms {
            if !seen.insert(arm.arm_id) {
                return Err(InstanceError::DuplicateArm(arm.arm_id));
            }
            validate_kernel(&arm.kernel).map_err(|source| InstanceError::Kernel { arm_id: arm.arm_id, source })?;
            if let Some(w) = arm.window {
                if !w.fits(self.period) {
                    return Err(InstanceError::WindowOutsidePeriod {
                        arm_id: arm.arm_id,
                        start: w.start,
                        len: w.len,
                        period: self.period,
                    });
                }
            }
        }
        check_budget(self.n_arms(), self.budget, self.period, self.frequency)
    }
}

/// Aggregate prerequisite: the minimum pulls per period must fit in `k * P`.
pub fn check_budget(
    n_arms: usize,
    budget: usize,
    period: usize,
    frequency: FrequencyConstraint,
) -> Result<(), InstanceError> {
    let required = n_arms * frequency.min_pulls() as usize;
    let capacity = budget * period;
    if required > capacity {
        return Err(InstanceError::BudgetTooSmall { required, capacity });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequency_round_trips_through_text() {
        for f in [FrequencyConstraint::AtMost(1), FrequencyConstraint::Exactly(1), FrequencyConstraint::Between(1, 2)] {
            assert_eq!(f.to_string().parse::<FrequencyConstraint>().unwrap(), f);
        }
        assert!("between(2,1)".parse::<FrequencyConstraint>().is_err());
        assert!("exactly".parse::<FrequencyConstraint>().is_err());
    }

    #[test]
    fn window_containment() {
        let w = Window::new(3, 2);
        assert!(!w.contains(2));
        assert!(w.contains(3) && w.contains(4));
        assert!(!w.contains(5));
        assert!(w.fits(12));
        assert!(!Window::new(12, 2).fits(12));
    }

    #[test]
    fn budget_boundary() {
        assert!(check_budget(12, 1, 12, FrequencyConstraint::Exactly(1)).is_ok());
        assert!(check_budget(13, 1, 12, FrequencyConstraint::Exactly(1)).is_err());
        assert!(check_budget(1000, 1, 12, FrequencyConstraint::AtMost(1)).is_ok());
    }

    #[test]
    fn rejects_bad_horizon() {
        let arms = vec![ArmSpec::new(0, TransitionKernel::from_fail_probs(0.8, 0.2).unwrap())];
        let params = InstanceParams { horizon: 61, ..Default::default() };
        assert!(matches!(Instance::<f64>::new(arms, &params), Err(InstanceError::HorizonNotMultiple { .. })));
    }
}
