//! Arm dynamics: passive kernels, the belief chain reachable from the passing
//! state, and problem instances (synthetic or loaded from CSV).

mod chain;
mod instance;
mod io;
mod kernel;
mod synthetic;

pub use chain::{build_belief_chain, BeliefChain, DEFAULT_CHAIN_TOLERANCE};
pub use instance::{
    check_budget, ArmSpec, FrequencyConstraint, Instance, InstanceError, InstanceParams, ParseFrequencyError, Window,
    DEFAULT_GAMMA,
};
pub use io::{
    load_instance, params_path, read_arms, read_params, save_instance, write_arms, write_params, InstanceIoError,
    INSTANCE_HEADER,
};
pub use kernel::{belief_update, row_sum_tolerance, validate_kernel, KernelError, TransitionKernel};
pub use synthetic::{budget_from_fraction, generate_synthetic_instance, SyntheticConfig, SyntheticError};
