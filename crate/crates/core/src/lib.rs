//! Scheduling restless inspection arms under frequency, window and budget
//! constraints with Whittle-index policies.

pub mod arm_model;
pub mod encoding;
pub mod lp;
pub mod planner;
pub mod scalar;
pub mod simulate;
pub mod whittle;
pub mod window_opt;

pub use scalar::Scalar;

pub type KernelF64 = arm_model::TransitionKernel<f64>;
pub type KernelF32 = arm_model::TransitionKernel<f32>;
pub type BeliefChainF64 = arm_model::BeliefChain<f64>;
pub type InstanceF64 = arm_model::Instance<f64>;
pub type ArmMdpF64 = whittle::ArmMdp<f64>;
pub type IndexTableF64 = whittle::IndexTable<f64>;
pub type IndexTableF32 = whittle::IndexTable<f32>;
