//! Policy simulation: runs window and scheduling policies over the horizon,
//! accumulates expected adherence and audits every run.

mod audit;
mod config;
mod engine;
mod noise;
mod report;

pub use audit::{audit_trace, AuditViolation};
pub use config::{ParsePolicyError, PolicyConfig, SchedulerKind, SimOptions, WindowMode};
pub use engine::{
    balanced_random_windows, null_reward_closed_form, run_null, run_policy, SimError, SimulationTrace, Simulator,
};
pub use noise::perturb_parameters;
pub use report::{
    drop_percent, drop_table, improvement_table, matrix_with, read_matrix, read_rows, read_trace, run_policy_matrix,
    run_policy_with_planning_model, run_with_surprises, surprise_run, trace_rows, write_matrix, write_rows,
    write_trace, DropLine, ImprovementLine, MatrixLine, MatrixRow, PolicyMatrix, ReportIoError, RunReport, SurpriseRun,
    TraceRow,
};
