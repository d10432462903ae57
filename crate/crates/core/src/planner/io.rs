use std::io::{Read, Write};

use thiserror::Error;

use super::problem::{LookaheadPlan, PlanStatus};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum PlanIoError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("plan file has no objective trailer")]
    MissingTrailer,
}

/// Writes one `arm_id,timestep,action` row per pull (1-based steps) and a
/// closing `objective,<value>,<status>` row.
pub fn write_plan<T: Scalar, W: Write>(writer: W, plan: &LookaheadPlan<T>, arm_ids: &[u32]) -> Result<(), PlanIoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["arm_id", "timestep", "action"])?;
    for (i, t) in plan.pulls() {
        w.write_record([arm_ids[i].to_string(), (t + 1).to_string(), "1".to_string()])?;
    }
    w.write_record(["objective".to_string(), plan.objective.to_string(), plan.status.to_string()])?;
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanFile {
    /// `(arm_id, 1-based step)` for every pull.
    pub pulls: Vec<(u32, usize)>,
    pub objective: f64,
    pub status: PlanStatus,
}

pub fn read_plan<R: Read>(reader: R) -> Result<PlanFile, PlanIoError> {
    let mut r = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
    let mut pulls = Vec::new();
    let mut trailer = None;
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |message: String| PlanIoError::Parse { line, message };
        let field = |k: usize| rec.get(k).ok_or_else(|| bad(format!("missing field {}", k + 1)));
        if field(0)? == "objective" {
            let objective = field(1)?.parse::<f64>().map_err(|e| bad(e.to_string()))?;
            let status = match field(2)? {
                "optimal" => PlanStatus::Optimal,
                "feasible" => PlanStatus::Feasible,
                "infeasible" => PlanStatus::Infeasible,
                other => return Err(bad(format!("unknown status {other:?}"))),
            };
            trailer = Some((objective, status));
            continue;
        }
        let arm = field(0)?.parse::<u32>().map_err(|e| bad(e.to_string()))?;
        let step = field(1)?.parse::<usize>().map_err(|e| bad(e.to_string()))?;
        if field(2)? == "1" {
            pulls.push((arm, step));
        }
    }
    let (objective, status) = trailer.ok_or(PlanIoError::MissingTrailer)?;
    Ok(PlanFile { pulls, objective, status })
}
