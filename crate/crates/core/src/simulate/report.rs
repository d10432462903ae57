use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{PolicyConfig, SimOptions};
use super::engine::{run_null, SimError, SimulationTrace, Simulator};
use crate::arm_model::Instance;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ReportIoError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    TomlWrite(#[from] toml::ser::Error),
    #[error(transparent)]
    TomlRead(#[from] toml::de::Error),
}

/// One trace row: `timestep` is 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub timestep: usize,
    pub arm_id: u32,
    pub belief: f64,
    pub action: u8,
    pub surprise: u8,
}

pub fn trace_rows<T: Scalar>(trace: &SimulationTrace<T>) -> Vec<TraceRow> {
    let mut rows = Vec::with_capacity(trace.horizon * trace.n_arms());
    for t in 0..trace.beliefs.len() {
        for (i, &arm_id) in trace.arm_ids.iter().enumerate() {
            rows.push(TraceRow {
                timestep: t + 1,
                arm_id,
                belief: trace.beliefs[t][i].to_f64_lossy(),
                action: trace.actions[t][i] as u8,
                surprise: trace.surprises[t][i] as u8,
            });
        }
    }
    rows
}

pub fn write_trace<T: Scalar, W: Write>(writer: W, trace: &SimulationTrace<T>) -> Result<(), ReportIoError> {
    let mut w = csv::Writer::from_writer(writer);
    for row in trace_rows(trace) {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(reader: R) -> Result<Vec<TraceRow>, ReportIoError> {
    let mut r = csv::Reader::from_reader(reader);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// Key-value summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub policy: String,
    pub seed: u64,
    pub reward: f64,
    pub null_reward: f64,
    pub improvement: f64,
    pub improvement_pct: f64,
    pub surprise_rate: f64,
    /// Noise level of the planning kernels; 0 when planning used the truth.
    #[serde(default)]
    pub noise_sigma: f64,
    pub base_reward: Option<f64>,
    pub drop_pct: Option<f64>,
    pub replans: usize,
    pub crowd_outs: usize,
    pub audit_ok: bool,
    pub audit: Vec<String>,
}

impl RunReport {
    pub fn new<T: Scalar>(trace: &SimulationTrace<T>, null_reward: f64, seed: u64) -> Self {
        let reward = trace.reward.to_f64_lossy();
        Self {
            policy: trace.label.clone(),
            seed,
            reward,
            null_reward,
            improvement: reward - null_reward,
            improvement_pct: pct(reward - null_reward, null_reward),
            surprise_rate: 0.0,
            noise_sigma: 0.0,
            base_reward: None,
            drop_pct: None,
            replans: trace.replans,
            crowd_outs: trace.crowd_outs.len(),
            audit_ok: trace.audit.is_empty(),
            audit: trace.audit.iter().map(ToString::to_string).collect(),
        }
    }

    /// Report of a run with surprises at `rate`, measured against `base`.
    pub fn with_surprises<T: Scalar>(
        trace: &SimulationTrace<T>,
        base: &SimulationTrace<T>,
        null_reward: f64,
        seed: u64,
        rate: f64,
    ) -> Self {
        let base_reward = base.reward.to_f64_lossy();
        let mut r = Self::new(trace, null_reward, seed);
        r.surprise_rate = rate;
        r.base_reward = Some(base_reward);
        r.drop_pct = Some(drop_percent(base_reward, r.reward));
        r
    }

    pub fn to_toml(&self) -> Result<String, ReportIoError> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(text: &str) -> Result<Self, ReportIoError> {
        Ok(toml::from_str(text)?)
    }
}

fn pct(delta: f64, base: f64) -> f64 {
    if base == 0.0 {
        0.0
    } else {
        100.0 * delta / base
    }
}

/// Percentage of `base` lost in `with`.
pub fn drop_percent(base: f64, with: f64) -> f64 {
    pct(base - with, base)
}

/// Runs with surprises at `rate` next to the surprise-free run of the same
/// policy and seed.
#[derive(Debug, Clone)]
pub struct SurpriseRun<T = f64> {
    pub base: SimulationTrace<T>,
    pub trace: SimulationTrace<T>,
    pub drop_pct: f64,
}

pub fn run_with_surprises<T: Scalar>(
    instance: &Instance<T>,
    cfg: &PolicyConfig,
    rate: f64,
    seed: u64,
    opts: &SimOptions<T>,
) -> Result<SurpriseRun<T>, SimError> {
    let sim = Simulator::new(instance, instance, *opts)?;
    surprise_run(&sim, cfg, rate, seed)
}

pub fn surprise_run<T: Scalar>(
    sim: &Simulator<'_, T>,
    cfg: &PolicyConfig,
    rate: f64,
    seed: u64,
) -> Result<SurpriseRun<T>, SimError> {
    let base = sim.run(cfg, seed, 0.0)?;
    let trace = sim.run(cfg, seed, rate)?;
    let drop_pct = drop_percent(base.reward.to_f64_lossy(), trace.reward.to_f64_lossy());
    Ok(SurpriseRun { base, trace, drop_pct })
}

/// Plans with `planning` kernels while beliefs and reward follow `truth`.
pub fn run_policy_with_planning_model<T: Scalar>(
    truth: &Instance<T>,
    planning: &Instance<T>,
    cfg: &PolicyConfig,
    seed: u64,
    opts: &SimOptions<T>,
) -> Result<SimulationTrace<T>, SimError> {
    Simulator::new(truth, planning, *opts)?.run(cfg, seed, 0.0)
}

/// One row of a policy comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRow<T = f64> {
    pub label: String,
    pub outcome: Result<SimulationTrace<T>, SimError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyMatrix<T = f64> {
    pub null_reward: f64,
    pub rows: Vec<MatrixRow<T>>,
}

/// CSV-ready summary line of a matrix row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixLine {
    pub policy: String,
    pub status: String,
    pub reward: Option<f64>,
    pub null_reward: f64,
    pub improvement: Option<f64>,
    pub improvement_pct: Option<f64>,
    pub audit_ok: Option<bool>,
}

impl<T: Scalar> PolicyMatrix<T> {
    pub fn reward(&self, label: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.label == label)
            .and_then(|r| r.outcome.as_ref().ok())
            .map(|t| t.reward.to_f64_lossy())
    }

    pub fn lines(&self) -> Vec<MatrixLine> {
        self.rows
            .iter()
            .map(|r| match &r.outcome {
                Ok(t) => {
                    let reward = t.reward.to_f64_lossy();
                    MatrixLine {
                        policy: r.label.clone(),
                        status: "ok".into(),
                        reward: Some(reward),
                        null_reward: self.null_reward,
                        improvement: Some(reward - self.null_reward),
                        improvement_pct: Some(pct(reward - self.null_reward, self.null_reward)),
                        audit_ok: Some(t.audit.is_empty()),
                    }
                }
                Err(e) => MatrixLine {
                    policy: r.label.clone(),
                    status: e.to_string(),
                    reward: None,
                    null_reward: self.null_reward,
                    improvement: None,
                    improvement_pct: None,
                    audit_ok: None,
                },
            })
            .collect()
    }
}

pub fn write_matrix<W: Write>(writer: W, lines: &[MatrixLine]) -> Result<(), ReportIoError> {
    let mut w = csv::Writer::from_writer(writer);
    for l in lines {
        w.serialize(l)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix<R: Read>(reader: R) -> Result<Vec<MatrixLine>, ReportIoError> {
    let mut r = csv::Reader::from_reader(reader);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// Runs every configuration; a failing configuration is recorded in its row.
pub fn run_policy_matrix<T: Scalar>(
    instance: &Instance<T>,
    configs: &[PolicyConfig],
    seed: u64,
    opts: &SimOptions<T>,
) -> Result<PolicyMatrix<T>, SimError> {
    let sim = Simulator::new(instance, instance, *opts)?;
    Ok(matrix_with(&sim, instance, configs, seed))
}

pub fn matrix_with<T: Scalar>(
    sim: &Simulator<'_, T>,
    instance: &Instance<T>,
    configs: &[PolicyConfig],
    seed: u64,
) -> PolicyMatrix<T> {
    let null_reward = run_null(instance).reward.to_f64_lossy();
    let rows =
        configs.iter().map(|cfg| MatrixRow { label: cfg.to_string(), outcome: sim.run(cfg, seed, 0.0) }).collect();
    PolicyMatrix { null_reward, rows }
}

/// Mean improvement over the null policy per policy and noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementLine {
    pub policy: String,
    pub noise_sigma: f64,
    pub runs: usize,
    pub reward: f64,
    pub null_reward: f64,
    pub improvement: f64,
    pub improvement_pct: f64,
    pub audit_ok: bool,
}

/// Mean reward drop per policy and surprise rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropLine {
    pub policy: String,
    pub surprise_rate: f64,
    pub runs: usize,
    pub base_reward: f64,
    pub reward: f64,
    pub drop_pct: f64,
    pub crowd_outs: f64,
}

/// Groups in order of first appearance.
fn group_by<K: PartialEq, V>(items: impl IntoIterator<Item = (K, V)>) -> Vec<(K, Vec<V>)> {
    let mut out: Vec<(K, Vec<V>)> = Vec::new();
    for (k, v) in items {
        match out.iter_mut().find(|(g, _)| *g == k) {
            Some((_, vs)) => vs.push(v),
            None => out.push((k, vec![v])),
        }
    }
    out
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Averages over seeds. A surprise run contributes its surprise-free base
/// reward, so every policy is compared without surprises.
pub fn improvement_table(reports: &[RunReport]) -> Vec<ImprovementLine> {
    let groups = group_by(reports.iter().map(|r| ((r.policy.clone(), r.noise_sigma), r)));
    groups
        .into_iter()
        .map(|((policy, noise_sigma), rs)| {
            let reward = mean(rs.iter().map(|r| r.base_reward.unwrap_or(r.reward)));
            let null_reward = mean(rs.iter().map(|r| r.null_reward));
            ImprovementLine {
                policy,
                noise_sigma,
                runs: rs.len(),
                reward,
                null_reward,
                improvement: reward - null_reward,
                improvement_pct: pct(reward - null_reward, null_reward),
                audit_ok: rs.iter().all(|r| r.audit_ok),
            }
        })
        .collect()
}

/// Averages percentage drops of runs with surprises; other runs are skipped.
pub fn drop_table(reports: &[RunReport]) -> Vec<DropLine> {
    let with =
        reports.iter().filter_map(|r| Some(((r.policy.clone(), r.surprise_rate), (r, r.base_reward?, r.drop_pct?))));
    group_by(with)
        .into_iter()
        .map(|((policy, surprise_rate), rs)| DropLine {
            policy,
            surprise_rate,
            runs: rs.len(),
            base_reward: mean(rs.iter().map(|x| x.1)),
            reward: mean(rs.iter().map(|x| x.0.reward)),
            drop_pct: mean(rs.iter().map(|x| x.2)),
            crowd_outs: mean(rs.iter().map(|x| x.0.crowd_outs as f64)),
        })
        .collect()
}

pub fn write_rows<S: Serialize, W: Write>(writer: W, rows: &[S]) -> Result<(), ReportIoError> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<D: serde::de::DeserializeOwned, R: Read>(reader: R) -> Result<Vec<D>, ReportIoError> {
    let mut r = csv::Reader::from_reader(reader);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}
