use std::collections::HashMap;
use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use anyhow::{bail, Context, Result};
use inspection_rmab::arm_model::{
    budget_from_fraction, build_belief_chain, generate_synthetic_instance, params_path, read_arms, read_params,
    save_instance, Instance, InstanceError, InstanceParams, SyntheticConfig, SyntheticError, Window,
};
use inspection_rmab::encoding::encode_action_window;
use inspection_rmab::planner::{
    solve_naive_with, solve_with, validate_plan, write_plan, LookaheadProblem, SolveOptions,
};
use inspection_rmab::simulate::{
    drop_table, improvement_table, perturb_parameters, run_null, write_rows, write_trace, PolicyConfig, RunReport,
    SimError, SimOptions, Simulator,
};
use inspection_rmab::whittle::{forecast_indices, index_table, write_index_rows, ArmMdp, IndexRow};
use inspection_rmab::window_opt::{
    build_window_lp, eligibility_mask, read_windows, sample_windows, simulate_virtual_sequence_with, solve_window_lp,
    write_windows, WindowError,
};
use rayon::prelude::*;

use crate::args::{
    GenerateArgs, IndicesArgs, InstanceArgs, PlanArgs, ReportArgs, SimulateArgs, Tolerances, WindowsArgs,
};

/// No schedule satisfies the constraints; maps to exit code 2.
#[derive(Debug)]
pub struct Infeasible(pub String);

impl fmt::Display for Infeasible {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = self.0.strip_prefix("infeasible: ").unwrap_or(&self.0);
        write!(f, "infeasible: {msg}")
    }
}

impl std::error::Error for Infeasible {}

fn sim_error(e: SimError) -> anyhow::Error {
    match e {
        SimError::Infeasible { .. } => Infeasible(e.to_string()).into(),
        e => e.into(),
    }
}

fn instance_error(e: InstanceError) -> anyhow::Error {
    match e {
        InstanceError::BudgetTooSmall { .. } => Infeasible(e.to_string()).into(),
        e => e.into(),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn sim_options(tol: &Tolerances, window_len: usize) -> SimOptions {
    let mut opts = SimOptions { window_len, chain_tolerance: tol.chain_tol, ..Default::default() };
    opts.index.subsidy_tol = tol.subsidy_tol;
    opts
}

/// Default budget share when an instance has no parameter sidecar.
const DEFAULT_BUDGET_FRACTION: f64 = 0.09;

pub fn load_instance(args: &InstanceArgs) -> Result<Instance> {
    let sidecar = params_path(&args.instance);
    let has_sidecar = sidecar.exists();
    let mut params = if has_sidecar {
        read_params(&sidecar).with_context(|| format!("reading {}", sidecar.display()))?
    } else {
        InstanceParams::default()
    };
    let file = File::open(&args.instance).with_context(|| format!("cannot open {}", args.instance.display()))?;
    let arms = read_arms(file).with_context(|| format!("reading {}", args.instance.display()))?;
    if let Some(h) = args.horizon {
        params.horizon = h as usize;
    }
    if let Some(p) = args.period {
        params.period = p as usize;
    }
    if let Some(g) = args.gamma {
        params.gamma = g;
    }
    if let Some(f) = args.freq {
        params.frequency = f;
    }
    match args.budget_frac {
        Some(f) => params.budget = budget_from_fraction(arms.len(), f),
        None if !has_sidecar => params.budget = budget_from_fraction(arms.len(), DEFAULT_BUDGET_FRACTION),
        None => {}
    }
    Instance::new(arms, &params).map_err(instance_error)
}

pub fn generate(a: &GenerateArgs) -> Result<()> {
    let cfg = SyntheticConfig {
        n_arms: a.n as usize,
        seed: a.seed,
        p00_alpha: a.p00_alpha,
        p00_beta: a.p00_beta,
        p10_alpha: a.p10_alpha,
        p10_beta: a.p10_beta,
        budget_fraction: a.budget_frac,
        horizon: a.horizon as usize,
        period: a.period as usize,
        gamma: a.gamma,
        frequency: a.freq,
    };
    let inst: Instance = generate_synthetic_instance(&cfg).map_err(|e| match e {
        SyntheticError::Instance(e) => instance_error(e),
        e => e.into(),
    })?;
    save_instance(&inst, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let echo = a.out.with_extension("generate.toml");
    fs::write(&echo, toml::to_string(&cfg)?).with_context(|| format!("writing {}", echo.display()))?;
    eprintln!(
        "wrote {} arms to {} (budget {} per step, horizon {}, period {})",
        inst.n_arms(),
        a.out.display(),
        inst.budget,
        inst.horizon,
        inst.period
    );
    Ok(())
}

pub fn indices(a: &IndicesArgs) -> Result<()> {
    let inst = load_instance(&a.instance)?;
    let opts = sim_options(&a.tol, 2);
    let rows: Result<Vec<Vec<IndexRow>>> = inst
        .arms
        .par_iter()
        .map(|arm| {
            let chain = build_belief_chain(&arm.kernel, opts.chain_tolerance, inst.horizon);
            let rows = match arm.window {
                Some(w) => {
                    let enc = encode_action_window(&chain, w, inst.period, 1)?;
                    let table = index_table(enc.mdp(), inst.gamma, &opts.index)?;
                    enc.states()
                        .iter()
                        .enumerate()
                        .map(|(id, s)| IndexRow {
                            arm_id: arm.arm_id,
                            state_id: id,
                            belief: enc.belief(id),
                            timer: Some(s.timer),
                            counter: Some(s.pulls_left),
                            whittle_index: table.values[id],
                        })
                        .collect()
                }
                None => {
                    let mdp = ArmMdp::from_chain(&chain);
                    let table = index_table(&mdp, inst.gamma, &opts.index)?;
                    (0..chain.len())
                        .map(|pos| IndexRow {
                            arm_id: arm.arm_id,
                            state_id: pos,
                            belief: chain.belief(pos),
                            timer: None,
                            counter: None,
                            whittle_index: table.values[pos],
                        })
                        .collect()
                }
            };
            Ok(rows)
        })
        .collect();
    let rows: Vec<IndexRow> = rows?.into_iter().flatten().collect();
    write_index_rows(create(&a.out)?, &rows)?;
    eprintln!("wrote {} index rows for {} arms to {}", rows.len(), inst.n_arms(), a.out.display());
    Ok(())
}

pub fn windows(a: &WindowsArgs) -> Result<()> {
    let inst = load_instance(&a.instance)?;
    let opts = sim_options(&a.tol, a.window_len as usize);
    if opts.window_len > inst.period {
        bail!("window length {} exceeds period {}", opts.window_len, inst.period);
    }
    let sim = Simulator::new(&inst, &inst, opts)?;
    let forecasts: Vec<_> = sim.index_tables().iter().map(|t| forecast_indices(0, t, inst.period)).collect();
    let seq = match simulate_virtual_sequence_with(&forecasts, inst.budget, inst.frequency, &opts.planner) {
        Ok(s) => s,
        Err(WindowError::Infeasible(d)) => return Err(Infeasible(d).into()),
        Err(e) => return Err(e.into()),
    };
    let dist = solve_window_lp::<f64>(&build_window_lp(&seq, opts.window_len)?)?;
    let ids: Vec<u32> = inst.arms.iter().map(|a| a.arm_id).collect();
    let assignment = sample_windows(&dist, &seq, &ids, a.seed);
    write_windows(create(&a.out)?, &ids, &assignment)?;
    eprintln!(
        "virtual pulls per step {:?}; balancing objective {:.3e}; wrote {} windows to {}",
        seq.counts,
        dist.objective,
        assignment.iter().map(Vec::len).sum::<usize>(),
        a.out.display()
    );
    Ok(())
}

/// Windows per arm index from a windows CSV; every arm must appear.
fn windows_by_arm(path: &Path, inst: &Instance) -> Result<Vec<Vec<Window>>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let rows = read_windows(file).with_context(|| format!("reading {}", path.display()))?;
    let index: HashMap<u32, usize> = inst.arms.iter().enumerate().map(|(i, a)| (a.arm_id, i)).collect();
    let mut out = vec![Vec::new(); inst.n_arms()];
    for (id, w) in rows {
        let Some(&i) = index.get(&id) else { bail!("windows file names unknown arm {id}") };
        if w.len == 0 || w.start == 0 || !w.fits(inst.period) {
            bail!("arm {id}: window {}+{} does not fit period {}", w.start, w.len, inst.period);
        }
        out[i].push(w);
    }
    if let Some(i) = out.iter().position(Vec::is_empty) {
        bail!("windows file has no window for arm {}", inst.arms[i].arm_id);
    }
    Ok(out)
}

pub fn plan(a: &PlanArgs) -> Result<()> {
    let inst = load_instance(&a.instance)?;
    let period = inst.period;
    let mask = match &a.windows {
        Some(path) => eligibility_mask(&windows_by_arm(path, &inst)?, period),
        None => inst
            .arms
            .iter()
            .map(|arm| (1..=period).map(|t| arm.window.is_none_or(|w| w.contains(t))).collect())
            .collect(),
    };
    let opts = sim_options(&a.tol, 2);
    let sim = Simulator::new(&inst, &inst, opts)?;
    let forecasts: Vec<_> = sim.index_tables().iter().map(|t| forecast_indices(0, t, period)).collect();
    let p = LookaheadProblem::from_forecasts(&forecasts, inst.budget).with_frequency(inst.frequency).with_mask(mask);
    let mut solve_opts = SolveOptions { keep_incumbent: true, ..Default::default() };
    if let Some(n) = a.node_limit {
        solve_opts.node_limit = n;
    }
    let plan = if a.naive { solve_naive_with(&p, &solve_opts)? } else { solve_with(&p, &solve_opts)? };
    let ids: Vec<u32> = inst.arms.iter().map(|a| a.arm_id).collect();
    write_plan(create(&a.out)?, &plan, &ids)?;
    if !plan.has_schedule() {
        let why = plan.diagnostic.unwrap_or_else(|| "no feasible schedule".into());
        return Err(Infeasible(why).into());
    }
    let violations = validate_plan(&p, &plan);
    if !violations.is_empty() {
        bail!("plan failed validation: {violations:?}");
    }
    eprintln!(
        "{} plan with {} pulls, objective {:.6}; wrote {}",
        plan.status,
        plan.pulls().len(),
        plan.objective,
        a.out.display()
    );
    Ok(())
}

fn with_fixed_windows(inst: Instance, path: &Path) -> Result<Instance> {
    let windows = windows_by_arm(path, &inst)?;
    let params = inst.params();
    let mut arms = inst.arms;
    for (arm, ws) in arms.iter_mut().zip(windows) {
        if ws.len() != 1 {
            bail!("arm {} has {} windows; fixed windows need exactly one", arm.arm_id, ws.len());
        }
        arm.window = Some(ws[0]);
    }
    Ok(Instance::new(arms, &params)?)
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let mut inst = load_instance(&a.instance)?;
    if let Some(path) = &a.windows {
        inst = with_fixed_windows(inst, path)?;
    }
    let opts = sim_options(&a.tol, a.window_len as usize);
    let planning = if a.noise_sigma > 0.0 { perturb_parameters(&inst, a.noise_sigma, a.seed) } else { inst.clone() };
    let sim = Simulator::new(&inst, &planning, opts)?;
    let null_reward = run_null(&inst).reward;
    let trace = sim.run(&a.policy, a.seed, a.surprise).map_err(sim_error)?;
    let mut report = if a.surprise > 0.0 {
        let base = sim.run(&a.policy, a.seed, 0.0).map_err(sim_error)?;
        RunReport::with_surprises(&trace, &base, null_reward, a.seed, a.surprise)
    } else {
        RunReport::new(&trace, null_reward, a.seed)
    };
    report.noise_sigma = a.noise_sigma;
    if let Some(path) = &a.trace {
        write_trace(create(path)?, &trace)?;
    }
    if let Some(path) = &a.report {
        fs::write(path, report.to_toml()?).with_context(|| format!("writing {}", path.display()))?;
    }
    eprintln!(
        "{}: reward {:.4}, null {:.4}, improvement {:.4} ({:.2}%){}",
        report.policy,
        report.reward,
        report.null_reward,
        report.improvement,
        report.improvement_pct,
        match report.drop_pct {
            Some(d) => format!(", drop {d:.3}% with {} crowd-outs", report.crowd_outs),
            None => String::new(),
        }
    );
    if !report.audit_ok {
        bail!("constraint audit failed: {}", report.audit.join("; "));
    }
    Ok(())
}

pub fn report(a: &ReportArgs) -> Result<()> {
    let mut reports = Vec::new();
    for path in &a.reports {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        reports.push(RunReport::from_toml(&text).with_context(|| format!("parsing {}", path.display()))?);
    }
    if let Some(path) = &a.instance {
        let args = InstanceArgs {
            instance: path.clone(),
            horizon: None,
            period: None,
            budget_frac: None,
            gamma: None,
            freq: None,
        };
        let inst = load_instance(&args)?;
        let sim = Simulator::new(&inst, &inst, sim_options(&a.tol, 2))?;
        let null_reward = run_null(&inst).reward;
        let policies = if a.policies.is_empty() { PolicyConfig::standard_matrix() } else { a.policies.clone() };
        for &seed in &a.seeds {
            for cfg in &policies {
                let run = || -> Result<RunReport, SimError> {
                    let base = sim.run(cfg, seed, 0.0)?;
                    if a.surprise > 0.0 {
                        let trace = sim.run(cfg, seed, a.surprise)?;
                        Ok(RunReport::with_surprises(&trace, &base, null_reward, seed, a.surprise))
                    } else {
                        Ok(RunReport::new(&base, null_reward, seed))
                    }
                };
                match run() {
                    Ok(r) => reports.push(r),
                    Err(e) => eprintln!("seed {seed} {cfg}: {e}"),
                }
            }
        }
    }
    if reports.is_empty() {
        bail!("no runs to report; pass summary files or --instance");
    }
    fs::create_dir_all(&a.out_dir).with_context(|| format!("cannot create {}", a.out_dir.display()))?;
    let improvement = improvement_table(&reports);
    write_rows(create(&a.out_dir.join("improvement.csv"))?, &improvement)?;
    let drops = drop_table(&reports);
    if !drops.is_empty() {
        write_rows(create(&a.out_dir.join("drops.csv"))?, &drops)?;
    }
    for l in &improvement {
        eprintln!(
            "{:<16} runs {:>2}  reward {:>10.3}  improvement {:>9.3} ({:.2}%)",
            l.policy, l.runs, l.reward, l.improvement, l.improvement_pct
        );
    }
    for l in &drops {
        eprintln!("{:<16} surprise {:.3}  drop {:.3}%", l.policy, l.surprise_rate, l.drop_pct);
    }
    if improvement.iter().any(|l| !l.audit_ok) {
        bail!("at least one run failed the constraint audit");
    }
    Ok(())
}
