use std::fs::{self, File};
use std::path::Path;
use std::process::{Command, Output};

use inspection_rmab::arm_model::read_arms;
use inspection_rmab::planner::{read_plan, PlanStatus};
use inspection_rmab::simulate::{read_rows, read_trace, DropLine, ImprovementLine, RunReport};
use inspection_rmab::window_opt::read_windows;
use tempfile::tempdir;

fn rmab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmab")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = rmab(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn generate_is_reproducible_with_default_beta_rows() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    ok(d, &["generate", "--n", "1000", "--seed", "7", "--out", "a.csv"]);
    ok(d, &["generate", "--n", "1000", "--seed", "7", "--out", "b.csv"]);
    assert_eq!(fs::read(d.join("a.csv")).unwrap(), fs::read(d.join("b.csv")).unwrap());
    assert_eq!(fs::read(d.join("a.toml")).unwrap(), fs::read(d.join("b.toml")).unwrap());
    let echo = fs::read_to_string(d.join("a.generate.toml")).unwrap();
    assert!(echo.contains("n_arms = 1000") && echo.contains("p00_alpha = 5.0"), "{echo}");

    let arms: Vec<_> = read_arms::<f64, _>(File::open(d.join("a.csv")).unwrap()).unwrap();
    assert_eq!(arms.len(), 1000);
    // Beta(5,1) has mean 5/6 and Beta(1,5) mean 1/6; sd of the sample mean is about 0.0045.
    let m00 = arms.iter().map(|a| a.kernel.p00).sum::<f64>() / 1000.0;
    let m10 = arms.iter().map(|a| a.kernel.p10).sum::<f64>() / 1000.0;
    assert!((m00 - 5.0 / 6.0).abs() < 0.02, "{m00}");
    assert!((m10 - 1.0 / 6.0).abs() < 0.02, "{m10}");
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    let out = rmab(d, &["generate", "--n", "0", "--out", "x.csv"]);
    assert_eq!(code(&out), 1);
    assert!(!d.join("x.csv").exists());
    assert_eq!(code(&rmab(d, &["generate", "--n", "5", "--out", "x.csv", "--colour", "red"])), 1);
    assert_eq!(code(&rmab(d, &["plan", "--instance", "missing.csv", "--out", "p.csv"])), 1);
    assert_eq!(code(&rmab(d, &["simulate", "--instance", "missing.csv", "--policy", "opt-opt-eq7x"])), 1);
    assert_eq!(code(&rmab(d, &["--help"])), 0);
}

#[test]
fn infeasible_budget_exits_with_two() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    ok(d, &["generate", "--n", "34", "--seed", "1", "--out", "arms.csv"]);
    let out = rmab(d, &["plan", "--instance", "arms.csv", "--budget-frac", "0.02", "--out", "p.csv"]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
    let out = rmab(d, &["simulate", "--instance", "arms.csv", "--budget-frac", "0.02"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn plan_reports_window_infeasibility_with_two() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    ok(d, &["generate", "--n", "12", "--seed", "3", "--budget-frac", "0.1", "--out", "arms.csv"]);
    // Budget 1 per step, but every arm must be pulled in steps 1..=2.
    let mut rows = String::from("arm_id,window_start,window_len\n");
    for id in 0..12 {
        rows.push_str(&format!("{id},1,2\n"));
    }
    fs::write(d.join("w.csv"), rows).unwrap();
    let out = rmab(d, &["plan", "--instance", "arms.csv", "--windows", "w.csv", "--out", "p.csv"]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    let plan = read_plan(File::open(d.join("p.csv")).unwrap()).unwrap();
    assert_eq!(plan.status, PlanStatus::Infeasible);
}

#[test]
fn full_pipeline_on_hundred_arms_passes_audit() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    ok(d, &["generate", "--n", "100", "--seed", "11", "--out", "arms.csv"]);

    ok(d, &["--threads", "2", "indices", "--instance", "arms.csv", "--out", "idx.csv"]);
    let idx = fs::read_to_string(d.join("idx.csv")).unwrap();
    assert!(idx.starts_with("arm_id,state_id,belief,timer,counter,whittle_index\n"));

    ok(d, &["windows", "--instance", "arms.csv", "--seed", "4", "--out", "w.csv"]);
    let windows = read_windows(File::open(d.join("w.csv")).unwrap()).unwrap();
    assert_eq!(windows.len(), 100);
    assert!(windows.iter().all(|(_, w)| w.len == 2 && w.start >= 1 && w.start + 1 <= 12));

    ok(d, &["plan", "--instance", "arms.csv", "--windows", "w.csv", "--out", "plan.csv"]);
    let plan = read_plan(File::open(d.join("plan.csv")).unwrap()).unwrap();
    assert_eq!(plan.status, PlanStatus::Optimal);
    assert_eq!(plan.pulls.len(), 100);
    for (id, step) in &plan.pulls {
        let w = windows.iter().find(|(a, _)| a == id).unwrap().1;
        assert!(w.contains(*step), "arm {id} pulled at {step} outside {w:?}");
    }
    let mut per_step = [0usize; 13];
    plan.pulls.iter().for_each(|&(_, t)| per_step[t] += 1);
    assert!(per_step.iter().all(|&c| c <= 9));

    let sim = [
        "simulate",
        "--instance",
        "arms.csv",
        "--policy",
        "opt-opt-eq1",
        "--surprise",
        "0.01",
        "--seed",
        "2",
        "--trace",
        "t.csv",
        "--report",
        "r.toml",
    ];
    ok(d, &sim);
    let report = RunReport::from_toml(&fs::read_to_string(d.join("r.toml")).unwrap()).unwrap();
    assert!(report.audit_ok);
    assert_eq!(report.policy, "opt-opt-eq1");
    assert_eq!(report.surprise_rate, 0.01);
    assert!(report.drop_pct.is_some() && report.base_reward.is_some());
    assert!(report.improvement > 0.0);
    let rows = read_trace(File::open(d.join("t.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 60 * 100);

    // Same flags, same bytes.
    let first = fs::read(d.join("t.csv")).unwrap();
    ok(d, &sim);
    assert_eq!(fs::read(d.join("t.csv")).unwrap(), first);

    ok(
        d,
        &[
            "simulate",
            "--instance",
            "arms.csv",
            "--windows",
            "w.csv",
            "--policy",
            "rdm-ip-eq1",
            "--report",
            "fixed.toml",
        ],
    );
    let fixed = RunReport::from_toml(&fs::read_to_string(d.join("fixed.toml")).unwrap()).unwrap();
    assert!(fixed.audit_ok);

    ok(d, &["report", "r.toml", "fixed.toml", "--out-dir", "tables"]);
    let imp: Vec<ImprovementLine> = read_rows(File::open(d.join("tables/improvement.csv")).unwrap()).unwrap();
    assert_eq!(imp.len(), 2);
    assert_eq!(imp[0].reward, report.base_reward.unwrap());
    let drops: Vec<DropLine> = read_rows(File::open(d.join("tables/drops.csv")).unwrap()).unwrap();
    assert_eq!(drops.len(), 1);
    assert_eq!(drops[0].drop_pct, report.drop_pct.unwrap());
}

#[test]
fn report_over_policy_matrix_has_improvement_column() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    ok(d, &["generate", "--n", "34", "--seed", "5", "--out", "arms.csv"]);
    ok(d, &["report", "--instance", "arms.csv", "--seeds", "1,2", "--out-dir", "m"]);
    let text = fs::read_to_string(d.join("m/improvement.csv")).unwrap();
    assert!(text.lines().next().unwrap().contains("improvement_pct"));
    let imp: Vec<ImprovementLine> = read_rows(text.as_bytes()).unwrap();
    let labels: Vec<&str> = imp.iter().map(|l| l.policy.as_str()).collect();
    assert_eq!(
        labels,
        [
            "rdm-ip-eq1",
            "rdm-opt-eq1",
            "opt-ip-eq1",
            "opt-opt-eq1",
            "opt-opt-le1",
            "rdm-opt-le1",
            "opt-opt-b12-12",
            "opt-opt-b12-15"
        ]
    );
    for l in &imp {
        assert_eq!(l.runs, 2);
        assert!(l.audit_ok);
        assert!((l.improvement - (l.reward - l.null_reward)).abs() < 1e-9);
    }
    assert!(!d.join("m/drops.csv").exists());
}
