use std::path::Path;
use std::process::Command;

use sensor_placement::harness::{
    emit_traces, read_trace_csv, run_experiment, regret_bound, ArmConfig, BoundParams,
    ExperimentConfig, ExperimentSummary,
};
use sensor_placement::{brute_force_select, Action, PolicyKind, ScheduleKind};

fn antiderivative(x: f64) -> f64 {
    1000.0 / 21.0 * (x * x / 2.0 - x * x * x / 3.0)
}

fn closed_form_reward(action: &Action<f64>, cost: f64) -> f64 {
    action
        .intervals()
        .iter()
        .map(|&(a, b)| antiderivative(b) - antiderivative(a) - cost * (b - a))
        .sum()
}

fn small_unimodal(horizon: u64) -> ExperimentConfig<f64> {
    let mut cfg = ExperimentConfig::unimodal_reference();
    cfg.horizon = horizon;
    cfg.replications = 3;
    cfg.arms = vec![
        ArmConfig::new(PolicyKind::Thompson).with_schedule(ScheduleKind::Cuberoot),
        ArmConfig::new(PolicyKind::Epsgreedy).with_schedule(ScheduleKind::Sqrt),
    ];
    cfg
}

#[test]
fn regret_quantities_match_closed_form() {
    // K stays at most 16 here, so A*_t can be found exhaustively from exact
    // bin integrals
    let cfg = small_unimodal(60);
    let res = run_experiment(&cfg).unwrap();
    let best = closed_form_reward(&res.optimal_action, 10.0);
    assert!((res.optimal_reward - best).abs() < 1e-9);
    assert!((best - (antiderivative(0.7) - antiderivative(0.3) - 4.0)).abs() < 1e-6);
    for trace in res.traces() {
        for row in &trace.rows {
            let k = row.bins;
            assert!(k <= 16);
            let w: Vec<f64> = (0..k)
                .map(|b| {
                    let (lo, hi) = (b as f64 / k as f64, (b + 1) as f64 / k as f64);
                    antiderivative(hi) - antiderivative(lo) - 10.0 / k as f64
                })
                .collect();
            let best_t = brute_force_select(&w, 1).unwrap().weight;
            let reward = closed_form_reward(&row.action, 10.0);
            assert!((row.reward - reward).abs() < 1e-9);
            assert!((row.inst_regret - (best - reward)).abs() < 1e-8);
            assert!((row.disc_regret - (best - best_t)).abs() < 1e-8);
            // δ(A) = δ_t(A) + δ(A*_t)
            let step = best_t - reward;
            assert!((row.inst_regret - (step + row.disc_regret)).abs() < 1e-8);
            assert!(row.inst_regret >= -1e-9);
            assert!(row.disc_regret <= 2.0 * 10.0 * 1.0 / k as f64 + 1e-9);
        }
        let cum: Vec<f64> = trace.rows.iter().map(|r| r.cum_regret).collect();
        assert!(cum.windows(2).all(|p| p[1] >= p[0] - 1e-9));
    }
}

#[test]
fn cumulative_regret_stays_under_regret_bound() {
    let mut cfg = ExperimentConfig::<f64>::bimodal_reference();
    cfg.horizon = 200;
    cfg.snapshot_round = None;
    cfg.replications = 3;
    cfg.arms = vec![ArmConfig::new(PolicyKind::Thompson)];
    let res = run_experiment(&cfg).unwrap();
    let arm = &res.arms[0];
    for trace in &arm.traces {
        let p = trace.bound_params(arm.arm.policy.prior.lambda_max, 2.0, 2);
        let ks = trace.bins_per_round();
        for (i, &k) in ks.iter().enumerate() {
            let r = k as f64 / ((i + 1) as f64).cbrt();
            assert!(p.k_low <= r + 1e-12 && r <= p.k_high + 1e-12);
        }
        // written out term by term
        let t = 200f64;
        let want = 4.0 * p.k_high * ((t + 1.0).ln() * t.ln() + 2.0 * p.lambda_max) * t.cbrt()
            + (2.0 * 2.0 / p.k_low + (24.0 * p.k_high * p.lambda_max * t.ln()).sqrt())
                * t.powf(2.0 / 3.0);
        let got = regret_bound(&p);
        assert!((got - want).abs() < 1e-9 * want);
        assert!(trace.final_regret() <= got);
    }
}

#[test]
fn unit_horizon_bound_is_arithmetic() {
    let p = BoundParams::<f64> {
        k_low: 16.0,
        k_high: 16.0,
        lambda_max: 70.0,
        cost: 2.0,
        sensors: 2,
        horizon: 1,
    };
    assert_eq!(regret_bound(&p), 4.0 * 16.0 * 140.0 + 4.0 / 16.0);
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap()
}

#[test]
fn emitted_files_are_deterministic_and_parse_back() {
    let cfg = small_unimodal(30);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let res = run_experiment(&cfg).unwrap();
    let pa = emit_traces(&res, a.path()).unwrap();
    let pb = emit_traces(&run_experiment(&cfg).unwrap(), b.path()).unwrap();
    assert_eq!(read(&pa.trace_csv), read(&pb.trace_csv));
    assert_eq!(read(&pa.summary_json), read(&pb.summary_json));
    assert_eq!(read(&pa.posterior_json), read(&pb.posterior_json));

    let rows = read_trace_csv(std::fs::File::open(&pa.trace_csv).unwrap()).unwrap();
    let traces: Vec<_> = res.traces().collect();
    assert_eq!(rows.len(), traces.len() * 30);
    for (row, (trace, want)) in rows
        .iter()
        .zip(traces.iter().flat_map(|t| t.rows.iter().map(move |r| (t, r))))
    {
        assert_eq!(row.run_id, trace.run_id);
        assert_eq!((row.t, row.bins), (want.t, want.bins));
        assert_eq!(row.reward.to_bits(), want.reward.to_bits());
        assert_eq!(row.inst_regret.to_bits(), want.inst_regret.to_bits());
        assert_eq!(row.disc_regret.to_bits(), want.disc_regret.to_bits());
        assert_eq!(row.cum_regret.to_bits(), want.cum_regret.to_bits());
        let back = Action::new(row.action().unwrap()).unwrap();
        assert_eq!(&back, &want.action);
    }

    let summary: ExperimentSummary =
        serde_json::from_slice(&read(&pa.summary_json)).unwrap();
    assert_eq!(summary.arms.len(), 2);
    for arm in &summary.arms {
        assert_eq!(arm.checkpoints.len(), 30);
        for c in &arm.checkpoints {
            assert!(c.q025 <= c.mean + 1e-12 && c.mean <= c.q975 + 1e-12);
        }
    }
}

#[test]
fn seed_changes_the_output() {
    let mut cfg = small_unimodal(20);
    let x = run_experiment(&cfg).unwrap();
    cfg.seed ^= 1;
    let y = run_experiment(&cfg).unwrap();
    let xs: Vec<_> = x.traces().map(|t| t.rows.clone()).collect();
    let ys: Vec<_> = y.traces().map(|t| t.rows.clone()).collect();
    assert_ne!(xs, ys);
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sensor-placement"))
}

#[test]
fn cli_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_unimodal(15);
    cfg.name = "tiny".into();
    let path = dir.path().join("tiny.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    let out = dir.path().join("out");
    let status = cli()
        .args(["run", "--config"])
        .arg(&path)
        .args(["--seed", "9", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    for f in ["tiny_trace.csv", "tiny_summary.json", "tiny_posterior.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let summary: ExperimentSummary =
        serde_json::from_slice(&read(&out.join("tiny_summary.json"))).unwrap();
    assert_eq!(summary.seed, 9);
}

#[test]
fn cli_errors_are_machine_readable() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"name": "x"}"#).unwrap();
    for args in [
        vec!["run".to_string(), "--config".into(), bad.display().to_string()],
        vec!["run".into(), "--config".into(), "/nonexistent/config.json".into()],
        vec!["oracle-check".into(), "--max-bins".into(), "30".into()],
    ] {
        let out = cli().args(&args).output().unwrap();
        assert!(!out.status.success());
        let line = String::from_utf8(out.stderr).unwrap();
        let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
        assert!(v["error"].is_string() && v["kind"].is_string(), "{line}");
    }
}

#[test]
fn cli_oracle_check_passes() {
    let out = cli().args(["oracle-check", "--instances", "300"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("pass 300 fail 0"), "{text}");
}
