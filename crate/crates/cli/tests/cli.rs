use std::fs;
use std::path::Path;

use ruinsim_cli::run_from;
use ruinsim_core::tuning::select_variance_params;
use ruinsim_core::{IncrementModel, Mode, Overrides};

const MG1: &str = "name = \"small\"\nb = [50.0]\nn = 600\nseed = 3\n[model]\nname = \"mg1-pareto\"\n[baselines]\ncrude = true\nak = true\n";

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn exit_code(args: &[&str]) -> u8 {
    match run_from(std::iter::once("ruinsim").chain(args.iter().copied())) {
        Ok(_) => 0,
        Err(e) => e.exit_code(),
    }
}

#[test]
fn estimate_is_shard_invariant_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", MG1);
    let mut outs = Vec::new();
    for (i, shards) in ["1", "3", "1"].iter().enumerate() {
        let out = dir.path().join(format!("o{i}"));
        let a = run_from(["ruinsim", "estimate", "--config", &cfg, "--out", out.to_str().unwrap(), "--shards", shards]).unwrap();
        assert_eq!(a.rows.len(), 3);
        outs.push((fs::read(a.csv.unwrap()).unwrap(), fs::read(a.json).unwrap()));
    }
    assert!(outs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn seed_flag_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", MG1);
    let o = dir.path().join("o");
    let a = run_from(["ruinsim", "estimate", "--config", &cfg, "--out", o.to_str().unwrap()]).unwrap();
    let b = run_from(["ruinsim", "estimate", "--config", &cfg, "--out", o.to_str().unwrap(), "--seed", "4"]).unwrap();
    assert_ne!(a.rows[0].mean, b.rows[0].mean);
    assert_eq!(b.rows[0].seed, 4);
}

#[test]
fn timing_fills_the_wall_clock_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", MG1);
    let o = dir.path().join("o");
    let a = run_from(["ruinsim", "estimate", "--config", &cfg, "--out", o.to_str().unwrap(), "--timing"]).unwrap();
    let csv = fs::read_to_string(a.csv.unwrap()).unwrap();
    assert!(csv.lines().skip(1).all(|l| !l.ends_with(',')));
    let doc: serde_json::Value = serde_json::from_slice(&fs::read(a.json).unwrap()).unwrap();
    assert!(doc["rows"][0]["wall_seconds"].is_f64());
    assert!(doc["config"].get("shards").is_none());
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("o");
    let o = o.to_str().unwrap();
    let typo = write(dir.path(), "typo.toml", &MG1.replace("seed = 3", "sead = 3"));
    assert_eq!(exit_code(&["estimate", "--config", &typo, "--out", o]), 2);
    let gamma = write(
        dir.path(),
        "gamma.toml",
        "b = [100.0]\nn = 100\n[model]\nname = \"mg1-pareto\"\nservice_index = 1.4\ninterarrival_mean = 5.0\n[mode]\nkind = \"gamma-moment\"\ngamma = 0.7\n",
    );
    assert_eq!(exit_code(&["estimate", "--config", &gamma, "--out", o]), 2);
    let ak = write(dir.path(), "ak.toml", "b = [10.0]\nn = 100\n[model]\nname = \"weibull-type\"\n[baselines]\nak = true\n");
    assert_eq!(exit_code(&["estimate", "--config", &ak, "--out", o]), 2);
    assert_eq!(exit_code(&["estimate", "--config", "/nonexistent/c.toml", "--out", o]), 2);
    assert_eq!(exit_code(&["estimate"]), 2);
    assert!(!dir.path().join("o").exists());
}

#[test]
fn strict_verification_failure_exits_3() {
    // At the closed-form κ floor the Weibull plan breaks the Lyapunov inequality.
    let m = IncrementModel::weibull();
    let floor = select_variance_params(&m, Mode::StrongEfficiency, &Overrides::default()).unwrap().kappa_floor;
    let dir = tempfile::tempdir().unwrap();
    let text = format!("name = \"w\"\nb = [100.0]\nn = 100\n[model]\nname = \"weibull-type\"\n[overrides]\nkappa = {:e}\n", floor * 1.001);
    let cfg = write(dir.path(), "w.toml", &text);
    let o = dir.path().join("o");
    let o = o.to_str().unwrap();
    assert_eq!(exit_code(&["verify", "--config", &cfg, "--out", o]), 0);
    assert_eq!(exit_code(&["verify", "--config", &cfg, "--out", o, "--verify", "strict"]), 3);
    let doc: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("o/w.verify.json")).unwrap()).unwrap();
    assert_eq!(doc["verification"][0]["pass"], false);
}

#[test]
fn censoring_exits_4_after_writing_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "name = \"cap\"\nb = [1000.0]\nn = 300\nstep_cap = 5\n[model]\nname = \"mg1-pareto\"\n");
    let o = dir.path().join("o");
    assert_eq!(exit_code(&["estimate", "--config", &cfg, "--out", o.to_str().unwrap()]), 4);
    let csv = fs::read_to_string(o.join("cap.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn reproduce_runs_the_bundled_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("o");
    let a = run_from(["ruinsim", "reproduce", "table2", "--n", "300", "--out", o.to_str().unwrap()]).unwrap();
    assert_eq!(a.rows.len(), 3);
    assert!(a.rows.iter().all(|r| r.mean > 0.0 && r.n == 300));
    assert!(o.join("table2.csv").exists());
}
