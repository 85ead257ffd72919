use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn gaitforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaitforge"))
        .args(args)
        .env("GAITFORGE_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn default_config() -> Value {
    let out = gaitforge(&["config-default"]);
    assert_eq!(code(&out), 0);
    serde_json::from_str(&stdout(&out)).unwrap()
}

fn tiny_config(dir: &Path) -> PathBuf {
    let mut cfg = default_config();
    cfg["es"]["pairs"] = 2.into();
    cfg["es"]["iterations"] = 3.into();
    cfg["es"]["checkpoint_interval"] = 2.into();
    let path = dir.join("tiny.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn train(config: &Path, out: &Path, seed: Option<&str>) -> Output {
    let mut args = vec!["train", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    if let Some(s) = seed {
        args.extend(["--seed", s]);
    }
    gaitforge(&args)
}

#[test]
fn missing_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = train(&dir.path().join("nope.json"), &dir.path().join("run"), None);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = default_config();
    cfg["es"]["momentum"] = 0.9.into();
    let path = dir.path().join("bad.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    let out = train(&path, &dir.path().join("run"), None);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}

#[test]
fn tiny_training_run_writes_log_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let run = dir.path().join("run");
    let out = train(&cfg, &run, None);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let log = fs::read_to_string(run.join("train_log.csv")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines[0], "iteration,mean_return,max_return,mean_episode_ticks,wall_seconds");
    assert_eq!(lines.len(), 4);
    for (i, row) in lines[1..].iter().enumerate() {
        assert!(row.starts_with(&format!("{i},")));
    }
    assert!(run.join("checkpoint_00002.json").exists());
    assert!(run.join("checkpoint_final.json").exists());
    assert!(!run.join("checkpoint_00003.json").exists());
}

#[test]
fn seed_override_changes_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let read = |name: &str, seed: &str| {
        let run = dir.path().join(name);
        assert_eq!(code(&train(&cfg, &run, Some(seed))), 0);
        fs::read(run.join("checkpoint_final.json")).unwrap()
    };
    let a = read("a", "1");
    let b = read("b", "1");
    let c = read("c", "2");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

fn trained_checkpoint(dir: &Path) -> PathBuf {
    let cfg = tiny_config(dir);
    let run = dir.join("run");
    assert_eq!(code(&train(&cfg, &run, None)), 0);
    run.join("checkpoint_final.json")
}

fn read_jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn eval_reports_summary_and_push_window() {
    let dir = tempfile::tempdir().unwrap();
    let ck = trained_checkpoint(dir.path());
    let tr = dir.path().join("trace.jsonl");
    let out = gaitforge(&[
        "eval", "--checkpoint", ck.to_str().unwrap(), "--vx", "0.5", "--vy", "0",
        "--duration", "2.5", "--push", "2,0.1,25,0", "--trace", tr.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let recs = read_jsonl(&tr);
    assert_eq!(summary["ticks"].as_u64().unwrap() as usize, recs.len());
    assert!(summary["fell"] == "yes" || summary["fell"] == "no");
    // steady-state speed is the mean over the second half of the run
    let steady: Vec<f64> = recs
        .iter()
        .filter(|r| r["t"].as_f64().unwrap() >= 1.25)
        .map(|r| r["v_avg"][0].as_f64().unwrap())
        .collect();
    if !steady.is_empty() {
        let mean = steady.iter().sum::<f64>() / steady.len() as f64;
        assert!((summary["steady_mean_vx"].as_f64().unwrap() - mean).abs() < 1e-9);
    }
    if recs.len() == 2500 {
        let pushed: Vec<f64> = recs
            .iter()
            .filter(|r| r["push_force"][0].as_f64().unwrap() == 25.0)
            .map(|r| r["t"].as_f64().unwrap())
            .collect();
        assert!((99..=101).contains(&pushed.len()));
        assert!(pushed.iter().all(|t| *t > 1.99 && *t < 2.11));
    }
}

#[test]
fn eval_zero_duration_gives_empty_trace() {
    let dir = tempfile::tempdir().unwrap();
    let ck = trained_checkpoint(dir.path());
    let tr = dir.path().join("empty.jsonl");
    let out = gaitforge(&["eval", "--checkpoint", ck.to_str().unwrap(), "--duration", "0", "--trace", tr.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read_to_string(&tr).unwrap(), "");
}

#[test]
fn eval_rejects_bad_commands_and_versions() {
    let dir = tempfile::tempdir().unwrap();
    let ck = trained_checkpoint(dir.path());
    let out = gaitforge(&["eval", "--checkpoint", ck.to_str().unwrap(), "--vx", "1.2", "--duration", "0.01"]);
    assert_eq!(code(&out), 2);

    let mut v: Value = serde_json::from_str(&fs::read_to_string(&ck).unwrap()).unwrap();
    v["version"] = 2.into();
    let old = dir.path().join("v2.json");
    fs::write(&old, v.to_string()).unwrap();
    let out = gaitforge(&["eval", "--checkpoint", old.to_str().unwrap(), "--duration", "0.01"]);
    assert_eq!(code(&out), 4);

    let missing = dir.path().join("missing.json");
    let out = gaitforge(&["eval", "--checkpoint", missing.to_str().unwrap()]);
    assert_eq!(code(&out), 4);
}

#[test]
fn bridge_without_server_is_an_io_failure() {
    let dir = tempfile::tempdir().unwrap();
    let ck = trained_checkpoint(dir.path());
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let addr = format!("127.0.0.1:{port}");
    let out = gaitforge(&["eval", "--checkpoint", ck.to_str().unwrap(), "--env", "bridge", "--addr", &addr, "--duration", "0.01"]);
    assert_eq!(code(&out), 3);
}

fn export(trace: &Path, kind: &str, extra: &[&str]) -> Output {
    let mut args = vec!["export", "--trace", trace.to_str().unwrap(), "--kind", kind];
    args.extend_from_slice(extra);
    gaitforge(&args)
}

#[test]
fn export_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let out = export(&empty, "speed-track", &[]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "t,v_avg_x,v_avg_y,vd_x,vd_y\n");

    let ck = trained_checkpoint(dir.path());
    let one = dir.path().join("one.jsonl");
    let out = gaitforge(&["eval", "--checkpoint", ck.to_str().unwrap(), "--duration", "0.001", "--trace", one.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let out = export(&one, "reward-components", &[]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "t,r_vx,r_vy,r_h,r_u,r_com,r_ang,r_angvel,r_fd,total");

    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "{\"tick\": 1}\n").unwrap();
    assert_eq!(code(&export(&bad, "speed-track", &[])), 5);
    assert_eq!(code(&export(&one, "limit-cycle", &["--joints", "12"])), 5);
}

#[test]
fn limit_cycle_of_periodic_trace_closes() {
    let dir = tempfile::tempdir().unwrap();
    let ck = trained_checkpoint(dir.path());
    let one = dir.path().join("one.jsonl");
    assert_eq!(
        code(&gaitforge(&["eval", "--checkpoint", ck.to_str().unwrap(), "--duration", "0.001", "--trace", one.to_str().unwrap()])),
        0
    );
    let template = read_jsonl(&one).remove(0);
    let n = 700;
    let mut text = String::new();
    for k in 0..=n {
        let phase = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        let mut r = template.clone();
        r["tick"] = (k + 1).into();
        r["t"] = ((k + 1) as f64 * 1e-3).into();
        for j in 0..10 {
            r["q"][j] = (0.4 * (phase + j as f64).sin()).into();
            r["qd"][j] = (0.4 * (phase + j as f64).cos()).into();
        }
        text.push_str(&r.to_string());
        text.push('\n');
    }
    let synthetic = dir.path().join("cycle.jsonl");
    fs::write(&synthetic, text).unwrap();
    let csv_path = dir.path().join("cycle.csv");
    let out = export(&synthetic, "limit-cycle", &["--joints", "2,3", "--out", csv_path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let csv = fs::read_to_string(&csv_path).unwrap();
    let rows: Vec<Vec<f64>> = csv.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(csv.lines().next().unwrap(), "t,q2,qd2,q3,qd3");
    assert_eq!(rows.len(), n + 1);
    let (first, last) = (&rows[0], &rows[n]);
    for c in 1..5 {
        assert!((first[c] - last[c]).abs() < 1e-9, "column {c}");
    }
}

#[test]
fn config_round_trips_and_inspect_reports_layout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    let text = stdout(&gaitforge(&["config-default"]));
    fs::write(&path, &text).unwrap();
    let out = gaitforge(&["inspect", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["parameter_count"], 5069);
    assert_eq!(report["bounds"].as_array().unwrap().len(), 45);
    assert_eq!(stdout(&gaitforge(&["config-default"])), text);
}
