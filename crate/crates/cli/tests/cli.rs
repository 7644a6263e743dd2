use std::path::Path;
use std::process::{Command, Output};

use autoserve_core::sim::trace::parse_trace;
use autoserve_core::wire::{encode_frame, Message, ServiceReservationRequest};

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_autoserve-sim")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn passing_run_exits_zero_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "one.toml", "n_uavs = 1\nduration_s = 600\nseed = 4\n");
    let trace = dir.path().join("t.jsonl");
    let report = dir.path().join("r.json");
    let out = sim(&[
        "run", "--config", &config,
        "--trace", trace.to_str().unwrap(),
        "--report", report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).starts_with("PASS"));

    let (header, records) = parse_trace(&std::fs::read_to_string(&trace).unwrap()).unwrap();
    assert_eq!(header.config.n_uavs, 1);
    assert_eq!(header.config.seed, 4);
    assert_eq!(records.last().unwrap().t, 600);

    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(report["outcome"], "PASS");
    assert_eq!(report["config"]["duration_s"], 600);
}

#[test]
fn failing_run_exits_two() {
    let out = sim(&["run", "--uavs", "5", "--duration", "1200", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2), "{}", stdout(&out));
    assert!(stdout(&out).starts_with("FAIL"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "c.toml", "n_uavs = 3\nduration_s = 50\nseed = 9\n");
    let report = dir.path().join("r.json");
    let out = sim(&["run", "--config", &config, "--uavs", "2", "--lps", "2", "--seed", "11", "--report", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(report["config"]["n_uavs"], 2);
    assert_eq!(report["config"]["n_lps"], 2);
    assert_eq!(report["config"]["seed"], 11);
    assert_eq!(report["config"]["duration_s"], 50);
}

#[test]
fn bad_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let unknown_key = write(dir.path(), "bad.toml", "n_uav = 3\n");
    assert_eq!(sim(&["run", "--config", &unknown_key]).status.code(), Some(1));
    assert_eq!(sim(&["run", "--config", "/nonexistent/cfg.toml"]).status.code(), Some(1));
    assert_eq!(sim(&["run", "--lps", "0"]).status.code(), Some(1));
    assert_eq!(sim(&["dump", "zz"]).status.code(), Some(1));
    assert_eq!(sim(&["dump", "fd01"]).status.code(), Some(1));
}

#[test]
fn sweep_prints_pass_rate_and_distribution() {
    let out = sim(&["sweep", "--uavs", "1", "--duration", "300", "--seeds", "3", "--seed", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("seed=5 ") && text.contains("seed=7 "), "{text}");
    assert!(text.contains("pass_rate=3/3"), "{text}");
    assert!(text.contains("min_battery min="), "{text}");
}

#[test]
fn dump_prints_one_field_per_line() {
    let msg = Message::ServiceReservationRequest(ServiceReservationRequest { priority: 63, target_lp_sys_id: 1 });
    let frame = encode_frame(&msg, 4, 7, 1, None).unwrap();
    let out = sim(&["dump", &hex::encode(&frame)]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    for line in ["magic=0xFD", "seq=4", "sys_id=7", "msg_id=42001", "priority=63", "target_lp_sys_id=1"] {
        assert!(text.lines().any(|l| l == line), "missing {line} in\n{text}");
    }
    assert!(text.lines().all(|l| l.contains('=')));
}

#[test]
fn config_subcommand_prints_defaults() {
    let out = sim(&["config"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("n_uavs = 5") && text.contains("duration_s = 7200"), "{text}");
}
