use std::path::Path;
use std::process::{Command, Output};

fn rhowave(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rhowave"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn lme_on_a_ring_under_the_adversary() {
    let dir = tempfile::tempdir().unwrap();
    let o = rhowave(dir.path(), &["run", "--topo", "ring:8", "--proto", "lme", "--rho", "2", "--daemon", "adversarial", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("safety violations: 0"));
    assert!(dir.path().join("trace.jsonl").exists());
}

#[test]
fn wave_clock_from_an_edge_file_then_check() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("g.edges"), "# house\n0 1\n1 2\n2 3\n3 4\n4 0\n1 3\n").unwrap();
    let o = rhowave(dir.path(), &["run", "--topo", "file:g.edges", "--proto", "ss_ws", "--rho", "3", "--init", "random_arbitrary", "--trace", "ws.jsonl"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("0 violations"));

    let c = rhowave(dir.path(), &["check", "ws.jsonl", "--checks", "replay,wavelet"]);
    assert_eq!(c.status.code(), Some(0), "{}", stdout(&c));
    assert!(stdout(&c).contains("replay: ok"));
    // Checking is idempotent.
    let again = rhowave(dir.path(), &["check", "ws.jsonl", "--checks", "replay,wavelet"]);
    assert_eq!(stdout(&c), stdout(&again));
}

#[test]
fn infimum_check_reports_phases() {
    let dir = tempfile::tempdir().unwrap();
    let o = rhowave(dir.path(), &["run", "--topo", "grid:3x3", "--proto", "infimum:min_int", "--rho", "2", "--phases", "6"]);
    assert_eq!(o.status.code(), Some(0));
    let c = rhowave(dir.path(), &["check", "trace.jsonl", "--checks", "infimum", "--json"]);
    assert_eq!(c.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&c)).unwrap();
    assert_eq!(v["infimum"]["mismatches"], 0);
    assert!(v["infimum"]["phases"].as_u64().unwrap() >= 4);
}

#[test]
fn missing_topology_file_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = rhowave(dir.path(), &["run", "--topo", "file:absent.edges"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("absent.edges"));
}

#[test]
fn refused_sizing_names_the_constraint() {
    let dir = tempfile::tempdir().unwrap();
    let o = rhowave(dir.path(), &["run", "--proto", "lme", "--set", "k2=2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("K2"));
}

#[test]
fn truncated_trace_is_corrupt() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(rhowave(dir.path(), &["run", "--topo", "ring:5"]).status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("trace.jsonl")).unwrap();
    std::fs::write(dir.path().join("cut.jsonl"), &text[..text.len() / 2]).unwrap();
    let o = rhowave(dir.path(), &["check", "cut.jsonl"]);
    assert_ne!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("corrupt trace"));
}

#[test]
fn broken_exclusion_exits_with_a_violation() {
    let dir = tempfile::tempdir().unwrap();
    let o = rhowave(dir.path(), &["run", "--topo", "ring:6", "--proto", "broken_lme", "--rho", "1", "--daemon", "synchronous", "--phases", "20", "--no-trace"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.conf"), "topo = ring:6\nproto = lme\nrho = 3\nseed = 4\n").unwrap();
    let o = rhowave(dir.path(), &["run", "--config", "s.conf", "--rho", "1", "--no-trace", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["rho"], 1);
    assert_eq!(v["seed"], 4);
}

#[test]
fn sweep_grid_is_clean_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sweep", "--topos", "ring", "--ns", "8,12,16", "--rhos", "1,2,3", "--seeds", "0..5", "--protos", "lme", "--daemons", "distributed:0.5"];
    let par = rhowave(dir.path(), &args);
    assert_eq!(par.status.code(), Some(0));
    let csv = stdout(&par);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "topo,n,rho,daemon,seed,plugin,stab_round,violations,fairness_index,service_time,comms_per_phase");
    assert_eq!(lines.len(), 46);
    assert!(lines[1..].iter().all(|l| l.split(',').nth(7) == Some("0")));

    let mut seq_args = args.to_vec();
    seq_args.push("--sequential");
    assert_eq!(stdout(&rhowave(dir.path(), &seq_args)), csv);
}

#[test]
fn empty_sweep_writes_the_header() {
    let dir = tempfile::tempdir().unwrap();
    let o = rhowave(dir.path(), &["sweep", "-o", "out.csv"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("out.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn unknown_key_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(rhowave(dir.path(), &["run", "--set", "flavour=mint"]).status.code(), Some(2));
    assert_eq!(rhowave(dir.path(), &["run", "--rho", "many"]).status.code(), Some(2));
}
