use super::*;
use crate::par::Parallelism;

fn scenario(text: &str) -> Scenario {
    Scenario::parse(text).unwrap()
}

fn round_trip(s: &Scenario) -> TraceCheck {
    let ex = execute(s).unwrap();
    let mut buf = Vec::new();
    ex.write_trace(&mut buf).unwrap();
    let check = check_trace(std::str::from_utf8(&buf).unwrap(), Some(&Check::ALL)).unwrap();
    assert!(check.agrees(), "{}\nvs\n{}", ex.summary.render(), check.summary.render());
    assert_eq!(check.replay, Some(Ok(())));
    check
}

#[test]
fn later_keys_override() {
    let mut s = scenario("topo = grid:3x4\nrho = 2 # comment\nk2 = 40\n");
    s.apply_text("rho=3\nk2=auto").unwrap();
    assert_eq!(s.rho, 3);
    assert_eq!(s.k2, None);
    assert_eq!(s.topo.to_string(), "grid:3x4");
    assert_eq!(Scenario::parse(&s.to_string()).unwrap(), s);
}

#[test]
fn bad_inputs_are_configuration_errors() {
    for text in ["colour = red", "rho = x", "proto = lme2", "topo = ring", "init = sideways", "no equals"] {
        let err = Scenario::parse(text).unwrap_err();
        assert!(err.is_config(), "{text}: {err}");
    }
    let s = scenario("topo = file:/nonexistent/g.edges");
    assert!(matches!(execute(&s), Err(ScenarioError::Io { .. })));
}

#[test]
fn proto_names() {
    for name in ["ss_ws", "ss_dc", "infimum:min_int", "lme", "broken_lme", "gme:3", "rw:0.5"] {
        let p: ProtoSpec = name.parse().unwrap();
        assert_eq!(p.to_string().parse::<ProtoSpec>().unwrap(), p);
    }
    assert_eq!("ss_dc+lme".parse::<ProtoSpec>().unwrap(), "lme".parse().unwrap());
}

#[test]
fn check_lists() {
    assert_eq!(Check::parse_list("all").unwrap(), Check::ALL.to_vec());
    assert_eq!(Check::parse_list("safety,delay").unwrap(), vec![Check::Clock, Check::Lra]);
    assert!(Check::parse_list("vibes").is_err());
    let s = scenario("proto = lme");
    assert_eq!(s.effective_checks(false), vec![Check::Clock, Check::Lra]);
}

#[test]
fn wave_clock_runs_and_replays() {
    let c = round_trip(&scenario("topo = ring:6\nrho = 2\nseed = 3\nphases = 4"));
    let w = c.summary.wavelet.unwrap();
    assert!(w.levels > 0);
    assert_eq!(w.violations, 0);
    assert!(c.summary.stab_round.is_some());
}

#[test]
fn infimum_runs_and_replays() {
    let c = round_trip(&scenario("topo = tree:7\nproto = infimum:min_int\nrho = 1\nseed = 1\nphases = 5"));
    let v = c.summary.infimum.unwrap();
    assert!(v.phases >= 3);
    assert_eq!(v.mismatches, 0);
}

#[test]
fn layer_clock_runs_and_replays() {
    let c = round_trip(&scenario("topo = path:5\nproto = ss_dc\nrho = 1\ndaemon = synchronous\nphases = 3"));
    let v = c.summary.clock.unwrap();
    assert!(v.staircase);
    assert_eq!(v.gating_violations, 0);
    assert_eq!(v.delay_disagreements, 0);
}

#[test]
fn mutual_exclusion_runs_and_replays() {
    let s = scenario("topo = ring:8\nproto = lme\nrho = 2\ndaemon = adversarial\nseed = 7\nphases = 6");
    let c = round_trip(&s);
    let v = c.summary.lra.as_ref().unwrap();
    assert_eq!(v.violations, 0);
    assert!(v.records > 0);
    assert!(c.summary.passed());
}

#[test]
fn uniform_start_is_already_stable() {
    let c = execute(&scenario("topo = ring:5\ninit = wu0_uniform\nphases = 2")).unwrap();
    assert_eq!(c.summary.stab_round, Some(0));
}

#[test]
fn clock_rows_from_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("init.txt");
    std::fs::write(&p, "0\n5\n1\n7\n").unwrap();
    let s = scenario(&format!("topo = ring:4\nrho = 1\ninit = file:{}", p.display()));
    let ex = execute(&s).unwrap();
    assert!(ex.summary.passed(), "{}", ex.summary.render());

    std::fs::write(&p, "0\n1\n").unwrap();
    assert!(matches!(execute(&s), Err(ScenarioError::Init(_))));
}

#[test]
fn truncated_trace_is_corrupt() {
    let ex = execute(&scenario("topo = ring:5\nphases = 2")).unwrap();
    let mut buf = Vec::new();
    ex.write_trace(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let cut = &text[..text.len() * 2 / 3];
    let err = check_trace(cut, None).unwrap_err();
    assert!(matches!(err, ScenarioError::Trace(_)), "{err}");
    assert!(check_trace("", None).is_err());
}

#[test]
fn tampered_trace_fails_replay() {
    let ex = execute(&scenario("topo = ring:5\nphases = 2\nseed = 4")).unwrap();
    let mut buf = Vec::new();
    ex.write_trace(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    // Flip one clock value in a late configuration.
    let idx = lines.len() - 2;
    let mut v: serde_json::Value = serde_json::from_str(&lines[idx]).unwrap();
    let states = v.get_mut("changed").and_then(|s| s.as_array_mut()).expect("changed");
    let r = states[0].get_mut("r").unwrap();
    *r = serde_json::json!(r.as_u64().unwrap() + 1);
    lines[idx] = v.to_string();
    let check = check_trace(&lines.join("\n"), Some(&[Check::Replay])).unwrap();
    assert!(matches!(check.replay, Some(Err(_))));
    assert!(!check.passed());
}

#[test]
fn grid_enumerates_in_key_order() {
    let g = Grid::parse("topos = ring, grid\nns = 6..8\nrhos = 1,2\ndaemons = synchronous\nseeds = 0,1\nprotos = lme\nphases = 3").unwrap();
    let cells = g.cells().unwrap();
    assert_eq!(cells.len(), 2 * 2 * 2 * 2);
    assert_eq!(cells[0].topo.to_string(), "ring:6");
    assert_eq!(cells[8].topo.to_string(), "grid:2x3");
    assert_eq!(cells[1].seed, 1);
    assert_eq!(cells[2].rho, 2);
    assert!(cells.iter().all(|c| c.phases == 3));
}

#[test]
fn empty_grid_is_header_only() {
    let rows = run_sweep(&Grid::default(), Parallelism::Sequential).unwrap();
    assert!(rows.is_empty());
    let mut out = Vec::new();
    write_csv(&rows, &mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), CSV_HEADER.join(",") + "\n");
}

#[test]
fn sweep_rows_do_not_depend_on_parallelism() {
    let g = Grid::parse("topos = ring, path\nns = 5,6\nrhos = 1,2\ndaemons = distributed:0.5\nseeds = 0..2\nprotos = lme\nphases = 3").unwrap();
    let seq = run_sweep(&g, Parallelism::Sequential).unwrap();
    let par = run_sweep(&g, Parallelism::Parallel).unwrap();
    assert_eq!(seq, par);
    assert!(seq.iter().all(|r| r.outcome.as_ref().is_ok_and(|s| s.violations() == 0)));
    let rec = seq[0].record();
    assert_eq!(rec.len(), CSV_HEADER.len());
    assert_eq!(rec[0], "ring:5");
    assert_eq!(rec[5], "lme");
}

#[test]
fn failing_cell_becomes_an_error_row() {
    let g = Grid::parse("topos = ring\nns = 4\nrhos = 1\ndaemons = synchronous\nseeds = 0\nprotos = lme\nk2 = 1").unwrap();
    let rows = run_sweep(&g, Parallelism::Sequential).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].outcome.is_err());
    assert!(rows[0].record()[7].starts_with("error"));
}
