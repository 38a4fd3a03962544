use super::*;
use crate::kernel::{ActionSpec, Daemon, DaemonPolicy, Engine, Protocol, Stop, Transition};
use crate::topology::Generator;
use crate::unison::{build_ss_ws, lift, NoHooks, SsWs, WsParams};

fn synthetic(n: usize, steps: &[(&[usize], bool)]) -> Trace<u8> {
    let actions = vec![
        ActionSpec {
            label: "EXT",
            internal: false,
        },
        ActionSpec {
            label: "INT",
            internal: true,
        },
    ];
    let mut t = Trace::new(actions, vec![0; n], (0..n).collect());
    for &(sel, internal) in steps {
        let k = sel.len();
        t.push(
            Transition {
                selected: sel.to_vec(),
                fired: vec![internal as usize; k],
                decide: vec![false; k],
                reads: vec![0; k],
                states: vec![0; k],
                neutralized: vec![],
            },
            (0..n).collect(),
        );
    }
    t
}

/// Reachability by explicit DFS over predecessor edges.
fn reaches(g: &EventGraph, a: EventId, b: EventId) -> bool {
    let mut stack = vec![b];
    let mut seen = vec![false; g.len()];
    while let Some(x) = stack.pop() {
        if x == a {
            return true;
        }
        if std::mem::replace(&mut seen[x], true) {
            continue;
        }
        stack.extend(g.preds(x).iter().map(|&(p, _)| p));
    }
    false
}

#[test]
fn chain_of_one_process() {
    let topo = Generator::Path { n: 2 }.build(0).unwrap();
    let t = synthetic(2, &[(&[0], false), (&[0], false)]);
    let g = build_event_graph(&t, &topo);
    let chain = g.events_of(0);
    assert_eq!(chain.len(), 3);
    assert_eq!(g.preds(chain[2])[0], (chain[1], EdgeKind::Local));
    assert_eq!(g.preds(chain[1])[0], (chain[0], EdgeKind::Local));
}

#[test]
fn zig_zag() {
    let topo = Generator::Path { n: 2 }.build(0).unwrap();
    let t = synthetic(2, &[(&[0], false), (&[1], false), (&[0], false)]);
    let g = build_event_graph(&t, &topo);
    let a1 = g.find(0, 1).unwrap();
    let b2 = g.find(1, 2).unwrap();
    let a3 = g.find(0, 3).unwrap();
    assert!(g.preds(b2).contains(&(a1, EdgeKind::Neighbor)));
    assert!(g.preds(a3).contains(&(b2, EdgeKind::Neighbor)));
    assert!(g.precedes(a1, a3) && !g.precedes(a3, a1));
}

#[test]
fn internal_events_have_no_neighbor_edges() {
    let topo = Generator::Path { n: 3 }.build(0).unwrap();
    let t = synthetic(3, &[(&[1], true)]);
    let g = build_event_graph(&t, &topo);
    let e = g.find(1, 1).unwrap();
    assert_eq!(g.preds(e).len(), 1);
    assert_eq!(g.cover(e), vec![1]);
}

#[test]
fn cover_of_initial_and_first_external() {
    let topo = Generator::Path { n: 4 }.build(0).unwrap();
    let t = synthetic(4, &[(&[1, 2], false)]);
    let g = build_event_graph(&t, &topo);
    assert_eq!(g.cover(g.find(2, 0).unwrap()), vec![2]);
    // same-step neighbours are not causally linked
    assert_eq!(g.cover(g.find(1, 1).unwrap()), vec![0, 1, 2]);
    assert_eq!(g.cover(g.find(2, 1).unwrap()), vec![1, 2, 3]);
}

#[test]
fn edge_counts_and_vector_clocks_match_reachability() {
    let topo = Generator::RandomConnected { n: 7, p: 0.4 }.build(3).unwrap();
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(11);
    let mut steps: Vec<(Vec<usize>, bool)> = Vec::new();
    for _ in 0..30 {
        use rand::Rng;
        let sel: Vec<usize> = (0..7).filter(|_| rng.random_bool(0.3)).collect();
        if !sel.is_empty() {
            steps.push((sel, rng.random_bool(0.2)));
        }
    }
    let borrowed: Vec<(&[usize], bool)> = steps.iter().map(|(s, i)| (s.as_slice(), *i)).collect();
    let t = synthetic(7, &borrowed);
    let g = build_event_graph(&t, &topo);
    for e in 0..g.len() {
        let ev = g.event(e);
        let local = g.preds(e).iter().filter(|x| x.1 == EdgeKind::Local).count();
        let nb = g.preds(e).iter().filter(|x| x.1 == EdgeKind::Neighbor).count();
        match ev.kind {
            EventKind::Initial => assert_eq!((local, nb), (0, 0)),
            EventKind::Internal => assert_eq!((local, nb), (1, 0)),
            EventKind::External => assert_eq!((local, nb), (1, topo.degree(ev.node))),
        }
        for &(p, _) in g.preds(e) {
            assert!(g.event(p).time < ev.time);
        }
    }
    for a in 0..g.len() {
        for b in 0..g.len() {
            assert_eq!(g.precedes(a, b), reaches(&g, a, b), "{a} {b}");
        }
    }
}

#[test]
fn coherence_against_exhaustive_check() {
    let topo = Generator::Ring { n: 5 }.build(0).unwrap();
    let t = synthetic(
        5,
        &[(&[0, 2], false), (&[1], false), (&[3, 4], false), (&[0], false), (&[2], false), (&[1, 3], false)],
    );
    let g = build_event_graph(&t, &topo);
    assert!(is_coherent(&g, &Cut::initial(5)));
    let choices: Vec<Vec<usize>> = (0..5).map(|p| g.events_of(p).iter().map(|&e| g.event(e).time).collect()).collect();
    let mut idx = [0usize; 5];
    let mut checked = 0;
    loop {
        let times: Vec<usize> = (0..5).map(|p| choices[p][idx[p]]).collect();
        let cut = Cut::new(&g, times).unwrap();
        let brute = (0..g.len()).all(|a| {
            cut.contains(&g, a) || (0..g.len()).all(|b| !cut.contains(&g, b) || !reaches(&g, a, b))
        });
        assert_eq!(is_coherent(&g, &cut), brute, "{:?}", cut);
        checked += 1;
        let mut p = 0;
        while p < 5 {
            idx[p] += 1;
            if idx[p] < choices[p].len() {
                break;
            }
            idx[p] = 0;
            p += 1;
        }
        if p == 5 {
            break;
        }
    }
    assert!(checked > 20);
    // node 1 at time 2 read node 0's event at time 1, which the cut excludes
    let bad = Cut::new(&g, vec![0, 2, 0, 0, 0]).unwrap();
    assert!(!is_coherent(&g, &bad));
}

struct Run {
    topo: Topology,
    proto: SsWs<NoHooks>,
    trace: Trace<crate::unison::WsState<()>>,
}

fn stabilized_run(topo: Topology, rho: u32, policy: DaemonPolicy, steps: usize) -> Run {
    let proto = build_ss_ws(&topo, WsParams::auto(&topo, rho, rho), NoHooks).unwrap();
    let n = topo.node_count();
    let init: Vec<_> = (0..n).map(|v| proto.initial_state(v)).collect();
    let trace = {
        let mut e = Engine::new(&proto, &topo, Daemon::new(policy, 5, n), init).unwrap();
        e.run(&Stop::steps(steps)).unwrap();
        e.into_trace()
    };
    Run { topo, proto, trace }
}

#[test]
fn level_cuts_are_coherent_and_wavelets_hold() {
    for (gen, rho) in [
        (Generator::Ring { n: 8 }, 1),
        (Generator::Grid { rows: 3, cols: 3 }, 2),
        (Generator::Tree { n: 9 }, 3),
    ] {
        for policy in [DaemonPolicy::Synchronous, DaemonPolicy::Central, DaemonPolicy::DistributedRandom(0.5)] {
            let run = stabilized_run(gen.build(1).unwrap(), rho, policy.clone(), 1500);
            let g = build_event_graph(&run.trace, &run.topo);
            let l = lift(&run.trace, &run.topo, run.proto.system(), |s| s.r).unwrap();
            let d = run.topo.diameter();
            let lo = l.bottom() + d as i64;
            let hi = l.max_common_level();
            assert!(hi > lo + rho as i64 + 2, "{gen} {policy}: trace too short");
            let mut prev: Option<Cut> = None;
            for k in lo..=hi {
                let c = cut_for_level(&g, &l, k, d).unwrap();
                assert!(is_coherent(&g, &c), "{gen} {policy} k={k}");
                if let Some(p) = &prev {
                    assert!(p.le(&c));
                }
                prev = Some(c);
            }
            for k in lo..=hi - rho as i64 {
                let c1 = cut_for_level(&g, &l, k, d).unwrap();
                let c2 = cut_for_level(&g, &l, k + rho as i64, d).unwrap();
                let dec = c2.events(&g);
                assert_eq!(check_wavelet(&g, &run.topo, &c1, &c2, &dec, rho), Ok(None), "{gen} {policy} k={k}");
                let short = cut_for_level(&g, &l, k + rho as i64 - 1, d).unwrap();
                let verdict = check_wavelet(&g, &run.topo, &c1, &short, &short.events(&g), rho).unwrap();
                if policy == DaemonPolicy::Synchronous && d >= rho {
                    assert!(matches!(verdict, Some(WaveletViolation::Uncovered { .. })), "{gen} k={k}");
                }
            }
            assert!(matches!(
                cut_for_level(&g, &l, lo - 1, d),
                Err(CutError::BelowFloor { .. })
            ));
        }
    }
}

#[test]
fn lifted_values_step_by_at_most_one_along_edges() {
    let run = stabilized_run(Generator::RandomConnected { n: 10, p: 0.3 }.build(2).unwrap(), 2, DaemonPolicy::DistributedRandom(0.4), 800);
    let g = build_event_graph(&run.trace, &run.topo);
    let l = lift(&run.trace, &run.topo, run.proto.system(), |s| s.r).unwrap();
    for e in 0..g.len() {
        let ev = g.event(e);
        let here = l.value_at(ev.node, ev.time);
        for &(p, _) in g.preds(e) {
            let pe = g.event(p);
            let there = l.value_at(pe.node, pe.time);
            assert!(here == there || here == there + 1, "edge {p}->{e}");
        }
    }
}

#[test]
fn cover_lemma_and_monotonicity() {
    let run = stabilized_run(Generator::Grid { rows: 3, cols: 4 }.build(0).unwrap(), 2, DaemonPolicy::Central, 1500);
    let g = build_event_graph(&run.trace, &run.topo);
    let l = lift(&run.trace, &run.topo, run.proto.system(), |s| s.r).unwrap();
    let d = run.topo.diameter();
    let k = l.bottom() + d as i64 + 1;
    let ck = cut_for_level(&g, &l, k, d).unwrap();
    for e in 0..g.len() {
        let ev = g.event(e);
        if ev.time < ck.time(ev.node) {
            continue;
        }
        let radius = l.value_at(ev.node, ev.time) - k;
        let covered = g.cover_since(e, &ck);
        for q in run.topo.ball(ev.node, radius.max(0) as u32) {
            assert!(covered.contains(&q), "event {e} misses {q}");
        }
        for &(p, _) in g.preds(e) {
            let before = g.cover(p);
            let after = g.cover(e);
            assert!(before.iter().all(|q| after.contains(q)));
        }
    }
}

#[test]
fn wave_when_rho_reaches_diameter() {
    let run = stabilized_run(Generator::Ring { n: 6 }.build(0).unwrap(), 3, DaemonPolicy::DistributedRandom(0.6), 800);
    let g = build_event_graph(&run.trace, &run.topo);
    let l = lift(&run.trace, &run.topo, run.proto.system(), |s| s.r).unwrap();
    let d = run.topo.diameter();
    let k = l.bottom() + d as i64;
    let c1 = cut_for_level(&g, &l, k, d).unwrap();
    let c2 = cut_for_level(&g, &l, k + 3, d).unwrap();
    for e in c2.events(&g) {
        assert_eq!(g.cover_since(e, &c1).len(), 6);
    }
}

#[test]
fn dot_export_lists_every_edge() {
    let topo = Generator::Path { n: 2 }.build(0).unwrap();
    let t = synthetic(2, &[(&[0], false), (&[1], false)]);
    let g = build_event_graph(&t, &topo);
    let dot = g.to_dot();
    assert!(dot.starts_with("digraph"));
    assert_eq!(dot.matches("->").count(), 4);
}
