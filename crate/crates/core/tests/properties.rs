use proptest::prelude::*;
use rhowave::kernel::{revalidate, Daemon, DaemonPolicy, Engine, Protocol, Stop};
use rhowave::layerclock::delay_2rho;
use rhowave::lra::lra_order;
use rhowave::scenario::{execute, Scenario, TopoSpec};
use rhowave::topology::{Generator, Topology};
use rhowave::unison::{build_ss_ws, d_k, is_wu, is_wu0, ominus, NoHooks, SsWs, WsParams};

fn generator() -> impl Strategy<Value = Generator> {
    prop_oneof![
        (3usize..14).prop_map(|n| Generator::Ring { n }),
        (2usize..14).prop_map(|n| Generator::Path { n }),
        (2usize..14).prop_map(|n| Generator::Tree { n }),
        (2usize..5, 2usize..5).prop_map(|(rows, cols)| Generator::Grid { rows, cols }),
        (3usize..12, 0.1f64..0.6).prop_map(|(n, p)| Generator::RandomConnected { n, p }),
    ]
}

fn policy() -> impl Strategy<Value = DaemonPolicy> {
    prop::sample::select(DaemonPolicy::all_default())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_graphs_are_connected(g in generator(), seed in 0u64..1000) {
        let t = g.build(seed).unwrap();
        let n = t.node_count();
        prop_assert!(t.bfs(0).iter().all(|&d| (d as usize) < n));
        for p in t.nodes() {
            for &q in t.neighbors(p) {
                prop_assert!(t.is_edge(q, p));
                prop_assert_eq!(t.distance(p, q), 1);
            }
        }
        if matches!(g, Generator::Tree { .. } | Generator::Path { .. }) {
            prop_assert_eq!(t.edge_count(), n - 1);
            prop_assert!(t.is_acyclic());
        }
        let again = Topology::parse(&t.to_edge_list()).unwrap();
        prop_assert_eq!(again.edges(), t.edges());
    }

    #[test]
    fn torus_distance_is_a_metric(k in 3u32..40, a in 0i64..40, b in 0i64..40, c in 0i64..40) {
        let (a, b, c) = (a % k as i64, b % k as i64, c % k as i64);
        let ab = d_k(a, b, k).unwrap();
        prop_assert_eq!(ab, d_k(b, a, k).unwrap());
        prop_assert!(ab <= k / 2);
        prop_assert!(ab <= d_k(a, c, k).unwrap() + d_k(c, b, k).unwrap());
        if ab <= 1 {
            prop_assert_eq!(ominus(b, a, k).unwrap(), -ominus(a, b, k).unwrap());
        }
    }

    #[test]
    fn slave_delay_reads_lifted_difference(rho in 0u32..5, extra in 0u32..6, base in -200i64..200, delta in -8i64..=8) {
        let k2 = 4 * rho + 1 + extra;
        let delta = delta.clamp(-2 * rho as i64, 2 * rho as i64);
        let m = k2 as i64;
        prop_assert_eq!(delay_2rho(base.rem_euclid(m), (base + delta).rem_euclid(m), k2, rho), Some(delta));
    }

    #[test]
    fn entry_order_is_lexicographic_on_lifted_clocks(
        rho in 0u32..4, extra in 0u32..4, la in 0i64..300, d in -8i64..=8, va in 0u64..5, vb in 0u64..5,
    ) {
        let k2 = 4 * rho + 1 + extra;
        let lb = la + d.clamp(-2 * rho as i64, 2 * rho as i64);
        let res = |x: i64| x.rem_euclid(k2 as i64);
        let got = lra_order((res(la), va), (res(lb), vb), k2, rho).unwrap();
        prop_assert_eq!(got, (la, va) <= (lb, vb));
    }

    #[test]
    fn runs_are_reproducible_and_replay(g in generator(), rho in 1u32..4, pol in policy(), seed in 0u64..500) {
        let t = g.build(seed).unwrap();
        let proto = build_ss_ws(&t, WsParams::auto(&t, rho, rho), NoHooks).unwrap();
        let run = || {
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
            let init = (0..t.node_count()).map(|v| proto.arbitrary_state(v, &mut rng)).collect();
            let mut e = Engine::new(&proto, &t, Daemon::new(pol.clone(), seed, t.node_count()), init).unwrap();
            e.run(&Stop::steps(300)).unwrap();
            e.into_trace()
        };
        let a = run();
        prop_assert_eq!(&a, &run());
        prop_assert!(revalidate(&proto, &t, &a).is_ok());
    }

    #[test]
    fn unison_is_never_left_once_reached(g in generator(), rho in 1u32..3, pol in policy(), seed in 0u64..500) {
        let t = g.build(seed).unwrap();
        let proto = build_ss_ws(&t, WsParams::auto(&t, rho, rho), NoHooks).unwrap();
        let sys = proto.system();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let init = (0..t.node_count()).map(|v| proto.arbitrary_state(v, &mut rng)).collect();
        let mut e = Engine::new(&proto, &t, Daemon::new(pol, seed, t.node_count()), init).unwrap();
        e.run(&Stop::steps(3000)).unwrap();
        let tr = e.into_trace();
        let wu = |c: &[_]| is_wu(&SsWs::<NoHooks>::clocks(c), &t, sys);
        let first = tr.first_index(wu);
        prop_assert!(first.is_some());
        let first = first.unwrap();
        let mut r = tr.replay();
        loop {
            if r.index() >= first {
                prop_assert!(wu(r.config()));
                prop_assert!(is_wu0(&SsWs::<NoHooks>::clocks(r.config()), &t, sys));
            }
            if !r.advance() {
                break;
            }
        }
    }

    #[test]
    fn scenario_text_round_trips(rho in 0u32..5, seed in any::<u64>(), steps in 1usize..1_000_000, k2 in prop::option::of(5u32..90)) {
        let s = Scenario { rho, seed, steps, k2, ..Scenario::default() };
        prop_assert_eq!(Scenario::parse(&s.to_string()).unwrap(), s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn local_exclusion_holds_from_any_start(g in generator(), rho in 1u32..4, pol in policy(), seed in 0u64..10_000) {
        let s = Scenario {
            topo: TopoSpec::Gen(g),
            proto: "lme".parse().unwrap(),
            rho,
            daemon: pol,
            seed,
            phases: 5,
            ..Scenario::default()
        };
        let sum = execute(&s).unwrap().summary;
        prop_assert!(sum.passed(), "{}", sum.render());
    }
}
