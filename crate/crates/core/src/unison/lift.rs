use super::{is_wu0, tree_delays, Clock, IncrementingSystem};
use crate::kernel::Trace;
use crate::topology::{NodeId, Topology};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum LiftError {
    #[error("configuration {index} is not in WU0")]
    NotWu0 { index: usize },
    #[error("process {node} changed its clock by something other than one increment at step {step}")]
    NonIncrement { node: NodeId, step: usize },
    #[error("lift start {start} beyond trace end {len}")]
    StartOutOfRange { start: usize, len: usize },
}

/// When a process's lifted clock first reaches a level.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reach {
    /// Already at or above the level in the start configuration.
    AtStart,
    /// First reached in this configuration index.
    At(usize),
}

/// Integer-valued clocks reconstructed over a WU0 suffix of a trace.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedTrace {
    start: usize,
    end: usize,
    period: u32,
    p0: NodeId,
    bottom: i64,
    base: Vec<i64>,
    /// Configuration indices right after each increment.
    incs: Vec<Vec<usize>>,
}

/// Lifts a trace that starts in WU0.
pub fn lift<S: Clone>(
    trace: &Trace<S>,
    topo: &Topology,
    sys: &IncrementingSystem,
    clock: impl Fn(&S) -> Clock,
) -> Result<LiftedTrace, LiftError> {
    lift_from(trace, 0, topo, sys, clock)
}

/// Lifts the suffix of `trace` starting at configuration `start`.
pub fn lift_from<S: Clone>(
    trace: &Trace<S>,
    start: usize,
    topo: &Topology,
    sys: &IncrementingSystem,
    clock: impl Fn(&S) -> Clock,
) -> Result<LiftedTrace, LiftError> {
    if start > trace.len() {
        return Err(LiftError::StartOutOfRange {
            start,
            len: trace.len(),
        });
    }
    let mut replay = trace.replay();
    while replay.index() < start {
        replay.advance();
    }
    let mut clocks: Vec<Clock> = replay.config().iter().map(&clock).collect();
    if !is_wu0(&clocks, topo, sys) {
        return Err(LiftError::NotWu0 { index: start });
    }
    let k = sys.period();
    let delay = tree_delays(&clocks, topo, 0, k).expect("WU0 implies comparable edges");
    let p0 = (0..delay.len()).min_by_key(|&p| (delay[p], p)).expect("n >= 2");
    let bottom = clocks[p0];
    let base: Vec<i64> = delay.iter().map(|d| bottom + d - delay[p0]).collect();
    let mut incs = vec![Vec::new(); clocks.len()];
    for (step, t) in trace.transitions().iter().enumerate().skip(start) {
        for (&p, s) in t.selected.iter().zip(&t.states) {
            let new = clock(s);
            if new == clocks[p] {
                continue;
            }
            if !sys.in_ring(clocks[p]) || new != sys.phi(clocks[p]) {
                return Err(LiftError::NonIncrement { node: p, step });
            }
            clocks[p] = new;
            incs[p].push(step + 1);
        }
    }
    Ok(LiftedTrace {
        start,
        end: trace.len(),
        period: k,
        p0,
        bottom,
        base,
        incs,
    })
}

impl LiftedTrace {
    pub fn start(&self) -> usize {
        self.start
    }

    /// Last configuration index covered.
    pub fn end(&self) -> usize {
        self.end
    }

    pub fn period(&self) -> u32 {
        self.period
    }

    pub fn node_count(&self) -> usize {
        self.base.len()
    }

    /// The minimal process the lifting is anchored at.
    pub fn anchor(&self) -> NodeId {
        self.p0
    }

    /// Lifted value of the anchor at the start.
    pub fn bottom(&self) -> i64 {
        self.bottom
    }

    pub fn base(&self, p: NodeId) -> i64 {
        self.base[p]
    }

    pub fn max_base(&self) -> i64 {
        self.base.iter().copied().max().expect("non-empty")
    }

    pub fn increments(&self, p: NodeId) -> &[usize] {
        &self.incs[p]
    }

    /// Lifted value of `p` in configuration `index` (`index >= start`).
    pub fn value_at(&self, p: NodeId, index: usize) -> i64 {
        debug_assert!(index >= self.start);
        self.base[p] + self.incs[p].partition_point(|&i| i <= index) as i64
    }

    /// Lifted values of all processes at `index`.
    pub fn values_at(&self, index: usize) -> Vec<i64> {
        (0..self.base.len()).map(|p| self.value_at(p, index)).collect()
    }

    pub fn reach(&self, p: NodeId, level: i64) -> Option<Reach> {
        if level <= self.base[p] {
            return Some(Reach::AtStart);
        }
        let i = (level - self.base[p] - 1) as usize;
        self.incs[p].get(i).map(|&idx| Reach::At(idx))
    }

    /// Highest level every process has reached by the end of the trace.
    pub fn max_common_level(&self) -> i64 {
        (0..self.base.len())
            .map(|p| self.base[p] + self.incs[p].len() as i64)
            .min()
            .expect("non-empty")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Daemon, DaemonPolicy, Engine, Protocol, Stop};
    use crate::topology::Generator;
    use crate::unison::{build_ss_ws, path_delay, NoHooks, WsParams, WsState};

    #[test]
    fn uniform_start_then_one_sweep() {
        let t = Generator::Ring { n: 6 }.build(0).unwrap();
        let p = build_ss_ws(&t, WsParams::auto(&t, 1, 1), NoHooks).unwrap();
        let init: Vec<_> = (0..6).map(|_| WsState { r: 4, payload: () }).collect();
        let mut e = Engine::new(&p, &t, Daemon::new(DaemonPolicy::Synchronous, 0, 6), init).unwrap();
        e.run(&Stop::steps(1)).unwrap();
        let l = lift(e.trace(), &t, p.system(), |s| s.r).unwrap();
        assert_eq!(l.bottom(), 4);
        assert_eq!(l.values_at(0), vec![4; 6]);
        assert_eq!(l.values_at(1), vec![5; 6]);
    }

    #[test]
    fn skewed_start_matches_path_delay() {
        let t = Generator::Ring { n: 5 }.build(0).unwrap();
        let p = build_ss_ws(&t, WsParams::auto(&t, 1, 1), NoHooks).unwrap();
        let rs = [3, 4, 4, 3, 3];
        let init: Vec<_> = rs.iter().map(|&r| WsState { r, payload: () }).collect();
        let e = Engine::new(&p, &t, Daemon::new(DaemonPolicy::Central, 0, 5), init).unwrap();
        let l = lift(e.trace(), &t, p.system(), |s| s.r).unwrap();
        let k = p.system().period();
        let direct: Vec<i64> = [vec![0], vec![0, 1], vec![0, 1, 2], vec![0, 4, 3], vec![0, 4]]
            .iter()
            .map(|path| 3 + path_delay(&rs, &t, path, k).unwrap())
            .collect();
        assert_eq!(direct, vec![3, 4, 4, 3, 3]);
        assert_eq!(l.values_at(0), direct);
    }

    #[test]
    fn rejects_non_wu0_start() {
        let t = Generator::Ring { n: 3 }.build(0).unwrap();
        let p = build_ss_ws(&t, WsParams::auto(&t, 1, 1), NoHooks).unwrap();
        let init: Vec<_> = [0, 1, -1].iter().map(|&r| WsState { r, payload: () }).collect();
        let e = Engine::new(&p, &t, Daemon::new(DaemonPolicy::Central, 0, 3), init).unwrap();
        assert_eq!(lift(e.trace(), &t, p.system(), |s| s.r), Err(LiftError::NotWu0 { index: 0 }));
    }

    #[test]
    fn congruence_and_distance_bound() {
        let t = Generator::RandomConnected { n: 12, p: 0.25 }.build(8).unwrap();
        let p = build_ss_ws(&t, WsParams::auto(&t, 2, 2), NoHooks).unwrap();
        let init: Vec<_> = (0..12).map(|v| p.initial_state(v)).collect();
        let mut e = Engine::new(&p, &t, Daemon::new(DaemonPolicy::DistributedRandom(0.3), 1, 12), init).unwrap();
        e.run(&Stop::steps(400)).unwrap();
        let l = lift(e.trace(), &t, p.system(), |s| s.r).unwrap();
        let k = p.system().period() as i64;
        let mut replay = e.trace().replay();
        loop {
            let i = replay.index();
            let vals = l.values_at(i);
            for a in 0..12 {
                assert_eq!(vals[a].rem_euclid(k), replay.config()[a].r);
                for b in 0..12 {
                    assert!((vals[a] - vals[b]).abs() <= t.distance(a, b) as i64);
                }
            }
            if !replay.advance() {
                break;
            }
        }
    }
}
