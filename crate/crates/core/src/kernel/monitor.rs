use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::engine::{Stop, StopReason};
use super::{rounds, rounds_to, Daemon, DaemonPolicy, Engine, EngineError, Protocol};
use crate::par::{self, Parallelism};
use crate::topology::{NodeId, Topology};

/// A one-step escape from a predicate.
#[derive(Clone, Debug, PartialEq)]
pub struct Counterexample<S> {
    pub policy: DaemonPolicy,
    pub before: Vec<S>,
    pub selection: Vec<NodeId>,
    pub after: Vec<S>,
}

#[derive(Clone, Debug)]
pub struct ClosureReport<S> {
    /// Sampled configurations that satisfied the predicate.
    pub samples: usize,
    /// Sampled configurations discarded because the predicate failed.
    pub rejected: usize,
    /// One-step successors checked.
    pub successors: usize,
    pub counterexample: Option<Counterexample<S>>,
}

impl<S> ClosureReport<S> {
    pub fn closed(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// Randomized closure check: every sampled configuration satisfying `pred`
/// is stepped once under every default daemon policy, `selections` times
/// each; the first successor violating `pred` is returned.
pub fn check_closure<P: Protocol>(
    proto: &P,
    topo: &Topology,
    pred: &dyn Fn(&[P::State]) -> bool,
    sample: &mut dyn FnMut(&mut ChaCha8Rng) -> Vec<P::State>,
    samples: usize,
    selections: usize,
    seed: u64,
) -> Result<ClosureReport<P::State>, EngineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = topo.node_count();
    let mut report = ClosureReport {
        samples: 0,
        rejected: 0,
        successors: 0,
        counterexample: None,
    };
    for s in 0..samples {
        let config = sample(&mut rng);
        if !pred(&config) {
            report.rejected += 1;
            continue;
        }
        report.samples += 1;
        for (k, policy) in DaemonPolicy::all_default().into_iter().enumerate() {
            for j in 0..selections {
                let dseed = seed ^ ((s as u64) << 20) ^ ((k as u64) << 12) ^ j as u64;
                let daemon = Daemon::new(policy.clone(), dseed, n);
                let mut e = Engine::new(proto, topo, daemon, config.clone())?;
                if !e.step()? {
                    break;
                }
                report.successors += 1;
                if !pred(e.config()) {
                    report.counterexample = Some(Counterexample {
                        policy,
                        before: config,
                        selection: e.trace().transitions()[0].selected.clone(),
                        after: e.config().to_vec(),
                    });
                    return Ok(report);
                }
            }
        }
    }
    Ok(report)
}

/// Outcome of one convergence run.
#[derive(Clone, Debug, PartialEq)]
pub struct AttractorRun {
    pub policy: DaemonPolicy,
    pub seed: u64,
    /// First configuration index where the target predicate held.
    pub reached: Option<usize>,
    /// Rounds needed to reach it.
    pub rounds: Option<usize>,
    pub steps: usize,
}

#[derive(Clone, Debug, Default)]
pub struct AttractorReport {
    pub runs: Vec<AttractorRun>,
}

impl AttractorReport {
    pub fn all_converged(&self) -> bool {
        self.runs.iter().all(|r| r.reached.is_some())
    }

    pub fn max_rounds(&self) -> Option<usize> {
        self.runs.iter().filter_map(|r| r.rounds).max()
    }
}

/// Runs each `(policy, seed, init)` until `target` holds or `budget` steps
/// elapse. Initial configurations are expected to satisfy the source
/// predicate; that is the caller's sampling responsibility.
pub fn check_attractor<P: Protocol>(
    proto: &P,
    topo: &Topology,
    starts: &[(DaemonPolicy, u64, Vec<P::State>)],
    target: &(dyn Fn(&[P::State]) -> bool + Sync),
    budget: usize,
    mode: Parallelism,
) -> Result<AttractorReport, EngineError> {
    let n = topo.node_count();
    let runs = par::map(mode, starts, |(policy, seed, init)| {
        let daemon = Daemon::new(policy.clone(), *seed, n);
        let mut e = Engine::new(proto, topo, daemon, init.clone())?;
        let stop = e.run(&Stop::until(budget, target))?;
        let reached = match stop {
            StopReason::Reached(i) => Some(i),
            StopReason::Quiescent if target(e.config()) => Some(e.steps()),
            _ => None,
        };
        let rounds = reached.map(|i| rounds_to(&rounds(e.trace()), i));
        Ok(AttractorRun {
            policy: policy.clone(),
            seed: *seed,
            reached,
            rounds,
            steps: e.steps(),
        })
    });
    Ok(AttractorReport {
        runs: runs.into_iter().collect::<Result<_, EngineError>>()?,
    })
}
