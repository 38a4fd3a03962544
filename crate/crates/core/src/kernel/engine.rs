use std::cell::Cell;

use super::trace::{Trace, Transition};
use super::{ActionId, Ctx, Daemon, Fault, Protocol};
use crate::topology::{NodeId, Topology};

/// How a multi-process selection is applied.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Atomicity {
    /// All selected processes read the shared pre-state.
    #[default]
    Composite,
    /// Selected processes act one after the other in index order; a
    /// process disabled by an earlier one in the same step is skipped.
    Interleaved,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("initial configuration has {got} states for {n} processes")]
    ConfigSize { got: usize, n: usize },
    #[error("selected process {0} is not enabled")]
    NotEnabled(NodeId),
    #[error("empty selection")]
    EmptySelection,
    #[error(transparent)]
    Fault(#[from] Fault),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// The stop predicate held at this configuration index.
    Reached(usize),
    /// No process is enabled.
    Quiescent,
    /// Step budget exhausted first (non-convergence, not a crash).
    Budget,
}

pub type ConfigPred<'f, S> = &'f dyn Fn(&[S]) -> bool;

/// Step budget plus an optional predicate over configurations.
pub struct Stop<'f, S> {
    pub max_steps: usize,
    pub until: Option<ConfigPred<'f, S>>,
}

impl<'f, S> Stop<'f, S> {
    pub fn steps(max_steps: usize) -> Self {
        Self {
            max_steps,
            until: None,
        }
    }

    pub fn until(max_steps: usize, pred: &'f dyn Fn(&[S]) -> bool) -> Self {
        Self {
            max_steps,
            until: Some(pred),
        }
    }
}

pub struct Engine<'a, P: Protocol> {
    proto: &'a P,
    topo: &'a Topology,
    daemon: Daemon,
    atomicity: Atomicity,
    config: Vec<P::State>,
    /// Action that would fire at each process (highest-priority true guard).
    enabled: Vec<Option<ActionId>>,
    scratch: Vec<Cell<bool>>,
    trace: Trace<P::State>,
}

impl<'a, P: Protocol> Engine<'a, P> {
    pub fn new(
        proto: &'a P,
        topo: &'a Topology,
        daemon: Daemon,
        init: Vec<P::State>,
    ) -> Result<Self, EngineError> {
        let n = topo.node_count();
        if init.len() != n {
            return Err(EngineError::ConfigSize { got: init.len(), n });
        }
        let scratch = vec![Cell::new(false); topo.max_degree().max(1)];
        let mut engine = Self {
            proto,
            topo,
            daemon,
            atomicity: Atomicity::Composite,
            config: init.clone(),
            enabled: vec![None; n],
            scratch,
            trace: Trace::new(proto.actions().to_vec(), init, Vec::new()),
        };
        for p in 0..n {
            engine.enabled[p] = engine.first_enabled(&engine.config, p)?;
        }
        engine.trace.enabled[0] = engine.enabled_nodes();
        Ok(engine)
    }

    pub fn with_atomicity(mut self, atomicity: Atomicity) -> Self {
        self.atomicity = atomicity;
        self
    }

    pub fn config(&self) -> &[P::State] {
        &self.config
    }

    pub fn daemon(&self) -> &Daemon {
        &self.daemon
    }

    pub fn steps(&self) -> usize {
        self.trace.len()
    }

    pub fn trace(&self) -> &Trace<P::State> {
        &self.trace
    }

    pub fn into_trace(self) -> Trace<P::State> {
        self.trace
    }

    pub fn enabled_nodes(&self) -> Vec<NodeId> {
        (0..self.enabled.len()).filter(|&p| self.enabled[p].is_some()).collect()
    }

    /// The action that fires at `p` if selected.
    pub fn enabled_action(&self, p: NodeId) -> Option<ActionId> {
        self.enabled[p]
    }

    /// Every action whose guard holds at `p`, in priority order.
    pub fn enabled_actions(&self, p: NodeId) -> Result<Vec<ActionId>, Fault> {
        enabled_actions(self.proto, self.topo, &self.config, p)
    }

    fn first_enabled(&self, config: &[P::State], p: NodeId) -> Result<Option<ActionId>, Fault> {
        let ctx = Ctx::tracked(self.topo, config, p, &self.scratch, self.proto.uses_identity());
        for a in 0..self.proto.actions().len() {
            let holds = self.proto.guard(a, &ctx);
            if let Some(f) = ctx.fault() {
                return Err(f);
            }
            if holds {
                return Ok(Some(a));
            }
        }
        Ok(None)
    }

    /// Executes `action` at `p` against `config`; returns the outcome and
    /// the number of distinct neighbours read.
    fn execute(
        &self,
        config: &[P::State],
        p: NodeId,
        action: ActionId,
    ) -> Result<(super::Outcome<P::State>, u32), EngineError> {
        let ctx = Ctx::tracked(self.topo, config, p, &self.scratch, self.proto.uses_identity());
        if !self.proto.guard(action, &ctx) {
            return Err(EngineError::NotEnabled(p));
        }
        let out = self.proto.apply(action, &ctx);
        if let Some(f) = ctx.fault() {
            return Err(f.into());
        }
        Ok((out, ctx.reads()))
    }

    /// One daemon-chosen step. Returns false when nothing is enabled.
    pub fn step(&mut self) -> Result<bool, EngineError> {
        let enabled = self.enabled_nodes();
        if enabled.is_empty() {
            return Ok(false);
        }
        let sel = self.daemon.select(&enabled, self.topo);
        self.step_with(&sel)?;
        Ok(true)
    }

    /// Applies an explicit selection (sorted or not; duplicates rejected as
    /// not enabled on the second occurrence).
    pub fn step_with(&mut self, selection: &[NodeId]) -> Result<(), EngineError> {
        if selection.is_empty() {
            return Err(EngineError::EmptySelection);
        }
        let mut selected: Vec<NodeId> = selection.to_vec();
        selected.sort_unstable();
        if selected.windows(2).any(|w| w[0] == w[1]) {
            return Err(EngineError::NotEnabled(selected[0]));
        }
        for &p in &selected {
            if self.enabled[p].is_none() {
                return Err(EngineError::NotEnabled(p));
            }
        }
        let before = self.enabled.clone();
        let mut t = Transition {
            selected: Vec::with_capacity(selected.len()),
            fired: Vec::with_capacity(selected.len()),
            decide: Vec::with_capacity(selected.len()),
            reads: Vec::with_capacity(selected.len()),
            states: Vec::with_capacity(selected.len()),
            neutralized: Vec::new(),
        };
        match self.atomicity {
            Atomicity::Composite => {
                for &p in &selected {
                    let a = self.enabled[p].expect("checked above");
                    let (out, reads) = self.execute(&self.config, p, a)?;
                    t.selected.push(p);
                    t.fired.push(a);
                    t.decide.push(out.decide);
                    t.reads.push(reads);
                    t.states.push(out.state);
                }
                for (&p, s) in t.selected.iter().zip(&t.states) {
                    self.config[p] = s.clone();
                }
            }
            Atomicity::Interleaved => {
                let mut config = std::mem::take(&mut self.config);
                for &p in &selected {
                    let Some(a) = self.first_enabled(&config, p)? else {
                        continue;
                    };
                    let (out, reads) = self.execute(&config, p, a)?;
                    config[p] = out.state.clone();
                    t.selected.push(p);
                    t.fired.push(a);
                    t.decide.push(out.decide);
                    t.reads.push(reads);
                    t.states.push(out.state);
                }
                self.config = config;
            }
        }
        // only acting processes and their neighbours can change status
        let mut dirty: Vec<NodeId> = Vec::new();
        for &p in &t.selected {
            dirty.push(p);
            dirty.extend_from_slice(self.topo.neighbors(p));
        }
        dirty.sort_unstable();
        dirty.dedup();
        for p in dirty {
            self.enabled[p] = self.first_enabled(&self.config, p)?;
        }
        for (p, was) in before.iter().enumerate() {
            if was.is_some() && self.enabled[p].is_none() && t.selected.binary_search(&p).is_err() {
                t.neutralized.push(p);
            }
        }
        let after = self.enabled_nodes();
        self.trace.push(t, after);
        Ok(())
    }

    /// Runs until the stop predicate holds (checked on the initial
    /// configuration too), nothing is enabled, or the budget is spent.
    pub fn run(&mut self, stop: &Stop<'_, P::State>) -> Result<StopReason, EngineError> {
        let mut taken = 0;
        loop {
            if let Some(pred) = stop.until {
                if pred(&self.config) {
                    return Ok(StopReason::Reached(self.trace.len()));
                }
            }
            if taken >= stop.max_steps {
                return Ok(StopReason::Budget);
            }
            if !self.step()? {
                return Ok(StopReason::Quiescent);
            }
            taken += 1;
        }
    }
}

impl<P: Protocol> Engine<'_, P> {
    /// Runs until every process has emitted `count` decide events since the
    /// call, nothing is enabled, or the budget is spent.
    pub fn run_decides(&mut self, count: u64, max_steps: usize) -> Result<StopReason, EngineError> {
        let mut seen = vec![0u64; self.config.len()];
        let mut short = if count == 0 { 0 } else { seen.len() };
        let mut taken = 0;
        while short > 0 {
            if taken >= max_steps {
                return Ok(StopReason::Budget);
            }
            if !self.step()? {
                return Ok(StopReason::Quiescent);
            }
            taken += 1;
            let t = self.trace.transitions.last().expect("just stepped");
            for (&p, &d) in t.selected.iter().zip(&t.decide) {
                if d {
                    seen[p] += 1;
                    if seen[p] == count {
                        short -= 1;
                    }
                }
            }
        }
        Ok(StopReason::Reached(self.trace.len()))
    }
}

/// Every action whose guard holds at `p` in `config`, in priority order.
pub fn enabled_actions<P: Protocol>(
    proto: &P,
    topo: &Topology,
    config: &[P::State],
    p: NodeId,
) -> Result<Vec<ActionId>, Fault> {
    let ctx = Ctx::detached(topo, config, p);
    let mut out = Vec::new();
    for a in 0..proto.actions().len() {
        if proto.guard(a, &ctx) {
            out.push(a);
        }
    }
    match ctx.fault() {
        Some(f) => Err(f),
        None => Ok(out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{ActionSpec, DaemonPolicy, Outcome};
    use crate::topology::Generator;
    use rand::{Rng, RngCore};

    /// Toy min-propagation: a process adopts a strictly smaller neighbour value.
    struct MinProp;

    const MIN_ACTIONS: [ActionSpec; 1] = [ActionSpec {
        label: "ADOPT",
        internal: false,
    }];

    impl Protocol for MinProp {
        type State = u32;
        fn name(&self) -> &str {
            "min"
        }
        fn actions(&self) -> &[ActionSpec] {
            &MIN_ACTIONS
        }
        fn guard(&self, _: ActionId, ctx: &Ctx<'_, u32>) -> bool {
            ctx.neighbors().any(|&q| q < *ctx.own())
        }
        fn apply(&self, _: ActionId, ctx: &Ctx<'_, u32>) -> Outcome<u32> {
            Outcome {
                state: ctx.neighbors().copied().min().unwrap(),
                decide: false,
            }
        }
        fn initial_state(&self, _: NodeId) -> u32 {
            0
        }
        fn arbitrary_state(&self, _: NodeId, rng: &mut dyn RngCore) -> u32 {
            rng.random_range(0..100)
        }
    }

    /// Reads a node two hops away.
    struct Peeker;

    impl Protocol for Peeker {
        type State = u32;
        fn name(&self) -> &str {
            "peek"
        }
        fn actions(&self) -> &[ActionSpec] {
            &MIN_ACTIONS
        }
        fn guard(&self, _: ActionId, ctx: &Ctx<'_, u32>) -> bool {
            ctx.state_of(2).is_some()
        }
        fn apply(&self, _: ActionId, ctx: &Ctx<'_, u32>) -> Outcome<u32> {
            Outcome {
                state: *ctx.own(),
                decide: false,
            }
        }
        fn initial_state(&self, _: NodeId) -> u32 {
            0
        }
        fn arbitrary_state(&self, _: NodeId, _: &mut dyn RngCore) -> u32 {
            0
        }
    }

    /// Reads its own identity without declaring it.
    struct Named;

    impl Protocol for Named {
        type State = u32;
        fn name(&self) -> &str {
            "named"
        }
        fn actions(&self) -> &[ActionSpec] {
            &MIN_ACTIONS
        }
        fn guard(&self, _: ActionId, ctx: &Ctx<'_, u32>) -> bool {
            ctx.identity() == 0
        }
        fn apply(&self, _: ActionId, ctx: &Ctx<'_, u32>) -> Outcome<u32> {
            Outcome {
                state: *ctx.own(),
                decide: false,
            }
        }
        fn initial_state(&self, _: NodeId) -> u32 {
            0
        }
        fn arbitrary_state(&self, _: NodeId, _: &mut dyn RngCore) -> u32 {
            0
        }
    }

    fn path(n: usize) -> Topology {
        Generator::Path { n }.build(0).unwrap()
    }

    #[test]
    fn composite_reads_prestate() {
        let t = path(3);
        let mut e = Engine::new(&MinProp, &t, Daemon::new(DaemonPolicy::Synchronous, 0, 3), vec![0, 5, 9]).unwrap();
        e.step().unwrap();
        // node 2 saw 5, not the 0 written by node 1 in the same step
        assert_eq!(e.config(), &[0, 0, 5]);
        let tr = e.trace();
        assert_eq!(tr.transitions()[0].selected, vec![1, 2]);
        assert_eq!(tr.transitions()[0].reads, vec![2, 1]);
    }

    #[test]
    fn interleaved_sees_earlier_writes() {
        let t = path(3);
        let d = Daemon::new(DaemonPolicy::Synchronous, 0, 3);
        let mut e = Engine::new(&MinProp, &t, d, vec![0, 5, 9])
            .unwrap()
            .with_atomicity(Atomicity::Interleaved);
        e.step().unwrap();
        assert_eq!(e.config(), &[0, 0, 0]);
    }

    #[test]
    fn quiescence_and_neutralization() {
        let t = path(3);
        // node 1 and node 2 enabled; selecting node 1 (adopt 0) keeps node 2 enabled
        let mut e = Engine::new(&MinProp, &t, Daemon::new(DaemonPolicy::Central, 0, 3), vec![3, 4, 3]).unwrap();
        assert_eq!(e.enabled_nodes(), vec![1]);
        let stop = e.run(&Stop::steps(10)).unwrap();
        assert_eq!(stop, StopReason::Quiescent);
        assert!(e.enabled_nodes().is_empty());

        let t4 = path(4);
        let mut e = Engine::new(&MinProp, &t4, Daemon::new(DaemonPolicy::Central, 0, 4), vec![2, 1, 2, 2]).unwrap();
        assert_eq!(e.enabled_nodes(), vec![0, 2]);
        e.step_with(&[0]).unwrap();
        assert!(e.trace().transitions()[0].neutralized.is_empty());
    }

    #[test]
    fn neutralized_oracle() {
        let tri = Topology::parse("0 1\n1 2\n2 0\n").unwrap();
        struct EqualPeer;
        impl Protocol for EqualPeer {
            type State = u32;
            fn name(&self) -> &str {
                "eq"
            }
            fn actions(&self) -> &[ActionSpec] {
                &MIN_ACTIONS
            }
            // enabled while some neighbour holds the same value; acting bumps own value
            fn guard(&self, _: ActionId, ctx: &Ctx<'_, u32>) -> bool {
                ctx.neighbors().any(|q| q == ctx.own())
            }
            fn apply(&self, _: ActionId, ctx: &Ctx<'_, u32>) -> Outcome<u32> {
                Outcome {
                    state: ctx.own() + 10,
                    decide: false,
                }
            }
            fn initial_state(&self, _: NodeId) -> u32 {
                0
            }
            fn arbitrary_state(&self, _: NodeId, _: &mut dyn RngCore) -> u32 {
                0
            }
        }
        let mut e = Engine::new(&EqualPeer, &tri, Daemon::new(DaemonPolicy::Central, 0, 3), vec![1, 2, 2]).unwrap();
        assert_eq!(e.enabled_nodes(), vec![1, 2]);
        e.step_with(&[1]).unwrap();
        // oracle: re-evaluate guards after the step
        let cfg = e.config().to_vec();
        let still: Vec<bool> = (0..3)
            .map(|p| !enabled_actions(&EqualPeer, &tri, &cfg, p).unwrap().is_empty())
            .collect();
        assert_eq!(still, vec![false, false, false]);
        assert_eq!(e.trace().transitions()[0].neutralized, vec![2]);
    }

    #[test]
    fn faults_surface() {
        let t = path(4);
        let err = Engine::new(&Peeker, &t, Daemon::new(DaemonPolicy::Central, 0, 4), vec![0; 4]).err();
        assert!(matches!(err, Some(EngineError::Fault(Fault::OutOfScopeRead { node: 0, target: 2 }))));
        let err = Engine::new(&Named, &t, Daemon::new(DaemonPolicy::Central, 0, 4), vec![0; 4]).err();
        assert!(matches!(err, Some(EngineError::Fault(Fault::IdentityRead { .. }))));
    }

    #[test]
    fn rejects_disabled_selection() {
        let t = path(3);
        let mut e = Engine::new(&MinProp, &t, Daemon::new(DaemonPolicy::Central, 0, 3), vec![0, 5, 9]).unwrap();
        assert!(matches!(e.step_with(&[0]), Err(EngineError::NotEnabled(0))));
        assert!(matches!(e.step_with(&[]), Err(EngineError::EmptySelection)));
    }

    #[test]
    fn deterministic_under_seed() {
        let t = Generator::RandomConnected { n: 12, p: 0.3 }.build(4).unwrap();
        let run = |seed| {
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1);
            let init: Vec<u32> = (0..12).map(|p| MinProp.arbitrary_state(p, &mut rng)).collect();
            let d = Daemon::new(DaemonPolicy::DistributedRandom(0.4), seed, 12);
            let mut e = Engine::new(&MinProp, &t, d, init).unwrap();
            e.run(&Stop::steps(1000)).unwrap();
            e.into_trace()
        };
        assert_eq!(run(9), run(9));
    }

    #[test]
    fn replay_and_jsonl_round_trip() {
        let t = path(5);
        let mut e = Engine::new(&MinProp, &t, Daemon::new(DaemonPolicy::Central, 3, 5), vec![4, 3, 2, 1, 0]).unwrap();
        e.run(&Stop::steps(100)).unwrap();
        let trace = e.trace().clone();
        assert_eq!(trace.last_config(), e.config());
        let mut buf = Vec::new();
        let meta = serde_json::json!({"proto": "min"});
        trace.write_jsonl(&meta, &mut buf).unwrap();
        let (m, back) = Trace::<u32>::read_jsonl(MinProp.actions(), &buf[..]).unwrap();
        assert_eq!(m, meta);
        assert_eq!(back, trace);
        let cut = buf.len() - 5;
        let text = String::from_utf8(buf[..cut].to_vec()).unwrap();
        let upto = text.rfind('\n').unwrap();
        assert!(Trace::<u32>::read_jsonl(MinProp.actions(), &text.as_bytes()[..=upto]).is_err());
    }
}
