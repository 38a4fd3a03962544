//! Guarded-action execution engine.
//!
//! A [`Protocol`] is a list of guarded actions evaluated at one process
//! against its own and its neighbours' registers. The [`Engine`] applies
//! daemon selections under composite atomicity (every selected process reads
//! the pre-state) and records a [`Trace`].

mod ctx;
mod daemon;
mod engine;
mod monitor;
mod replay;
mod rounds;
mod trace;

pub use ctx::{Ctx, Fault, InputPort};
pub use daemon::{Daemon, DaemonPolicy};
pub use engine::{enabled_actions, Atomicity, Engine, EngineError, Stop, StopReason};
pub use monitor::{
    check_attractor, check_closure, AttractorReport, AttractorRun, ClosureReport, Counterexample,
};
pub use replay::{revalidate, ReplayError};
pub use rounds::{rounds, rounds_to};
pub use trace::{History, Replay, Trace, TraceError, Transition};

use std::fmt::Debug;

use rand::RngCore;

use crate::topology::NodeId;

pub type ActionId = usize;

/// Static description of one guarded action.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ActionSpec {
    pub label: &'static str,
    /// Guard reads no neighbour register.
    pub internal: bool,
}

/// Result of executing an action's statement.
#[derive(Clone, Debug)]
pub struct Outcome<S> {
    pub state: S,
    /// The statement ran a decide section (CS2).
    pub decide: bool,
}

/// A protocol in the guarded-command model.
pub trait Protocol: Send + Sync {
    type State: Clone + PartialEq + Debug + Send + Sync;

    fn name(&self) -> &str;

    /// Actions in firing priority order: when several guards hold at one
    /// process, the lowest index fires.
    fn actions(&self) -> &[ActionSpec];

    fn guard(&self, action: ActionId, ctx: &Ctx<'_, Self::State>) -> bool;

    fn apply(&self, action: ActionId, ctx: &Ctx<'_, Self::State>) -> Outcome<Self::State>;

    /// Whether guards or statements may read the process identity.
    fn uses_identity(&self) -> bool {
        false
    }

    /// A legitimate start state (all clocks equal, payload initialised).
    fn initial_state(&self, node: NodeId) -> Self::State;

    /// An arbitrary state from the register domains (transient corruption).
    fn arbitrary_state(&self, node: NodeId, rng: &mut dyn RngCore) -> Self::State;
}

impl<P: Protocol + ?Sized> Protocol for &P {
    type State = P::State;

    fn name(&self) -> &str {
        (**self).name()
    }
    fn actions(&self) -> &[ActionSpec] {
        (**self).actions()
    }
    fn guard(&self, action: ActionId, ctx: &Ctx<'_, Self::State>) -> bool {
        (**self).guard(action, ctx)
    }
    fn apply(&self, action: ActionId, ctx: &Ctx<'_, Self::State>) -> Outcome<Self::State> {
        (**self).apply(action, ctx)
    }
    fn uses_identity(&self) -> bool {
        (**self).uses_identity()
    }
    fn initial_state(&self, node: NodeId) -> Self::State {
        (**self).initial_state(node)
    }
    fn arbitrary_state(&self, node: NodeId, rng: &mut dyn RngCore) -> Self::State {
        (**self).arbitrary_state(node, rng)
    }
}
