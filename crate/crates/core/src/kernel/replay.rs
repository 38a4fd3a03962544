use super::{Daemon, DaemonPolicy, Engine, EngineError, Protocol, Trace};
use crate::topology::Topology;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ReplayError {
    #[error("trace was recorded for actions {recorded:?}, protocol has {expected:?}")]
    Actions { recorded: Vec<String>, expected: Vec<String> },
    #[error("step {step}: {source}")]
    Engine {
        step: usize,
        #[source]
        source: EngineError,
    },
    #[error("configuration {index}: recorded enabled set differs from the guards")]
    Enabled { index: usize },
    #[error("step {step}: recorded {field} differs from re-execution")]
    Mismatch { step: usize, field: &'static str },
}

/// Re-executes every recorded selection from the recorded initial
/// configuration and checks guards, fired actions, decide flags, read
/// counts, written states and enabled sets against the trace.
pub fn revalidate<P: Protocol>(proto: &P, topo: &Topology, trace: &Trace<P::State>) -> Result<(), ReplayError> {
    let labels = |xs: Vec<&str>| xs.into_iter().map(String::from).collect::<Vec<_>>();
    let recorded = labels(trace.actions().iter().map(|a| a.label).collect());
    let expected = labels(proto.actions().iter().map(|a| a.label).collect());
    if recorded != expected {
        return Err(ReplayError::Actions { recorded, expected });
    }
    let n = topo.node_count();
    let mut e = Engine::new(proto, topo, Daemon::new(DaemonPolicy::Central, 0, n), trace.initial().to_vec())
        .map_err(|source| ReplayError::Engine { step: 0, source })?;
    if e.enabled_nodes() != trace.enabled_at(0) {
        return Err(ReplayError::Enabled { index: 0 });
    }
    for (step, t) in trace.transitions().iter().enumerate() {
        e.step_with(&t.selected).map_err(|source| ReplayError::Engine { step, source })?;
        let got = &e.trace().transitions()[step];
        let field = if got.selected != t.selected {
            Some("selection")
        } else if got.fired != t.fired {
            Some("fired actions")
        } else if got.decide != t.decide {
            Some("decide flags")
        } else if got.reads != t.reads {
            Some("read counts")
        } else if got.states != t.states {
            Some("states")
        } else if got.neutralized != t.neutralized {
            Some("neutralized set")
        } else {
            None
        };
        if let Some(field) = field {
            return Err(ReplayError::Mismatch { step, field });
        }
        if e.enabled_nodes() != trace.enabled_at(step + 1) {
            return Err(ReplayError::Enabled { index: step + 1 });
        }
    }
    Ok(())
}
