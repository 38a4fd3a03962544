use std::cell::Cell;

use crate::topology::{NodeId, Topology};

/// Contract violations detected while evaluating a guard or statement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum Fault {
    #[error("process {node} read registers of non-neighbour {target}")]
    OutOfScopeRead { node: NodeId, target: NodeId },
    #[error("process {node} read its identity but the protocol is anonymous")]
    IdentityRead { node: NodeId },
}

/// Opaque handle through which the environment feeds inputs to a process.
/// It names the process for the input source only; protocol logic never
/// branches on it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InputPort(pub(crate) NodeId);

impl InputPort {
    pub fn new(node: NodeId) -> Self {
        Self(node)
    }

    pub fn index(self) -> NodeId {
        self.0
    }
}

/// What one process may see: its own registers and its neighbours'.
///
/// Every neighbour access is tracked, which feeds the link-communication
/// metric; reads outside the closed neighbourhood and unauthorised identity
/// reads are recorded as faults and surfaced by the engine.
pub struct Ctx<'a, S> {
    node: NodeId,
    config: &'a [S],
    neighbors: &'a [NodeId],
    touched: Option<&'a [Cell<bool>]>,
    fault: Cell<Option<Fault>>,
    identity_allowed: bool,
}

impl<'a, S> Ctx<'a, S> {
    pub(crate) fn tracked(
        topo: &'a Topology,
        config: &'a [S],
        node: NodeId,
        touched: &'a [Cell<bool>],
        identity_allowed: bool,
    ) -> Self {
        let neighbors = topo.neighbors(node);
        for cell in &touched[..neighbors.len()] {
            cell.set(false);
        }
        Self {
            node,
            config,
            neighbors,
            touched: Some(touched),
            fault: Cell::new(None),
            identity_allowed,
        }
    }

    /// Untracked view for monitors and tests.
    pub fn detached(topo: &'a Topology, config: &'a [S], node: NodeId) -> Self {
        Self {
            node,
            config,
            neighbors: topo.neighbors(node),
            touched: None,
            fault: Cell::new(None),
            identity_allowed: true,
        }
    }

    pub fn own(&self) -> &'a S {
        &self.config[self.node]
    }

    pub fn degree(&self) -> usize {
        self.neighbors.len()
    }

    /// The `i`-th neighbour's registers.
    pub fn neighbor(&self, i: usize) -> &'a S {
        if let Some(t) = self.touched {
            t[i].set(true);
        }
        &self.config[self.neighbors[i]]
    }

    pub fn neighbors(&self) -> impl Iterator<Item = &'a S> + '_ {
        (0..self.neighbors.len()).map(move |i| self.neighbor(i))
    }

    /// Registers of an arbitrary process. Only the process itself and its
    /// neighbours are in scope; anything else records a fault.
    pub fn state_of(&self, q: NodeId) -> Option<&'a S> {
        if q == self.node {
            return Some(self.own());
        }
        match self.neighbors.iter().position(|&x| x == q) {
            Some(i) => Some(self.neighbor(i)),
            None => {
                self.fault.set(Some(Fault::OutOfScopeRead {
                    node: self.node,
                    target: q,
                }));
                None
            }
        }
    }

    /// The process identity, for protocols that declare an identity or
    /// colouring requirement.
    pub fn identity(&self) -> NodeId {
        if !self.identity_allowed {
            self.fault.set(Some(Fault::IdentityRead { node: self.node }));
        }
        self.node
    }

    pub fn port(&self) -> InputPort {
        InputPort(self.node)
    }

    pub fn fault(&self) -> Option<Fault> {
        self.fault.get()
    }

    /// Distinct neighbours read so far.
    pub fn reads(&self) -> u32 {
        self.touched.map_or(0, |t| {
            t[..self.neighbors.len()].iter().filter(|c| c.get()).count() as u32
        })
    }
}
