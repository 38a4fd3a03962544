//! Causal DAG of a trace, cuts, coherence and the ρ-wavelet checker.

use std::fmt::Write as _;

use crate::kernel::{ActionId, Trace};
use crate::topology::{NodeId, Topology};
use crate::unison::{LiftedTrace, Reach};

pub type EventId = usize;

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    Initial,
    /// The guard reads no neighbour register.
    Internal,
    External,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Event {
    pub node: NodeId,
    pub time: usize,
    pub kind: EventKind,
    pub action: Option<ActionId>,
    pub decide: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeKind {
    /// Previous event of the same process.
    Local,
    /// Latest strictly earlier event of a neighbour.
    Neighbor,
}

/// Events `(p, t)` of a trace with the two causality rules as edges and a
/// vector clock per event (latest time of each process in its past).
pub struct EventGraph {
    n: usize,
    events: Vec<Event>,
    pred_start: Vec<usize>,
    preds: Vec<(EventId, EdgeKind)>,
    vc: Vec<u32>,
    by_node: Vec<Vec<EventId>>,
}

pub fn build_event_graph<S: Clone>(trace: &Trace<S>, topo: &Topology) -> EventGraph {
    let n = trace.node_count();
    let mut events = Vec::new();
    let mut by_node: Vec<Vec<EventId>> = vec![Vec::new(); n];
    let mut pred_start = vec![0];
    let mut preds = Vec::new();
    let mut vc: Vec<u32> = Vec::new();
    for p in 0..n {
        by_node[p].push(events.len());
        events.push(Event {
            node: p,
            time: 0,
            kind: EventKind::Initial,
            action: None,
            decide: false,
        });
        pred_start.push(0);
        let mut row = vec![NONE; n];
        row[p] = 0;
        vc.extend_from_slice(&row);
    }
    let actions = trace.actions();
    let mut row = vec![NONE; n];
    for (t, tr) in trace.transitions().iter().enumerate() {
        let time = t + 1;
        let first_new = events.len();
        for (i, &p) in tr.selected.iter().enumerate() {
            let a = tr.fired[i];
            let kind = if actions[a].internal {
                EventKind::Internal
            } else {
                EventKind::External
            };
            let id = events.len();
            let prev = *by_node[p].last().expect("initial event");
            row.copy_from_slice(&vc[prev * n..(prev + 1) * n]);
            preds.push((prev, EdgeKind::Local));
            if kind == EventKind::External {
                for &q in topo.neighbors(p) {
                    let mut last = *by_node[q].last().expect("initial event");
                    if last >= first_new {
                        // q acted in this same step; take its previous event
                        let list = &by_node[q];
                        last = list[list.len() - 2];
                    }
                    preds.push((last, EdgeKind::Neighbor));
                    let other = &vc[last * n..(last + 1) * n];
                    for (x, &y) in row.iter_mut().zip(other) {
                        if *x == NONE || (y != NONE && y > *x) {
                            *x = y;
                        }
                    }
                }
            }
            row[p] = time as u32;
            vc.extend_from_slice(&row);
            pred_start.push(preds.len());
            events.push(Event {
                node: p,
                time,
                kind,
                action: Some(a),
                decide: tr.decide[i],
            });
            by_node[p].push(id);
        }
    }
    EventGraph {
        n,
        events,
        pred_start,
        preds,
        vc,
        by_node,
    }
}

impl EventGraph {
    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn event(&self, e: EventId) -> &Event {
        &self.events[e]
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn preds(&self, e: EventId) -> &[(EventId, EdgeKind)] {
        &self.preds[self.pred_start[e]..self.pred_start[e + 1]]
    }

    /// Events of `p` in time order.
    pub fn events_of(&self, p: NodeId) -> &[EventId] {
        &self.by_node[p]
    }

    /// The event `(p, t)`, if `p` acted at `t` (or `t == 0`).
    pub fn find(&self, p: NodeId, t: usize) -> Option<EventId> {
        let list = &self.by_node[p];
        list.binary_search_by_key(&t, |&e| self.events[e].time)
            .ok()
            .map(|i| list[i])
    }

    /// Latest event of `p` at or before `t`.
    pub fn latest_at_or_before(&self, p: NodeId, t: usize) -> EventId {
        let list = &self.by_node[p];
        let i = list.partition_point(|&e| self.events[e].time <= t);
        list[i.max(1) - 1]
    }

    /// Latest time of a `q`-event in the past cone of `e`.
    pub fn past_time(&self, e: EventId, q: NodeId) -> Option<usize> {
        let v = self.vc[e * self.n + q];
        (v != NONE).then_some(v as usize)
    }

    /// `a ⪯ b`.
    pub fn precedes(&self, a: EventId, b: EventId) -> bool {
        let ev = &self.events[a];
        self.past_time(b, ev.node).is_some_and(|t| t >= ev.time)
    }

    /// Processes with an event in the past cone of `e`.
    pub fn cover(&self, e: EventId) -> Vec<NodeId> {
        (0..self.n).filter(|&q| self.past_time(e, q).is_some()).collect()
    }

    /// Processes with an event in the past cone of `e` at or after `from`.
    pub fn cover_since(&self, e: EventId, from: &Cut) -> Vec<NodeId> {
        (0..self.n)
            .filter(|&q| self.past_time(e, q).is_some_and(|t| t >= from.time(q)))
            .collect()
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph causal {\n  rankdir=LR;\n");
        for (id, e) in self.events.iter().enumerate() {
            let shape = if e.decide { "doublecircle" } else { "circle" };
            let _ = writeln!(out, "  e{id} [label=\"({},{})\" shape={shape}];", e.node, e.time);
        }
        for id in 0..self.events.len() {
            for &(p, kind) in self.preds(id) {
                let style = match kind {
                    EdgeKind::Local => "solid",
                    EdgeKind::Neighbor => "dashed",
                };
                let _ = writeln!(out, "  e{p} -> e{id} [style={style}];");
            }
        }
        out.push_str("}\n");
        out
    }
}

/// A map from processes to event times.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cut {
    times: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CutError {
    #[error("process {node} has no event at time {time}")]
    NoEvent { node: NodeId, time: usize },
    #[error("level {level} is below the well-defined floor {floor}")]
    BelowFloor { level: i64, floor: i64 },
    #[error("process {node} never reaches level {level} in the trace")]
    NotReached { node: NodeId, level: i64 },
    #[error("cut has {got} entries for {n} processes")]
    Size { got: usize, n: usize },
}

impl Cut {
    pub fn new(g: &EventGraph, times: Vec<usize>) -> Result<Self, CutError> {
        if times.len() != g.node_count() {
            return Err(CutError::Size {
                got: times.len(),
                n: g.node_count(),
            });
        }
        for (p, &t) in times.iter().enumerate() {
            if g.find(p, t).is_none() {
                return Err(CutError::NoEvent { node: p, time: t });
            }
        }
        Ok(Self { times })
    }

    pub fn initial(n: usize) -> Self {
        Self { times: vec![0; n] }
    }

    pub fn time(&self, p: NodeId) -> usize {
        self.times[p]
    }

    pub fn times(&self) -> &[usize] {
        &self.times
    }

    pub fn events(&self, g: &EventGraph) -> Vec<EventId> {
        (0..self.times.len())
            .map(|p| g.find(p, self.times[p]).expect("validated at construction"))
            .collect()
    }

    /// Pointwise `self ≤ other`.
    pub fn le(&self, other: &Cut) -> bool {
        self.times.iter().zip(&other.times).all(|(a, b)| a <= b)
    }

    pub fn contains(&self, g: &EventGraph, e: EventId) -> bool {
        let ev = g.event(e);
        ev.time <= self.times[ev.node]
    }
}

/// No event outside the cut's past lies causally below an event inside it.
pub fn is_coherent(g: &EventGraph, cut: &Cut) -> bool {
    cut.events(g).into_iter().all(|e| {
        (0..g.node_count()).all(|q| g.past_time(e, q).is_none_or(|t| t <= cut.time(q)))
    })
}

/// `C_k`: for each process, the event at which its lifted clock first
/// reaches `k`. Levels already reached in the lifting's start configuration
/// map to the event that wrote that configuration's register.
pub fn cut_for_level(g: &EventGraph, lifted: &LiftedTrace, k: i64, diameter: u32) -> Result<Cut, CutError> {
    let floor = lifted.bottom() + diameter as i64;
    if k < floor {
        return Err(CutError::BelowFloor { level: k, floor });
    }
    let mut times = Vec::with_capacity(g.node_count());
    for p in 0..g.node_count() {
        let t = match lifted.reach(p, k) {
            Some(Reach::At(idx)) => idx,
            Some(Reach::AtStart) => g.event(g.latest_at_or_before(p, lifted.start())).time,
            None => return Err(CutError::NotReached { node: p, level: k }),
        };
        times.push(t);
    }
    Cut::new(g, times)
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum WaveletError {
    #[error("segment start cut is not coherent")]
    StartIncoherent,
    #[error("segment end cut is not coherent")]
    EndIncoherent,
    #[error("segment cuts are not ordered")]
    Unordered,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WaveletViolation {
    NoDecide,
    /// A decide event lies outside the segment.
    DecideOutside { event: EventId },
    /// The decide's past within the segment misses these ball members.
    Uncovered { event: EventId, node: NodeId, missing: Vec<NodeId> },
}

/// Checks that `[c1, c2]` is a ρ-wavelet for the given decide events: at
/// least one decide inside, and each decide's past within the segment
/// covers its ρ-ball.
pub fn check_wavelet(
    g: &EventGraph,
    topo: &Topology,
    c1: &Cut,
    c2: &Cut,
    decides: &[EventId],
    rho: u32,
) -> Result<Option<WaveletViolation>, WaveletError> {
    if !is_coherent(g, c1) {
        return Err(WaveletError::StartIncoherent);
    }
    if !is_coherent(g, c2) {
        return Err(WaveletError::EndIncoherent);
    }
    if !c1.le(c2) {
        return Err(WaveletError::Unordered);
    }
    if decides.is_empty() {
        return Ok(Some(WaveletViolation::NoDecide));
    }
    for &e in decides {
        let ev = g.event(e);
        if ev.time < c1.time(ev.node) || ev.time > c2.time(ev.node) {
            return Ok(Some(WaveletViolation::DecideOutside { event: e }));
        }
        let missing: Vec<NodeId> = topo
            .ball(ev.node, rho)
            .into_iter()
            .filter(|&q| g.past_time(e, q).is_none_or(|t| t < c1.time(q)))
            .collect();
        if !missing.is_empty() {
            return Ok(Some(WaveletViolation::Uncovered {
                event: e,
                node: ev.node,
                missing,
            }));
        }
    }
    Ok(None)
}

/// Decide-tagged events inside `[c1, c2]`.
pub fn decides_in(g: &EventGraph, c1: &Cut, c2: &Cut) -> Vec<EventId> {
    (0..g.len())
        .filter(|&e| {
            let ev = g.event(e);
            ev.decide && ev.time >= c1.time(ev.node) && ev.time <= c2.time(ev.node)
        })
        .collect()
}

#[cfg(test)]
mod tests;
