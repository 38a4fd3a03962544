use super::{delay_2rho, DcState, LayerPlugin, SsDc, NA};
use crate::kernel::Trace;
use crate::topology::{NodeId, Topology};
use crate::unison::{is_wu, is_wu0, lift_from, Clock, LiftError};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MonitorError {
    #[error("trace never reaches a configuration where both clocks are in WU0")]
    NotStabilized,
    #[error(transparent)]
    Lift(#[from] LiftError),
}

fn clocks<T>(config: &[DcState<T>], which: u8) -> Vec<Clock> {
    config.iter().map(|s| if which == 1 { s.r1 } else { s.r2 }).collect()
}

/// First configurations where the master, the slave, and both clocks are
/// in unison.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Staircase {
    pub first_wu1: Option<usize>,
    pub first_wu2: Option<usize>,
    pub first_wu: Option<usize>,
}

impl Staircase {
    /// Both reached, master no later than the pair.
    pub fn holds(&self) -> bool {
        matches!((self.first_wu1, self.first_wu), (Some(a), Some(b)) if a <= b)
    }
}

pub fn first_wu_indices<P: LayerPlugin>(trace: &Trace<DcState<P::Payload>>, topo: &Topology, dc: &SsDc<P>) -> Staircase {
    let mut out = Staircase {
        first_wu1: None,
        first_wu2: None,
        first_wu: None,
    };
    let mut r = trace.replay();
    loop {
        let i = r.index();
        let w1 = is_wu(&clocks(r.config(), 1), topo, dc.master());
        let w2 = is_wu(&clocks(r.config(), 2), topo, dc.slave());
        if w1 && out.first_wu1.is_none() {
            out.first_wu1 = Some(i);
        }
        if w2 && out.first_wu2.is_none() {
            out.first_wu2 = Some(i);
        }
        if w1 && w2 {
            out.first_wu = Some(i);
            break;
        }
        if !r.advance() {
            break;
        }
    }
    out
}

/// First configuration where both clocks are in WU0.
pub fn stable_start<P: LayerPlugin>(
    trace: &Trace<DcState<P::Payload>>,
    topo: &Topology,
    dc: &SsDc<P>,
) -> Result<usize, MonitorError> {
    trace
        .first_index(|c| is_wu0(&clocks(c, 1), topo, dc.master()) && is_wu0(&clocks(c, 2), topo, dc.slave()))
        .ok_or(MonitorError::NotStabilized)
}

/// NA firings per process from configuration `from` on.
pub fn master_increments<S: Clone>(trace: &Trace<S>, from: usize) -> Vec<u64> {
    let mut out = vec![0; trace.node_count()];
    for t in trace.transitions().iter().skip(from) {
        for (&p, &a) in t.selected.iter().zip(&t.fired) {
            if a == NA {
                out[p] += 1;
            }
        }
    }
    out
}

/// Steps (from `from` on) where a slave clock moved outside a phase-end
/// normal action, as `(step, process)`.
pub fn check_slave_gating<P: LayerPlugin>(
    trace: &Trace<DcState<P::Payload>>,
    dc: &SsDc<P>,
    from: usize,
) -> Vec<(usize, NodeId)> {
    let mut bad = Vec::new();
    let mut r = trace.replay();
    while let Some(t) = r.next_transition() {
        let step = r.index();
        if step >= from {
            for ((&p, &a), s) in t.selected.iter().zip(&t.fired).zip(&t.states) {
                let old = &r.config()[p];
                if s.r2 != old.r2 && !(a == NA && dc.is_phase_end(old.r1)) {
                    bad.push((step, p));
                }
            }
        }
        r.advance();
    }
    bad
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DelayDisagreement {
    pub index: usize,
    pub p: NodeId,
    pub q: NodeId,
    /// What the residue rule returned.
    pub residue: Option<i64>,
    /// The lifted slave-clock delay.
    pub lifted: i64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DelayReport {
    pub start: usize,
    pub configs: usize,
    pub pairs_checked: u64,
    pub disagreement_count: u64,
    /// The first few disagreements.
    pub disagreements: Vec<DelayDisagreement>,
}

const KEEP: usize = 32;

/// Compares the residue rule against the lifted slave delay for every
/// ordered pair within `2 rho`, on every `stride`-th stabilized
/// configuration.
pub fn verify_delay_agreement<P: LayerPlugin>(
    trace: &Trace<DcState<P::Payload>>,
    topo: &Topology,
    dc: &SsDc<P>,
    stride: usize,
) -> Result<DelayReport, MonitorError> {
    let start = stable_start(trace, topo, dc)?;
    let lifted = lift_from(trace, start, topo, dc.slave(), |s| s.r2)?;
    let rho = dc.params().rho;
    let k2 = dc.params().k2;
    let n = topo.node_count();
    let pairs: Vec<(NodeId, NodeId)> = (0..n)
        .flat_map(|p| (0..n).map(move |q| (p, q)))
        .filter(|&(p, q)| p != q && topo.distance(p, q) <= 2 * rho)
        .collect();
    let mut report = DelayReport {
        start,
        configs: 0,
        pairs_checked: 0,
        disagreement_count: 0,
        disagreements: Vec::new(),
    };
    let mut r = trace.replay();
    loop {
        let i = r.index();
        if i >= start && (i - start) % stride.max(1) == 0 {
            report.configs += 1;
            let lv = lifted.values_at(i);
            for &(p, q) in &pairs {
                report.pairs_checked += 1;
                let residue = delay_2rho(r.config()[p].r2, r.config()[q].r2, k2, rho);
                let truth = lv[q] - lv[p];
                if residue != Some(truth) {
                    report.disagreement_count += 1;
                    if report.disagreements.len() < KEEP {
                        report.disagreements.push(DelayDisagreement {
                            index: i,
                            p,
                            q,
                            residue,
                            lifted: truth,
                        });
                    }
                }
            }
        }
        if !r.advance() {
            break;
        }
    }
    Ok(report)
}
