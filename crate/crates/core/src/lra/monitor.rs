use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{compatible, Entry, Lra, LraPayload, Request};
use crate::infimum::{verifiable_phases, verify_phase, PhaseError, PhaseVerdict};
use crate::kernel::{rounds, rounds_to, Trace};
use crate::layerclock::{stable_start, DcState, MonitorError, SsDc, NA};
use crate::topology::{NodeId, Topology};
use crate::unison::{lift_from, LiftedTrace};

type LraTrace = Trace<DcState<LraPayload>>;

/// One critical-section execution. The section runs inside a single atomic
/// step, so `entry == exit`; `phase` is the master phase it closed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsRecord {
    pub node: NodeId,
    pub resource: Request,
    pub entry: usize,
    pub exit: usize,
    pub phase: i64,
}

fn master_lift(trace: &LraTrace, topo: &Topology, dc: &SsDc<Lra>) -> Result<(usize, LiftedTrace), MonitorError> {
    let start = stable_start(trace, topo, dc)?;
    Ok((start, lift_from(trace, start, topo, dc.master(), |s| s.r1)?))
}

/// Critical sections entered in the stabilized suffix, in step order, and
/// the index where both clocks first reach WU0. Sections of the phase that
/// was already running there are dropped: its election started from
/// registers written before stabilization.
pub fn cs_records(trace: &LraTrace, topo: &Topology, dc: &SsDc<Lra>) -> Result<(usize, Vec<CsRecord>), MonitorError> {
    let (start, lifted) = master_lift(trace, topo, dc)?;
    let delta = dc.params().delta() as i64;
    let first = *verifiable_phases(&lifted, dc.params().delta(), dc.params().rho).start();
    let history = trace.history();
    let mut out = Vec::new();
    for (step, t) in trace.transitions().iter().enumerate().skip(start) {
        for (i, &p) in t.selected.iter().enumerate() {
            let req = history.state_at(p, step).payload.req;
            let phase = lifted.value_at(p, step).div_euclid(delta);
            if t.decide[i] && req.uses_resource() && phase >= first {
                out.push(CsRecord {
                    node: p,
                    resource: req,
                    entry: step,
                    exit: step,
                    phase,
                });
            }
        }
    }
    Ok((start, out))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafetyViolation {
    pub a: CsRecord,
    pub b: CsRecord,
    pub distance: u32,
}

/// Pairs of sections by processes at most `rho` apart holding incompatible
/// resources in the same master phase or at overlapping steps.
pub fn monitor_safety(records: &[CsRecord], topo: &Topology, rho: u32) -> Vec<SafetyViolation> {
    let mut by_phase: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    let mut by_step: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_phase.entry(r.phase).or_default().push(i);
        for s in r.entry..=r.exit {
            by_step.entry(s).or_default().push(i);
        }
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for group in by_phase.values().chain(by_step.values()) {
        for (x, &i) in group.iter().enumerate() {
            for &j in &group[x + 1..] {
                let (a, b) = (records[i], records[j]);
                if a.node == b.node || compatible(a.resource, b.resource) {
                    continue;
                }
                let distance = topo.distance(a.node, b.node);
                if distance <= rho && seen.insert((i.min(j), i.max(j))) {
                    out.push(SafetyViolation { a, b, distance });
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Liveness {
    pub counts: Vec<u64>,
    /// Largest step distance between consecutive sections of each process.
    pub max_gap: Vec<Option<usize>>,
    /// Largest `|Pot_p|` seen, where `Pot_p` sums the slave delays from `p`
    /// to every process.
    pub max_abs_pot: i64,
    /// `n * D`.
    pub pot_bound: i64,
    pub samples: usize,
}

impl Liveness {
    pub fn min_count(&self) -> u64 {
        self.counts.iter().copied().min().unwrap_or(0)
    }
}

pub fn monitor_liveness(
    trace: &LraTrace,
    topo: &Topology,
    dc: &SsDc<Lra>,
    records: &[CsRecord],
) -> Result<Liveness, MonitorError> {
    let n = topo.node_count();
    let start = stable_start(trace, topo, dc)?;
    let slave = lift_from(trace, start, topo, dc.slave(), |s| s.r2)?;
    let mut counts = vec![0; n];
    let mut last: Vec<Option<usize>> = vec![None; n];
    let mut max_gap: Vec<Option<usize>> = vec![None; n];
    for r in records {
        counts[r.node] += 1;
        if let Some(prev) = last[r.node] {
            let g = r.entry - prev;
            max_gap[r.node] = Some(max_gap[r.node].map_or(g, |m: usize| m.max(g)));
        }
        last[r.node] = Some(r.entry);
    }
    let mut max_abs_pot = 0;
    let mut samples = 0;
    for i in start..=trace.len() {
        let lv = slave.values_at(i);
        let total: i64 = lv.iter().sum();
        for &l in &lv {
            max_abs_pot = max_abs_pot.max((total - n as i64 * l).abs());
        }
        samples += 1;
    }
    Ok(Liveness {
        counts,
        max_gap,
        max_abs_pot,
        pot_bound: n as i64 * topo.diameter() as i64,
        samples,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LraMetrics {
    pub stab_index: usize,
    pub rounds_to_stabilize: usize,
    /// Max sections of one process strictly between two consecutive
    /// sections of another.
    pub fairness_index: Option<u64>,
    /// Max sections of all others strictly between two consecutive sections
    /// of one process.
    pub service_time: Option<u64>,
    /// Largest neighbour-read count over complete stabilized master phases.
    pub comms_per_phase: Option<u64>,
    /// `(phase, reads)` for each complete stabilized master phase.
    pub phase_reads: Vec<(i64, u64)>,
    /// Some process entered fewer than twice, so fairness is measured over
    /// the others only.
    pub partial: bool,
}

pub fn metrics(
    trace: &LraTrace,
    topo: &Topology,
    dc: &SsDc<Lra>,
    records: &[CsRecord],
) -> Result<LraMetrics, MonitorError> {
    let n = topo.node_count();
    let (start, lifted) = master_lift(trace, topo, dc)?;
    let mut entries: Vec<Vec<usize>> = vec![Vec::new(); n];
    for r in records {
        entries[r.node].push(r.entry);
    }
    let between = |q: NodeId, a: usize, b: usize| -> u64 {
        let e = &entries[q];
        (e.partition_point(|&x| x < b) - e.partition_point(|&x| x <= a)) as u64
    };
    let mut fairness: Option<u64> = None;
    let mut service: Option<u64> = None;
    for (p, mine) in entries.iter().enumerate() {
        for w in mine.windows(2) {
            let mut total = 0;
            for q in (0..n).filter(|&q| q != p) {
                let c = between(q, w[0], w[1]);
                fairness = Some(fairness.map_or(c, |f| f.max(c)));
                total += c;
            }
            service = Some(service.map_or(total, |s| s.max(total)));
        }
    }
    let delta = dc.params().delta() as i64;
    let mut per_phase: BTreeMap<i64, (u64, u64)> = BTreeMap::new();
    for (step, t) in trace.transitions().iter().enumerate().skip(start) {
        for (i, &p) in t.selected.iter().enumerate() {
            if t.fired[i] == NA {
                let phase = lifted.value_at(p, step).div_euclid(delta);
                let e = per_phase.entry(phase).or_default();
                e.0 += t.reads[i] as u64;
                e.1 += 1;
            }
        }
    }
    let phase_reads: Vec<(i64, u64)> = per_phase
        .into_iter()
        .filter(|&(u, (_, firings))| u * delta > lifted.max_base() && firings == n as u64 * delta as u64)
        .map(|(u, (reads, _))| (u, reads))
        .collect();
    Ok(LraMetrics {
        stab_index: start,
        rounds_to_stabilize: rounds_to(&rounds(trace), start),
        fairness_index: fairness,
        service_time: service,
        comms_per_phase: phase_reads.iter().map(|&(_, r)| r).max(),
        phase_reads,
        partial: entries.iter().any(|e| e.len() < 2),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElectionReport {
    pub start: usize,
    pub phases: Vec<PhaseVerdict<Entry>>,
}

impl ElectionReport {
    pub fn mismatches(&self) -> usize {
        self.phases.iter().map(|v| v.mismatches.len()).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ElectionError {
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error(transparent)]
    Phase(#[from] PhaseError),
}

/// Checks the ball election phase by phase with the ◁-induced operator.
pub fn check_election(trace: &LraTrace, topo: &Topology, dc: &SsDc<Lra>) -> Result<ElectionReport, ElectionError> {
    let (start, lifted) = master_lift(trace, topo, dc)?;
    let history = trace.history();
    let (delta, rho) = (dc.params().delta(), dc.params().rho);
    let plugin = dc.plugin();
    let phases = verifiable_phases(&lifted, delta, rho)
        .map(|u| {
            verify_phase(
                &history,
                topo,
                &lifted,
                delta,
                rho,
                u,
                &|a: &Entry, b: &Entry| plugin.join(*a, *b),
                &|s: &DcState<LraPayload>| (s.r2, s.payload.v),
                &|s: &DcState<LraPayload>| s.payload.res1,
                &|s: &DcState<LraPayload>| s.payload.res2,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ElectionReport { start, phases })
}
