use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::verify::{verifiable_phases, verify_phase, PhaseError, PhaseVerdict};
use super::{Datum, InfimumOp};
use crate::kernel::{History, InputPort, Trace};
use crate::topology::{NodeId, Topology};
use crate::unison::{
    build_ss_ws, is_wu0, lift_from, LiftError, LiftedTrace, SizingError, Slot, SsWs, WaveHooks, WsParams, WsState,
};

/// Where `v0` comes from at each initialization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSource {
    Constant(Datum),
    PerNode(Vec<Datum>),
    /// One sequence per process, consumed one value per phase, cycling.
    Scripted(Vec<Vec<Datum>>),
    /// A fresh operator sample per (process, draw), reproducible from the seed.
    Random(u64),
}

impl InputSource {
    pub fn value(&self, op: &InfimumOp, node: NodeId, draw: u64) -> Datum {
        match self {
            InputSource::Constant(x) => *x,
            InputSource::PerNode(xs) => xs[node % xs.len()],
            InputSource::Scripted(seqs) => {
                let seq = &seqs[node % seqs.len()];
                seq[(draw % seq.len() as u64) as usize]
            }
            InputSource::Random(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(node as u64);
                rng.set_word_pos(draw as u128 * 64);
                op.sample(&mut rng)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfState {
    pub v0: Datum,
    pub v1: Datum,
    pub v2: Datum,
    /// Inputs consumed so far.
    pub draws: u64,
}

pub struct InfimumHooks {
    op: InfimumOp,
    input: InputSource,
}

impl InfimumHooks {
    pub fn new(op: InfimumOp, input: InputSource) -> Self {
        Self { op, input }
    }

    pub fn op(&self) -> &InfimumOp {
        &self.op
    }

    pub fn input(&self) -> &InputSource {
        &self.input
    }

    fn fresh(&self, node: NodeId, draw: u64) -> InfState {
        let x = self.input.value(&self.op, node, draw);
        InfState {
            v0: x,
            v1: x,
            v2: x,
            draws: draw + 1,
        }
    }
}

impl WaveHooks for InfimumHooks {
    type Payload = InfState;

    fn initial(&self, node: NodeId) -> InfState {
        self.fresh(node, 0)
    }

    fn arbitrary(&self, _node: NodeId, rng: &mut dyn RngCore) -> InfState {
        InfState {
            v0: self.op.sample(rng),
            v1: self.op.sample(rng),
            v2: self.op.sample(rng),
            draws: rng.random_range(0..4),
        }
    }

    fn computation<'p>(&self, own: &'p InfState, neighbors: impl Iterator<Item = (Slot, &'p InfState)>) -> InfState {
        let mut v2 = own.v0;
        for (slot, q) in neighbors {
            let x = match slot {
                Slot::Same => &q.v2,
                Slot::Ahead => &q.v1,
            };
            v2 = self.op.combine(&v2, x);
        }
        InfState {
            v0: own.v0,
            v1: own.v2,
            v2,
            draws: own.draws,
        }
    }

    fn initialization(&self, own: &InfState, port: InputPort) -> InfState {
        self.fresh(port.index(), own.draws)
    }
}

/// SS-WS with phases of `rho + 1` steps carrying the ball infimum.
pub fn attach_infimum(
    topo: &Topology,
    rho: u32,
    op: InfimumOp,
    input: InputSource,
) -> Result<SsWs<InfimumHooks>, SizingError> {
    build_ss_ws(topo, WsParams::auto(topo, rho, rho + 1), InfimumHooks::new(op, input))
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum InfimumError {
    #[error("trace never reaches a WU0 configuration")]
    NotStabilized,
    #[error(transparent)]
    Lift(#[from] LiftError),
    #[error(transparent)]
    Phase(#[from] PhaseError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct InfimumReport {
    /// First WU0 configuration.
    pub stabilized_at: usize,
    pub phases: Vec<PhaseVerdict<Datum>>,
}

impl InfimumReport {
    pub fn mismatches(&self) -> usize {
        self.phases.iter().map(|v| v.mismatches.len()).sum()
    }

    pub fn exact(&self) -> bool {
        self.mismatches() == 0
    }
}

type InfTrace = Trace<WsState<InfState>>;

fn lifted_suffix(
    trace: &InfTrace,
    topo: &Topology,
    proto: &SsWs<InfimumHooks>,
) -> Result<(usize, LiftedTrace), InfimumError> {
    let sys = proto.system();
    let start = trace
        .first_index(|c| is_wu0(&SsWs::<InfimumHooks>::clocks(c), topo, sys))
        .ok_or(InfimumError::NotStabilized)?;
    Ok((start, lift_from(trace, start, topo, sys, |s| s.r)?))
}

fn check_one(
    history: &History<WsState<InfState>>,
    topo: &Topology,
    lifted: &LiftedTrace,
    proto: &SsWs<InfimumHooks>,
    phase: i64,
) -> Result<PhaseVerdict<Datum>, PhaseError> {
    let op = proto.hooks().op();
    let p = proto.params();
    verify_phase(
        history,
        topo,
        lifted,
        p.phase_len,
        p.rho,
        phase,
        &|a, b| op.combine(a, b),
        &|s: &WsState<InfState>| s.payload.v0,
        &|s: &WsState<InfState>| s.payload.v1,
        &|s: &WsState<InfState>| s.payload.v2,
    )
}

/// Verifies every complete phase after stabilization.
pub fn analyze_infimum(
    trace: &InfTrace,
    topo: &Topology,
    proto: &SsWs<InfimumHooks>,
) -> Result<InfimumReport, InfimumError> {
    let (start, lifted) = lifted_suffix(trace, topo, proto)?;
    let history = trace.history();
    let p = proto.params();
    let phases = verifiable_phases(&lifted, p.phase_len, p.rho)
        .map(|u| check_one(&history, topo, &lifted, proto, u))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(InfimumReport {
        stabilized_at: start,
        phases,
    })
}

/// Verifies one phase, numbered in lifted time (phase `U` starts at `Uδ`).
pub fn verify_ball_infimum(
    trace: &InfTrace,
    topo: &Topology,
    proto: &SsWs<InfimumHooks>,
    phase: i64,
) -> Result<PhaseVerdict<Datum>, InfimumError> {
    let (_, lifted) = lifted_suffix(trace, topo, proto)?;
    Ok(check_one(&trace.history(), topo, &lifted, proto, phase)?)
}
