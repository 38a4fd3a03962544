use std::fmt::Debug;
use std::ops::RangeInclusive;

use crate::kernel::History;
use crate::topology::{NodeId, Topology};
use crate::unison::{LiftedTrace, Reach};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Register {
    /// Ball of radius `k - 1`.
    V1,
    /// Ball of radius `k`.
    V2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mismatch<D> {
    pub node: NodeId,
    /// Offset of the cut inside the phase.
    pub k: u32,
    pub register: Register,
    pub expected: D,
    pub got: D,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseVerdict<D> {
    pub phase: i64,
    /// Register comparisons performed.
    pub checked: usize,
    pub mismatches: Vec<Mismatch<D>>,
}

impl<D> PhaseVerdict<D> {
    pub fn exact(&self) -> bool {
        self.mismatches.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PhaseError {
    #[error("phase {phase} starts at or before the lifting start")]
    BeforeStart { phase: i64 },
    #[error("process {node} never reaches level {level} in the trace")]
    NotReached { node: NodeId, level: i64 },
}

/// Phases whose whole span `[Uδ, Uδ+ρ]` lies after the lifting start and
/// inside the trace.
pub fn verifiable_phases(lifted: &LiftedTrace, delta: u32, rho: u32) -> RangeInclusive<i64> {
    let d = delta as i64;
    let lo = lifted.max_base().div_euclid(d) + 1;
    let hi = (lifted.max_common_level() - rho as i64).div_euclid(d);
    lo..=hi
}

/// Checks the per-phase ball equalities: at the cut where every process
/// reaches `Uδ + k`, `v1` folds `ball(p, k-1)` and `v2` folds `ball(p, k)`
/// of the inputs snapshotted at `Uδ`. `k = 0` checks `v1 = v2 = v0`.
#[allow(clippy::too_many_arguments)]
pub fn verify_phase<S, D: Clone + PartialEq + Debug>(
    history: &History<S>,
    topo: &Topology,
    lifted: &LiftedTrace,
    delta: u32,
    rho: u32,
    phase: i64,
    combine: &dyn Fn(&D, &D) -> D,
    input: &dyn Fn(&S) -> D,
    v1: &dyn Fn(&S) -> D,
    v2: &dyn Fn(&S) -> D,
) -> Result<PhaseVerdict<D>, PhaseError> {
    let n = topo.node_count();
    let start = phase * delta as i64;
    if start <= lifted.max_base() {
        return Err(PhaseError::BeforeStart { phase });
    }
    let at_level = |p: NodeId, level: i64| -> Result<&S, PhaseError> {
        match lifted.reach(p, level) {
            Some(Reach::At(idx)) => Ok(history.state_at(p, idx)),
            Some(Reach::AtStart) => Err(PhaseError::BeforeStart { phase }),
            None => Err(PhaseError::NotReached { node: p, level }),
        }
    };
    let inputs: Vec<D> = (0..n).map(|p| at_level(p, start).map(input)).collect::<Result<_, _>>()?;
    let fold_ball = |p: NodeId, radius: u32| -> D {
        let ball = topo.ball(p, radius);
        let mut acc = inputs[ball[0]].clone();
        for &q in &ball[1..] {
            acc = combine(&acc, &inputs[q]);
        }
        acc
    };
    let mut verdict = PhaseVerdict {
        phase,
        checked: 0,
        mismatches: Vec::new(),
    };
    for k in 0..=rho {
        for p in 0..n {
            let s = at_level(p, start + k as i64)?;
            let expect_v1 = fold_ball(p, k.saturating_sub(1));
            let expect_v2 = fold_ball(p, k);
            for (register, expected, got) in [(Register::V1, expect_v1, v1(s)), (Register::V2, expect_v2, v2(s))] {
                verdict.checked += 1;
                if expected != got {
                    verdict.mismatches.push(Mismatch {
                        node: p,
                        k,
                        register,
                        expected,
                        got,
                    });
                }
            }
        }
    }
    Ok(verdict)
}
