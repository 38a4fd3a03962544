//! Two-layer clock: a master clock whose phases form a ρ-wavelet stream and
//! a slave clock that only moves at phase ends, gated by a plugin.

mod monitor;

pub use monitor::{
    check_slave_gating, first_wu_indices, master_increments, stable_start, verify_delay_agreement, DelayDisagreement,
    DelayReport, MonitorError, Staircase,
};

use std::fmt::Debug;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::kernel::{ActionId, ActionSpec, Ctx, InputPort, Outcome, Protocol};
use crate::topology::{GraphParams, NodeId, Topology};
use crate::unison::{Clock, IncrementingSystem, Sizing, SizingError, Slot};

pub const RA2: ActionId = 0;
pub const RA1: ActionId = 1;
pub const CA2: ActionId = 2;
pub const CA1: ActionId = 3;
pub const NA: ActionId = 4;

/// Actions in firing priority order.
pub const DC_ACTIONS: [ActionSpec; 5] = [
    ActionSpec {
        label: "RA2",
        internal: false,
    },
    ActionSpec {
        label: "RA1",
        internal: false,
    },
    ActionSpec {
        label: "CA2",
        internal: false,
    },
    ActionSpec {
        label: "CA1",
        internal: false,
    },
    ActionSpec {
        label: "NA",
        internal: false,
    },
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DcState<T> {
    pub r1: Clock,
    pub r2: Clock,
    pub payload: T,
}

/// Master period is `(rho + 1) * k1`; the slave period is `k2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DcParams {
    pub rho: u32,
    pub k1: u32,
    pub alpha1: u32,
    pub k2: u32,
    pub alpha2: u32,
}

impl DcParams {
    pub fn delta(&self) -> u32 {
        self.rho + 1
    }

    pub fn period1(&self) -> u32 {
        self.delta() * self.k1
    }

    pub fn auto(topo: &Topology, rho: u32) -> Self {
        let g = GraphParams::of(topo);
        Self {
            rho,
            k1: g.c_g_sound + 1,
            alpha1: g.t_g,
            k2: (4 * rho + 1).max(g.c_g_sound + 1),
            alpha2: g.t_g,
        }
    }
}

/// What `cond`, `cond1` and the hooks see of a process: everything except
/// the master clock.
#[derive(Debug)]
pub struct SlaveView<'a, T> {
    pub r2: Clock,
    pub payload: &'a T,
}

impl<T> Clone for SlaveView<'_, T> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<T> Copy for SlaveView<'_, T> {}

impl<'a, T> SlaveView<'a, T> {
    pub fn of(s: &'a DcState<T>) -> Self {
        Self {
            r2: s.r2,
            payload: &s.payload,
        }
    }
}

/// Problem-specific part of the layer clock.
pub trait LayerPlugin: Send + Sync {
    type Payload: Clone + PartialEq + Debug + Send + Sync;

    fn initial(&self, node: NodeId) -> Self::Payload;

    fn arbitrary(&self, node: NodeId, rng: &mut dyn RngCore) -> Self::Payload;

    /// Enables the critical section at a phase end.
    fn cond(&self, own: SlaveView<'_, Self::Payload>) -> bool;

    /// Gates the slave increment once the critical section ran.
    fn cond1(&self, own: SlaveView<'_, Self::Payload>) -> bool;

    /// Runs on every phase end; `own.r2` is the slave value after any
    /// increment.
    fn initialization(&self, own: SlaveView<'_, Self::Payload>, port: InputPort) -> Self::Payload;

    /// Runs on every other master step.
    fn computation<'p>(
        &self,
        own: SlaveView<'p, Self::Payload>,
        neighbors: impl Iterator<Item = (Slot, SlaveView<'p, Self::Payload>)>,
    ) -> Self::Payload;
}

/// `cond = cond1 = true`, no payload.
#[derive(Clone, Copy, Debug, Default)]
pub struct TrivialPlugin;

impl LayerPlugin for TrivialPlugin {
    type Payload = ();

    fn initial(&self, _: NodeId) {}

    fn arbitrary(&self, _: NodeId, _: &mut dyn RngCore) {}

    fn cond(&self, _: SlaveView<'_, ()>) -> bool {
        true
    }

    fn cond1(&self, _: SlaveView<'_, ()>) -> bool {
        true
    }

    fn initialization(&self, _: SlaveView<'_, ()>, _: InputPort) {}

    fn computation<'p>(&self, _: SlaveView<'p, ()>, _: impl Iterator<Item = (Slot, SlaveView<'p, ()>)>) {}
}

pub struct SsDc<P> {
    sys1: IncrementingSystem,
    sys2: IncrementingSystem,
    params: DcParams,
    plugin: P,
}

pub fn build_ss_dc<P: LayerPlugin>(topo: &Topology, params: DcParams, plugin: P) -> Result<SsDc<P>, SizingError> {
    let s = Sizing::of(topo);
    let dc = build_ss_dc_unchecked(params, plugin)?;
    for alpha in [params.alpha1, params.alpha2] {
        if alpha < s.t_g {
            return Err(SizingError::Alpha { alpha, t_g: s.t_g });
        }
    }
    if params.period1() <= s.c_g {
        return Err(SizingError::Period {
            name: "(rho+1)*K1",
            period: params.period1(),
            c_g: s.c_g,
        });
    }
    if params.k2 < 4 * params.rho + 1 {
        return Err(SizingError::SlavePeriod {
            k2: params.k2,
            min: 4 * params.rho + 1,
        });
    }
    if params.k2 <= s.c_g {
        return Err(SizingError::Period {
            name: "K2",
            period: params.k2,
            c_g: s.c_g,
        });
    }
    Ok(dc)
}

/// Skips the graph-dependent and slave-period checks (negative controls).
pub fn build_ss_dc_unchecked<P: LayerPlugin>(params: DcParams, plugin: P) -> Result<SsDc<P>, SizingError> {
    if params.k1 == 0 {
        return Err(SizingError::Zero("K1"));
    }
    if params.k2 == 0 {
        return Err(SizingError::Zero("K2"));
    }
    Ok(SsDc {
        sys1: IncrementingSystem::new(params.alpha1, params.period1()).expect("period checked"),
        sys2: IncrementingSystem::new(params.alpha2, params.k2).expect("period checked"),
        params,
        plugin,
    })
}

fn normal_step(sys: &IncrementingSystem, r: Clock, mut nb: impl Iterator<Item = Clock>) -> bool {
    let next = sys.phi(r);
    sys.in_ring(r) && nb.all(|q| q == r || q == next)
}

fn locally_correct(sys: &IncrementingSystem, r: Clock, mut nb: impl Iterator<Item = Clock>) -> bool {
    sys.in_ring(r) && nb.all(|q| sys.in_ring(q) && (r == q || r == sys.phi(q) || sys.phi(r) == q))
}

fn convergence_step(sys: &IncrementingSystem, r: Clock, mut nb: impl Iterator<Item = Clock>) -> bool {
    sys.in_tail_star(r) && nb.all(|q| sys.in_tail(q) && r <= q)
}

impl<P: LayerPlugin> SsDc<P> {
    pub fn master(&self) -> &IncrementingSystem {
        &self.sys1
    }

    pub fn slave(&self) -> &IncrementingSystem {
        &self.sys2
    }

    pub fn params(&self) -> &DcParams {
        &self.params
    }

    pub fn plugin(&self) -> &P {
        &self.plugin
    }

    /// Whether a master value sits on the last step of a phase.
    pub fn is_phase_end(&self, r1: Clock) -> bool {
        let d = self.params.delta() as Clock;
        r1.rem_euclid(d) == d - 1
    }

    fn sys(&self, clock: usize) -> &IncrementingSystem {
        if clock == 1 { &self.sys1 } else { &self.sys2 }
    }

    fn reg(clock: usize, s: &DcState<P::Payload>) -> Clock {
        if clock == 1 { s.r1 } else { s.r2 }
    }

    fn reset_guard(&self, clock: usize, ctx: &Ctx<'_, DcState<P::Payload>>) -> bool {
        let sys = self.sys(clock);
        let r = Self::reg(clock, ctx.own());
        !locally_correct(sys, r, ctx.neighbors().map(|q| Self::reg(clock, q))) && !sys.in_tail(r)
    }

    fn converge_guard(&self, clock: usize, ctx: &Ctx<'_, DcState<P::Payload>>) -> bool {
        let r = Self::reg(clock, ctx.own());
        convergence_step(self.sys(clock), r, ctx.neighbors().map(|q| Self::reg(clock, q)))
    }

    fn normal_guard(&self, ctx: &Ctx<'_, DcState<P::Payload>>) -> bool {
        let own = ctx.own();
        normal_step(&self.sys1, own.r1, ctx.neighbors().map(|q| q.r1))
            && locally_correct(&self.sys2, own.r2, ctx.neighbors().map(|q| q.r2))
    }
}

impl<P: LayerPlugin> Protocol for SsDc<P> {
    type State = DcState<P::Payload>;

    fn name(&self) -> &str {
        "ss_dc"
    }

    fn actions(&self) -> &[ActionSpec] {
        &DC_ACTIONS
    }

    fn guard(&self, action: ActionId, ctx: &Ctx<'_, Self::State>) -> bool {
        match action {
            RA2 => self.reset_guard(2, ctx),
            RA1 => self.reset_guard(1, ctx),
            CA2 => self.converge_guard(2, ctx),
            CA1 => self.converge_guard(1, ctx),
            NA => self.normal_guard(ctx),
            _ => false,
        }
    }

    fn apply(&self, action: ActionId, ctx: &Ctx<'_, Self::State>) -> Outcome<Self::State> {
        let own = ctx.own();
        let mut next = own.clone();
        let mut decide = false;
        match action {
            RA2 => next.r2 = self.sys2.reset_value(),
            RA1 => next.r1 = self.sys1.reset_value(),
            CA2 => next.r2 = self.sys2.phi(own.r2),
            CA1 => next.r1 = self.sys1.phi(own.r1),
            _ => {
                if self.is_phase_end(own.r1) {
                    let view = SlaveView::of(own);
                    if normal_step(&self.sys2, own.r2, ctx.neighbors().map(|q| q.r2)) && self.plugin.cond(view) {
                        decide = true;
                        if self.plugin.cond1(view) {
                            next.r2 = self.sys2.phi(own.r2);
                        }
                    }
                    let view = SlaveView {
                        r2: next.r2,
                        payload: &own.payload,
                    };
                    next.payload = self.plugin.initialization(view, ctx.port());
                } else {
                    let r1 = own.r1;
                    let slots = ctx.neighbors().map(|q| {
                        let slot = if q.r1 == r1 { Slot::Same } else { Slot::Ahead };
                        (slot, SlaveView::of(q))
                    });
                    next.payload = self.plugin.computation(SlaveView::of(own), slots);
                }
                next.r1 = self.sys1.phi(own.r1);
            }
        }
        Outcome { state: next, decide }
    }

    fn initial_state(&self, node: NodeId) -> Self::State {
        DcState {
            r1: 0,
            r2: 0,
            payload: self.plugin.initial(node),
        }
    }

    fn arbitrary_state(&self, node: NodeId, rng: &mut dyn RngCore) -> Self::State {
        let r1 = rng.random_range(-(self.sys1.alpha() as Clock)..self.sys1.period() as Clock);
        let r2 = rng.random_range(-(self.sys2.alpha() as Clock)..self.sys2.period() as Clock);
        DcState {
            r1,
            r2,
            payload: self.plugin.arbitrary(node, rng),
        }
    }
}

/// Signed slave-clock delay from `a` to `b`, read from the residues alone.
/// `None` when neither direction fits within `2 rho`.
pub fn delay_2rho(a: Clock, b: Clock, k2: u32, rho: u32) -> Option<i64> {
    let k = k2 as Clock;
    let reach = 2 * rho as Clock;
    let fwd = (b - a).rem_euclid(k);
    let back = (a - b).rem_euclid(k);
    if fwd <= reach {
        Some(fwd)
    } else if back <= reach {
        Some(-back)
    } else {
        None
    }
}

/// Checks on random states that `cond` and `cond1` give the same answer
/// whatever the master clock holds. Returns a witness pair otherwise.
#[allow(clippy::type_complexity)]
pub fn lint_cond_independence<P: LayerPlugin>(
    dc: &SsDc<P>,
    samples: usize,
    seed: u64,
) -> Result<(), (DcState<P::Payload>, DcState<P::Payload>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eval = |s: &DcState<P::Payload>| {
        let v = SlaveView::of(s);
        (dc.plugin.cond(v), dc.plugin.cond1(v))
    };
    for i in 0..samples {
        let a = dc.arbitrary_state(i, &mut rng);
        let mut b = a.clone();
        b.r1 = rng.random_range(-(dc.sys1.alpha() as Clock)..dc.sys1.period() as Clock);
        if eval(&a) != eval(&b) {
            return Err((a, b));
        }
    }
    Ok(())
}
