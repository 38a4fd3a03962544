use std::fmt::Debug;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{Clock, IncrementingSystem};
use crate::kernel::{ActionId, ActionSpec, Ctx, InputPort, Outcome, Protocol};
use crate::topology::{GraphParams, NodeId, Topology};

pub const RA: ActionId = 0;
pub const CA: ActionId = 1;
pub const NA: ActionId = 2;

/// Reset, convergence and normal actions, in firing priority order.
pub const WS_ACTIONS: [ActionSpec; 3] = [
    ActionSpec {
        label: "RA",
        internal: false,
    },
    ActionSpec {
        label: "CA",
        internal: false,
    },
    ActionSpec {
        label: "NA",
        internal: false,
    },
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WsState<T> {
    pub r: Clock,
    pub payload: T,
}

/// Where a neighbour's clock stands relative to an acting process.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Same,
    Ahead,
}

/// Critical sections run inside the normal action.
pub trait WaveHooks: Send + Sync {
    type Payload: Clone + PartialEq + Debug + Send + Sync;

    fn initial(&self, node: NodeId) -> Self::Payload;

    fn arbitrary(&self, node: NodeId, rng: &mut dyn RngCore) -> Self::Payload;

    /// CS1, run at every normal step.
    fn computation<'p>(
        &self,
        own: &'p Self::Payload,
        _neighbors: impl Iterator<Item = (Slot, &'p Self::Payload)>,
    ) -> Self::Payload {
        own.clone()
    }

    /// CS2, the decide section, run on the last step of each phase.
    fn initialization(&self, own: &Self::Payload, _port: InputPort) -> Self::Payload {
        own.clone()
    }
}

/// Bare clock with no payload.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoHooks;

impl WaveHooks for NoHooks {
    type Payload = ();

    fn initial(&self, _: NodeId) {}

    fn arbitrary(&self, _: NodeId, _: &mut dyn RngCore) {}
}

/// Clock sizing. The ring has `phase_len * k` values; a decide happens when
/// the clock is `phase_len - 1` modulo `phase_len`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WsParams {
    pub rho: u32,
    pub phase_len: u32,
    pub k: u32,
    pub alpha: u32,
}

impl WsParams {
    pub fn period(&self) -> u32 {
        self.phase_len * self.k
    }

    /// `alpha = T_G`, `k = C_G + 1` from the graph's bounds.
    pub fn auto(topo: &Topology, rho: u32, phase_len: u32) -> Self {
        let g = GraphParams::of(topo);
        Self {
            rho,
            phase_len,
            k: g.c_g_sound + 1,
            alpha: g.t_g,
        }
    }
}

/// Bounds a parameter set was checked against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sizing {
    pub t_g: u32,
    pub c_g: u32,
}

impl Sizing {
    pub fn of(topo: &Topology) -> Self {
        let g = GraphParams::of(topo);
        Self {
            t_g: g.t_g,
            c_g: g.c_g_sound,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SizingError {
    #[error("tail too short: alpha = {alpha} < T_G = {t_g}")]
    Alpha { alpha: u32, t_g: u32 },
    #[error("period too short: {name} = {period} <= C_G bound {c_g}")]
    Period { name: &'static str, period: u32, c_g: u32 },
    #[error("slave period too short: K2 = {k2} < 4*rho + 1 = {min}")]
    SlavePeriod { k2: u32, min: u32 },
    #[error("{0} must be positive")]
    Zero(&'static str),
}

pub struct SsWs<H> {
    sys: IncrementingSystem,
    params: WsParams,
    hooks: H,
}

pub fn build_ss_ws<H: WaveHooks>(topo: &Topology, params: WsParams, hooks: H) -> Result<SsWs<H>, SizingError> {
    let s = Sizing::of(topo);
    let p = build_ss_ws_unchecked(params, hooks)?;
    if params.alpha < s.t_g {
        return Err(SizingError::Alpha {
            alpha: params.alpha,
            t_g: s.t_g,
        });
    }
    if params.period() <= s.c_g {
        return Err(SizingError::Period {
            name: "phase_len*K",
            period: params.period(),
            c_g: s.c_g,
        });
    }
    Ok(p)
}

/// Skips the graph-dependent checks (for deliberately undersized controls).
pub fn build_ss_ws_unchecked<H: WaveHooks>(params: WsParams, hooks: H) -> Result<SsWs<H>, SizingError> {
    if params.phase_len == 0 {
        return Err(SizingError::Zero("phase length"));
    }
    if params.k == 0 {
        return Err(SizingError::Zero("K"));
    }
    let sys = IncrementingSystem::new(params.alpha, params.period()).expect("period checked");
    Ok(SsWs { sys, params, hooks })
}

impl<H: WaveHooks> SsWs<H> {
    pub fn system(&self) -> &IncrementingSystem {
        &self.sys
    }

    pub fn params(&self) -> &WsParams {
        &self.params
    }

    pub fn hooks(&self) -> &H {
        &self.hooks
    }

    pub fn clocks(config: &[WsState<H::Payload>]) -> Vec<Clock> {
        config.iter().map(|s| s.r).collect()
    }

    fn normal_step(&self, ctx: &Ctx<'_, WsState<H::Payload>>) -> bool {
        let r = ctx.own().r;
        let next = self.sys.phi(r);
        self.sys.in_ring(r) && ctx.neighbors().all(|q| q.r == r || q.r == next)
    }

    fn locally_correct(&self, ctx: &Ctx<'_, WsState<H::Payload>>) -> bool {
        let r = ctx.own().r;
        self.sys.in_ring(r)
            && ctx.neighbors().all(|q| {
                self.sys.in_ring(q.r) && (r == q.r || r == self.sys.phi(q.r) || self.sys.phi(r) == q.r)
            })
    }

    fn convergence_step(&self, ctx: &Ctx<'_, WsState<H::Payload>>) -> bool {
        let r = ctx.own().r;
        self.sys.in_tail_star(r) && ctx.neighbors().all(|q| self.sys.in_tail(q.r) && r <= q.r)
    }
}

impl<H: WaveHooks> Protocol for SsWs<H> {
    type State = WsState<H::Payload>;

    fn name(&self) -> &str {
        "ss_ws"
    }

    fn actions(&self) -> &[ActionSpec] {
        &WS_ACTIONS
    }

    fn guard(&self, action: ActionId, ctx: &Ctx<'_, Self::State>) -> bool {
        match action {
            RA => !self.locally_correct(ctx) && !self.sys.in_tail(ctx.own().r),
            CA => self.convergence_step(ctx),
            NA => self.normal_step(ctx),
            _ => false,
        }
    }

    fn apply(&self, action: ActionId, ctx: &Ctx<'_, Self::State>) -> Outcome<Self::State> {
        let own = ctx.own();
        match action {
            RA => Outcome {
                state: WsState {
                    r: self.sys.reset_value(),
                    payload: own.payload.clone(),
                },
                decide: false,
            },
            CA => Outcome {
                state: WsState {
                    r: self.sys.phi(own.r),
                    payload: own.payload.clone(),
                },
                decide: false,
            },
            _ => {
                let r = own.r;
                let slots = ctx.neighbors().map(|q| {
                    let slot = if q.r == r { Slot::Same } else { Slot::Ahead };
                    (slot, &q.payload)
                });
                let mut payload = self.hooks.computation(&own.payload, slots);
                let decide = r.rem_euclid(self.params.phase_len as Clock) == self.params.phase_len as Clock - 1;
                if decide {
                    payload = self.hooks.initialization(&payload, ctx.port());
                }
                Outcome {
                    state: WsState {
                        r: self.sys.phi(r),
                        payload,
                    },
                    decide,
                }
            }
        }
    }

    fn initial_state(&self, node: NodeId) -> Self::State {
        WsState {
            r: 0,
            payload: self.hooks.initial(node),
        }
    }

    fn arbitrary_state(&self, node: NodeId, rng: &mut dyn RngCore) -> Self::State {
        let r = rng.random_range(-(self.sys.alpha() as Clock)..self.sys.period() as Clock);
        WsState {
            r,
            payload: self.hooks.arbitrary(node, rng),
        }
    }
}
