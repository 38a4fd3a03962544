//! ρ-local resource allocation on the layer clock: the local election
//! order, cond plugins for exclusion, group exclusion and readers/writers,
//! and trace monitors for safety, liveness, fairness and cost.

mod monitor;

pub use monitor::{
    check_election, cs_records, metrics, monitor_liveness, monitor_safety, CsRecord, ElectionReport, Liveness,
    ElectionError, LraMetrics, SafetyViolation,
};

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::kernel::InputPort;
use crate::layerclock::{delay_2rho, LayerPlugin, SlaveView};
use crate::topology::{NodeId, Topology};
use crate::unison::{Clock, Slot};

/// Requested value; ordered, smaller wins ties on equal slave clocks.
pub type Sigma = u64;

/// The value of a process that does not ask to write.
pub const FREE: Sigma = u64::MAX;

/// An election entry `(slave clock, requested value)`.
pub type Entry = (Clock, Sigma);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Request {
    Nothing,
    Read,
    Write,
    Exclusive,
    Group(u32),
}

impl Request {
    /// Whether a granted request is a critical-section entry.
    pub fn uses_resource(self) -> bool {
        self != Request::Nothing
    }
}

/// Compatibility: may two processes within ρ hold these concurrently.
pub fn compatible(a: Request, b: Request) -> bool {
    match (a, b) {
        (Request::Read, Request::Read) => true,
        (Request::Group(g), Request::Group(h)) => g == h,
        (Request::Nothing, _) | (_, Request::Nothing) => true,
        _ => false,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("slave values {a} and {b} are not comparable within 2*rho")]
pub struct Incomparable {
    pub a: Clock,
    pub b: Clock,
}

/// `x ◁ y`: `x`'s slave clock is behind `y`'s, or level with it and its
/// value is not larger.
pub fn lra_order(x: Entry, y: Entry, k2: u32, rho: u32) -> Result<bool, Incomparable> {
    match delay_2rho(x.0, y.0, k2, rho) {
        Some(d) if d > 0 => Ok(true),
        Some(0) => Ok(x.1 <= y.1),
        Some(_) => Ok(false),
        None => Err(Incomparable { a: x.0, b: y.0 }),
    }
}

/// `x ⊕ y`, the ◁-smaller entry.
pub fn lra_join(x: Entry, y: Entry, k2: u32, rho: u32) -> Result<Entry, Incomparable> {
    Ok(if lra_order(x, y, k2, rho)? { x } else { y })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GmeRule {
    /// Enter when the elected value is in the own group.
    Literal,
    /// Additionally require the elected entry to carry the own slave value.
    Matched,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LraKind {
    Lme,
    Gme { groups: u32, rule: GmeRule },
    Rw { read: f64, write: f64 },
    /// Exclusion with `cond` forced true (negative control).
    BrokenLme,
}

impl fmt::Display for LraKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LraKind::Lme => f.write_str("lme"),
            LraKind::Gme { groups, rule } => {
                let r = match rule {
                    GmeRule::Literal => "literal",
                    GmeRule::Matched => "matched",
                };
                write!(f, "gme:{groups}:{r}")
            }
            LraKind::Rw { read, write } => write!(f, "rw:{read}:{write}"),
            LraKind::BrokenLme => f.write_str("broken_lme"),
        }
    }
}

impl FromStr for LraKind {
    type Err = String;

    /// `lme`, `gme[:groups[:literal|matched]]`, `rw[:read[:write]]`,
    /// `broken_lme`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split(':');
        let head = parts.next().unwrap_or_default();
        let rest: Vec<&str> = parts.collect();
        let num = |i: usize, default: f64| -> Result<f64, String> {
            rest.get(i)
                .map_or(Ok(default), |x| x.parse().map_err(|_| format!("bad number `{x}` in `{s}`")))
        };
        let kind = match head {
            "lme" => LraKind::Lme,
            "broken_lme" => LraKind::BrokenLme,
            "gme" => {
                let groups = num(0, 2.0)?;
                if groups < 1.0 || groups.fract() != 0.0 {
                    return Err(format!("group count must be a positive integer in `{s}`"));
                }
                let rule = match rest.get(1) {
                    None | Some(&"matched") => GmeRule::Matched,
                    Some(&"literal") => GmeRule::Literal,
                    Some(x) => return Err(format!("unknown gme rule `{x}`")),
                };
                LraKind::Gme {
                    groups: groups as u32,
                    rule,
                }
            }
            "rw" => {
                let (read, write) = (num(0, 0.5)?, num(1, 0.3)?);
                if !(0.0..=1.0).contains(&read) || !(0.0..=1.0).contains(&write) || read + write > 1.0 {
                    return Err(format!("request probabilities out of range in `{s}`"));
                }
                LraKind::Rw { read, write }
            }
            _ => return Err(format!("unknown plugin `{s}`")),
        };
        Ok(kind)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LraPayload {
    pub req: Request,
    pub v: Sigma,
    pub res1: Entry,
    pub res2: Entry,
    pub draws: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum LraError {
    #[error("processes {p} and {q} are {dist} <= {radius} apart but share colour {color}")]
    Coloring {
        p: NodeId,
        q: NodeId,
        dist: u32,
        radius: u32,
        color: u32,
    },
    #[error("colouring has {got} entries for {n} processes")]
    ColoringSize { got: usize, n: usize },
}

/// First-fit colouring where processes within `radius` get distinct colours.
pub fn greedy_distance_coloring(topo: &Topology, radius: u32) -> Vec<u32> {
    let n = topo.node_count();
    let mut colors: Vec<Option<u32>> = vec![None; n];
    for p in 0..n {
        let taken: Vec<u32> = topo.ball(p, radius).into_iter().filter_map(|q| colors[q]).collect();
        colors[p] = (0..).find(|c| !taken.contains(c));
    }
    colors.into_iter().map(|c| c.expect("assigned")).collect()
}

pub fn validate_coloring(topo: &Topology, colors: &[u32], radius: u32) -> Result<(), LraError> {
    let n = topo.node_count();
    if colors.len() != n {
        return Err(LraError::ColoringSize { got: colors.len(), n });
    }
    for p in 0..n {
        for q in p + 1..n {
            let dist = topo.distance(p, q);
            if dist <= radius && colors[p] == colors[q] {
                return Err(LraError::Coloring {
                    p,
                    q,
                    dist,
                    radius,
                    color: colors[p],
                });
            }
        }
    }
    Ok(())
}

/// A resource-allocation plugin for the layer clock.
#[derive(Clone, Debug)]
pub struct Lra {
    kind: LraKind,
    colors: Vec<u32>,
    k2: u32,
    rho: u32,
    seed: u64,
}

/// Builds a plugin. `colors` defaults to a greedy `2 rho` colouring and is
/// validated when given.
pub fn make_lra_plugin(
    topo: &Topology,
    rho: u32,
    k2: u32,
    kind: LraKind,
    seed: u64,
    colors: Option<Vec<u32>>,
) -> Result<Lra, LraError> {
    let colors = match colors {
        Some(c) => {
            validate_coloring(topo, &c, 2 * rho)?;
            c
        }
        None => greedy_distance_coloring(topo, 2 * rho),
    };
    Ok(Lra {
        kind,
        colors,
        k2,
        rho,
        seed,
    })
}

impl Lra {
    pub fn kind(&self) -> LraKind {
        self.kind
    }

    pub fn colors(&self) -> &[u32] {
        &self.colors
    }

    pub fn join(&self, x: Entry, y: Entry) -> Entry {
        // incomparable entries only occur before stabilization; keep x
        lra_join(x, y, self.k2, self.rho).unwrap_or(x)
    }

    /// The request of `node` at its `draw`-th initialization.
    pub fn request(&self, node: NodeId, draw: u64) -> (Request, Sigma) {
        let id = self.colors[node] as Sigma;
        match self.kind {
            LraKind::Lme | LraKind::BrokenLme => (Request::Exclusive, id),
            LraKind::Gme { groups, .. } => {
                let g = self.stream(node, draw).random_range(0..groups);
                (Request::Group(g), g as Sigma)
            }
            LraKind::Rw { read, write } => {
                let u: f64 = self.stream(node, draw).random();
                if u < read {
                    (Request::Read, FREE)
                } else if u < read + write {
                    (Request::Write, id)
                } else {
                    (Request::Nothing, FREE)
                }
            }
        }
    }

    fn stream(&self, node: NodeId, draw: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(node as u64);
        rng.set_word_pos(draw as u128 * 16);
        rng
    }

    fn fresh(&self, node: NodeId, r2: Clock, draw: u64) -> LraPayload {
        let (req, v) = self.request(node, draw);
        LraPayload {
            req,
            v,
            res1: (r2, v),
            res2: (r2, v),
            draws: draw + 1,
        }
    }
}

impl LayerPlugin for Lra {
    type Payload = LraPayload;

    fn initial(&self, node: NodeId) -> LraPayload {
        self.fresh(node, 0, 0)
    }

    fn arbitrary(&self, node: NodeId, rng: &mut dyn RngCore) -> LraPayload {
        let draw = rng.random_range(0..4);
        let (req, v) = self.request(node, draw);
        let mut entry = || (rng.random_range(0..self.k2 as Clock), rng.random_range(0..self.colors.len() as Sigma));
        LraPayload {
            req,
            v,
            res1: entry(),
            res2: entry(),
            draws: draw + 1,
        }
    }

    fn cond(&self, own: SlaveView<'_, LraPayload>) -> bool {
        let p = own.payload;
        let elected = (own.r2, p.v) == p.res2;
        match self.kind {
            LraKind::Lme => elected,
            LraKind::BrokenLme => true,
            LraKind::Gme { rule, .. } => {
                p.v == p.res2.1 && (rule == GmeRule::Literal || own.r2 == p.res2.0)
            }
            LraKind::Rw { .. } => {
                let (r, v) = p.res2;
                r == own.r2 && (v == FREE || p.req == Request::Nothing || elected)
            }
        }
    }

    fn cond1(&self, own: SlaveView<'_, LraPayload>) -> bool {
        match self.kind {
            LraKind::Lme | LraKind::BrokenLme => true,
            LraKind::Gme { .. } | LraKind::Rw { .. } => own.r2 == own.payload.res2.0,
        }
    }

    fn initialization(&self, own: SlaveView<'_, LraPayload>, port: InputPort) -> LraPayload {
        self.fresh(port.index(), own.r2, own.payload.draws)
    }

    fn computation<'p>(
        &self,
        own: SlaveView<'p, LraPayload>,
        neighbors: impl Iterator<Item = (Slot, SlaveView<'p, LraPayload>)>,
    ) -> LraPayload {
        let p = own.payload;
        let mut res2 = (own.r2, p.v);
        for (slot, q) in neighbors {
            let e = match slot {
                Slot::Same => q.payload.res2,
                Slot::Ahead => q.payload.res1,
            };
            res2 = self.join(res2, e);
        }
        LraPayload {
            res1: p.res2,
            res2,
            ..p.clone()
        }
    }
}
