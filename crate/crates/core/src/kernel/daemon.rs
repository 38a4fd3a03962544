use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::topology::{NodeId, Topology};

/// Scheduling adversary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DaemonPolicy {
    /// Every enabled process acts.
    Synchronous,
    /// Exactly one enabled process, uniformly at random.
    Central,
    /// A random subset whose members are pairwise more than `rho` apart.
    RhoCentral(u32),
    /// Each enabled process independently with the given probability (at
    /// least one).
    DistributedRandom(f64),
    /// Unfair central daemon: keeps scheduling the most recently active
    /// processes and starves one victim unless it is the only one enabled.
    AdversarialUnfair,
}

impl DaemonPolicy {
    pub fn all_default() -> Vec<DaemonPolicy> {
        vec![
            DaemonPolicy::Synchronous,
            DaemonPolicy::Central,
            DaemonPolicy::RhoCentral(1),
            DaemonPolicy::DistributedRandom(0.5),
            DaemonPolicy::AdversarialUnfair,
        ]
    }
}

impl fmt::Display for DaemonPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DaemonPolicy::Synchronous => write!(f, "synchronous"),
            DaemonPolicy::Central => write!(f, "central"),
            DaemonPolicy::RhoCentral(r) => write!(f, "rho_central:{r}"),
            DaemonPolicy::DistributedRandom(p) => write!(f, "distributed:{p}"),
            DaemonPolicy::AdversarialUnfair => write!(f, "adversarial"),
        }
    }
}

impl FromStr for DaemonPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let policy = match kind {
            "synchronous" | "sync" => DaemonPolicy::Synchronous,
            "central" => DaemonPolicy::Central,
            "rho_central" => DaemonPolicy::RhoCentral(
                arg.unwrap_or("1")
                    .parse()
                    .map_err(|_| format!("bad rho in daemon `{s}`"))?,
            ),
            "distributed" | "distributed_random" => {
                let p: f64 = arg
                    .unwrap_or("0.5")
                    .parse()
                    .map_err(|_| format!("bad probability in daemon `{s}`"))?;
                if !(p > 0.0 && p <= 1.0) {
                    return Err(format!("selection probability {p} outside (0, 1]"));
                }
                DaemonPolicy::DistributedRandom(p)
            }
            "adversarial" | "adversarial_unfair" => DaemonPolicy::AdversarialUnfair,
            _ => return Err(format!("unknown daemon `{s}`")),
        };
        Ok(policy)
    }
}

/// A daemon instance: policy plus its deterministic RNG and memory.
#[derive(Clone, Debug)]
pub struct Daemon {
    policy: DaemonPolicy,
    rng: ChaCha8Rng,
    last_acted: Vec<u64>,
    tick: u64,
    victim: NodeId,
}

impl Daemon {
    pub fn new(policy: DaemonPolicy, seed: u64, n: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6a09_e667_f3bc_c908);
        let victim = rng.random_range(0..n.max(1));
        Self {
            policy,
            rng,
            last_acted: vec![0; n],
            tick: 0,
            victim,
        }
    }

    pub fn policy(&self) -> &DaemonPolicy {
        &self.policy
    }

    /// The process the unfair daemon starves.
    pub fn victim(&self) -> NodeId {
        self.victim
    }

    /// Chooses a non-empty subset of `enabled` (which must be non-empty).
    pub fn select(&mut self, enabled: &[NodeId], topo: &Topology) -> Vec<NodeId> {
        assert!(!enabled.is_empty(), "daemon invoked with nothing enabled");
        let mut chosen = match self.policy {
            DaemonPolicy::Synchronous => enabled.to_vec(),
            DaemonPolicy::Central => vec![*enabled.choose(&mut self.rng).expect("non-empty")],
            DaemonPolicy::RhoCentral(rho) => {
                let mut order = enabled.to_vec();
                order.shuffle(&mut self.rng);
                let mut picked: Vec<NodeId> = Vec::new();
                for p in order {
                    if picked.iter().all(|&q| topo.distance(p, q) > rho) {
                        picked.push(p);
                    }
                }
                picked
            }
            DaemonPolicy::DistributedRandom(prob) => {
                let mut picked: Vec<NodeId> = enabled
                    .iter()
                    .copied()
                    .filter(|_| self.rng.random_bool(prob))
                    .collect();
                if picked.is_empty() {
                    picked.push(*enabled.choose(&mut self.rng).expect("non-empty"));
                }
                picked
            }
            DaemonPolicy::AdversarialUnfair => {
                let candidates: Vec<NodeId> =
                    enabled.iter().copied().filter(|&p| p != self.victim).collect();
                if candidates.is_empty() {
                    vec![self.victim]
                } else {
                    let top = candidates
                        .iter()
                        .map(|&p| self.last_acted[p])
                        .max()
                        .expect("non-empty");
                    let best: Vec<NodeId> = candidates
                        .into_iter()
                        .filter(|&p| self.last_acted[p] == top)
                        .collect();
                    vec![*best.choose(&mut self.rng).expect("non-empty")]
                }
            }
        };
        chosen.sort_unstable();
        self.tick += 1;
        for &p in &chosen {
            self.last_acted[p] = self.tick;
        }
        chosen
    }
}
