//! Bounded clocks: the incrementing system, unison predicates, delay
//! arithmetic, the self-stabilizing wave stream, and lifting of cyclic
//! clock values to unbounded integers.

mod lift;
mod ssws;

pub use lift::{lift, lift_from, LiftError, LiftedTrace, Reach};
pub use ssws::{
    build_ss_ws, build_ss_ws_unchecked, NoHooks, Sizing, SizingError, Slot, SsWs, WaveHooks,
    WsParams, WsState, WS_ACTIONS,
};

use serde::{Deserialize, Serialize};

use crate::topology::{NodeId, Topology};

pub type Clock = i64;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum UnisonError {
    #[error("clock value {value} outside ring [0, {period})")]
    OutOfRange { value: Clock, period: u32 },
    #[error("clock values {a} and {b} are not locally comparable")]
    Incomparable { a: Clock, b: Clock },
    #[error("path step {p} -> {q} is not an edge")]
    NotAdjacent { p: NodeId, q: NodeId },
    #[error("invalid incrementing system: {0}")]
    Invalid(String),
}

/// The finite clock domain `{-alpha, .., 0, .., period-1}`: a tail that
/// climbs to 0 and a ring of length `period`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncrementingSystem {
    alpha: u32,
    period: u32,
}

impl IncrementingSystem {
    pub fn new(alpha: u32, period: u32) -> Result<Self, UnisonError> {
        if period == 0 {
            return Err(UnisonError::Invalid("period must be positive".into()));
        }
        Ok(Self { alpha, period })
    }

    pub fn alpha(&self) -> u32 {
        self.alpha
    }

    pub fn period(&self) -> u32 {
        self.period
    }

    pub fn contains(&self, x: Clock) -> bool {
        x >= -(self.alpha as Clock) && x < self.period as Clock
    }

    pub fn in_ring(&self, x: Clock) -> bool {
        (0..self.period as Clock).contains(&x)
    }

    pub fn in_tail(&self, x: Clock) -> bool {
        (-(self.alpha as Clock)..=0).contains(&x)
    }

    /// Tail without 0.
    pub fn in_tail_star(&self, x: Clock) -> bool {
        x < 0 && x >= -(self.alpha as Clock)
    }

    pub fn reset_value(&self) -> Clock {
        -(self.alpha as Clock)
    }

    pub fn phi(&self, x: Clock) -> Clock {
        if x >= 0 {
            (x + 1) % self.period as Clock
        } else {
            x + 1
        }
    }

    pub fn values(&self) -> impl Iterator<Item = Clock> {
        -(self.alpha as Clock)..self.period as Clock
    }
}

fn check_ring(x: Clock, k: u32) -> Result<(), UnisonError> {
    if (0..k as Clock).contains(&x) {
        Ok(())
    } else {
        Err(UnisonError::OutOfRange { value: x, period: k })
    }
}

fn residue(x: Clock, k: u32) -> u32 {
    x.rem_euclid(k as Clock) as u32
}

/// Torus distance on `[0, k-1]`.
pub fn d_k(a: Clock, b: Clock, k: u32) -> Result<u32, UnisonError> {
    check_ring(a, k)?;
    check_ring(b, k)?;
    Ok(residue(a - b, k).min(residue(b - a, k)))
}

/// Local order between two ring values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocalOrder {
    Equal,
    /// `a` is one step behind `b`.
    Before,
    /// `b` is one step behind `a`.
    After,
    Incomparable,
}

pub fn local_leq(a: Clock, b: Clock, k: u32) -> Result<LocalOrder, UnisonError> {
    check_ring(a, k)?;
    check_ring(b, k)?;
    Ok(if a == b {
        LocalOrder::Equal
    } else if residue(b - a, k) == 1 {
        LocalOrder::Before
    } else if residue(a - b, k) == 1 {
        LocalOrder::After
    } else {
        LocalOrder::Incomparable
    })
}

/// Signed unit difference `b ⊖ a` of two locally comparable values.
pub fn ominus(b: Clock, a: Clock, k: u32) -> Result<i64, UnisonError> {
    match local_leq(a, b, k)? {
        LocalOrder::Equal => Ok(0),
        LocalOrder::Before => Ok(1),
        LocalOrder::After => Ok(-1),
        LocalOrder::Incomparable => Err(UnisonError::Incomparable { a, b }),
    }
}

/// Sum of local variations along `path`.
pub fn path_delay(clocks: &[Clock], topo: &Topology, path: &[NodeId], k: u32) -> Result<i64, UnisonError> {
    let mut sum = 0;
    for w in path.windows(2) {
        if !topo.is_edge(w[0], w[1]) {
            return Err(UnisonError::NotAdjacent { p: w[0], q: w[1] });
        }
        sum += ominus(clocks[w[1]], clocks[w[0]], k)?;
    }
    if let Some(&p) = path.first() {
        check_ring(clocks[p], k)?;
    }
    Ok(sum)
}

/// Every clock in the ring and every pair of neighbours locally comparable.
pub fn is_wu(clocks: &[Clock], topo: &Topology, sys: &IncrementingSystem) -> bool {
    let k = sys.period();
    clocks.iter().all(|&x| sys.in_ring(x))
        && topo
            .edges()
            .iter()
            .all(|&(p, q)| d_k(clocks[p], clocks[q], k).is_ok_and(|d| d <= 1))
}

/// Delays from `root` along a BFS tree, or `None` outside WU.
pub fn tree_delays(clocks: &[Clock], topo: &Topology, root: NodeId, k: u32) -> Option<Vec<i64>> {
    let (parent, order) = topo.bfs_tree(root);
    let mut delay = vec![0i64; clocks.len()];
    for &v in order.iter().skip(1) {
        let u = parent[v];
        delay[v] = delay[u] + ominus(clocks[v], clocks[u], k).ok()?;
    }
    Some(delay)
}

/// WU plus intrinsic delay: every fundamental cycle of a BFS tree has zero
/// delay, so the delay between two processes does not depend on the path.
pub fn is_wu0(clocks: &[Clock], topo: &Topology, sys: &IncrementingSystem) -> bool {
    if !is_wu(clocks, topo, sys) {
        return false;
    }
    let k = sys.period();
    let Some(delay) = tree_delays(clocks, topo, 0, k) else {
        return false;
    };
    topo.edges()
        .iter()
        .all(|&(p, q)| ominus(clocks[q], clocks[p], k).is_ok_and(|d| delay[q] - delay[p] == d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Generator;

    #[test]
    fn torus_distance() {
        assert_eq!(d_k(4, 4, 10), Ok(0));
        assert_eq!(d_k(3, 9, 10), Ok(4));
        assert_eq!(d_k(0, 4, 5), Ok(1));
        assert!(d_k(5, 0, 5).is_err());
        assert!(d_k(-1, 0, 5).is_err());
    }

    #[test]
    fn local_order() {
        assert_eq!(local_leq(2, 3, 5), Ok(LocalOrder::Before));
        assert_eq!(local_leq(0, 4, 5), Ok(LocalOrder::After));
        assert_eq!(local_leq(1, 3, 7), Ok(LocalOrder::Incomparable));
    }

    #[test]
    fn signed_difference() {
        assert_eq!(ominus(3, 3, 5), Ok(0));
        assert_eq!(ominus(0, 4, 5), Ok(1));
        assert_eq!(ominus(4, 0, 5), Ok(-1));
        assert!(ominus(3, 0, 7).is_err());
    }

    #[test]
    fn delays_along_paths() {
        let t = Generator::Path { n: 4 }.build(0).unwrap();
        assert_eq!(path_delay(&[5, 5, 5, 5], &t, &[0, 1, 2], 8), Ok(0));
        assert_eq!(path_delay(&[2, 3, 3, 4], &t, &[0, 1, 2, 3], 8), Ok(2));
        assert_eq!(path_delay(&[2, 3, 3, 4], &t, &[2], 8), Ok(0));
        assert!(path_delay(&[2, 3, 3, 4], &t, &[0, 2], 8).is_err());
    }

    #[test]
    fn unison_predicates() {
        let tri = Generator::Ring { n: 3 }.build(0).unwrap();
        let sys = IncrementingSystem::new(2, 3).unwrap();
        assert!(is_wu(&[1, 1, 1], &tri, &sys));
        assert!(is_wu0(&[1, 1, 1], &tri, &sys));
        // pairwise comparable, but the cycle winds once around the ring
        assert!(is_wu(&[0, 1, 2], &tri, &sys));
        let cycle: i64 = [(0, 1), (1, 2), (2, 0)]
            .iter()
            .map(|&(a, b)| ominus([0, 1, 2][b], [0, 1, 2][a], 3).unwrap())
            .sum();
        assert_eq!(cycle, 3);
        assert!(!is_wu0(&[0, 1, 2], &tri, &sys));
        assert!(!is_wu(&[-1, 0, 0], &tri, &sys));
    }

    #[test]
    fn phi_domain() {
        let sys = IncrementingSystem::new(3, 4).unwrap();
        let vals: Vec<Clock> = sys.values().collect();
        assert_eq!(vals, vec![-3, -2, -1, 0, 1, 2, 3]);
        for x in sys.values() {
            assert!(sys.contains(sys.phi(x)));
        }
        assert_eq!(sys.phi(3), 0);
        assert_eq!(sys.phi(-1), 0);
        assert!(sys.in_tail(0) && sys.in_ring(0) && !sys.in_tail_star(0));
    }
}
