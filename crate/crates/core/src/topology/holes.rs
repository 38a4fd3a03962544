use super::Topology;

/// Exhaustive hole search runs up to this many nodes; beyond it `T_G := n`.
pub const DEFAULT_HOLE_BUDGET: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HoleSize {
    pub size: u32,
    pub exact: bool,
}

/// Size of the greatest hole: the longest chordless cycle, or 2 for a tree.
///
/// Exact by exhaustive induced-cycle search when `n <= budget` (and `n <= 64`);
/// otherwise returns the bound `n` with `exact = false`.
pub fn greatest_hole(t: &Topology, budget: usize) -> HoleSize {
    let n = t.node_count();
    if t.is_acyclic() {
        return HoleSize { size: 2, exact: true };
    }
    if n > budget || n > 64 {
        return HoleSize {
            size: n as u32,
            exact: false,
        };
    }
    let adj: Vec<u64> = t
        .nodes()
        .map(|p| t.neighbors(p).iter().fold(0u64, |m, &q| m | (1 << q)))
        .collect();
    let mut best = 0usize;
    for s in 0..n {
        let above: u64 = if s + 1 >= 64 { 0 } else { !0u64 << (s + 1) };
        let mut first = adj[s] & above;
        while first != 0 {
            let v1 = first.trailing_zeros() as usize;
            first &= first - 1;
            let mut search = Search {
                adj: &adj,
                start: s,
                above,
                best: &mut best,
            };
            search.extend(v1, (1 << s) | (1 << v1), 0, 1);
        }
    }
    HoleSize {
        size: best.max(3) as u32,
        exact: true,
    }
}

struct Search<'a> {
    adj: &'a [u64],
    start: usize,
    above: u64,
    best: &'a mut usize,
}

impl Search<'_> {
    /// Path `start, v1, .., last` with `k` vertices after `start`; `inner`
    /// is the neighbourhood of the interior vertices (v1..v_{k-1}).
    fn extend(&mut self, last: usize, on_path: u64, inner: u64, k: usize) {
        let free = self.above & !on_path & !inner;
        // every remaining vertex plus `start` and the path
        if k + 1 + (free.count_ones() as usize) <= *self.best {
            return;
        }
        let mut cand = self.adj[last] & free;
        while cand != 0 {
            let w = cand.trailing_zeros() as usize;
            cand &= cand - 1;
            if self.adj[self.start] & (1 << w) != 0 {
                *self.best = (*self.best).max(k + 2);
            } else {
                self.extend(w, on_path | (1 << w), inner | self.adj[last], k + 1);
            }
        }
    }
}
