use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{NodeId, Topology, TopologyError};

/// Topology generators. Deterministic for a fixed `(generator, seed)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    Ring { n: usize },
    Path { n: usize },
    /// Random recursive tree: node `i` hangs off a uniform earlier node.
    Tree { n: usize },
    Grid { rows: usize, cols: usize },
    /// Erdős–Rényi `G(n, p)`, augmented with bridging edges until connected.
    RandomConnected { n: usize, p: f64 },
    Complete { n: usize },
}

impl Generator {
    pub fn build(&self, seed: u64) -> Result<Topology, TopologyError> {
        let bad = |msg: String| Err(TopologyError::InvalidParams(msg));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, edges): (usize, Vec<(NodeId, NodeId)>) = match *self {
            Generator::Ring { n } => {
                if n < 3 {
                    return bad(format!("ring needs n >= 3, got {n}"));
                }
                (n, (0..n).map(|i| (i, (i + 1) % n)).collect())
            }
            Generator::Path { n } => {
                if n < 2 {
                    return bad(format!("path needs n >= 2, got {n}"));
                }
                (n, (1..n).map(|i| (i - 1, i)).collect())
            }
            Generator::Tree { n } => {
                if n < 2 {
                    return bad(format!("tree needs n >= 2, got {n}"));
                }
                (n, (1..n).map(|i| (rng.random_range(0..i), i)).collect())
            }
            Generator::Grid { rows, cols } => {
                if rows == 0 || cols == 0 || rows * cols < 2 {
                    return bad(format!("grid {rows}x{cols} has fewer than 2 nodes"));
                }
                let mut edges = Vec::new();
                for r in 0..rows {
                    for c in 0..cols {
                        let id = r * cols + c;
                        if c + 1 < cols {
                            edges.push((id, id + 1));
                        }
                        if r + 1 < rows {
                            edges.push((id, id + cols));
                        }
                    }
                }
                (rows * cols, edges)
            }
            Generator::RandomConnected { n, p } => {
                if n < 2 {
                    return bad(format!("random graph needs n >= 2, got {n}"));
                }
                if !(0.0..=1.0).contains(&p) {
                    return bad(format!("edge probability {p} outside [0, 1]"));
                }
                (n, random_connected(n, p, &mut rng))
            }
            Generator::Complete { n } => {
                if n < 2 {
                    return bad(format!("complete graph needs n >= 2, got {n}"));
                }
                let edges = (0..n)
                    .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
                    .collect();
                (n, edges)
            }
        };
        Topology::from_edges(n, &edges)
    }

    pub fn node_count(&self) -> usize {
        match *self {
            Generator::Ring { n }
            | Generator::Path { n }
            | Generator::Tree { n }
            | Generator::RandomConnected { n, .. }
            | Generator::Complete { n } => n,
            Generator::Grid { rows, cols } => rows * cols,
        }
    }
}

fn random_connected(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<(NodeId, NodeId)> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    // union-find over the drawn edges, then bridge every stray component
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(u, v) in &edges {
        let (a, b) = (find(&mut parent, u), find(&mut parent, v));
        if a != b {
            parent[a] = b;
        }
    }
    let mut joined: Vec<NodeId> = Vec::new();
    let mut order: Vec<NodeId> = (0..n).collect();
    order.shuffle(rng);
    for &u in &order {
        if joined.is_empty() {
            joined.push(u);
            continue;
        }
        let anchor = joined[0];
        if find(&mut parent, u) != find(&mut parent, anchor) {
            let target = joined[rng.random_range(0..joined.len())];
            edges.push((u, target));
            let (a, b) = (find(&mut parent, u), find(&mut parent, target));
            parent[a] = b;
        }
        joined.push(u);
    }
    edges
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Ring { n } => write!(f, "ring:{n}"),
            Generator::Path { n } => write!(f, "path:{n}"),
            Generator::Tree { n } => write!(f, "tree:{n}"),
            Generator::Grid { rows, cols } => write!(f, "grid:{rows}x{cols}"),
            Generator::RandomConnected { n, p } => write!(f, "random:{n}:{p}"),
            Generator::Complete { n } => write!(f, "complete:{n}"),
        }
    }
}

impl FromStr for Generator {
    type Err = TopologyError;

    /// `ring:8`, `path:5`, `tree:7`, `grid:3x4`, `random:20:0.2`, `complete:4`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || TopologyError::InvalidParams(format!("unrecognised generator `{s}`"));
        let mut parts = s.split(':');
        let kind = parts.next().ok_or_else(bad)?;
        let arg = parts.next().ok_or_else(bad)?;
        let num = |x: &str| x.parse::<usize>().map_err(|_| bad());
        let g = match kind {
            "ring" => Generator::Ring { n: num(arg)? },
            "path" => Generator::Path { n: num(arg)? },
            "tree" => Generator::Tree { n: num(arg)? },
            "complete" => Generator::Complete { n: num(arg)? },
            "grid" => {
                let (r, c) = arg.split_once('x').ok_or_else(bad)?;
                Generator::Grid {
                    rows: num(r)?,
                    cols: num(c)?,
                }
            }
            "random" | "random_connected" => {
                let p = parts
                    .next()
                    .map(|x| x.parse::<f64>().map_err(|_| bad()))
                    .transpose()?
                    .unwrap_or(0.2);
                Generator::RandomConnected { n: num(arg)?, p }
            }
            _ => return Err(bad()),
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_diameter() {
        let t = Generator::Ring { n: 5 }.build(0).unwrap();
        assert_eq!(t.diameter(), 2);
        assert_eq!(t.edge_count(), 5);
    }

    #[test]
    fn tree_is_acyclic_and_connected() {
        let t = Generator::Tree { n: 7 }.build(1).unwrap();
        assert_eq!(t.edge_count(), 6);
        assert!(t.is_acyclic());
    }

    #[test]
    fn random_connected_is_reproducible() {
        let g = Generator::RandomConnected { n: 20, p: 0.2 };
        let a = g.build(42).unwrap();
        let b = g.build(42).unwrap();
        assert_eq!(a.edges(), b.edges());
        assert_eq!(a.node_count(), 20);
        let sparse = Generator::RandomConnected { n: 30, p: 0.0 }.build(9).unwrap();
        assert_eq!(sparse.edge_count(), 29);
    }

    #[test]
    fn invalid_params() {
        assert!(Generator::Ring { n: 2 }.build(0).is_err());
        assert!(Generator::RandomConnected { n: 5, p: 1.5 }.build(0).is_err());
        assert!("ring".parse::<Generator>().is_err());
        assert!("blob:3".parse::<Generator>().is_err());
    }

    #[test]
    fn parse_round_trips_display() {
        for s in ["ring:8", "path:5", "tree:7", "grid:3x4", "random:20:0.2", "complete:4"] {
            let g: Generator = s.parse().unwrap();
            assert_eq!(g.to_string(), s);
        }
    }
}
