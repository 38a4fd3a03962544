//! Undirected connected anonymous graphs, their distances and rho-balls.
//!
//! Node ids are dense `0..n` and exist for bookkeeping only. Protocol code
//! sees neighbours through the kernel's context, never through ids, unless
//! the protocol declares an identity requirement.

mod generate;
mod holes;

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use generate::Generator;
pub use holes::{greatest_hole, HoleSize, DEFAULT_HOLE_BUDGET};

pub type NodeId = usize;

#[derive(Debug, thiserror::Error)]
pub enum TopologyError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("graph has {0} node(s), at least 2 are required")]
    TooSmall(usize),
    #[error("graph is disconnected: node {0} is unreachable from node 0")]
    Disconnected(NodeId),
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
}

/// Validated topology with precomputed all-pairs hop distances.
#[derive(Clone, Debug)]
pub struct Topology {
    adj: Vec<Vec<NodeId>>,
    edges: Vec<(NodeId, NodeId)>,
    dist: Vec<u32>,
    diameter: u32,
}

impl Topology {
    /// Builds a topology from an edge list over nodes `0..n`. Duplicate
    /// edges (in either orientation) are merged.
    pub fn from_edges(n: usize, edges: &[(NodeId, NodeId)]) -> Result<Self, TopologyError> {
        let mut set = BTreeSet::new();
        for &(u, v) in edges {
            if u == v {
                return Err(TopologyError::SelfLoop(u));
            }
            if u >= n || v >= n {
                return Err(TopologyError::InvalidParams(format!(
                    "edge {u}-{v} out of range for {n} nodes"
                )));
            }
            set.insert((u.min(v), u.max(v)));
        }
        if n < 2 {
            return Err(TopologyError::TooSmall(n));
        }
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in &set {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        let mut dist = vec![u32::MAX; n * n];
        for s in 0..n {
            bfs_into(&adj, s, &mut dist[s * n..(s + 1) * n]);
        }
        if let Some(q) = (0..n).find(|&q| dist[q] == u32::MAX) {
            return Err(TopologyError::Disconnected(q));
        }
        let diameter = dist.iter().copied().max().unwrap_or(0);
        Ok(Self {
            adj,
            edges: set.into_iter().collect(),
            dist,
            diameter,
        })
    }

    /// The one-process graph. Edge lists and generators refuse it; it
    /// exists for degenerate resource-allocation runs.
    pub fn singleton() -> Self {
        Self {
            adj: vec![Vec::new()],
            edges: Vec::new(),
            dist: vec![0],
            diameter: 0,
        }
    }

    /// Parses the edge-list text format: one `u v` pair per line, `#`
    /// starts a comment, blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self, TopologyError> {
        let mut edges = Vec::new();
        let mut max_id = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_id = |tok: Option<&str>| -> Result<NodeId, TopologyError> {
                let tok = tok.ok_or_else(|| TopologyError::Parse {
                    line: idx + 1,
                    msg: "expected two node ids".into(),
                })?;
                tok.parse::<NodeId>().map_err(|_| TopologyError::Parse {
                    line: idx + 1,
                    msg: format!("`{tok}` is not a node id"),
                })
            };
            let mut toks = line.split_whitespace();
            let u = parse_id(toks.next())?;
            let v = parse_id(toks.next())?;
            if toks.next().is_some() {
                return Err(TopologyError::Parse {
                    line: idx + 1,
                    msg: "trailing tokens after edge".into(),
                });
            }
            max_id = Some(max_id.unwrap_or(0).max(u).max(v));
            edges.push((u, v));
        }
        let n = max_id.map_or(0, |m| m + 1);
        Self::from_edges(n, &edges)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TopologyError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TopologyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn nodes(&self) -> std::ops::Range<NodeId> {
        0..self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn neighbors(&self, p: NodeId) -> &[NodeId] {
        &self.adj[p]
    }

    pub fn degree(&self, p: NodeId) -> usize {
        self.adj[p].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn is_edge(&self, p: NodeId, q: NodeId) -> bool {
        self.adj[p].binary_search(&q).is_ok()
    }

    pub fn distance(&self, p: NodeId, q: NodeId) -> u32 {
        self.dist[p * self.adj.len() + q]
    }

    pub fn diameter(&self) -> u32 {
        self.diameter
    }

    pub fn is_acyclic(&self) -> bool {
        self.edges.len() + 1 == self.adj.len()
    }

    /// The rho-ball `{q : dist(p, q) <= rho}`, sorted.
    pub fn ball(&self, p: NodeId, rho: u32) -> Vec<NodeId> {
        self.nodes().filter(|&q| self.distance(p, q) <= rho).collect()
    }

    /// Hop distances from `p` by a fresh BFS (independent of the matrix).
    pub fn bfs(&self, p: NodeId) -> Vec<u32> {
        let mut out = vec![u32::MAX; self.adj.len()];
        bfs_into(&self.adj, p, &mut out);
        out
    }

    /// BFS spanning tree rooted at `root`: `parent[root] == root`, plus the
    /// visiting order.
    pub fn bfs_tree(&self, root: NodeId) -> (Vec<NodeId>, Vec<NodeId>) {
        let n = self.adj.len();
        let mut parent = vec![usize::MAX; n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([root]);
        parent[root] = root;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &v in &self.adj[u] {
                if parent[v] == usize::MAX {
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        (parent, order)
    }

    /// Same graph with node `p` renamed to `perm[p]`.
    pub fn relabel(&self, perm: &[NodeId]) -> Result<Self, TopologyError> {
        let edges: Vec<_> = self.edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        Self::from_edges(self.adj.len(), &edges)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = format!("# {} nodes, {} edges\n", self.node_count(), self.edge_count());
        for &(u, v) in &self.edges {
            out.push_str(&format!("{u} {v}\n"));
        }
        out
    }
}

fn bfs_into(adj: &[Vec<NodeId>], s: NodeId, out: &mut [u32]) {
    out[s] = 0;
    let mut queue = VecDeque::from([s]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if out[v] == u32::MAX {
                out[v] = out[u] + 1;
                queue.push_back(v);
            }
        }
    }
}

/// Graph parameters that size the clocks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphParams {
    /// Greatest hole T_G (or the bound `n` when not exact).
    pub t_g: u32,
    pub t_g_exact: bool,
    /// `min(n, 2D)`.
    pub c_g_bound: u32,
    /// `min(n, 2D + 1)`, always at least the cyclomatic characteristic.
    pub c_g_sound: u32,
}

impl GraphParams {
    pub fn of(t: &Topology) -> Self {
        Self::with_budget(t, DEFAULT_HOLE_BUDGET)
    }

    pub fn with_budget(t: &Topology, budget: usize) -> Self {
        let hole = greatest_hole(t, budget);
        Self {
            t_g: hole.size,
            t_g_exact: hole.exact,
            c_g_bound: cyclomatic_bound(t),
            c_g_sound: cyclomatic_sound_bound(t),
        }
    }
}

/// `min(n, 2D)`, the textbook bound on the cyclomatic characteristic.
///
/// It under-estimates odd rings (C5 has C_G = 5), so clock sizing goes
/// through [`cyclomatic_sound_bound`] instead.
pub fn cyclomatic_bound(t: &Topology) -> u32 {
    (t.node_count() as u32).min(2 * t.diameter())
}

/// `min(n, 2D + 1)`: every BFS fundamental cycle has length at most `2D + 1`
/// and no cycle is longer than `n`.
pub fn cyclomatic_sound_bound(t: &Topology) -> u32 {
    if t.is_acyclic() {
        return cyclomatic_bound(t);
    }
    (t.node_count() as u32).min(2 * t.diameter() + 1)
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} |E|={} D={}",
            self.node_count(),
            self.edge_count(),
            self.diameter()
        )
    }
}
