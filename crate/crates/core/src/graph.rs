//! Undirected communication graph plus the topology statistics reported by
//! the analysis pipeline.
//!
//! The graph is a simple undirected projection of directed communication
//! events. Direction survives only as per-pair event counts, which the
//! feature extraction stage consumes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense node index, contiguous `0..n` within one [`CommGraph`].
pub type NodeId = usize;

/// Binary social status of an individual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Manager,
    Subordinate,
}

impl Status {
    /// Canonical state index used by the factor graph: Manager = 0, Subordinate = 1.
    pub fn index(self) -> usize {
        match self {
            Status::Manager => 0,
            Status::Subordinate => 1,
        }
    }

    pub fn from_index(i: usize) -> Status {
        if i == 0 {
            Status::Manager
        } else {
            Status::Subordinate
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Status::Manager => "M",
            Status::Subordinate => "S",
        }
    }
}

/// Per-node status assignment, partially observable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatusLabels {
    labels: Vec<Option<Status>>,
}

impl StatusLabels {
    pub fn new(labels: Vec<Option<Status>>) -> Self {
        StatusLabels { labels }
    }

    pub fn unlabeled(n: usize) -> Self {
        StatusLabels {
            labels: vec![None; n],
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, v: NodeId) -> Option<Status> {
        self.labels[v]
    }

    pub fn set(&mut self, v: NodeId, status: Option<Status>) {
        self.labels[v] = status;
    }

    pub fn as_slice(&self) -> &[Option<Status>] {
        &self.labels
    }

    /// Node ids carrying a label, ascending.
    pub fn labeled_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(v, s)| s.map(|_| v))
    }

    pub fn manager_count(&self) -> usize {
        self.labels
            .iter()
            .filter(|s| **s == Some(Status::Manager))
            .count()
    }

    pub fn subordinate_count(&self) -> usize {
        self.labels
            .iter()
            .filter(|s| **s == Some(Status::Subordinate))
            .count()
    }

    pub fn labeled_count(&self) -> usize {
        self.labels.iter().filter(|s| s.is_some()).count()
    }

    pub fn fully_observed(&self) -> bool {
        self.labels.iter().all(|s| s.is_some())
    }
}

/// Simple undirected graph with per-orientation event counts.
///
/// Invariants maintained by construction:
/// - no self-loops, no duplicate edges;
/// - adjacency lists sorted and symmetric;
/// - every `(src, dst)` key in the directed event map has the undirected
///   edge `{src, dst}` present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommGraph {
    n: usize,
    adjacency: Vec<Vec<NodeId>>,
    directed_events: BTreeMap<(NodeId, NodeId), u64>,
}

impl CommGraph {
    /// Builds a graph from an undirected edge list. Duplicate edges collapse;
    /// self-loops and out-of-range endpoints are rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (NodeId, NodeId)>) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for (u, v) in edges {
            if u == v {
                return Err(Error::Config(format!("self-loop on node {u}")));
            }
            if u >= n || v >= n {
                return Err(Error::Config(format!(
                    "edge ({u},{v}) out of range for n={n}"
                )));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(CommGraph {
            n,
            adjacency,
            directed_events: BTreeMap::new(),
        })
    }

    /// Attaches directed event counts. Every keyed pair must be an existing edge.
    pub fn with_directed_events(
        mut self,
        events: BTreeMap<(NodeId, NodeId), u64>,
    ) -> Result<Self> {
        for &(src, dst) in events.keys() {
            if !self.has_edge(src, dst) {
                return Err(Error::Config(format!(
                    "directed event pair ({src},{dst}) has no undirected edge"
                )));
            }
        }
        self.directed_events = events;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(|a| a.len()).sum::<usize>() / 2
    }

    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        u < self.n && v < self.n && self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Undirected edges as canonical `(u, v)` pairs with `u < v`, ascending.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, nbrs)| nbrs.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    pub fn directed_events(&self) -> &BTreeMap<(NodeId, NodeId), u64> {
        &self.directed_events
    }

    pub fn event_count(&self, src: NodeId, dst: NodeId) -> u64 {
        self.directed_events.get(&(src, dst)).copied().unwrap_or(0)
    }

    /// Fraction of closed wedges around `v`: edges among `N(v)` divided by
    /// `deg(v)·(deg(v)−1)/2`. Degenerate degree (< 2) yields 0.
    pub fn local_clustering(&self, v: NodeId) -> f64 {
        let nbrs = &self.adjacency[v];
        let d = nbrs.len();
        if d < 2 {
            return 0.0;
        }
        let mut closed = 0u64;
        for i in 0..d {
            for j in (i + 1)..d {
                if self.has_edge(nbrs[i], nbrs[j]) {
                    closed += 1;
                }
            }
        }
        closed as f64 / (d * (d - 1) / 2) as f64
    }

    /// Arithmetic mean of `local_clustering` over all nodes.
    pub fn avg_clustering(&self) -> Result<f64> {
        if self.n == 0 {
            return Err(Error::EmptyGraph);
        }
        let total: f64 = (0..self.n).map(|v| self.local_clustering(v)).sum();
        Ok(total / self.n as f64)
    }

    /// Pearson correlation of endpoint degrees over the oriented edge list
    /// (each undirected edge contributes both orientations).
    ///
    /// `None` when the graph has no edges or zero degree variance (e.g. a
    /// regular graph); the 0/0 case is never coerced to 0.
    pub fn degree_assortativity(&self) -> Option<f64> {
        // Integer moments make the zero-variance test exact.
        let mut m = 0u128; // number of orientations
        let mut sx = 0u128; // sum of source-endpoint degrees
        let mut sxx = 0u128; // sum of squared source-endpoint degrees
        let mut sxy = 0u128; // sum of products across each orientation
        for (u, v) in self.edges() {
            let du = self.degree(u) as u128;
            let dv = self.degree(v) as u128;
            m += 2;
            sx += du + dv;
            sxx += du * du + dv * dv;
            sxy += 2 * du * dv;
        }
        if m == 0 {
            return None;
        }
        // By symmetry the x and y marginals coincide.
        let num = (m * sxy) as i128 - (sx * sx) as i128;
        let den = (m * sxx) as i128 - (sx * sx) as i128;
        if den == 0 {
            return None;
        }
        Some(num as f64 / den as f64)
    }

    /// Number of connected components (0 for the empty graph).
    pub fn connected_components(&self) -> usize {
        let mut seen = vec![false; self.n];
        let mut components = 0;
        let mut stack = Vec::new();
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for &w in &self.adjacency[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        components
    }

    /// Subgraph induced by the nodes where `keep` is true, with reindexed ids.
    /// Directed event counts are filtered consistently.
    pub fn induced_subgraph(&self, keep: &[bool]) -> (CommGraph, SubgraphMap) {
        assert_eq!(keep.len(), self.n, "keep mask length must equal node count");
        let mut old_to_new = vec![None; self.n];
        let mut new_to_old = Vec::new();
        for (old, &k) in keep.iter().enumerate() {
            if k {
                old_to_new[old] = Some(new_to_old.len());
                new_to_old.push(old);
            }
        }
        let mut adjacency: Vec<Vec<NodeId>> = vec![Vec::new(); new_to_old.len()];
        for (new, &old) in new_to_old.iter().enumerate() {
            adjacency[new] = self.adjacency[old]
                .iter()
                .filter_map(|&w| old_to_new[w])
                .collect();
            // source list was sorted by old id; the map is monotone, so this stays sorted
        }
        let directed_events = self
            .directed_events
            .iter()
            .filter_map(|(&(s, d), &c)| match (old_to_new[s], old_to_new[d]) {
                (Some(ns), Some(nd)) => Some(((ns, nd), c)),
                _ => None,
            })
            .collect();
        let g = CommGraph {
            n: new_to_old.len(),
            adjacency,
            directed_events,
        };
        (
            g,
            SubgraphMap {
                old_to_new,
                new_to_old,
            },
        )
    }
}

/// Index mapping retained by [`CommGraph::induced_subgraph`].
#[derive(Debug, Clone)]
pub struct SubgraphMap {
    pub old_to_new: Vec<Option<NodeId>>,
    pub new_to_old: Vec<NodeId>,
}

impl SubgraphMap {
    /// Projects a label vector onto the subgraph's node set.
    pub fn project_labels(&self, labels: &StatusLabels) -> StatusLabels {
        StatusLabels::new(self.new_to_old.iter().map(|&old| labels.get(old)).collect())
    }
}

/// Whole-network topology summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopologyStats {
    pub nodes: usize,
    pub edges: usize,
    pub avg_clustering: f64,
    pub assortativity: Option<f64>,
    pub components: usize,
}

impl TopologyStats {
    pub fn compute(g: &CommGraph) -> Result<TopologyStats> {
        Ok(TopologyStats {
            nodes: g.n(),
            edges: g.edge_count(),
            avg_clustering: g.avg_clustering()?,
            assortativity: g.degree_assortativity(),
            components: g.connected_components(),
        })
    }
}
