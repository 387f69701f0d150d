//! Louvain community detection over the error-weighted coupling map and
//! the reusable community hierarchy built from it.

mod hierarchy;
mod louvain;

pub(crate) use hierarchy::candidates_masked;
pub use hierarchy::{
    build_hierarchy, find_candidates, EdgeWeighting, HierarchyConfig, HierarchyTree, TreeNode, TreeNodeJson,
};
pub use louvain::{louvain, modularity, modularity_gain, CommunityPartition};

use crate::topology::{HardwareGraph, QubitId};

/// Smallest weight given to a link, so a perfect-fidelity or zero-error
/// link still counts as an edge.
pub const MIN_EDGE_WEIGHT: f64 = 1e-9;

/// Undirected weighted graph for modularity optimisation. Self-loops appear
/// only in aggregated graphs built by Louvain.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    nodes: Vec<QubitId>,
    adj: Vec<Vec<(usize, f64)>>,
    self_loops: Vec<f64>,
    degree: Vec<f64>,
    total_weight: f64,
}

impl WeightedGraph {
    /// Builds from `(a, b, w)` triples over local indices `0..n`; parallel
    /// edges are summed and `a == b` becomes a self-loop.
    pub fn from_edges(nodes: Vec<QubitId>, edges: &[(usize, usize, f64)]) -> Self {
        let n = nodes.len();
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut self_loops = vec![0.0; n];
        for &(a, b, w) in edges {
            assert!(a < n && b < n, "edge ({a},{b}) outside 0..{n}");
            if a == b {
                self_loops[a] += w;
                continue;
            }
            for (x, y) in [(a, b), (b, a)] {
                match adj[x].iter_mut().find(|(v, _)| *v == y) {
                    Some(slot) => slot.1 += w,
                    None => adj[x].push((y, w)),
                }
            }
        }
        for list in &mut adj {
            list.sort_by_key(|&(v, _)| v);
        }
        let degree: Vec<f64> = (0..n)
            .map(|i| adj[i].iter().map(|&(_, w)| w).sum::<f64>() + 2.0 * self_loops[i])
            .collect();
        let total_weight = degree.iter().sum::<f64>() / 2.0;
        WeightedGraph {
            nodes,
            adj,
            self_loops,
            degree,
            total_weight,
        }
    }

    /// Device graph weighted per `weighting`.
    pub fn from_hardware(g: &HardwareGraph, weighting: EdgeWeighting) -> Self {
        let members: Vec<QubitId> = g.qubits().collect();
        Self::induced(g, &members, weighting)
    }

    /// Induced subgraph over `members`, in the order given.
    pub fn induced(g: &HardwareGraph, members: &[QubitId], weighting: EdgeWeighting) -> Self {
        let mut local = vec![usize::MAX; g.qubit_count()];
        for (i, q) in members.iter().enumerate() {
            local[q.index()] = i;
        }
        let edges: Vec<(usize, usize, f64)> = g
            .links()
            .iter()
            .zip(g.cnot_errors())
            .filter_map(|(l, &e)| {
                let (a, b) = l.endpoints();
                let (la, lb) = (local[a.index()], local[b.index()]);
                (la != usize::MAX && lb != usize::MAX).then(|| (la, lb, weighting.weight(e)))
            })
            .collect();
        Self::from_edges(members.to_vec(), &edges)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[QubitId] {
        &self.nodes
    }

    /// Neighbours of local node `i` with edge weights, excluding self-loops.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adj[i]
    }

    pub fn self_loop(&self, i: usize) -> f64 {
        self.self_loops[i]
    }

    /// Weighted degree `k_i` (a self-loop counts twice).
    pub fn degree(&self, i: usize) -> f64 {
        self.degree[i]
    }

    /// Total edge weight `m`.
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }
}
