use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::WeightedGraph;
use crate::error::{Error, Result};
use crate::topology::QubitId;

/// Gains at or below this are treated as no improvement.
const GAIN_EPS: f64 = 1e-12;

/// Community labels for every node of a [`WeightedGraph`], by local index.
/// Labels are dense and numbered in order of each community's smallest node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CommunityPartition {
    pub assignment: Vec<usize>,
    pub level: usize,
}

impl CommunityPartition {
    pub fn singletons(n: usize) -> Self {
        CommunityPartition {
            assignment: (0..n).collect(),
            level: 0,
        }
    }

    /// Relabels so labels are `0..k` by first appearance.
    pub fn from_labels(labels: &[usize], level: usize) -> Self {
        let mut remap = BTreeMap::new();
        let assignment = labels
            .iter()
            .map(|l| {
                let next = remap.len();
                *remap.entry(*l).or_insert(next)
            })
            .collect();
        CommunityPartition { assignment, level }
    }

    pub fn community_count(&self) -> usize {
        self.assignment.iter().max().map_or(0, |m| m + 1)
    }

    /// Local node indices grouped by community label.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.community_count()];
        for (i, &c) in self.assignment.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    pub fn communities(&self, g: &WeightedGraph) -> Vec<Vec<QubitId>> {
        self.members()
            .into_iter()
            .map(|ms| ms.into_iter().map(|i| g.nodes()[i]).collect())
            .collect()
    }
}

/// Newman modularity with resolution `gamma`:
/// `Q = Σ_c [ L_c / m − γ (d_c / 2m)² ]`, where `L_c` is the edge weight inside
/// community `c` and `d_c` the total degree of its nodes.
pub fn modularity(g: &WeightedGraph, partition: &CommunityPartition, gamma: f64) -> Result<f64> {
    let m = g.total_weight();
    if m <= 0.0 {
        return Err(Error::EmptyGraph);
    }
    let k = partition.community_count();
    let mut internal = vec![0.0; k];
    let mut total = vec![0.0; k];
    for i in 0..g.node_count() {
        let c = partition.assignment[i];
        total[c] += g.degree(i);
        internal[c] += g.self_loop(i);
        for &(j, w) in g.neighbors(i) {
            if j > i && partition.assignment[j] == c {
                internal[c] += w;
            }
        }
    }
    Ok(internal
        .iter()
        .zip(&total)
        .map(|(l, d)| l / m - gamma * (d / (2.0 * m)).powi(2))
        .sum())
}

/// Modularity change from inserting `node`, taken out of its current
/// community first, into `community`:
///
/// `ΔQ = 2·Σ_in / 2m − γ·Σ_tot·k_i / 2m²`
///
/// with `Σ_in` the weight between `node` and the community, `Σ_tot` the
/// community's total degree excluding `node`, and `k_i` the node's degree.
pub fn modularity_gain(
    g: &WeightedGraph,
    node: usize,
    community: usize,
    state: &CommunityPartition,
    gamma: f64,
) -> Result<f64> {
    let m = g.total_weight();
    if m <= 0.0 {
        return Err(Error::EmptyGraph);
    }
    let mut sigma_tot = 0.0;
    for j in 0..g.node_count() {
        if j != node && state.assignment[j] == community {
            sigma_tot += g.degree(j);
        }
    }
    let sigma_in: f64 = g
        .neighbors(node)
        .iter()
        .filter(|&&(j, _)| state.assignment[j] == community)
        .map(|&(_, w)| w)
        .sum();
    Ok(gain(sigma_in, sigma_tot, g.degree(node), m, gamma))
}

#[inline]
fn gain(sigma_in: f64, sigma_tot: f64, k_i: f64, m: f64, gamma: f64) -> f64 {
    2.0 * sigma_in / (2.0 * m) - gamma * sigma_tot * k_i / (2.0 * m * m)
}

/// Multi-level Louvain. Returns one partition of the input nodes per level,
/// finest first. Each level's communities are split into their connected
/// components before aggregation. Nodes are visited in ascending order, or
/// in a seeded shuffle when `seed != 0`.
pub fn louvain(g: &WeightedGraph, gamma: f64, seed: u64) -> Result<Vec<CommunityPartition>> {
    if g.total_weight() <= 0.0 {
        return Err(Error::EmptyGraph);
    }
    let mut rng = (seed != 0).then(|| ChaCha8Rng::seed_from_u64(seed));
    let m = g.total_weight();
    // Original node -> current supernode.
    let mut membership: Vec<usize> = (0..g.node_count()).collect();
    let mut current = g.clone();
    let mut levels = Vec::new();

    loop {
        let (labels, moved) = local_moving(&current, m, gamma, rng.as_mut());
        let labels = split_disconnected(&current, &labels);
        let community_count = labels.iter().max().map_or(0, |x| x + 1);
        if !moved || community_count == current.node_count() {
            if levels.is_empty() {
                levels.push(CommunityPartition::from_labels(&membership, 0));
            }
            break;
        }
        for s in membership.iter_mut() {
            *s = labels[*s];
        }
        levels.push(CommunityPartition::from_labels(&membership, levels.len()));
        if community_count == 1 {
            break;
        }
        current = aggregate(&current, &labels, community_count);
    }
    Ok(levels)
}

/// One pass of repeated node moves until no move improves modularity.
/// Returns dense labels (in first-appearance order) and whether anything moved.
fn local_moving(g: &WeightedGraph, m: f64, gamma: f64, rng: Option<&mut ChaCha8Rng>) -> (Vec<usize>, bool) {
    let n = g.node_count();
    let mut comm: Vec<usize> = (0..n).collect();
    let mut tot: Vec<f64> = (0..n).map(|i| g.degree(i)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    if let Some(rng) = rng {
        order.shuffle(rng);
    }
    let mut weights_to = vec![0.0; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut moved_any = false;

    loop {
        let mut moved = false;
        for &i in &order {
            let k_i = g.degree(i);
            let own = comm[i];
            tot[own] -= k_i;

            for &(j, w) in g.neighbors(i) {
                let c = comm[j];
                if weights_to[c] == 0.0 {
                    touched.push(c);
                }
                weights_to[c] += w;
            }

            let mut best = own;
            let mut best_gain = gain(weights_to[own], tot[own], k_i, m, gamma);
            touched.sort_unstable();
            for &c in &touched {
                let dq = gain(weights_to[c], tot[c], k_i, m, gamma);
                if dq > best_gain + GAIN_EPS {
                    best = c;
                    best_gain = dq;
                }
            }
            for &c in &touched {
                weights_to[c] = 0.0;
            }
            touched.clear();

            tot[best] += k_i;
            if best != own {
                comm[i] = best;
                moved = true;
                moved_any = true;
            }
        }
        if !moved {
            break;
        }
    }
    (CommunityPartition::from_labels(&comm, 0).assignment, moved_any)
}

/// Relabels so every label is a connected component of its community.
fn split_disconnected(g: &WeightedGraph, labels: &[usize]) -> Vec<usize> {
    let n = g.node_count();
    let mut out = vec![usize::MAX; n];
    let mut next = 0;
    let mut stack = Vec::new();
    for s in 0..n {
        if out[s] != usize::MAX {
            continue;
        }
        out[s] = next;
        stack.push(s);
        while let Some(u) = stack.pop() {
            for &(v, _) in g.neighbors(u) {
                if out[v] == usize::MAX && labels[v] == labels[s] {
                    out[v] = next;
                    stack.push(v);
                }
            }
        }
        next += 1;
    }
    out
}

fn aggregate(g: &WeightedGraph, labels: &[usize], k: usize) -> WeightedGraph {
    let mut edges = Vec::new();
    for i in 0..g.node_count() {
        if g.self_loop(i) > 0.0 {
            edges.push((labels[i], labels[i], g.self_loop(i)));
        }
        for &(j, w) in g.neighbors(i) {
            if j > i {
                edges.push((labels[i], labels[j], w));
            }
        }
    }
    // Supernodes reuse the first member's id so `nodes()` stays meaningful.
    let mut nodes = vec![QubitId(usize::MAX); k];
    for i in (0..g.node_count()).rev() {
        nodes[labels[i]] = g.nodes()[i];
    }
    WeightedGraph::from_edges(nodes, &edges)
}
