use std::collections::VecDeque;

use super::densest::densest_in;
use super::{AllocationPlan, Method, PlanBuilder};
use crate::circuits::ProgramProfile;
use crate::community::{candidates_masked, HierarchyTree};
use crate::error::{Error, Result};
use crate::metrics::{SetScorer, DEFAULT_ALPHA};
use crate::secure::Padding;
use crate::topology::HardwareGraph;

/// Community-driven allocation over a prebuilt hierarchy tree.
pub fn allocate_comdap(queue: &[ProgramProfile], tree: &HierarchyTree, g: &HardwareGraph) -> Result<AllocationPlan> {
    allocate_comdap_padded(queue, tree, g, Padding::None)
}

/// As [`allocate_comdap`], padding each placed partition as it is made.
pub fn allocate_comdap_padded(
    queue: &[ProgramProfile],
    tree: &HierarchyTree,
    g: &HardwareGraph,
    padding: Padding<'_>,
) -> Result<AllocationPlan> {
    if tree.root().len() != g.qubit_count() {
        return Err(Error::InvalidArgument(format!(
            "tree covers {} qubits but device has {}",
            tree.root().len(),
            g.qubit_count()
        )));
    }
    let method = match padding {
        Padding::None => Method::Comdap,
        Padding::General => Method::ComdapSecureGeneral,
        Padding::Smart(_) => Method::ComdapSecureSmart,
    };
    let mut b = PlanBuilder::new(g, method, DEFAULT_ALPHA, padding)?;
    for (idx, p) in queue.iter().enumerate() {
        match choose(&mut b.scorer, tree, &b.occ.consumed_mask(), p.logical_qubits) {
            Some(qubits) => b.place(idx, p, &qubits),
            None => b.skip(p),
        }
    }
    Ok(b.finish())
}

fn members(tree: &HierarchyTree, node: usize) -> Vec<usize> {
    tree.node(node).qubits.iter().map(|q| q.index()).collect()
}

fn choose(scorer: &mut SetScorer<'_>, tree: &HierarchyTree, consumed: &[bool], k: usize) -> Option<Vec<usize>> {
    if k == 0 {
        return None;
    }
    let g = scorer.graph();
    let component = free_components(g, consumed);
    if !component.sizes.iter().any(|&s| s >= k) {
        return None;
    }
    let cands = candidates_masked(tree, k, consumed);
    if let Some(&first) = cands.first() {
        if tree.node(first).len() == k {
            return Some(members(tree, first));
        }
    }
    // The whole device counts only when nothing has been placed yet and no
    // proper community is large enough.
    if let Some(&node) = cands.iter().find(|&&c| c != 0) {
        if let Some(s) = densest_in(scorer, &members(tree, node), k) {
            return Some(s);
        }
    }
    merge(scorer, tree, consumed, &component, k)
}

/// Connected components of the free qubits.
struct Components {
    label: Vec<usize>,
    sizes: Vec<usize>,
}

fn free_components(g: &HardwareGraph, consumed: &[bool]) -> Components {
    let n = g.qubit_count();
    let mut label = vec![usize::MAX; n];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for s in 0..n {
        if consumed[s] || label[s] != usize::MAX {
            continue;
        }
        let c = sizes.len();
        let mut size = 1;
        label[s] = c;
        stack.push(s);
        while let Some(u) = stack.pop() {
            for &(v, _) in g.adjacency(u) {
                if !consumed[v] && label[v] == usize::MAX {
                    label[v] = c;
                    size += 1;
                    stack.push(v);
                }
            }
        }
        sizes.push(size);
    }
    Components { label, sizes }
}

/// Grows the largest free community by absorbing the nearest free
/// communities, then trims to `k`.
fn merge(
    scorer: &mut SetScorer<'_>,
    tree: &HierarchyTree,
    consumed: &[bool],
    component: &Components,
    k: usize,
) -> Option<Vec<usize>> {
    let free_nodes: Vec<usize> = (1..tree.len())
        .filter(|&i| tree.node(i).qubits.iter().all(|q| !consumed[q.index()]))
        .collect();
    let mut bases = free_nodes.clone();
    bases.sort_by(|&a, &b| {
        let (na, nb) = (tree.node(a), tree.node(b));
        nb.len()
            .cmp(&na.len())
            .then(nb.cri.total_cmp(&na.cri))
            .then(na.min_qubit().cmp(&nb.min_qubit()))
            .then(a.cmp(&b))
    });
    let g = scorer.graph();
    // A merge can absorb exactly the free component of its base, so only
    // bases in large enough components are worth growing.
    let roomy = |node: usize| component.sizes[component.label[tree.node(node).qubits[0].index()]] >= k;
    for base in bases.into_iter().filter(|&b| roomy(b)) {
        let mut inside = vec![false; g.qubit_count()];
        let mut merged = members(tree, base);
        for &q in &merged {
            inside[q] = true;
        }
        while merged.len() < k {
            let Some(added) = absorb_nearest(g, tree, consumed, &free_nodes, &inside) else {
                break;
            };
            for q in added {
                if !inside[q] {
                    inside[q] = true;
                    merged.push(q);
                }
            }
        }
        if merged.len() >= k {
            if let Some(s) = densest_in(scorer, &merged, k) {
                return Some(s);
            }
        }
    }
    None
}

/// Qubits of the closest free community outside `inside`, plus the free
/// qubits on the shortest path that reaches it.
fn absorb_nearest(
    g: &HardwareGraph,
    tree: &HierarchyTree,
    consumed: &[bool],
    free_nodes: &[usize],
    inside: &[bool],
) -> Option<Vec<usize>> {
    let n = g.qubit_count();
    let mut dist = vec![usize::MAX; n];
    let mut parent = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for q in 0..n {
        if inside[q] {
            dist[q] = 0;
            queue.push_back(q);
        }
    }
    while let Some(u) = queue.pop_front() {
        for &(v, _) in g.adjacency(u) {
            if !consumed[v] && dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                parent[v] = u;
                queue.push_back(v);
            }
        }
    }
    let mut pick: Option<(usize, usize, usize)> = None;
    for &node in free_nodes {
        let t = tree.node(node);
        if t.qubits.iter().any(|q| inside[q.index()]) {
            continue;
        }
        let Some((d, entry)) = t
            .qubits
            .iter()
            .map(|q| (dist[q.index()], q.index()))
            .filter(|&(d, _)| d != usize::MAX)
            .min()
        else {
            continue;
        };
        let better = match pick {
            None => true,
            Some((pd, _, pn)) => {
                let p = tree.node(pn);
                d.cmp(&pd)
                    .then(p.cri.total_cmp(&t.cri))
                    .then(t.len().cmp(&p.len()))
                    .then(t.min_qubit().cmp(&p.min_qubit()))
                    .is_lt()
            }
        };
        if better {
            pick = Some((d, entry, node));
        }
    }
    let (_, entry, node) = pick?;
    let mut out = members(tree, node);
    let mut q = parent[entry];
    while q != usize::MAX && !inside[q] {
        out.push(q);
        q = parent[q];
    }
    Some(out)
}
