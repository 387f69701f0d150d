//! Initial placement of a program inside its partition and a shortest-path
//! SWAP inserter that measures the CX and depth overhead.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::circuits::{interaction_graph, Gate, ProgramProfile};
use crate::error::{Error, Result};
use crate::topology::{HardwareGraph, QubitId};

/// CX gates per inserted SWAP.
pub const CX_PER_SWAP: usize = 3;

/// Logical-to-physical bijection; `physical[l]` hosts logical qubit `l`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mapping {
    pub physical: Vec<QubitId>,
}

impl Mapping {
    pub fn physical_of(&self, logical: usize) -> QubitId {
        self.physical[logical]
    }

    pub fn logical_of(&self, q: QubitId) -> Option<usize> {
        self.physical.iter().position(|&p| p == q)
    }
}

/// Gate executed on hardware after routing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhysicalOp {
    Single(QubitId),
    Two(QubitId, QubitId),
    Swap(QubitId, QubitId),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoutingReport {
    pub swaps_inserted: usize,
    pub cx_before: usize,
    pub cx_after: usize,
    pub depth_before: usize,
    pub depth_after: usize,
    pub delta_cx_ratio: f64,
    pub delta_depth_ratio: f64,
    #[serde(skip)]
    pub trace: Vec<PhysicalOp>,
}

/// Partition viewed as a local graph over slots `0..n`.
struct Local {
    qubits: Vec<QubitId>,
    adj: Vec<Vec<usize>>,
    dist: Vec<Vec<usize>>,
    cfm: Vec<f64>,
}

impl Local {
    fn new(partition: &[QubitId], g: &HardwareGraph) -> Result<Self> {
        let mut qubits = partition.to_vec();
        qubits.sort_unstable();
        qubits.dedup();
        if qubits.len() != partition.len() {
            return Err(Error::InvalidArgument("partition lists a qubit twice".into()));
        }
        for &q in &qubits {
            if !g.contains(q) {
                return Err(Error::UnknownQubit(q));
            }
        }
        let slot = |q: QubitId| qubits.binary_search(&q).ok();
        let n = qubits.len();
        let mut adj = vec![Vec::new(); n];
        let mut cfm = vec![0.0; n];
        for (i, &q) in qubits.iter().enumerate() {
            let mut err = 0.0;
            for nb in g.neighbors(q) {
                if let Some(j) = slot(nb) {
                    adj[i].push(j);
                    err += g.cnot_error(q, nb).expect("neighbours are linked");
                }
            }
            adj[i].sort_unstable();
            let deg = adj[i].len();
            let mean = if deg == 0 { 0.0 } else { err / deg as f64 };
            cfm[i] = deg as f64 + (1.0 - (mean + g.readout_errors()[q.index()]));
        }
        let dist = (0..n)
            .map(|s| {
                let mut d = vec![usize::MAX; n];
                d[s] = 0;
                let mut queue = VecDeque::from([s]);
                while let Some(u) = queue.pop_front() {
                    for &v in &adj[u] {
                        if d[v] == usize::MAX {
                            d[v] = d[u] + 1;
                            queue.push_back(v);
                        }
                    }
                }
                d
            })
            .collect();
        Ok(Local { qubits, adj, dist, cfm })
    }

    fn slot(&self, q: QubitId) -> usize {
        self.qubits.binary_search(&q).expect("qubit inside partition")
    }

    /// Replays `gates` from the placement `at` (logical -> slot) and returns
    /// the SWAP count, recording physical operations when asked.
    fn simulate(&self, gates: &[Gate], mut at: Vec<usize>, mut trace: Option<&mut Vec<PhysicalOp>>) -> usize {
        let n = self.qubits.len();
        let mut occupant = vec![usize::MAX; n];
        for (l, &s) in at.iter().enumerate() {
            occupant[s] = l;
        }
        let mut swaps = 0;
        for gate in gates {
            match *gate {
                Gate::Single(l) => {
                    if let Some(t) = trace.as_deref_mut() {
                        t.push(PhysicalOp::Single(self.qubits[at[l]]));
                    }
                }
                Gate::Two(a, b) => {
                    let dist = &self.dist[at[b]];
                    assert!(dist[at[a]] != usize::MAX, "partition is disconnected");
                    while dist[at[a]] > 1 {
                        let cur = at[a];
                        let next = *self.adj[cur]
                            .iter()
                            .find(|&&v| dist[v] + 1 == dist[cur])
                            .expect("shortest path continues");
                        let other = occupant[next];
                        occupant.swap(cur, next);
                        at[a] = next;
                        if other != usize::MAX {
                            at[other] = cur;
                        }
                        if let Some(t) = trace.as_deref_mut() {
                            t.push(PhysicalOp::Swap(self.qubits[cur], self.qubits[next]));
                        }
                        swaps += 1;
                    }
                    if let Some(t) = trace.as_deref_mut() {
                        t.push(PhysicalOp::Two(self.qubits[at[a]], self.qubits[at[b]]));
                    }
                }
            }
        }
        swaps
    }
}

/// Partitions up to this size get an exhaustive search over placements.
pub const EXHAUSTIVE_MAPPING_LIMIT: usize = 6;
const REFINE_PASSES: usize = 8;

/// Greedy placement refined against the router itself. Logical qubits are
/// placed in interaction order, each on the free slot closest (by weighted
/// hop distance) to its placed partners, with partition-local CFM breaking
/// ties. Small partitions then try every placement; larger ones apply
/// pairwise exchanges while they reduce the SWAP count.
pub fn initial_mapping(p: &ProgramProfile, partition: &[QubitId], g: &HardwareGraph) -> Result<Mapping> {
    if partition.len() != p.logical_qubits {
        return Err(Error::SizeMismatch {
            logical: p.logical_qubits,
            physical: partition.len(),
        });
    }
    let local = Local::new(partition, g)?;
    let mut host = greedy_placement(p, &local);
    let mut best = local.simulate(&p.gates, host.clone(), None);
    let n = p.logical_qubits;
    if best > 0 && n <= EXHAUSTIVE_MAPPING_LIMIT {
        let mut perm: Vec<usize> = (0..n).collect();
        for_each_permutation(&mut perm, 0, &mut |cand| {
            let s = local.simulate(&p.gates, cand.to_vec(), None);
            if s < best {
                best = s;
                host = cand.to_vec();
            }
        });
    } else {
        for _ in 0..REFINE_PASSES {
            if best == 0 {
                break;
            }
            let mut improved = false;
            for a in 0..n {
                for b in a + 1..n {
                    host.swap(a, b);
                    let s = local.simulate(&p.gates, host.clone(), None);
                    if s < best {
                        best = s;
                        improved = true;
                    } else {
                        host.swap(a, b);
                    }
                }
            }
            if !improved {
                break;
            }
        }
    }
    Ok(Mapping {
        physical: host.into_iter().map(|s| local.qubits[s]).collect(),
    })
}

fn greedy_placement(p: &ProgramProfile, local: &Local) -> Vec<usize> {
    let n = p.logical_qubits;
    let ig = interaction_graph(p);
    let wdeg: Vec<usize> = (0..n).map(|l| ig.weighted_degree(l)).collect();
    let mut host = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for _ in 0..n {
        // Next logical qubit: most interaction with those already placed,
        // then highest weighted degree, then lowest index.
        let pull = |l: usize| -> usize { (0..n).filter(|&o| host[o] != usize::MAX).map(|o| ig.weight(l, o)).sum() };
        let l = (0..n)
            .filter(|&l| host[l] == usize::MAX)
            .max_by(|&a, &b| pull(a).cmp(&pull(b)).then(wdeg[a].cmp(&wdeg[b])).then(b.cmp(&a)))
            .expect("an unplaced qubit remains");
        let cost = |s: usize| -> usize {
            (0..n)
                .filter(|&o| host[o] != usize::MAX)
                .map(|o| ig.weight(l, o) * local.dist[s][host[o]])
                .sum()
        };
        let s = (0..n)
            .filter(|&s| !used[s])
            .min_by(|&a, &b| {
                cost(a)
                    .cmp(&cost(b))
                    .then(local.cfm[b].total_cmp(&local.cfm[a]))
                    .then(a.cmp(&b))
            })
            .expect("a free slot remains");
        host[l] = s;
        used[s] = true;
    }
    host
}

fn for_each_permutation(v: &mut [usize], k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        for_each_permutation(v, k + 1, f);
        v.swap(k, i);
    }
}

/// Routes the program's gates in order, moving the first operand of each
/// distant pair toward the second along a shortest path inside the
/// partition.
pub fn route(p: &ProgramProfile, m: &Mapping, partition: &[QubitId], g: &HardwareGraph) -> Result<RoutingReport> {
    if partition.len() != p.logical_qubits || m.physical.len() != p.logical_qubits {
        return Err(Error::SizeMismatch {
            logical: p.logical_qubits,
            physical: partition.len(),
        });
    }
    let local = Local::new(partition, g)?;
    let mut at = Vec::with_capacity(p.logical_qubits);
    let mut taken = vec![false; partition.len()];
    for &q in &m.physical {
        if local.qubits.binary_search(&q).is_err() {
            return Err(Error::InvalidArgument(format!(
                "mapping uses {q} outside the partition"
            )));
        }
        let s = local.slot(q);
        if std::mem::replace(&mut taken[s], true) {
            return Err(Error::InvalidArgument(format!("mapping places two qubits on {q}")));
        }
        at.push(s);
    }
    let mut trace = Vec::with_capacity(p.gates.len());
    let swaps = local.simulate(&p.gates, at, Some(&mut trace));

    let depth_before = asap_depth(p.gates.iter().map(|g| match *g {
        Gate::Single(q) => (q, None, 1),
        Gate::Two(a, b) => (a, Some(b), 1),
    }));
    let depth_after = asap_depth(trace.iter().map(|op| match *op {
        PhysicalOp::Single(q) => (q.index(), None, 1),
        PhysicalOp::Two(a, b) => (a.index(), Some(b.index()), 1),
        PhysicalOp::Swap(a, b) => (a.index(), Some(b.index()), CX_PER_SWAP),
    }));
    let cx_before = p.cx_count;
    let cx_after = cx_before + CX_PER_SWAP * swaps;
    Ok(RoutingReport {
        swaps_inserted: swaps,
        cx_before,
        cx_after,
        depth_before,
        depth_after,
        delta_cx_ratio: ratio(cx_before, cx_after),
        delta_depth_ratio: ratio(depth_before, depth_after),
        trace,
    })
}

/// Mapping and routing in one step.
pub fn map_and_route(p: &ProgramProfile, partition: &[QubitId], g: &HardwareGraph) -> Result<RoutingReport> {
    let m = initial_mapping(p, partition, g)?;
    route(p, &m, partition, g)
}

fn ratio(before: usize, after: usize) -> f64 {
    if before == 0 {
        0.0
    } else {
        (after as f64 - before as f64) / before as f64
    }
}

/// Greedy as-soon-as-possible layering; each op is `(q, partner, layers)`.
fn asap_depth(ops: impl Iterator<Item = (usize, Option<usize>, usize)>) -> usize {
    let mut ready: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    let mut depth = 0;
    for (a, b, layers) in ops {
        let start = ready
            .get(&a)
            .copied()
            .unwrap_or(0)
            .max(b.and_then(|b| ready.get(&b).copied()).unwrap_or(0));
        let end = start + layers;
        ready.insert(a, end);
        if let Some(b) = b {
            ready.insert(b, end);
        }
        depth = depth.max(end);
    }
    depth
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{generate_topology, ErrorProfile, TopologyKind};

    fn ids(v: &[usize]) -> Vec<QubitId> {
        v.iter().map(|&q| QubitId(q)).collect()
    }

    #[test]
    fn adjacent_gates_need_no_swaps() {
        let g = generate_topology(TopologyKind::Line(3), 0, ErrorProfile::default()).unwrap();
        let p = ProgramProfile::from_interactions("p", 2, &[(0, 1), (1, 0)]);
        let r = map_and_route(&p, &ids(&[1, 2]), &g).unwrap();
        assert_eq!(r.swaps_inserted, 0);
        assert_eq!(r.cx_after, r.cx_before);
        assert_eq!(r.depth_after, r.depth_before);
    }

    #[test]
    fn distance_two_needs_one_swap() {
        let g = generate_topology(TopologyKind::Line(3), 0, ErrorProfile::default()).unwrap();
        let p = ProgramProfile::from_interactions("p", 3, &[(0, 2)]);
        let m = Mapping {
            physical: ids(&[0, 1, 2]),
        };
        let r = route(&p, &m, &ids(&[0, 1, 2]), &g).unwrap();
        assert_eq!(r.swaps_inserted, 1);
        assert_eq!(r.cx_after, r.cx_before + 3);
        assert_eq!(r.trace[0], PhysicalOp::Swap(QubitId(0), QubitId(1)));
        assert_eq!(r.depth_before, 1);
        assert_eq!(r.depth_after, 4);
        assert_eq!(r.delta_cx_ratio, 3.0);
    }

    #[test]
    fn star_hub_maps_to_centre() {
        // Star on the heavy-hex hub 8 with leaves 5, 9, 11.
        let g = generate_topology(TopologyKind::HeavyHex27, 1, ErrorProfile::default()).unwrap();
        let p = ProgramProfile::from_interactions("star", 4, &[(3, 0), (3, 1), (3, 2)]);
        let m = initial_mapping(&p, &ids(&[5, 8, 9, 11]), &g).unwrap();
        assert_eq!(m.physical_of(3), QubitId(8));
        let r = route(&p, &m, &ids(&[5, 8, 9, 11]), &g).unwrap();
        assert_eq!(r.swaps_inserted, 0);
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let g = generate_topology(TopologyKind::Line(3), 0, ErrorProfile::default()).unwrap();
        let p = ProgramProfile::from_interactions("p", 2, &[(0, 1)]);
        assert!(matches!(
            initial_mapping(&p, &ids(&[0, 1, 2]), &g),
            Err(Error::SizeMismatch {
                logical: 2,
                physical: 3
            })
        ));
    }

    #[test]
    fn depth_layers_single_qubit_ops() {
        let ops = [(0, None, 1), (1, None, 1), (0, Some(1), 1), (2, None, 1)];
        assert_eq!(asap_depth(ops.into_iter()), 2);
    }
}
