use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{louvain, WeightedGraph, MIN_EDGE_WEIGHT};
use crate::error::{Error, Result};
use crate::metrics::{SetScorer, DEFAULT_ALPHA};
use crate::topology::{HardwareGraph, QubitId};

/// How CNOT error becomes a Louvain edge weight.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeWeighting {
    /// `w = 1 − cnot_error`: low-error links pull qubits together.
    #[default]
    Fidelity,
    /// `w = cnot_error`, kept for comparison runs.
    RawError,
}

impl EdgeWeighting {
    pub fn weight(self, cnot_error: f64) -> f64 {
        let w = match self {
            EdgeWeighting::Fidelity => 1.0 - cnot_error,
            EdgeWeighting::RawError => cnot_error,
        };
        w.max(MIN_EDGE_WEIGHT)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierarchyConfig {
    pub gamma: f64,
    pub seed: u64,
    /// Communities at or below this size are split straight into singletons.
    pub max_leaf_community: usize,
    pub alpha: f64,
    pub weighting: EdgeWeighting,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        HierarchyConfig {
            gamma: 1.0,
            seed: 0,
            max_leaf_community: 4,
            alpha: DEFAULT_ALPHA,
            weighting: EdgeWeighting::Fidelity,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeNode {
    /// Sorted ascending.
    pub qubits: Vec<QubitId>,
    pub children: Vec<usize>,
    pub parent: Option<usize>,
    pub cri: f64,
    /// Distance from the root.
    pub level: usize,
}

impl TreeNode {
    pub fn len(&self) -> usize {
        self.qubits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qubits.is_empty()
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn min_qubit(&self) -> QubitId {
        self.qubits[0]
    }
}

/// Community dendrogram over a device, stored as an arena with the root at
/// index 0. Immutable once built; allocation bookkeeping lives elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct HierarchyTree {
    calibration_id: String,
    nodes: Vec<TreeNode>,
}

/// Nested on-disk form: `{"qubits": [...], "cri": f, "children": [...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNodeJson {
    pub qubits: Vec<usize>,
    pub cri: f64,
    pub children: Vec<TreeNodeJson>,
}

impl HierarchyTree {
    pub fn calibration_id(&self) -> &str {
        &self.calibration_id
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> &TreeNode {
        &self.nodes[idx]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.level).max().unwrap_or(0)
    }

    /// Indices of nodes at exactly `level`.
    pub fn level(&self, level: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(move |&i| self.nodes[i].level == level)
    }

    pub fn to_json_tree(&self) -> TreeNodeJson {
        fn walk(t: &HierarchyTree, i: usize) -> TreeNodeJson {
            let n = &t.nodes[i];
            TreeNodeJson {
                qubits: n.qubits.iter().map(|q| q.index()).collect(),
                cri: n.cri,
                children: n.children.iter().map(|&c| walk(t, c)).collect(),
            }
        }
        walk(self, 0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_tree()).expect("tree serialization is infallible")
    }

    /// Rebuilds a tree from its nested form and checks it against `g`.
    pub fn from_json(text: &str, g: &HardwareGraph) -> Result<Self> {
        let root: TreeNodeJson =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("hierarchy tree: {e}")))?;
        let mut nodes = Vec::new();
        fn push(nodes: &mut Vec<TreeNode>, j: &TreeNodeJson, parent: Option<usize>, level: usize) -> usize {
            let idx = nodes.len();
            let mut qubits: Vec<QubitId> = j.qubits.iter().map(|&q| QubitId(q)).collect();
            qubits.sort_unstable();
            nodes.push(TreeNode {
                qubits,
                children: Vec::new(),
                parent,
                cri: j.cri,
                level,
            });
            for c in &j.children {
                let ci = push(nodes, c, Some(idx), level + 1);
                nodes[idx].children.push(ci);
            }
            idx
        }
        push(&mut nodes, &root, None, 0);
        let tree = HierarchyTree {
            calibration_id: g.calibration_id().to_string(),
            nodes,
        };
        tree.validate(g)?;
        Ok(tree)
    }

    /// Checks every structural invariant: the root spans the device, children
    /// partition their parent, leaves are single qubits, and every node
    /// induces a connected subgraph.
    pub fn validate(&self, g: &HardwareGraph) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(format!("hierarchy tree: {msg}")));
        if self.nodes.is_empty() {
            return bad("empty".into());
        }
        let all: Vec<QubitId> = g.qubits().collect();
        if self.root().qubits != all {
            return bad("root does not cover every qubit".into());
        }
        let mut scorer = SetScorer::new(g, DEFAULT_ALPHA)?;
        let mut leaves = 0;
        for (i, n) in self.nodes.iter().enumerate() {
            if n.qubits.is_empty() {
                return bad(format!("node {i} is empty"));
            }
            let members: Vec<usize> = n.qubits.iter().map(|q| q.index()).collect();
            if members.iter().any(|&q| q >= g.qubit_count()) {
                return bad(format!("node {i} names a qubit outside the device"));
            }
            if scorer.score(&members).is_none() {
                return bad(format!("node {i} is disconnected"));
            }
            if n.is_leaf() {
                if n.qubits.len() != 1 {
                    return bad(format!("leaf {i} holds {} qubits", n.qubits.len()));
                }
                leaves += 1;
                continue;
            }
            let mut union: Vec<QubitId> = n
                .children
                .iter()
                .flat_map(|&c| self.nodes[c].qubits.iter().copied())
                .collect();
            let total = union.len();
            union.sort_unstable();
            union.dedup();
            if union.len() != total || union != n.qubits {
                return bad(format!("children of node {i} do not partition it"));
            }
        }
        if leaves != g.qubit_count() {
            return bad(format!("{leaves} leaves for {} qubits", g.qubit_count()));
        }
        Ok(())
    }
}

struct Builder<'g> {
    g: &'g HardwareGraph,
    cfg: HierarchyConfig,
    scorer: SetScorer<'g>,
    nodes: Vec<TreeNode>,
}

impl Builder<'_> {
    fn add(&mut self, mut qubits: Vec<QubitId>, parent: Option<usize>) -> usize {
        qubits.sort_unstable();
        let members: Vec<usize> = qubits.iter().map(|q| q.index()).collect();
        let cri = self.scorer.score(&members).expect("tree communities are connected");
        let idx = self.nodes.len();
        let level = parent.map_or(0, |p| self.nodes[p].level + 1);
        self.nodes.push(TreeNode {
            qubits,
            children: Vec::new(),
            parent,
            cri,
            level,
        });
        if let Some(p) = parent {
            self.nodes[p].children.push(idx);
        }
        idx
    }

    fn singletons(&mut self, idx: usize) {
        let qubits = self.nodes[idx].qubits.clone();
        for q in qubits {
            self.add(vec![q], Some(idx));
        }
    }

    /// Splits node `idx` with Louvain on its induced subgraph, inserting the
    /// returned levels coarsest first and recursing into the finest ones.
    fn expand(&mut self, idx: usize) -> Result<()> {
        let members = self.nodes[idx].qubits.clone();
        if members.len() == 1 {
            return Ok(());
        }
        if members.len() <= self.cfg.max_leaf_community {
            self.singletons(idx);
            return Ok(());
        }
        let wg = WeightedGraph::induced(self.g, &members, self.cfg.weighting);
        let levels = louvain(&wg, self.cfg.gamma, self.cfg.seed)?;
        let top = levels.last().expect("louvain returns at least one level");
        if top.community_count() <= 1 {
            self.singletons(idx);
            return Ok(());
        }
        let local: Vec<usize> = (0..members.len()).collect();
        self.insert_levels(idx, &local, &levels, levels.len() - 1, &members)
    }

    fn insert_levels(
        &mut self,
        parent: usize,
        locals: &[usize],
        levels: &[super::CommunityPartition],
        level: usize,
        members: &[QubitId],
    ) -> Result<()> {
        let assignment = &levels[level].assignment;
        let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
        for &l in locals {
            match groups.iter_mut().find(|(c, _)| *c == assignment[l]) {
                Some((_, g)) => g.push(l),
                None => groups.push((assignment[l], vec![l])),
            }
        }
        if groups.len() == 1 {
            // This level does not split further; descend without a duplicate node.
            return if level == 0 {
                self.expand(parent)
            } else {
                self.insert_levels(parent, locals, levels, level - 1, members)
            };
        }
        for (_, group) in groups {
            let qubits: Vec<QubitId> = group.iter().map(|&l| members[l]).collect();
            let child = self.add(qubits, Some(parent));
            if level == 0 {
                self.expand(child)?;
            } else {
                self.insert_levels(child, &group, levels, level - 1, members)?;
            }
        }
        Ok(())
    }
}

/// Builds the community hierarchy: the root is the whole device, each
/// community above `max_leaf_community` qubits is split by Louvain on its
/// induced subgraph, and leaves are single qubits. Every node carries its CRI.
pub fn build_hierarchy(g: &HardwareGraph, cfg: &HierarchyConfig) -> Result<HierarchyTree> {
    let mut b = Builder {
        g,
        cfg: *cfg,
        scorer: SetScorer::new(g, cfg.alpha)?,
        nodes: Vec::new(),
    };
    let root = b.add(g.qubits().collect(), None);
    b.expand(root)?;
    let tree = HierarchyTree {
        calibration_id: g.calibration_id().to_string(),
        nodes: b.nodes,
    };
    debug_assert!(tree.validate(g).is_ok());
    Ok(tree)
}

/// Tree nodes entirely free of `consumed` with at least `size` qubits,
/// ordered exact-size first, then by descending CRI, ascending size and
/// smallest qubit.
pub fn find_candidates(tree: &HierarchyTree, size: usize, consumed: &BTreeSet<QubitId>) -> Vec<usize> {
    let mut mask = vec![false; tree.root().len()];
    for q in consumed {
        if let Some(slot) = mask.get_mut(q.index()) {
            *slot = true;
        }
    }
    candidates_masked(tree, size, &mask)
}

pub(crate) fn candidates_masked(tree: &HierarchyTree, size: usize, consumed: &[bool]) -> Vec<usize> {
    let mut out: Vec<usize> = (0..tree.nodes.len())
        .filter(|&i| {
            let n = &tree.nodes[i];
            n.len() >= size && n.qubits.iter().all(|q| !consumed[q.index()])
        })
        .collect();
    out.sort_by(|&a, &b| candidate_order(tree, size, a, b));
    out
}

pub(crate) fn candidate_order(tree: &HierarchyTree, size: usize, a: usize, b: usize) -> Ordering {
    let (na, nb) = (&tree.nodes[a], &tree.nodes[b]);
    (nb.len() == size)
        .cmp(&(na.len() == size))
        .then(nb.cri.total_cmp(&na.cri))
        .then(na.len().cmp(&nb.len()))
        .then(na.min_qubit().cmp(&nb.min_qubit()))
        .then(a.cmp(&b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{generate_topology, ErrorProfile, TopologyKind};

    fn heavy_hex(seed: u64) -> HardwareGraph {
        generate_topology(TopologyKind::HeavyHex27, seed, ErrorProfile::default()).unwrap()
    }

    #[test]
    fn two_qubit_device_tree() {
        let g = HardwareGraph::new("pair", 2, &[(0, 1)], &[0.01], &[0.02, 0.03]).unwrap();
        let t = build_hierarchy(&g, &HierarchyConfig::default()).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.root().children.len(), 2);
        assert_eq!(t.root().cri, 1.0);
        t.validate(&g).unwrap();
    }

    #[test]
    fn heavy_hex_tree_is_valid_and_deterministic() {
        let g = heavy_hex(1);
        let cfg = HierarchyConfig::default();
        let t = build_hierarchy(&g, &cfg).unwrap();
        t.validate(&g).unwrap();
        assert!(t.root().children.len() > 1);
        let sizes: usize = t.root().children.iter().map(|&c| t.node(c).len()).sum();
        assert_eq!(sizes, 27);
        assert_eq!(t.to_json(), build_hierarchy(&g, &cfg).unwrap().to_json());
    }

    #[test]
    fn json_round_trip() {
        let g = heavy_hex(2);
        let t = build_hierarchy(&g, &HierarchyConfig::default()).unwrap();
        let back = HierarchyTree::from_json(&t.to_json(), &g).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn candidate_ordering_rules() {
        let g = heavy_hex(3);
        let t = build_hierarchy(&g, &HierarchyConfig::default()).unwrap();
        let sizes: BTreeSet<usize> = t.nodes().iter().map(TreeNode::len).collect();
        let size = *sizes.iter().find(|&&s| s > 1 && s < 27).unwrap();
        let c = find_candidates(&t, size, &BTreeSet::new());
        let first_larger = c.iter().position(|&i| t.node(i).len() > size).unwrap();
        assert!(c[..first_larger].iter().all(|&i| t.node(i).len() == size));
        for w in c[..first_larger].windows(2) {
            assert!(t.node(w[0]).cri >= t.node(w[1]).cri);
        }

        let all: BTreeSet<QubitId> = g.qubits().collect();
        assert!(find_candidates(&t, 1, &all).is_empty());
    }
}
