//! Crosstalk models and the padding rules that keep crosstalk-prone link
//! pairs out of neighbouring partitions.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::allocators::{AllocationPlan, Occupancy, Slot};
use crate::error::{Error, Result};
use crate::topology::{HardwareGraph, Link, QubitId};

pub const DEFAULT_THRESHOLD_FACTOR: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrosstalkEntry {
    pub pair_i: [usize; 2],
    pub pair_j: [usize; 2],
    pub baseline_i: f64,
    pub correlated_i: f64,
}

impl CrosstalkEntry {
    pub fn link_i(&self) -> Link {
        Link::new(self.pair_i[0], self.pair_i[1])
    }

    pub fn link_j(&self) -> Link {
        Link::new(self.pair_j[0], self.pair_j[1])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrosstalkModel {
    #[serde(default = "default_factor")]
    pub threshold_factor: f64,
    pub entries: Vec<CrosstalkEntry>,
}

fn default_factor() -> f64 {
    DEFAULT_THRESHOLD_FACTOR
}

impl Default for CrosstalkModel {
    fn default() -> Self {
        CrosstalkModel {
            threshold_factor: DEFAULT_THRESHOLD_FACTOR,
            entries: Vec::new(),
        }
    }
}

pub fn is_significant(entry: &CrosstalkEntry, factor: f64) -> bool {
    entry.correlated_i > factor * entry.baseline_i
}

/// Two links are one hop apart when they share no qubit and some endpoint
/// of one is coupled to some endpoint of the other.
pub fn are_one_hop(g: &HardwareGraph, a: Link, b: Link) -> bool {
    let (a0, a1) = a.endpoints();
    let (b0, b1) = b.endpoints();
    if a0 == b0 || a0 == b1 || a1 == b0 || a1 == b1 {
        return false;
    }
    [a0, a1].iter().any(|&x| [b0, b1].iter().any(|&y| g.are_adjacent(x, y)))
}

impl CrosstalkModel {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("crosstalk model: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("crosstalk serialization is infallible")
    }

    pub fn load(path: impl AsRef<Path>, g: &HardwareGraph) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model = Self::from_json(&text)?;
        model.validate(g)?;
        Ok(model)
    }

    pub fn validate(&self, g: &HardwareGraph) -> Result<()> {
        if !(self.threshold_factor.is_finite() && self.threshold_factor >= 0.0) {
            return Err(Error::InvalidCrosstalk(format!(
                "threshold factor {}",
                self.threshold_factor
            )));
        }
        for (n, e) in self.entries.iter().enumerate() {
            for pair in [e.pair_i, e.pair_j] {
                let [a, b] = pair;
                if !g.are_adjacent(QubitId(a), QubitId(b)) {
                    return Err(Error::InvalidCrosstalk(format!(
                        "entry {n}: ({a},{b}) is not a device link"
                    )));
                }
            }
            if !are_one_hop(g, e.link_i(), e.link_j()) {
                return Err(Error::InvalidCrosstalk(format!(
                    "entry {n}: pairs are not one hop apart"
                )));
            }
            for r in [e.baseline_i, e.correlated_i] {
                if !(0.0..=1.0).contains(&r) {
                    return Err(Error::InvalidCrosstalk(format!("entry {n}: rate {r} outside [0, 1]")));
                }
            }
        }
        Ok(())
    }

    pub fn significant(&self) -> impl Iterator<Item = &CrosstalkEntry> + '_ {
        self.entries.iter().filter(|e| is_significant(e, self.threshold_factor))
    }
}

/// Every unordered pair of one-hop link pairs on the device, `(i, j)` with
/// link `i` before link `j`.
pub fn one_hop_link_pairs(g: &HardwareGraph) -> Vec<(Link, Link)> {
    let links = g.links();
    let mut out = Vec::new();
    for (i, &a) in links.iter().enumerate() {
        for &b in &links[i + 1..] {
            if are_one_hop(g, a, b) {
                out.push((a, b));
            }
        }
    }
    out
}

/// `count` random models, each marking `k` distinct one-hop link pairs as
/// crosstalk prone with a correlated error 4 to 8 times the baseline.
pub fn generate_crosstalk_configs(g: &HardwareGraph, k: usize, count: usize, seed: u64) -> Result<Vec<CrosstalkModel>> {
    let pairs = one_hop_link_pairs(g);
    if k > pairs.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the {} one-hop link pairs of the device",
            pairs.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut picked = sample(&mut rng, pairs.len(), k).into_vec();
        picked.sort_unstable();
        let entries = picked
            .into_iter()
            .map(|p| {
                let (a, b) = pairs[p];
                let baseline = g.cnot_error(a.endpoints().0, a.endpoints().1).expect("device link");
                let correlated = (baseline * rng.gen_range(4.0..8.0)).min(1.0);
                CrosstalkEntry {
                    pair_i: [a.endpoints().0.index(), a.endpoints().1.index()],
                    pair_j: [b.endpoints().0.index(), b.endpoints().1.index()],
                    baseline_i: baseline,
                    correlated_i: correlated,
                }
            })
            .collect();
        out.push(CrosstalkModel {
            threshold_factor: DEFAULT_THRESHOLD_FACTOR,
            entries,
        });
    }
    Ok(out)
}

/// Padding rule applied right after each partition is placed.
#[derive(Clone, Copy, Debug, Default)]
pub enum Padding<'a> {
    #[default]
    None,
    General,
    Smart(&'a CrosstalkModel),
}

impl Padding<'_> {
    pub(crate) fn pad_after(&self, g: &HardwareGraph, placed: &[usize], occ: &Occupancy) -> Vec<usize> {
        let mut out = BTreeSet::new();
        match self {
            Padding::None => {}
            Padding::General => {
                for &q in placed {
                    for &(nb, _) in g.adjacency(q) {
                        if occ.is_free(nb) {
                            out.insert(nb);
                        }
                    }
                }
            }
            Padding::Smart(model) => {
                let inside = |q: usize| placed.contains(&q);
                for e in model.significant() {
                    for (x, y) in [(e.pair_i, e.pair_j), (e.pair_j, e.pair_i)] {
                        if !(inside(x[0]) && inside(x[1])) || inside(y[0]) || inside(y[1]) {
                            continue;
                        }
                        for &q in &y {
                            let touches = x.iter().any(|&p| g.are_adjacent(QubitId(p), QubitId(q)));
                            if touches && occ.is_free(q) {
                                out.insert(q);
                            }
                        }
                    }
                }
            }
        }
        out.into_iter().collect()
    }
}

/// Replays general padding over the partitions of `plan` in placement order.
pub fn general_padding(plan: &AllocationPlan, g: &HardwareGraph) -> AllocationPlan {
    replay(plan, g, Padding::General)
}

/// Padding set after smart padding is applied to the most recently placed
/// partition of `plan`.
pub fn smart_padding(plan: &AllocationPlan, model: &CrosstalkModel, g: &HardwareGraph) -> BTreeSet<QubitId> {
    let mut padded = plan.padded_qubits.clone();
    if let Some(last) = plan.partitions.last() {
        let occ = Occupancy::from_plan(plan);
        let placed: Vec<usize> = last.qubits.iter().map(|q| q.index()).collect();
        padded.extend(
            Padding::Smart(model)
                .pad_after(g, &placed, &occ)
                .into_iter()
                .map(QubitId),
        );
    }
    padded
}

fn replay(plan: &AllocationPlan, g: &HardwareGraph, padding: Padding<'_>) -> AllocationPlan {
    let full = Occupancy::from_plan(&AllocationPlan {
        padded_qubits: BTreeSet::new(),
        ..plan.clone()
    });
    let mut occ = Occupancy::new(g.qubit_count());
    let mut padded = BTreeSet::new();
    for (i, p) in plan.partitions.iter().enumerate() {
        let placed: Vec<usize> = p.qubits.iter().map(|q| q.index()).collect();
        occ = occupy(occ, &placed, Slot::Allocated(i));
        let fresh: Vec<usize> = padding
            .pad_after(g, &placed, &occ)
            .into_iter()
            .filter(|&q| !matches!(full.slot(q), Slot::Allocated(_)))
            .collect();
        occ = occupy(occ, &fresh, Slot::Padded);
        padded.extend(fresh.into_iter().map(QubitId));
    }
    AllocationPlan {
        padded_qubits: padded,
        ..plan.clone()
    }
}

fn occupy(mut occ: Occupancy, qubits: &[usize], slot: Slot) -> Occupancy {
    for &q in qubits {
        occ.set(q, slot);
    }
    occ
}

/// No significant entry has its two pairs inside two different partitions.
pub fn check_security(plan: &AllocationPlan, model: &CrosstalkModel) -> Result<(), String> {
    let holder = |pair: [usize; 2]| {
        plan.partitions
            .iter()
            .position(|p| p.qubits.contains(&QubitId(pair[0])) && p.qubits.contains(&QubitId(pair[1])))
    };
    for e in model.significant() {
        if let (Some(a), Some(b)) = (holder(e.pair_i), holder(e.pair_j)) {
            if a != b {
                return Err(format!(
                    "({},{}) in partition {a} and ({},{}) in partition {b}",
                    e.pair_i[0], e.pair_i[1], e.pair_j[0], e.pair_j[1]
                ));
            }
        }
    }
    Ok(())
}
