//! Partitioning heuristics that place a queue of programs onto disjoint,
//! connected regions of a device.

mod attractor;
mod comdap;
mod cri_greedy;
mod densest;
mod enumerate;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use attractor::allocate_attractor;
pub use comdap::{allocate_comdap, allocate_comdap_padded};
pub use cri_greedy::{allocate_cri_greedy, CriGreedyConfig, DEFAULT_ENUM_CAP};
pub use densest::{densest_subset, EXHAUSTIVE_LIMIT};
pub use enumerate::for_each_connected_subset;

use crate::circuits::ProgramProfile;
use crate::error::{Error, Result};
use crate::metrics::SetScorer;
use crate::secure::Padding;
use crate::topology::{HardwareGraph, QubitId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Attractor,
    CriGreedy,
    Comdap,
    ComdapSecureGeneral,
    ComdapSecureSmart,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Attractor,
        Method::CriGreedy,
        Method::Comdap,
        Method::ComdapSecureGeneral,
        Method::ComdapSecureSmart,
    ];

    /// Name used on the command line.
    pub fn cli_name(self) -> &'static str {
        match self {
            Method::Attractor => "attractor",
            Method::CriGreedy => "cri",
            Method::Comdap => "comdap",
            Method::ComdapSecureGeneral => "secure-general",
            Method::ComdapSecureSmart => "secure-smart",
        }
    }

    /// Name used in reports.
    pub fn report_name(self) -> &'static str {
        match self {
            Method::Attractor => "attractor",
            Method::CriGreedy => "cri_greedy",
            Method::Comdap => "comdap",
            Method::ComdapSecureGeneral => "comdap_secure_general",
            Method::ComdapSecureSmart => "comdap_secure_smart",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.report_name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.cli_name() == s || m.report_name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method `{s}`")))
    }
}

/// One program's region of the device.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Sorted ascending.
    pub qubits: Vec<QubitId>,
    pub cri: f64,
    pub program: String,
    /// Position of the program in the queue handed to the allocator.
    pub program_index: usize,
    pub method: Method,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub method: Method,
    pub device_qubits: usize,
    pub partitions: Vec<Partition>,
    pub padded_qubits: BTreeSet<QubitId>,
    pub unallocated: Vec<String>,
    pub utilization: f64,
}

impl AllocationPlan {
    pub fn empty(method: Method, g: &HardwareGraph) -> Self {
        AllocationPlan {
            method,
            device_qubits: g.qubit_count(),
            partitions: Vec::new(),
            padded_qubits: BTreeSet::new(),
            unallocated: Vec::new(),
            utilization: 0.0,
        }
    }

    pub fn allocated_qubits(&self) -> BTreeSet<QubitId> {
        self.partitions.iter().flat_map(|p| p.qubits.iter().copied()).collect()
    }

    pub fn cri_values(&self) -> Vec<f64> {
        self.partitions.iter().map(|p| p.cri).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("allocation plan: {e}")))
    }
}

/// Independent re-verification of a plan against its device and queue:
/// partitions are disjoint from each other and from padding, connected,
/// sized to their program, and the stored utilization equals the recount.
pub fn check_plan(plan: &AllocationPlan, queue: &[ProgramProfile], g: &HardwareGraph) -> Result<(), String> {
    let mut seen = vec![false; g.qubit_count()];
    let mut placed_programs = BTreeSet::new();
    for q in &plan.padded_qubits {
        if q.index() >= g.qubit_count() {
            return Err(format!("padded qubit {q} outside device"));
        }
    }
    for (i, p) in plan.partitions.iter().enumerate() {
        let program = queue
            .get(p.program_index)
            .ok_or_else(|| format!("partition {i} names program index {}", p.program_index))?;
        if !placed_programs.insert(p.program_index) {
            return Err(format!("program {} placed twice", p.program_index));
        }
        if p.qubits.len() != program.logical_qubits {
            return Err(format!(
                "partition {i} has {} qubits for a {}-qubit program",
                p.qubits.len(),
                program.logical_qubits
            ));
        }
        for q in &p.qubits {
            if q.index() >= g.qubit_count() {
                return Err(format!("partition {i} uses {q} outside device"));
            }
            if seen[q.index()] {
                return Err(format!("{q} used by two partitions"));
            }
            if plan.padded_qubits.contains(q) {
                return Err(format!("{q} is both padded and allocated"));
            }
            seen[q.index()] = true;
        }
        if !is_connected(g, &p.qubits) {
            return Err(format!("partition {i} is disconnected"));
        }
    }
    let used = seen.iter().filter(|&&s| s).count();
    let expect = used as f64 / g.qubit_count() as f64;
    if plan.utilization != expect {
        return Err(format!("utilization {} but recount gives {expect}", plan.utilization));
    }
    if plan.partitions.len() + plan.unallocated.len() != queue.len() {
        return Err(format!(
            "{} partitions + {} unallocated for a queue of {}",
            plan.partitions.len(),
            plan.unallocated.len(),
            queue.len()
        ));
    }
    Ok(())
}

fn is_connected(g: &HardwareGraph, qubits: &[QubitId]) -> bool {
    let Some(&start) = qubits.first() else {
        return false;
    };
    let inside: BTreeSet<QubitId> = qubits.iter().copied().collect();
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(u) = stack.pop() {
        for v in g.neighbors(u) {
            if inside.contains(&v) && seen.insert(v) {
                stack.push(v);
            }
        }
    }
    seen.len() == inside.len()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Slot {
    Free,
    Allocated(usize),
    Padded,
}

/// Who holds each qubit while a plan is being built.
#[derive(Clone, Debug)]
pub(crate) struct Occupancy {
    slots: Vec<Slot>,
}

impl Occupancy {
    pub(crate) fn new(n: usize) -> Self {
        Occupancy {
            slots: vec![Slot::Free; n],
        }
    }

    pub(crate) fn from_plan(plan: &AllocationPlan) -> Self {
        let mut occ = Occupancy::new(plan.device_qubits);
        for (i, p) in plan.partitions.iter().enumerate() {
            for q in &p.qubits {
                occ.slots[q.index()] = Slot::Allocated(i);
            }
        }
        for q in &plan.padded_qubits {
            occ.slots[q.index()] = Slot::Padded;
        }
        occ
    }

    #[inline]
    pub(crate) fn is_free(&self, q: usize) -> bool {
        self.slots[q] == Slot::Free
    }

    pub(crate) fn slot(&self, q: usize) -> Slot {
        self.slots[q]
    }

    pub(crate) fn free_mask(&self) -> Vec<bool> {
        self.slots.iter().map(|s| *s == Slot::Free).collect()
    }

    pub(crate) fn consumed_mask(&self) -> Vec<bool> {
        self.slots.iter().map(|s| *s != Slot::Free).collect()
    }

    pub(crate) fn set(&mut self, q: usize, s: Slot) {
        self.slots[q] = s;
    }
}

/// Shared bookkeeping for every allocator: occupancy, CRI of placed
/// partitions, and padding applied right after each placement.
pub(crate) struct PlanBuilder<'g, 'p> {
    pub(crate) scorer: SetScorer<'g>,
    pub(crate) occ: Occupancy,
    padding: Padding<'p>,
    plan: AllocationPlan,
}

impl<'g, 'p> PlanBuilder<'g, 'p> {
    pub(crate) fn new(g: &'g HardwareGraph, method: Method, alpha: f64, padding: Padding<'p>) -> Result<Self> {
        Ok(PlanBuilder {
            scorer: SetScorer::new(g, alpha)?,
            occ: Occupancy::new(g.qubit_count()),
            padding,
            plan: AllocationPlan::empty(method, g),
        })
    }

    pub(crate) fn graph(&self) -> &'g HardwareGraph {
        self.scorer.graph()
    }

    pub(crate) fn place(&mut self, program_index: usize, program: &ProgramProfile, qubits: &[usize]) {
        debug_assert!(qubits.iter().all(|&q| self.occ.is_free(q)));
        let cri = self.scorer.score(qubits).expect("placed partitions are connected");
        let idx = self.plan.partitions.len();
        for &q in qubits {
            self.occ.set(q, Slot::Allocated(idx));
        }
        let mut sorted: Vec<QubitId> = qubits.iter().map(|&q| QubitId(q)).collect();
        sorted.sort_unstable();
        self.plan.partitions.push(Partition {
            qubits: sorted,
            cri,
            program: program.name.clone(),
            program_index,
            method: self.plan.method,
        });
        for q in self.padding.pad_after(self.graph(), qubits, &self.occ) {
            self.occ.set(q, Slot::Padded);
            self.plan.padded_qubits.insert(QubitId(q));
        }
    }

    pub(crate) fn skip(&mut self, program: &ProgramProfile) {
        self.plan.unallocated.push(program.name.clone());
    }

    pub(crate) fn finish(mut self) -> AllocationPlan {
        let used: usize = self.plan.partitions.iter().map(|p| p.qubits.len()).sum();
        self.plan.utilization = used as f64 / self.plan.device_qubits as f64;
        self.plan
    }
}

/// Orders candidate sets: higher score first, ties to the lexicographically
/// smallest sorted qubit list.
pub(crate) struct Best {
    score: f64,
    members: Vec<usize>,
}

pub(crate) const TIE_EPS: f64 = 1e-12;

impl Best {
    pub(crate) fn offer(best: &mut Option<Best>, score: f64, members: &[usize]) {
        match best {
            None => {
                let mut m = members.to_vec();
                m.sort_unstable();
                *best = Some(Best { score, members: m });
            }
            Some(b) => {
                if score > b.score + TIE_EPS {
                    b.score = score;
                    b.members.clear();
                    b.members.extend_from_slice(members);
                    b.members.sort_unstable();
                } else if (score - b.score).abs() <= TIE_EPS {
                    let mut m = members.to_vec();
                    m.sort_unstable();
                    if m < b.members {
                        b.score = b.score.max(score);
                        b.members = m;
                    }
                }
            }
        }
    }

    pub(crate) fn into_members(self) -> Vec<usize> {
        self.members
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.cli_name().parse::<Method>().unwrap(), m);
            assert_eq!(m.report_name().parse::<Method>().unwrap(), m);
        }
        assert!("fastest".parse::<Method>().is_err());
    }

    #[test]
    fn best_prefers_score_then_lexicographic() {
        let mut b = None;
        Best::offer(&mut b, 1.0, &[3, 2]);
        Best::offer(&mut b, 1.0, &[1, 4]);
        Best::offer(&mut b, 0.5, &[0, 1]);
        assert_eq!(b.as_ref().unwrap().members, vec![1, 4]);
        Best::offer(&mut b, 2.0, &[9, 8]);
        assert_eq!(b.unwrap().into_members(), vec![8, 9]);
    }
}
