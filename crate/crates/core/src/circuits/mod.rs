//! Program profiles parsed from OpenQASM 2.0, and the bundled benchmark corpus.

mod corpus;
mod qasm;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use corpus::{corpus, corpus_program, CORPUS_NAMES};
pub use qasm::{parse_qasm, parse_qasm_named, QasmError, QasmErrorKind};

use crate::error::{Error, Result};

/// One gate of a program in logical-qubit terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gate {
    Single(usize),
    Two(usize, usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgramProfile {
    pub name: String,
    pub logical_qubits: usize,
    /// Full gate sequence in program order; drives depth accounting.
    pub gates: Vec<Gate>,
    pub two_qubit_ops: Vec<(usize, usize)>,
    pub single_qubit_op_count: usize,
    pub cx_count: usize,
    pub priority: u32,
    pub arrival_index: usize,
}

impl ProgramProfile {
    pub fn from_gates(name: impl Into<String>, logical_qubits: usize, gates: Vec<Gate>) -> Self {
        let two_qubit_ops: Vec<(usize, usize)> = gates
            .iter()
            .filter_map(|g| match *g {
                Gate::Two(a, b) => Some((a, b)),
                Gate::Single(_) => None,
            })
            .collect();
        debug_assert!(gates.iter().all(|g| match *g {
            Gate::Single(q) => q < logical_qubits,
            Gate::Two(a, b) => a < logical_qubits && b < logical_qubits,
        }));
        ProgramProfile {
            name: name.into(),
            logical_qubits,
            single_qubit_op_count: gates.len() - two_qubit_ops.len(),
            cx_count: two_qubit_ops.len(),
            two_qubit_ops,
            gates,
            priority: 0,
            arrival_index: 0,
        }
    }

    /// Profile with only a size and a list of interactions, no one-qubit gates.
    pub fn from_interactions(name: impl Into<String>, logical_qubits: usize, ops: &[(usize, usize)]) -> Self {
        Self::from_gates(
            name,
            logical_qubits,
            ops.iter().map(|&(a, b)| Gate::Two(a, b)).collect(),
        )
    }

    pub fn with_priority(mut self, priority: u32) -> Self {
        self.priority = priority;
        self
    }

    pub fn with_arrival(mut self, arrival_index: usize) -> Self {
        self.arrival_index = arrival_index;
        self
    }
}

/// Reads a `.qasm` file; the profile is named after the file stem.
pub fn load_qasm(path: impl AsRef<Path>) -> Result<ProgramProfile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "program".into());
    Ok(parse_qasm_named(&name, &text)?)
}

/// Two-qubit interactions collapsed to a weighted simple graph.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InteractionGraph {
    pub nodes: usize,
    /// `(a, b) -> count` with `a < b`.
    pub edges: BTreeMap<(usize, usize), usize>,
}

impl InteractionGraph {
    pub fn weighted_degree(&self, q: usize) -> usize {
        self.edges
            .iter()
            .filter(|((a, b), _)| *a == q || *b == q)
            .map(|(_, w)| w)
            .sum()
    }

    pub fn weight(&self, a: usize, b: usize) -> usize {
        self.edges.get(&(a.min(b), a.max(b))).copied().unwrap_or(0)
    }

    pub fn total_weight(&self) -> usize {
        self.edges.values().sum()
    }
}

pub fn interaction_graph(p: &ProgramProfile) -> InteractionGraph {
    let mut edges = BTreeMap::new();
    for &(a, b) in &p.two_qubit_ops {
        *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
    }
    InteractionGraph {
        nodes: p.logical_qubits,
        edges,
    }
}
