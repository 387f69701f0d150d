//! Device model: coupling map plus per-link CNOT error and per-qubit readout
//! error, synthetic topology templates, and calibration snapshot I/O.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical qubit index, dense in `[0, qubit_count)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QubitId(pub usize);

impl QubitId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for QubitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

impl From<usize> for QubitId {
    fn from(i: usize) -> Self {
        QubitId(i)
    }
}

/// Unordered coupling between two distinct qubits, stored with `a < b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Link {
    a: QubitId,
    b: QubitId,
}

impl Link {
    /// Panics on a self-loop; use [`Link::try_new`] for untrusted input.
    pub fn new(a: impl Into<QubitId>, b: impl Into<QubitId>) -> Self {
        Self::try_new(a.into(), b.into()).expect("self-loop link")
    }

    pub fn try_new(a: QubitId, b: QubitId) -> Option<Self> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Some(Link { a, b }),
            std::cmp::Ordering::Greater => Some(Link { a: b, b: a }),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn endpoints(self) -> (QubitId, QubitId) {
        (self.a, self.b)
    }

    pub fn contains(self, q: QubitId) -> bool {
        self.a == q || self.b == q
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.a.0, self.b.0)
    }
}

/// Whole-device quantities that appear in the CRI denominator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeviceBaseline {
    pub density: f64,
    pub compactness: f64,
    pub diameter: usize,
    pub mean_cnot_error: f64,
    pub mean_readout_error: f64,
}

impl DeviceBaseline {
    pub fn structure_term(&self) -> f64 {
        self.density / self.compactness
    }

    pub fn error_term(&self) -> f64 {
        1.0 - (self.mean_cnot_error + self.mean_readout_error)
    }
}

/// Immutable, validated hardware model.
#[derive(Clone, Debug, PartialEq)]
pub struct HardwareGraph {
    calibration_id: String,
    qubit_count: usize,
    links: Vec<Link>,
    cnot_error: Vec<f64>,
    readout_error: Vec<f64>,
    /// Sorted `(neighbor, link index)` pairs per qubit.
    adjacency: Vec<Vec<(usize, usize)>>,
    baseline: DeviceBaseline,
}

impl HardwareGraph {
    /// Validates and builds a graph. Links listed in both directions are
    /// merged and their errors averaged; the same direction twice is a
    /// duplicate and rejected.
    pub fn new(
        calibration_id: impl Into<String>,
        qubit_count: usize,
        links: &[(usize, usize)],
        cnot_error: &[f64],
        readout_error: &[f64],
    ) -> Result<Self> {
        if qubit_count < 2 {
            return Err(Error::InvalidGraph(format!(
                "device needs at least 2 qubits, got {qubit_count}"
            )));
        }
        if links.len() != cnot_error.len() {
            return Err(Error::InvalidGraph(format!(
                "{} links but {} cnot_error entries",
                links.len(),
                cnot_error.len()
            )));
        }
        if readout_error.len() != qubit_count {
            return Err(Error::InvalidGraph(format!(
                "{qubit_count} qubits but {} readout_error entries",
                readout_error.len()
            )));
        }
        for (q, &r) in readout_error.iter().enumerate() {
            check_rate(r, || format!("readout_error of q{q}"))?;
        }

        let mut seen_directed = BTreeSet::new();
        let mut merged: BTreeMap<Link, (f64, usize)> = BTreeMap::new();
        for (&(a, b), &e) in links.iter().zip(cnot_error) {
            if a >= qubit_count || b >= qubit_count {
                return Err(Error::InvalidGraph(format!(
                    "link ({a},{b}) references a qubit outside [0,{qubit_count})"
                )));
            }
            check_rate(e, || format!("cnot_error of link ({a},{b})"))?;
            let link = Link::try_new(QubitId(a), QubitId(b))
                .ok_or_else(|| Error::InvalidGraph(format!("self-loop on q{a}")))?;
            if !seen_directed.insert((a, b)) {
                return Err(Error::InvalidGraph(format!("duplicate link ({a},{b})")));
            }
            let slot = merged.entry(link).or_insert((0.0, 0));
            slot.0 += e;
            slot.1 += 1;
        }

        let links: Vec<Link> = merged.keys().copied().collect();
        let cnot_error: Vec<f64> = merged.values().map(|&(s, n)| s / n as f64).collect();

        let mut adjacency = vec![Vec::new(); qubit_count];
        for (i, l) in links.iter().enumerate() {
            adjacency[l.a.0].push((l.b.0, i));
            adjacency[l.b.0].push((l.a.0, i));
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }

        let diameter =
            diameter_of(&adjacency).ok_or_else(|| Error::InvalidGraph("coupling map is disconnected".into()))?;
        let n = qubit_count as f64;
        let baseline = DeviceBaseline {
            density: 2.0 * links.len() as f64 / (n * (n - 1.0)),
            compactness: diameter as f64 / (n - 1.0),
            diameter,
            mean_cnot_error: mean(&cnot_error),
            mean_readout_error: mean(readout_error),
        };

        Ok(HardwareGraph {
            calibration_id: calibration_id.into(),
            qubit_count,
            links,
            cnot_error,
            readout_error: readout_error.to_vec(),
            adjacency,
            baseline,
        })
    }

    pub fn calibration_id(&self) -> &str {
        &self.calibration_id
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn qubits(&self) -> impl Iterator<Item = QubitId> {
        (0..self.qubit_count).map(QubitId)
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    /// CNOT errors aligned with [`HardwareGraph::links`].
    pub fn cnot_errors(&self) -> &[f64] {
        &self.cnot_error
    }

    pub fn readout_errors(&self) -> &[f64] {
        &self.readout_error
    }

    pub fn contains(&self, q: QubitId) -> bool {
        q.0 < self.qubit_count
    }

    pub fn readout_error(&self, q: QubitId) -> Result<f64> {
        self.readout_error.get(q.0).copied().ok_or(Error::UnknownQubit(q))
    }

    pub fn cnot_error(&self, a: QubitId, b: QubitId) -> Option<f64> {
        self.link_index(a.0, b.0).map(|i| self.cnot_error[i])
    }

    pub fn are_adjacent(&self, a: QubitId, b: QubitId) -> bool {
        self.link_index(a.0, b.0).is_some()
    }

    pub fn degree(&self, q: QubitId) -> Result<usize> {
        self.adjacency.get(q.0).map(Vec::len).ok_or(Error::UnknownQubit(q))
    }

    pub fn neighbors(&self, q: QubitId) -> impl Iterator<Item = QubitId> + '_ {
        self.adjacency.get(q.0).into_iter().flatten().map(|&(n, _)| QubitId(n))
    }

    /// Mean CNOT error over links incident to `q`; 0 for an isolated qubit.
    pub fn incident_cnot_mean(&self, q: QubitId) -> Result<f64> {
        let nbrs = self.adjacency.get(q.0).ok_or(Error::UnknownQubit(q))?;
        if nbrs.is_empty() {
            return Ok(0.0);
        }
        Ok(nbrs.iter().map(|&(_, l)| self.cnot_error[l]).sum::<f64>() / nbrs.len() as f64)
    }

    pub fn baseline(&self) -> &DeviceBaseline {
        &self.baseline
    }

    pub(crate) fn adjacency(&self, q: usize) -> &[(usize, usize)] {
        &self.adjacency[q]
    }

    pub(crate) fn link_index(&self, a: usize, b: usize) -> Option<usize> {
        let nbrs = self.adjacency.get(a)?;
        nbrs.binary_search_by_key(&b, |&(n, _)| n).ok().map(|pos| nbrs[pos].1)
    }

    /// Unweighted hop distances from `source` to every qubit.
    pub fn hop_distances(&self, source: QubitId) -> Vec<Option<usize>> {
        bfs_distances(self.qubit_count, source.0, |q| {
            self.adjacency[q].iter().map(|&(n, _)| n)
        })
    }

    /// Copy with every error replaced by `f(old)`; structure is kept.
    pub fn map_errors(&self, mut cnot: impl FnMut(f64) -> f64, mut readout: impl FnMut(f64) -> f64) -> Result<Self> {
        let links: Vec<(usize, usize)> = self.links.iter().map(|l| (l.a.0, l.b.0)).collect();
        let c: Vec<f64> = self.cnot_error.iter().map(|&e| cnot(e)).collect();
        let r: Vec<f64> = self.readout_error.iter().map(|&e| readout(e)).collect();
        HardwareGraph::new(self.calibration_id.clone(), self.qubit_count, &links, &c, &r)
    }

    pub fn to_snapshot(&self) -> CalibrationSnapshot {
        CalibrationSnapshot {
            calibration_id: self.calibration_id.clone(),
            qubits: self.qubit_count,
            readout_error: self.readout_error.clone(),
            links: self.links.iter().map(|l| [l.a.0, l.b.0]).collect(),
            cnot_error: self.cnot_error.clone(),
            timestamp: None,
        }
    }
}

fn check_rate(r: f64, what: impl FnOnce() -> String) -> Result<()> {
    if (0.0..=1.0).contains(&r) {
        Ok(())
    } else {
        Err(Error::InvalidGraph(format!("{} = {r} outside [0,1]", what())))
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

pub(crate) fn bfs_distances<I>(n: usize, source: usize, mut nbrs: impl FnMut(usize) -> I) -> Vec<Option<usize>>
where
    I: IntoIterator<Item = usize>,
{
    let mut dist = vec![None; n];
    let mut queue = VecDeque::new();
    dist[source] = Some(0);
    queue.push_back(source);
    while let Some(u) = queue.pop_front() {
        let d = dist[u].unwrap();
        for v in nbrs(u) {
            if dist[v].is_none() {
                dist[v] = Some(d + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

fn diameter_of(adjacency: &[Vec<(usize, usize)>]) -> Option<usize> {
    let n = adjacency.len();
    let mut diameter = 0;
    for s in 0..n {
        let dist = bfs_distances(n, s, |q| adjacency[q].iter().map(|&(v, _)| v));
        for d in dist {
            diameter = diameter.max(d?);
        }
    }
    Some(diameter)
}

/// Serialized calibration payload. `cnot_error[i]` pairs with `links[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSnapshot {
    pub calibration_id: String,
    pub qubits: usize,
    pub readout_error: Vec<f64>,
    pub links: Vec<[usize; 2]>,
    pub cnot_error: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

impl CalibrationSnapshot {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("calibration snapshot: {e}")))
    }

    pub fn into_graph(self) -> Result<HardwareGraph> {
        let links: Vec<(usize, usize)> = self.links.iter().map(|&[a, b]| (a, b)).collect();
        HardwareGraph::new(
            self.calibration_id,
            self.qubits,
            &links,
            &self.cnot_error,
            &self.readout_error,
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serialization is infallible")
    }
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<HardwareGraph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    CalibrationSnapshot::from_json(&text)?.into_graph()
}

pub fn save_snapshot(g: &HardwareGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, g.to_snapshot().to_json()).map_err(|e| Error::io(path, e))
}

/// Synthetic topology templates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TopologyKind {
    Line(usize),
    Ring(usize),
    Grid { rows: usize, cols: usize },
    HeavyHex27,
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologyKind::Line(n) => write!(f, "line-{n}"),
            TopologyKind::Ring(n) => write!(f, "ring-{n}"),
            TopologyKind::Grid { rows, cols } => write!(f, "grid-{rows}x{cols}"),
            TopologyKind::HeavyHex27 => write!(f, "heavy-hex-27"),
        }
    }
}

impl FromStr for TopologyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownTopology(s.to_string());
        if s == "heavy-hex-27" {
            return Ok(TopologyKind::HeavyHex27);
        }
        let (kind, arg) = s.split_once('-').ok_or_else(unknown)?;
        match kind {
            "line" => Ok(TopologyKind::Line(arg.parse().map_err(|_| unknown())?)),
            "ring" => Ok(TopologyKind::Ring(arg.parse().map_err(|_| unknown())?)),
            "grid" => {
                let (r, c) = arg.split_once('x').ok_or_else(unknown)?;
                Ok(TopologyKind::Grid {
                    rows: r.parse().map_err(|_| unknown())?,
                    cols: c.parse().map_err(|_| unknown())?,
                })
            }
            _ => Err(unknown()),
        }
    }
}

/// The 27-qubit heavy-hex coupling map (Falcon layout, qubits 0..26).
pub const HEAVY_HEX_27_LINKS: [(usize, usize); 28] = [
    (0, 1),
    (1, 2),
    (1, 4),
    (2, 3),
    (3, 5),
    (4, 7),
    (5, 8),
    (6, 7),
    (7, 10),
    (8, 9),
    (8, 11),
    (10, 12),
    (11, 14),
    (12, 13),
    (12, 15),
    (13, 14),
    (14, 16),
    (15, 18),
    (16, 19),
    (17, 18),
    (18, 21),
    (19, 20),
    (19, 22),
    (21, 23),
    (22, 25),
    (23, 24),
    (24, 25),
    (25, 26),
];

impl TopologyKind {
    pub fn qubit_count(&self) -> usize {
        match *self {
            TopologyKind::Line(n) | TopologyKind::Ring(n) => n,
            TopologyKind::Grid { rows, cols } => rows * cols,
            TopologyKind::HeavyHex27 => 27,
        }
    }

    fn edges(&self) -> Result<Vec<(usize, usize)>> {
        let bad = |why: &str| Error::InvalidArgument(format!("{self}: {why}"));
        Ok(match *self {
            TopologyKind::Line(n) => {
                if n < 2 {
                    return Err(bad("a line needs at least 2 qubits"));
                }
                (0..n - 1).map(|i| (i, i + 1)).collect()
            }
            TopologyKind::Ring(n) => {
                if n < 3 {
                    return Err(bad("a ring needs at least 3 qubits"));
                }
                (0..n).map(|i| (i.min((i + 1) % n), i.max((i + 1) % n))).collect()
            }
            TopologyKind::Grid { rows, cols } => {
                if rows * cols < 2 {
                    return Err(bad("a grid needs at least 2 qubits"));
                }
                let mut e = Vec::new();
                for r in 0..rows {
                    for c in 0..cols {
                        let q = r * cols + c;
                        if c + 1 < cols {
                            e.push((q, q + 1));
                        }
                        if r + 1 < rows {
                            e.push((q, q + cols));
                        }
                    }
                }
                e
            }
            TopologyKind::HeavyHex27 => HEAVY_HEX_27_LINKS.to_vec(),
        })
    }
}

/// Uniform error ranges for synthetic calibrations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorProfile {
    pub cnot: (f64, f64),
    pub readout: (f64, f64),
}

impl ErrorProfile {
    /// Same range for CNOT and readout errors.
    pub fn uniform(lo: f64, hi: f64) -> Self {
        ErrorProfile {
            cnot: (lo, hi),
            readout: (lo, hi),
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("cnot", self.cnot), ("readout", self.readout)] {
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
                return Err(Error::InvalidArgument(format!(
                    "{name} error range ({lo},{hi}) must satisfy 0 <= lo <= hi <= 1"
                )));
            }
        }
        Ok(())
    }
}

impl Default for ErrorProfile {
    fn default() -> Self {
        ErrorProfile {
            cnot: (0.005, 0.03),
            readout: (0.01, 0.05),
        }
    }
}

fn sample(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Deterministic synthetic device: link errors are drawn in sorted-link
/// order, then readout errors in qubit order.
pub fn generate_topology(kind: TopologyKind, seed: u64, profile: ErrorProfile) -> Result<HardwareGraph> {
    profile.validate()?;
    let mut edges = kind.edges()?;
    edges.sort_unstable();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cnot: Vec<f64> = edges.iter().map(|_| sample(&mut rng, profile.cnot)).collect();
    let readout: Vec<f64> = (0..kind.qubit_count())
        .map(|_| sample(&mut rng, profile.readout))
        .collect();
    HardwareGraph::new(
        format!("{kind}-seed{seed}"),
        kind.qubit_count(),
        &edges,
        &cnot,
        &readout,
    )
}

/// Induced subgraph of a device over a subset of its qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionView {
    qubits: Vec<QubitId>,
    links: Vec<Link>,
    cnot_error: Vec<f64>,
    readout_error: Vec<f64>,
    /// Local neighbor lists, indices into `qubits`.
    local_adjacency: Vec<Vec<usize>>,
    connected: bool,
}

impl PartitionView {
    pub fn qubits(&self) -> &[QubitId] {
        &self.qubits
    }

    pub fn len(&self) -> usize {
        self.qubits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qubits.is_empty()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn cnot_errors(&self) -> &[f64] {
        &self.cnot_error
    }

    pub fn readout_errors(&self) -> &[f64] {
        &self.readout_error
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    pub fn mean_cnot_error(&self) -> f64 {
        mean(&self.cnot_error)
    }

    pub fn mean_readout_error(&self) -> f64 {
        mean(&self.readout_error)
    }

    /// Longest shortest path in hops; `None` when disconnected or empty.
    pub fn diameter(&self) -> Option<usize> {
        if self.qubits.is_empty() || !self.connected {
            return None;
        }
        let n = self.qubits.len();
        let mut best = 0;
        for s in 0..n {
            let dist = bfs_distances(n, s, |u| self.local_adjacency[u].iter().copied());
            for d in dist {
                best = best.max(d?);
            }
        }
        Some(best)
    }
}

pub fn subgraph(g: &HardwareGraph, qubits: &BTreeSet<QubitId>) -> Result<PartitionView> {
    if let Some(&q) = qubits.iter().find(|q| !g.contains(**q)) {
        return Err(Error::UnknownQubit(q));
    }
    let members: Vec<QubitId> = qubits.iter().copied().collect();
    let mut local = vec![usize::MAX; g.qubit_count()];
    for (i, q) in members.iter().enumerate() {
        local[q.0] = i;
    }
    let mut links = Vec::new();
    let mut cnot_error = Vec::new();
    let mut local_adjacency = vec![Vec::new(); members.len()];
    for (li, l) in g.links.iter().enumerate() {
        let (ia, ib) = (local[l.a.0], local[l.b.0]);
        if ia != usize::MAX && ib != usize::MAX {
            links.push(*l);
            cnot_error.push(g.cnot_error[li]);
            local_adjacency[ia].push(ib);
            local_adjacency[ib].push(ia);
        }
    }
    let connected = !members.is_empty()
        && bfs_distances(members.len(), 0, |u| local_adjacency[u].iter().copied())
            .iter()
            .all(Option::is_some);
    Ok(PartitionView {
        readout_error: members.iter().map(|q| g.readout_error[q.0]).collect(),
        qubits: members,
        links,
        cnot_error,
        local_adjacency,
        connected,
    })
}
