//! Partition quality: density, compactness, the per-qubit composite fidelity
//! metric (CFM), and the Connectivity and Reliability Index (CRI).

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::topology::{subgraph, HardwareGraph, PartitionView, QubitId};

pub const DEFAULT_ALPHA: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PartitionMetrics {
    pub density: f64,
    pub compactness: f64,
    pub avg_cnot_error: f64,
    pub avg_readout_error: f64,
    pub cri: f64,
    pub alpha: f64,
}

/// `2·links / (N·(N−1))`.
pub fn density(p: &PartitionView) -> Result<f64> {
    let n = p.len();
    if n < 2 {
        return Err(Error::PartitionTooSmall { needed: 2, got: n });
    }
    let n = n as f64;
    Ok(2.0 * p.links().len() as f64 / (n * (n - 1.0)))
}

/// Hop diameter over the largest possible diameter, `N − 1`.
pub fn compactness(p: &PartitionView) -> Result<f64> {
    let n = p.len();
    if n < 2 {
        return Err(Error::PartitionTooSmall { needed: 2, got: n });
    }
    let diameter = p.diameter().ok_or(Error::Disconnected)?;
    Ok(diameter as f64 / (n - 1) as f64)
}

/// `degree + (1 − (avg incident CNOT error + readout error))`.
pub fn cfm(g: &HardwareGraph, q: QubitId) -> Result<f64> {
    let degree = g.degree(q)? as f64;
    Ok(degree + (1.0 - (g.incident_cnot_mean(q)? + g.readout_error(q)?)))
}

/// CRI denominator: the whole device scored with the same formula.
pub fn device_score(g: &HardwareGraph, alpha: f64) -> Result<f64> {
    let b = g.baseline();
    let denom = b.structure_term() + alpha * b.error_term();
    if denom > 0.0 && denom.is_finite() {
        Ok(denom)
    } else {
        Err(Error::DegenerateCalibration(denom))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha >= 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha must be >= 0, got {alpha}")))
    }
}

pub fn cri(p: &PartitionView, g: &HardwareGraph, alpha: f64) -> Result<f64> {
    Ok(partition_metrics(p, g, alpha)?.cri)
}

/// All CRI ingredients for a connected partition of at least two qubits.
pub fn partition_metrics(p: &PartitionView, g: &HardwareGraph, alpha: f64) -> Result<PartitionMetrics> {
    check_alpha(alpha)?;
    let d = density(p)?;
    let c = compactness(p)?;
    let e = p.mean_cnot_error();
    let r = p.mean_readout_error();
    let numerator = d / c + alpha * (1.0 - (e + r));
    Ok(PartitionMetrics {
        density: d,
        compactness: c,
        avg_cnot_error: e,
        avg_readout_error: r,
        cri: numerator / device_score(g, alpha)?,
        alpha,
    })
}

/// CRI for a one-qubit partition. The structure term is taken as 1; the
/// error term uses the qubit's mean incident CNOT error and its readout
/// error.
pub fn cri_single(q: QubitId, g: &HardwareGraph, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let e = g.incident_cnot_mean(q)?;
    let r = g.readout_error(q)?;
    Ok((1.0 + alpha * (1.0 - (e + r))) / device_score(g, alpha)?)
}

/// CRI of an arbitrary qubit set, dispatching to [`cri_single`] for one qubit.
pub fn cri_of_set(qubits: &BTreeSet<QubitId>, g: &HardwareGraph, alpha: f64) -> Result<f64> {
    match qubits.len() {
        0 => Err(Error::PartitionTooSmall { needed: 1, got: 0 }),
        1 => cri_single(*qubits.iter().next().unwrap(), g, alpha),
        _ => cri(&subgraph(g, qubits)?, g, alpha),
    }
}

/// Allocation-time CRI evaluator over raw qubit indices. Reuses a scratch
/// slot map so scoring thousands of candidate sets does not allocate per
/// set; sets of up to 64 qubits take a bitmask path for the diameter.
pub(crate) struct SetScorer<'g> {
    g: &'g HardwareGraph,
    alpha: f64,
    denom: f64,
    slot: Vec<usize>,
    masks: Vec<u64>,
}

const ABSENT: usize = usize::MAX;

impl<'g> SetScorer<'g> {
    pub(crate) fn new(g: &'g HardwareGraph, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(SetScorer {
            g,
            alpha,
            denom: device_score(g, alpha)?,
            slot: vec![ABSENT; g.qubit_count()],
            masks: Vec::new(),
        })
    }

    pub(crate) fn graph(&self) -> &'g HardwareGraph {
        self.g
    }

    /// CRI of `members`, or `None` when the set is empty or disconnected.
    pub(crate) fn score(&mut self, members: &[usize]) -> Option<f64> {
        match members.len() {
            0 => None,
            1 => {
                let q = members[0];
                let e = mean_incident(self.g, q);
                let r = self.g.readout_errors()[q];
                Some((1.0 + self.alpha * (1.0 - (e + r))) / self.denom)
            }
            _ => {
                for (i, &q) in members.iter().enumerate() {
                    self.slot[q] = i;
                }
                let out = self.score_multi(members);
                for &q in members {
                    self.slot[q] = ABSENT;
                }
                out
            }
        }
    }

    fn score_multi(&mut self, members: &[usize]) -> Option<f64> {
        let n = members.len();
        let cnot = self.g.cnot_errors();
        let mut link_count = 0usize;
        let mut cnot_sum = 0.0;
        let mut readout_sum = 0.0;
        for &q in members {
            readout_sum += self.g.readout_errors()[q];
            for &(nb, li) in self.g.adjacency(q) {
                if nb > q && self.slot[nb] != ABSENT {
                    link_count += 1;
                    cnot_sum += cnot[li];
                }
            }
        }
        if link_count + 1 < n {
            return None;
        }
        let diameter = if n <= 64 {
            self.mask_diameter(members)?
        } else {
            self.bfs_diameter(members)?
        };
        let nf = n as f64;
        let d = 2.0 * link_count as f64 / (nf * (nf - 1.0));
        let c = diameter as f64 / (nf - 1.0);
        let e = cnot_sum / link_count as f64;
        let r = readout_sum / nf;
        Some((d / c + self.alpha * (1.0 - (e + r))) / self.denom)
    }

    fn mask_diameter(&mut self, members: &[usize]) -> Option<usize> {
        let n = members.len();
        self.masks.clear();
        for &q in members {
            let mut m = 0u64;
            for &(nb, _) in self.g.adjacency(q) {
                let s = self.slot[nb];
                if s != ABSENT {
                    m |= 1 << s;
                }
            }
            self.masks.push(m);
        }
        let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let mut diameter = 0;
        for s in 0..n {
            let mut seen = 1u64 << s;
            let mut frontier = seen;
            let mut depth = 0;
            while seen != full {
                let mut next = 0u64;
                let mut bits = frontier;
                while bits != 0 {
                    let i = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    next |= self.masks[i];
                }
                next &= !seen;
                if next == 0 {
                    return None;
                }
                seen |= next;
                frontier = next;
                depth += 1;
            }
            diameter = diameter.max(depth);
        }
        Some(diameter)
    }

    fn bfs_diameter(&self, members: &[usize]) -> Option<usize> {
        let n = members.len();
        let mut diameter = 0;
        for s in 0..n {
            let dist = crate::topology::bfs_distances(n, s, |u| {
                self.g
                    .adjacency(members[u])
                    .iter()
                    .map(|&(nb, _)| self.slot[nb])
                    .filter(|&x| x != ABSENT)
                    .collect::<Vec<_>>()
            });
            for d in dist {
                diameter = diameter.max(d?);
            }
        }
        Some(diameter)
    }
}

pub(crate) fn mean_incident(g: &HardwareGraph, q: usize) -> f64 {
    let adj = g.adjacency(q);
    if adj.is_empty() {
        0.0
    } else {
        adj.iter().map(|&(_, l)| g.cnot_errors()[l]).sum::<f64>() / adj.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{generate_topology, ErrorProfile, TopologyKind};

    fn set(ids: &[usize]) -> BTreeSet<QubitId> {
        ids.iter().map(|&i| QubitId(i)).collect()
    }

    fn uniform_line(n: usize, cnot: f64, readout: f64) -> HardwareGraph {
        let links: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        HardwareGraph::new("line", n, &links, &vec![cnot; n - 1], &vec![readout; n]).unwrap()
    }

    fn complete(n: usize) -> HardwareGraph {
        let mut links = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                links.push((a, b));
            }
        }
        let e = vec![0.01; links.len()];
        HardwareGraph::new("k", n, &links, &e, &vec![0.02; n]).unwrap()
    }

    fn whole(g: &HardwareGraph) -> PartitionView {
        subgraph(g, &g.qubits().collect()).unwrap()
    }

    #[test]
    fn density_examples() {
        assert_eq!(density(&whole(&complete(4))).unwrap(), 1.0);
        let p3 = whole(&uniform_line(3, 0.01, 0.02));
        assert!((density(&p3).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(density(&whole(&uniform_line(2, 0.01, 0.02))).unwrap(), 1.0);
        let g = uniform_line(3, 0.01, 0.02);
        assert!(matches!(
            density(&subgraph(&g, &set(&[0])).unwrap()),
            Err(Error::PartitionTooSmall { .. })
        ));
    }

    #[test]
    fn compactness_examples() {
        assert_eq!(compactness(&whole(&uniform_line(3, 0.01, 0.02))).unwrap(), 1.0);
        assert!((compactness(&whole(&complete(4))).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(compactness(&whole(&uniform_line(2, 0.01, 0.02))).unwrap(), 1.0);
        let g = uniform_line(5, 0.01, 0.02);
        assert!(matches!(
            compactness(&subgraph(&g, &set(&[0, 4])).unwrap()),
            Err(Error::Disconnected)
        ));
    }

    #[test]
    fn cfm_examples() {
        // q1 on a 3-line: degree 2, both incident links 0.01, readout 0.02.
        let g = uniform_line(3, 0.01, 0.02);
        assert!((cfm(&g, QubitId(1)).unwrap() - 2.97).abs() < 1e-12);

        // Star centre with three links averaging 0.015.
        let g = HardwareGraph::new(
            "star",
            4,
            &[(0, 1), (0, 2), (0, 3)],
            &[0.01, 0.015, 0.02],
            &[0.025, 0.0, 0.0, 0.0],
        )
        .unwrap();
        assert!((cfm(&g, QubitId(0)).unwrap() - 3.96).abs() < 1e-12);
        assert!(cfm(&g, QubitId(7)).is_err());
    }

    #[test]
    fn whole_device_cri_is_one() {
        let g = generate_topology(TopologyKind::HeavyHex27, 5, ErrorProfile::default()).unwrap();
        assert_eq!(cri(&whole(&g), &g, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn hand_evaluated_line_partition() {
        let g = uniform_line(5, 0.01, 0.02);
        let p = subgraph(&g, &set(&[0, 1, 2])).unwrap();
        // Partition: D = 2/3, C = 1. Device: D = 8/20, C = 4/4.
        let num = 2.0 / 3.0 / 1.0 + (1.0 - (0.01 + 0.02));
        let den = (2.0 * 4.0 / 20.0) / 1.0 + (1.0 - (0.01 + 0.02));
        assert!((cri(&p, &g, 1.0).unwrap() - num / den).abs() < 1e-12);
    }

    #[test]
    fn single_qubit_convention() {
        let g = uniform_line(2, 0.01, 0.02);
        assert!((cri_single(QubitId(0), &g, 1.0).unwrap() - 1.0).abs() < 1e-15);

        let g = HardwareGraph::new("l3", 3, &[(0, 1), (1, 2)], &[0.01, 0.05], &[0.01, 0.03, 0.08]).unwrap();
        let base = cri_single(QubitId(1), &g, 1.0).unwrap();
        assert!(cri_single(QubitId(0), &g, 1.0).unwrap() > base);
        assert!(cri_single(QubitId(2), &g, 1.0).unwrap() < base);
    }

    #[test]
    fn degenerate_calibration_is_rejected() {
        let g = HardwareGraph::new("bad", 2, &[(0, 1)], &[1.0], &[1.0, 1.0]).unwrap();
        // 1 + 10·(1 − 2) < 0.
        assert!(matches!(
            cri(&whole(&g), &g, 10.0),
            Err(Error::DegenerateCalibration(_))
        ));
    }

    #[test]
    fn scorer_matches_view_path() {
        let g = generate_topology(TopologyKind::Grid { rows: 3, cols: 4 }, 2, ErrorProfile::default()).unwrap();
        let mut scorer = SetScorer::new(&g, 1.0).unwrap();
        for mask in 1u32..(1 << 12) {
            let members: Vec<usize> = (0..12).filter(|i| mask & (1 << i) != 0).collect();
            let qs: BTreeSet<QubitId> = members.iter().map(|&i| QubitId(i)).collect();
            let view = subgraph(&g, &qs).unwrap();
            let expected = if members.len() == 1 {
                Some(cri_single(QubitId(members[0]), &g, 1.0).unwrap())
            } else if view.is_connected() {
                Some(cri(&view, &g, 1.0).unwrap())
            } else {
                None
            };
            match (scorer.score(&members), expected) {
                (Some(a), Some(b)) => assert!((a - b).abs() < 1e-12, "{members:?}"),
                (None, None) => {}
                (a, b) => panic!("{members:?}: {a:?} vs {b:?}"),
            }
        }
    }
}
