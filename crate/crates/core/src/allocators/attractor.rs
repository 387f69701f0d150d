use super::{AllocationPlan, Method, PlanBuilder, TIE_EPS};
use crate::circuits::ProgramProfile;
use crate::error::Result;
use crate::metrics::{mean_incident, DEFAULT_ALPHA};
use crate::secure::Padding;
use crate::topology::HardwareGraph;

/// Baseline that grows a region from every free qubit toward the highest-CFM
/// neighbour and keeps the region with the largest CFM sum.
pub fn allocate_attractor(queue: &[ProgramProfile], g: &HardwareGraph) -> Result<AllocationPlan> {
    let mut b = PlanBuilder::new(g, Method::Attractor, DEFAULT_ALPHA, Padding::None)?;
    let n = g.qubit_count();
    let cfm: Vec<f64> = (0..n)
        .map(|q| g.adjacency(q).len() as f64 + (1.0 - (mean_incident(g, q) + g.readout_errors()[q])))
        .collect();
    let mut grower = Grower::new(n);
    for (idx, p) in queue.iter().enumerate() {
        let k = p.logical_qubits;
        let mut best: Option<(f64, Vec<usize>)> = None;
        if k > 0 && k <= n {
            let free = b.occ.free_mask();
            for a in 0..n {
                if !b.occ.is_free(a) {
                    continue;
                }
                let Some(region) = grower.grow(g, &free, &cfm, a, k) else {
                    continue;
                };
                let score: f64 = region.iter().map(|&q| cfm[q]).sum();
                let better = match &best {
                    None => true,
                    Some((s, r)) => score > s + TIE_EPS || ((score - s).abs() <= TIE_EPS && region < *r),
                };
                if better {
                    best = Some((score, region));
                }
            }
        }
        match best {
            Some((_, region)) => b.place(idx, p, &region),
            None => b.skip(p),
        }
    }
    Ok(b.finish())
}

struct Grower {
    inside: Vec<bool>,
}

impl Grower {
    fn new(n: usize) -> Self {
        Grower { inside: vec![false; n] }
    }

    /// Sorted region of `k` free qubits grown from `seed`, or `None` if the
    /// free component is too small.
    fn grow(&mut self, g: &HardwareGraph, free: &[bool], cfm: &[f64], seed: usize, k: usize) -> Option<Vec<usize>> {
        let mut region = vec![seed];
        self.inside[seed] = true;
        while region.len() < k {
            let mut pick: Option<usize> = None;
            for &q in &region {
                for &(nb, _) in g.adjacency(q) {
                    if free[nb]
                        && !self.inside[nb]
                        && pick.is_none_or(|p| cfm[nb] > cfm[p] || (cfm[nb] == cfm[p] && nb < p))
                    {
                        pick = Some(nb);
                    }
                }
            }
            match pick {
                Some(q) => {
                    self.inside[q] = true;
                    region.push(q);
                }
                None => break,
            }
        }
        for &q in &region {
            self.inside[q] = false;
        }
        if region.len() < k {
            return None;
        }
        region.sort_unstable();
        Some(region)
    }
}
