use std::ops::ControlFlow;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{for_each_connected_subset, AllocationPlan, Best, Method, PlanBuilder};
use crate::circuits::ProgramProfile;
use crate::error::Result;
use crate::metrics::{SetScorer, DEFAULT_ALPHA};
use crate::secure::Padding;
use crate::topology::HardwareGraph;

pub const DEFAULT_ENUM_CAP: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriGreedyConfig {
    /// Candidate sets enumerated per program before switching to sampling.
    pub enum_cap: usize,
    /// Seeds the sampler used once `enum_cap` is exceeded.
    pub seed: u64,
    pub alpha: f64,
}

impl Default for CriGreedyConfig {
    fn default() -> Self {
        CriGreedyConfig {
            enum_cap: DEFAULT_ENUM_CAP,
            seed: 0,
            alpha: DEFAULT_ALPHA,
        }
    }
}

/// Places each program on the free connected set of its size with the
/// highest CRI.
pub fn allocate_cri_greedy(
    queue: &[ProgramProfile],
    g: &HardwareGraph,
    cfg: &CriGreedyConfig,
) -> Result<AllocationPlan> {
    let mut b = PlanBuilder::new(g, Method::CriGreedy, cfg.alpha, Padding::None)?;
    for (idx, p) in queue.iter().enumerate() {
        let free = b.occ.free_mask();
        let k = p.logical_qubits;
        let mut best = None;
        let mut seen = 0usize;
        let flow = for_each_connected_subset(g, &free, k, |s| {
            seen += 1;
            if seen > cfg.enum_cap {
                return ControlFlow::Break(());
            }
            if let Some(cri) = b.scorer.score(s) {
                Best::offer(&mut best, cri, s);
            }
            ControlFlow::Continue(())
        });
        if flow.is_break() {
            let seed = cfg.seed ^ (idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            best = sample(&mut b.scorer, &free, k, cfg.enum_cap, seed);
        }
        match best {
            Some(best) => b.place(idx, p, &best.into_members()),
            None => b.skip(p),
        }
    }
    Ok(b.finish())
}

/// Random connected growth from random free roots, `draws` times.
fn sample(scorer: &mut SetScorer<'_>, free: &[bool], k: usize, draws: usize, seed: u64) -> Option<Best> {
    let g = scorer.graph();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let roots: Vec<usize> = (0..free.len()).filter(|&q| free[q]).collect();
    let mut inside = vec![false; free.len()];
    let mut best = None;
    let mut set = Vec::with_capacity(k);
    let mut frontier = Vec::new();
    for _ in 0..draws {
        let &root = roots.choose(&mut rng)?;
        set.clear();
        set.push(root);
        inside[root] = true;
        while set.len() < k {
            frontier.clear();
            for &q in &set {
                for &(nb, _) in g.adjacency(q) {
                    if free[nb] && !inside[nb] && !frontier.contains(&nb) {
                        frontier.push(nb);
                    }
                }
            }
            if frontier.is_empty() {
                break;
            }
            let next = frontier[rng.gen_range(0..frontier.len())];
            inside[next] = true;
            set.push(next);
        }
        for &q in &set {
            inside[q] = false;
        }
        if set.len() == k {
            if let Some(cri) = scorer.score(&set) {
                Best::offer(&mut best, cri, &set);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{generate_topology, ErrorProfile, QubitId, TopologyKind};

    #[test]
    fn uniform_line_tie_breaks_to_smallest_indices() {
        let g = HardwareGraph::new("line", 5, &[(0, 1), (1, 2), (2, 3), (3, 4)], &[0.01; 4], &[0.02; 5]).unwrap();
        let p = ProgramProfile::from_interactions("p", 2, &[(0, 1)]);
        let plan = allocate_cri_greedy(&[p], &g, &CriGreedyConfig::default()).unwrap();
        assert_eq!(plan.partitions[0].qubits, vec![QubitId(0), QubitId(1)]);
    }

    #[test]
    fn sampling_fallback_is_deterministic_and_valid() {
        let g = generate_topology(TopologyKind::HeavyHex27, 2, ErrorProfile::default()).unwrap();
        let queue = vec![ProgramProfile::from_interactions("p", 10, &[(0, 1)])];
        let cfg = CriGreedyConfig {
            enum_cap: 50,
            seed: 7,
            alpha: 1.0,
        };
        let a = allocate_cri_greedy(&queue, &g, &cfg).unwrap();
        let b = allocate_cri_greedy(&queue, &g, &cfg).unwrap();
        assert_eq!(a, b);
        super::super::check_plan(&a, &queue, &g).unwrap();
    }
}
