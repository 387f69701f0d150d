use std::collections::BTreeSet;
use std::ops::ControlFlow;

use super::{for_each_connected_subset, Best};
use crate::error::{Error, Result};
use crate::metrics::{SetScorer, DEFAULT_ALPHA};
use crate::topology::{HardwareGraph, QubitId};

/// Communities up to this size are searched exhaustively.
pub const EXHAUSTIVE_LIMIT: usize = 12;

/// Best connected `size`-subset of `community`: exhaustive CRI maximization
/// for small communities, greedy peeling by fidelity-weighted density for
/// larger ones.
pub fn densest_subset(community: &BTreeSet<QubitId>, size: usize, g: &HardwareGraph) -> Result<BTreeSet<QubitId>> {
    for q in community {
        if !g.contains(*q) {
            return Err(Error::UnknownQubit(*q));
        }
    }
    let members: Vec<usize> = community.iter().map(|q| q.index()).collect();
    let mut scorer = SetScorer::new(g, DEFAULT_ALPHA)?;
    densest_in(&mut scorer, &members, size)
        .map(|v| v.into_iter().map(QubitId).collect())
        .ok_or(Error::NoConnectedSubset { size })
}

pub(crate) fn densest_in(scorer: &mut SetScorer<'_>, community: &[usize], size: usize) -> Option<Vec<usize>> {
    let g = scorer.graph();
    if size == 0 || size > community.len() {
        return None;
    }
    if size == community.len() {
        let mut all = community.to_vec();
        all.sort_unstable();
        return scorer.score(&all).map(|_| all);
    }
    if size == 1 {
        let mut best = None;
        for &q in community {
            let s = scorer.score(&[q]).expect("single qubit scores");
            Best::offer(&mut best, s, &[q]);
        }
        return best.map(Best::into_members);
    }
    let mut allowed = vec![false; g.qubit_count()];
    for &q in community {
        allowed[q] = true;
    }
    if community.len() <= EXHAUSTIVE_LIMIT {
        let mut best = None;
        let _ = for_each_connected_subset(g, &allowed, size, |s| {
            if let Some(cri) = scorer.score(s) {
                Best::offer(&mut best, cri, s);
            }
            ControlFlow::Continue(())
        });
        return best.map(Best::into_members);
    }
    peel(g, allowed, community.len(), size)
}

/// Repeatedly drops the non-cut member whose removal leaves the highest
/// fidelity-weighted link density; ties drop the larger index.
fn peel(g: &HardwareGraph, mut inside: Vec<bool>, mut len: usize, size: usize) -> Option<Vec<usize>> {
    if !connected(g, &inside, None) {
        return None;
    }
    let cnot = g.cnot_errors();
    let mut weight: f64 = (0..inside.len())
        .filter(|&q| inside[q])
        .flat_map(|q| {
            g.adjacency(q)
                .iter()
                .filter(move |&&(nb, _)| nb > q)
                .map(|&(nb, l)| (nb, l))
        })
        .filter(|&(nb, _)| inside[nb])
        .map(|(_, l)| 1.0 - cnot[l])
        .sum();
    while len > size {
        let mut best: Option<(f64, usize)> = None;
        for q in (0..inside.len()).rev() {
            if !inside[q] || !connected(g, &inside, Some(q)) {
                continue;
            }
            let lost: f64 = g
                .adjacency(q)
                .iter()
                .filter(|&&(nb, _)| inside[nb])
                .map(|&(_, l)| 1.0 - cnot[l])
                .sum();
            let score = weight - lost;
            if best.is_none_or(|(s, _)| score > s) {
                best = Some((score, q));
            }
        }
        let (score, q) = best?;
        inside[q] = false;
        weight = score;
        len -= 1;
    }
    Some((0..inside.len()).filter(|&q| inside[q]).collect())
}

fn connected(g: &HardwareGraph, inside: &[bool], without: Option<usize>) -> bool {
    let member = |q: usize| inside[q] && Some(q) != without;
    let Some(start) = (0..inside.len()).find(|&q| member(q)) else {
        return false;
    };
    let total = (0..inside.len()).filter(|&q| member(q)).count();
    let mut seen = vec![false; inside.len()];
    seen[start] = true;
    let mut stack = vec![start];
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &(v, _) in g.adjacency(u) {
            if member(v) && !seen[v] {
                seen[v] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    count == total
}
