use std::ops::ControlFlow;

use crate::topology::HardwareGraph;

/// Visits every connected set of `k` qubits drawn from `allowed`, each
/// exactly once. Sets arrive unsorted. Returns `Break` if the visitor
/// stopped early.
pub fn for_each_connected_subset<F>(g: &HardwareGraph, allowed: &[bool], k: usize, mut visit: F) -> ControlFlow<()>
where
    F: FnMut(&[usize]) -> ControlFlow<()>,
{
    let n = g.qubit_count();
    if k == 0 || k > n {
        return ControlFlow::Continue(());
    }
    let mut esu = Esu {
        g,
        allowed,
        k,
        mark: vec![0u32; n],
        sub: Vec::with_capacity(k),
    };
    for root in 0..n {
        if !allowed[root] {
            continue;
        }
        esu.sub.push(root);
        esu.cover(root, 1);
        let ext: Vec<usize> = g
            .adjacency(root)
            .iter()
            .map(|&(nb, _)| nb)
            .filter(|&nb| nb > root && allowed[nb])
            .collect();
        let flow = esu.extend(root, ext, &mut visit);
        esu.cover(root, -1);
        esu.sub.pop();
        flow?;
    }
    ControlFlow::Continue(())
}

/// Enumeration of connected induced subgraphs by exclusive-neighbourhood
/// extension; `mark[u]` counts members of the current set that are `u` or
/// adjacent to `u`.
struct Esu<'a> {
    g: &'a HardwareGraph,
    allowed: &'a [bool],
    k: usize,
    mark: Vec<u32>,
    sub: Vec<usize>,
}

impl Esu<'_> {
    fn cover(&mut self, w: usize, delta: i32) {
        let apply = |m: &mut u32| *m = (*m as i32 + delta) as u32;
        apply(&mut self.mark[w]);
        for &(nb, _) in self.g.adjacency(w) {
            apply(&mut self.mark[nb]);
        }
    }

    fn extend<F>(&mut self, root: usize, mut ext: Vec<usize>, visit: &mut F) -> ControlFlow<()>
    where
        F: FnMut(&[usize]) -> ControlFlow<()>,
    {
        if self.sub.len() == self.k {
            return visit(&self.sub);
        }
        while let Some(w) = ext.pop() {
            let mut next = ext.clone();
            for &(u, _) in self.g.adjacency(w) {
                if u > root && self.allowed[u] && self.mark[u] == 0 {
                    next.push(u);
                }
            }
            self.sub.push(w);
            self.cover(w, 1);
            let flow = self.extend(root, next, visit);
            self.cover(w, -1);
            self.sub.pop();
            flow?;
        }
        ControlFlow::Continue(())
    }
}
