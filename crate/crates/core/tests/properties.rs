//! Randomized invariants across every module.

use std::collections::{BTreeSet, HashMap, VecDeque};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qpart_core::allocators::{
    allocate_attractor, allocate_comdap, allocate_comdap_padded, allocate_cri_greedy, AllocationPlan, CriGreedyConfig,
};
use qpart_core::circuits::{interaction_graph, parse_qasm, Gate};
use qpart_core::community::{louvain, modularity, modularity_gain, CommunityPartition, WeightedGraph};
use qpart_core::metrics::{compactness, cri, density, device_score};
use qpart_core::routing::{initial_mapping, route, PhysicalOp, CX_PER_SWAP};
use qpart_core::secure::{check_security, generate_crosstalk_configs, smart_padding, CrosstalkModel, Padding};
use qpart_core::topology::{subgraph, CalibrationSnapshot};
use qpart_core::{
    build_hierarchy, cri_of_set, generate_topology, ErrorProfile, HardwareGraph, HierarchyConfig, ProgramProfile,
    QubitId, TopologyKind,
};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn kind() -> impl Strategy<Value = TopologyKind> {
    prop_oneof![
        (2usize..=14).prop_map(TopologyKind::Line),
        (3usize..=14).prop_map(TopologyKind::Ring),
        (1usize..=4, 2usize..=4).prop_map(|(rows, cols)| TopologyKind::Grid { rows, cols }),
        Just(TopologyKind::HeavyHex27),
    ]
}

fn device() -> impl Strategy<Value = HardwareGraph> {
    (kind(), any::<u64>()).prop_map(|(k, s)| generate_topology(k, s, ErrorProfile::default()).unwrap())
}

/// A random connected set of `k` qubits grown from a random start.
fn grow(g: &HardwareGraph, k: usize, rng: &mut ChaCha8Rng) -> BTreeSet<QubitId> {
    let mut set = BTreeSet::from([QubitId(rng.gen_range(0..g.qubit_count()))]);
    while set.len() < k {
        let frontier: Vec<QubitId> = set
            .iter()
            .flat_map(|&q| g.neighbors(q))
            .filter(|q| !set.contains(q))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if frontier.is_empty() {
            break;
        }
        set.insert(frontier[rng.gen_range(0..frontier.len())]);
    }
    set
}

fn random_queue(rng: &mut ChaCha8Rng, device: usize) -> Vec<ProgramProfile> {
    (0..rng.gen_range(1..=8))
        .map(|i| {
            let n = rng.gen_range(1..=device.min(10));
            let ops: Vec<(usize, usize)> = if n < 2 {
                Vec::new()
            } else {
                (0..rng.gen_range(0..10))
                    .map(|_| {
                        let a = rng.gen_range(0..n);
                        (a, (a + rng.gen_range(1..n)) % n)
                    })
                    .collect()
            };
            ProgramProfile::from_interactions(format!("p{i}"), n, &ops)
        })
        .collect()
}

fn connected(g: &HardwareGraph, qubits: &[QubitId]) -> bool {
    let set: BTreeSet<QubitId> = qubits.iter().copied().collect();
    let mut seen = BTreeSet::from([qubits[0]]);
    let mut stack = vec![qubits[0]];
    while let Some(u) = stack.pop() {
        for v in g.neighbors(u) {
            if set.contains(&v) && seen.insert(v) {
                stack.push(v);
            }
        }
    }
    seen == set
}

fn structural_violations(plan: &AllocationPlan, queue: &[ProgramProfile], g: &HardwareGraph) -> Vec<String> {
    let mut out = Vec::new();
    let mut used = BTreeSet::new();
    for p in &plan.partitions {
        if p.qubits.len() != queue[p.program_index].logical_qubits {
            out.push(format!("{} has the wrong size", p.program));
        }
        for &q in &p.qubits {
            if !used.insert(q) {
                out.push(format!("{q} shared"));
            }
        }
        if !connected(g, &p.qubits) {
            out.push(format!("{} is disconnected", p.program));
        }
        if p.qubits.len() >= 2 && !(p.cri.is_finite() && p.cri > 0.0) {
            out.push(format!("{} has CRI {}", p.program, p.cri));
        }
    }
    if plan.utilization != used.len() as f64 / g.qubit_count() as f64 {
        out.push(format!(
            "utilization {} for {} used qubits",
            plan.utilization,
            used.len()
        ));
    }
    out
}

fn all_plans(queue: &[ProgramProfile], g: &HardwareGraph, model: &CrosstalkModel) -> Vec<AllocationPlan> {
    let tree = build_hierarchy(g, &HierarchyConfig::default()).unwrap();
    vec![
        allocate_attractor(queue, g).unwrap(),
        allocate_cri_greedy(queue, g, &CriGreedyConfig::default()).unwrap(),
        allocate_comdap(queue, &tree, g).unwrap(),
        allocate_comdap_padded(queue, &tree, g, Padding::General).unwrap(),
        allocate_comdap_padded(queue, &tree, g, Padding::Smart(model)).unwrap(),
    ]
}

fn random_crosstalk(g: &HardwareGraph, rng: &mut ChaCha8Rng) -> CrosstalkModel {
    let pairs = qpart_core::secure::one_hop_link_pairs(g).len();
    let k = rng.gen_range(0..=pairs.min(8));
    generate_crosstalk_configs(g, k, 1, rng.gen()).unwrap().remove(0)
}

/// Brute-force modularity over random weighted graphs.
fn weighted_graph(rng: &mut ChaCha8Rng) -> WeightedGraph {
    let n = rng.gen_range(2..=20);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(0.3) {
                edges.push((a, b, rng.gen_range(0.05..1.0)));
            }
        }
    }
    if edges.is_empty() {
        edges.push((0, 1, 0.5));
    }
    WeightedGraph::from_edges((0..n).map(QubitId).collect(), &edges)
}

/// Fewest SWAPs for the program over every start mapping; 0-1 BFS on
/// (placement, next gate).
fn min_swaps(p: &ProgramProfile, partition: &[QubitId], g: &HardwareGraph) -> usize {
    let n = partition.len();
    let adj = |a: usize, b: usize| g.are_adjacent(partition[a], partition[b]);
    let links: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .filter(|&(a, b)| adj(a, b))
        .collect();
    let ops = &p.two_qubit_ops;
    let mut starts: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::new();
        for v in &starts {
            for x in (0..n).filter(|x| !v.contains(x)) {
                let mut w = v.clone();
                w.push(x);
                next.push(w);
            }
        }
        starts = next;
    }
    let mut best: HashMap<(Vec<usize>, usize), usize> = HashMap::new();
    let mut dq = VecDeque::new();
    for s in starts {
        best.insert((s.clone(), 0), 0);
        dq.push_back((s, 0usize, 0usize));
    }
    while let Some((at, i, cost)) = dq.pop_front() {
        if best.get(&(at.clone(), i)).is_some_and(|&c| c < cost) {
            continue;
        }
        if i == ops.len() {
            return cost;
        }
        let (a, b) = ops[i];
        if adj(at[a], at[b]) {
            let key = (at.clone(), i + 1);
            if best.get(&key).is_none_or(|&c| c > cost) {
                best.insert(key, cost);
                dq.push_front((at, i + 1, cost));
            }
            continue;
        }
        for &(x, y) in &links {
            let next: Vec<usize> = at
                .iter()
                .map(|&s| {
                    if s == x {
                        y
                    } else if s == y {
                        x
                    } else {
                        s
                    }
                })
                .collect();
            let key = (next.clone(), i);
            if best.get(&key).is_none_or(|&c| c > cost + 1) {
                best.insert(key, cost + 1);
                dq.push_back((next, i, cost + 1));
            }
        }
    }
    unreachable!("a connected partition routes every program")
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn subgraph_inherits_links_and_errors(g in device(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(1..=g.qubit_count());
        let set = grow(&g, k, &mut rng);
        let view = subgraph(&g, &set).unwrap();
        for (l, &e) in view.links().iter().zip(view.cnot_errors()) {
            let (a, b) = l.endpoints();
            prop_assert!(set.contains(&a) && set.contains(&b));
            prop_assert_eq!(g.cnot_error(a, b).map(f64::to_bits), Some(e.to_bits()));
        }
        let inside = g.links().iter().filter(|l| { let (a, b) = l.endpoints(); set.contains(&a) && set.contains(&b) }).count();
        prop_assert_eq!(view.links().len(), inside);
        for (q, &r) in view.qubits().iter().zip(view.readout_errors()) {
            prop_assert_eq!(g.readout_error(*q).unwrap().to_bits(), r.to_bits());
        }
    }

    #[test]
    fn generation_is_pure_and_snapshots_round_trip(k in kind(), seed in any::<u64>()) {
        let a = generate_topology(k, seed, ErrorProfile::default()).unwrap();
        let b = generate_topology(k, seed, ErrorProfile::default()).unwrap();
        prop_assert_eq!(&a, &b);
        let text = a.to_snapshot().to_json();
        let back = CalibrationSnapshot::from_json(&text).unwrap().into_graph().unwrap();
        prop_assert_eq!(&a, &back);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.json");
        qpart_core::save_snapshot(&a, &path).unwrap();
        prop_assert_eq!(&a, &qpart_core::load_snapshot(&path).unwrap());
    }

    #[test]
    fn whole_device_cri_is_one(g in device(), alpha in 0.0f64..4.0) {
        let all: BTreeSet<QubitId> = g.qubits().collect();
        let view = subgraph(&g, &all).unwrap();
        prop_assert!((cri(&view, &g, alpha).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn lower_errors_raise_partition_score(g in device(), seed in any::<u64>(), alpha in 0.1f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(2..=g.qubit_count());
        let set = grow(&g, k, &mut rng);
        let in_set = |q: QubitId| set.contains(&q);
        let links: Vec<(usize, usize)> = g.links().iter().map(|l| { let (a, b) = l.endpoints(); (a.index(), b.index()) }).collect();
        let cnot: Vec<f64> = g.links().iter().zip(g.cnot_errors()).map(|(l, &e)| {
            let (a, b) = l.endpoints();
            if in_set(a) && in_set(b) { e * 0.5 } else { e }
        }).collect();
        let readout: Vec<f64> = g.qubits().zip(g.readout_errors()).map(|(q, &r)| if in_set(q) { r * 0.5 } else { r }).collect();
        let better = HardwareGraph::new("better", g.qubit_count(), &links, &cnot, &readout).unwrap();
        // The device reference is held fixed: compare un-normalized scores.
        let score = |h: &HardwareGraph| {
            let v = subgraph(h, &set).unwrap();
            cri(&v, h, alpha).unwrap() * device_score(h, alpha).unwrap()
        };
        prop_assert!(score(&better) > score(&g), "{} <= {}", score(&better), score(&g));
    }

    #[test]
    fn density_and_compactness_ranges(g in device(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(2..=g.qubit_count());
        let set = grow(&g, k, &mut rng);
        let view = subgraph(&g, &set).unwrap();
        let n = set.len() as f64;
        let d = density(&view).unwrap();
        prop_assert!(d >= 2.0 / n - 1e-12 && d <= 1.0 + 1e-12, "density {d} for {n} qubits");
        let c = compactness(&view).unwrap();
        prop_assert!(c > 0.0 && c <= 1.0 + 1e-12, "compactness {c}");
    }

    #[test]
    fn simple_paths_have_compactness_one(n in 2usize..=20, seed in any::<u64>()) {
        let g = generate_topology(TopologyKind::Line(n), seed, ErrorProfile::default()).unwrap();
        let all: BTreeSet<QubitId> = g.qubits().collect();
        prop_assert!((compactness(&subgraph(&g, &all).unwrap()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn modularity_gain_matches_brute_force(seed in any::<u64>(), gamma in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = weighted_graph(&mut rng);
        let n = g.node_count();
        let communities = rng.gen_range(1..=n);
        let mut labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..communities)).collect();
        let node = rng.gen_range(0..n);
        let other = (node + rng.gen_range(1..n)) % n;
        // Isolate the node first, then measure the move into `other`'s community.
        labels[node] = communities;
        let alone = CommunityPartition::from_labels(&labels, 0);
        let before = modularity(&g, &alone, gamma).unwrap();
        let gain = modularity_gain(&g, node, alone.assignment[other], &alone, gamma).unwrap();
        labels[node] = labels[other];
        let after = modularity(&g, &CommunityPartition::from_labels(&labels, 0), gamma).unwrap();
        prop_assert!((gain - (after - before)).abs() <= 1e-9, "gain {gain} vs {}", after - before);
    }

    #[test]
    fn louvain_levels_do_not_lose_modularity(seed in any::<u64>(), shuffle in 0u64..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = weighted_graph(&mut rng);
        let levels = louvain(&g, 1.0, shuffle).unwrap();
        let q: Vec<f64> = levels.iter().map(|p| modularity(&g, p, 1.0).unwrap()).collect();
        for w in q.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12, "{q:?}");
        }
    }

    #[test]
    fn hierarchy_nodes_partition_and_stay_connected(g in device(), seed in 0u64..8) {
        let cfg = HierarchyConfig { seed, ..HierarchyConfig::default() };
        let tree = build_hierarchy(&g, &cfg).unwrap();
        let n = g.qubit_count();
        for node in tree.nodes() {
            prop_assert!(connected(&g, &node.qubits));
            if !node.children.is_empty() {
                let mut union = Vec::new();
                for &c in &node.children {
                    union.extend(tree.node(c).qubits.iter().copied());
                }
                union.sort_unstable();
                prop_assert_eq!(&union, &node.qubits, "children do not partition their parent");
            }
        }
        let leaves: BTreeSet<QubitId> = tree.nodes().iter().filter(|t| t.children.is_empty()).map(|t| {
            assert_eq!(t.qubits.len(), 1);
            t.qubits[0]
        }).collect();
        prop_assert_eq!(leaves.len(), n);
        // A qubit sits in exactly one node of each level it reaches.
        for level in 0..=tree.depth() {
            let mut seen = BTreeSet::new();
            for i in tree.level(level) {
                for &q in &tree.node(i).qubits {
                    prop_assert!(seen.insert(q), "{q} twice on level {level}");
                }
            }
        }
    }
}

const QASM_GATES_1: [&str; 6] = ["h", "x", "t", "sdg", "rz(pi/4)", "u3(0.1,0.2,0.3)"];
const QASM_GATES_2: [&str; 4] = ["cx", "CX", "cz", "swap"];

fn qasm_program(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(1..=8);
    let mut s = format!("OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[{n}];\ncreg c[{n}];\n");
    for _ in 0..rng.gen_range(0..30) {
        match rng.gen_range(0..10) {
            0 => s.push_str("barrier q;\n"),
            1 => s.push_str(&format!("measure q[{0}] -> c[{0}];\n", rng.gen_range(0..n))),
            2..=4 => s.push_str(&format!(
                "{} q[{}];\n",
                QASM_GATES_1[rng.gen_range(0..6)],
                rng.gen_range(0..n)
            )),
            // Occasionally out of range, repeated or three-qubit.
            5 => s.push_str(&format!("ccx q[0],q[1],q[{}];\n", rng.gen_range(0..n + 1))),
            _ => {
                let a = rng.gen_range(0..n);
                let b = rng.gen_range(0..n + 1);
                s.push_str(&format!("{} q[{a}],q[{b}];\n", QASM_GATES_2[rng.gen_range(0..4)]));
            }
        }
    }
    s
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn qasm_parser_is_total(seed in any::<u64>(), cut in any::<prop::sample::Index>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let text = qasm_program(&mut rng);
        if let Ok(p) = parse_qasm(&text) {
            let ig = interaction_graph(&p);
            prop_assert_eq!(ig.total_weight(), p.cx_count);
            prop_assert_eq!(p.two_qubit_ops.len(), p.gates.iter().filter(|g| matches!(g, Gate::Two(..))).count());
        }
        // Truncated input must fail cleanly or parse.
        let mut end = cut.index(text.len() + 1);
        while !text.is_char_boundary(end) { end -= 1; }
        let _ = parse_qasm(&text[..end]);
    }

    #[test]
    fn qasm_parser_survives_arbitrary_text(text in "\\PC{0,200}") {
        let _ = parse_qasm(&text);
    }
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn allocators_produce_valid_deterministic_plans(g in device(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let queue = random_queue(&mut rng, g.qubit_count());
        let model = random_crosstalk(&g, &mut rng);
        let plans = all_plans(&queue, &g, &model);
        for plan in &plans {
            let v = structural_violations(plan, &queue, &g);
            prop_assert!(v.is_empty(), "{}: {v:?}", plan.method);
            prop_assert_eq!(plan.partitions.len() + plan.unallocated.len(), queue.len());
        }
        prop_assert_eq!(&plans, &all_plans(&queue, &g, &model));
        prop_assert!(check_security(&plans[4], &model).is_ok(), "smart: {:?}", check_security(&plans[4], &model));
        // General padding is the stricter rule, so its plans pass the smart check too.
        prop_assert!(check_security(&plans[3], &model).is_ok(), "general: {:?}", check_security(&plans[3], &model));
    }

    #[test]
    fn smart_padding_blocks_a_subset_of_general_padding(g in device(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let queue = random_queue(&mut rng, g.qubit_count());
        let model = random_crosstalk(&g, &mut rng);
        let tree = build_hierarchy(&g, &HierarchyConfig::default()).unwrap();
        let plan = allocate_comdap(&queue, &tree, &g).unwrap();
        // Rebuild the plan one partition at a time, comparing the two rules
        // on identical placements.
        let mut partial = AllocationPlan { partitions: Vec::new(), ..plan.clone() };
        for p in &plan.partitions {
            partial.partitions.push(p.clone());
            let used = partial.allocated_qubits();
            let general: BTreeSet<QubitId> = p.qubits.iter()
                .flat_map(|&q| g.neighbors(q))
                .filter(|q| !used.contains(q))
                .collect();
            let smart = smart_padding(&partial, &model, &g);
            prop_assert!(smart.is_subset(&general), "smart {smart:?} general {general:?}");
        }
    }

    #[test]
    fn routing_replays_every_gate_on_adjacent_qubits(g in device(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(1..=g.qubit_count().min(9));
        let set: Vec<QubitId> = grow(&g, k, &mut rng).into_iter().collect();
        let n = set.len();
        let mut gates = Vec::new();
        for _ in 0..rng.gen_range(0..25) {
            if n >= 2 && rng.gen_bool(0.6) {
                let a = rng.gen_range(0..n);
                gates.push(Gate::Two(a, (a + rng.gen_range(1..n)) % n));
            } else {
                gates.push(Gate::Single(rng.gen_range(0..n)));
            }
        }
        let p = ProgramProfile::from_gates("r", n, gates.clone());
        let m = initial_mapping(&p, &set, &g).unwrap();
        let r = route(&p, &m, &set, &g).unwrap();
        prop_assert_eq!(r.cx_after, r.cx_before + CX_PER_SWAP * r.swaps_inserted);
        let mut host = m.physical.clone();
        let mut executed = Vec::new();
        let mut swaps = 0;
        let logical = |host: &[QubitId], q: QubitId| host.iter().position(|&h| h == q).expect("occupied");
        for op in &r.trace {
            match *op {
                PhysicalOp::Swap(a, b) => {
                    prop_assert!(g.are_adjacent(a, b) && set.contains(&a) && set.contains(&b));
                    swaps += 1;
                    for h in host.iter_mut() {
                        if *h == a { *h = b } else if *h == b { *h = a }
                    }
                }
                PhysicalOp::Two(a, b) => {
                    prop_assert!(g.are_adjacent(a, b), "{a}-{b} not adjacent");
                    executed.push(Gate::Two(logical(&host, a), logical(&host, b)));
                }
                PhysicalOp::Single(q) => executed.push(Gate::Single(logical(&host, q))),
            }
        }
        prop_assert_eq!(swaps, r.swaps_inserted);
        prop_assert_eq!(executed, gates);
        if r.swaps_inserted > 0 {
            prop_assert!(r.depth_after >= r.depth_before);
        } else {
            prop_assert_eq!(r.depth_after, r.depth_before);
        }
    }

    #[test]
    fn complete_partitions_never_need_more_swaps_than_paths(n in 2usize..=4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ops: Vec<(usize, usize)> = (0..rng.gen_range(1..10)).map(|_| {
            let a = rng.gen_range(0..n);
            (a, (a + rng.gen_range(1..n)) % n)
        }).collect();
        let p = ProgramProfile::from_interactions("r", n, &ops);
        let path: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        let complete: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        let build = |links: &[(usize, usize)]| {
            HardwareGraph::new("t", n, links, &vec![0.01; links.len()], &vec![0.02; n]).unwrap()
        };
        let (gp, gc) = (build(&path), build(&complete));
        let qubits: Vec<QubitId> = (0..n).map(QubitId).collect();
        let (sp, sc) = (min_swaps(&p, &qubits, &gp), min_swaps(&p, &qubits, &gc));
        prop_assert!(sc <= sp, "complete {sc} > path {sp}");
        // The router never beats the optimum.
        let routed = qpart_core::routing::map_and_route(&p, &qubits, &gp).unwrap();
        prop_assert!(routed.swaps_inserted >= sp);
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn exhaustive_cri_greedy_finds_the_best_subset(seed in any::<u64>(), k in 1usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kind = match rng.gen_range(0..3) {
            0 => TopologyKind::Line(rng.gen_range(5..=10)),
            1 => TopologyKind::Ring(rng.gen_range(5..=10)),
            _ => TopologyKind::Grid { rows: 2, cols: rng.gen_range(3..=5) },
        };
        let g = generate_topology(kind, rng.gen(), ErrorProfile::default()).unwrap();
        let queue = vec![ProgramProfile::from_interactions("p", k, &[])];
        let plan = allocate_cri_greedy(&queue, &g, &CriGreedyConfig::default()).unwrap();
        let mut best = f64::NEG_INFINITY;
        let n = g.qubit_count();
        for mask in 1u32..(1 << n) {
            if mask.count_ones() as usize != k { continue; }
            let set: BTreeSet<QubitId> = (0..n).filter(|&i| mask >> i & 1 == 1).map(QubitId).collect();
            let v: Vec<QubitId> = set.iter().copied().collect();
            if connected(&g, &v) {
                best = best.max(cri_of_set(&set, &g, 1.0).unwrap());
            }
        }
        prop_assert!((plan.partitions[0].cri - best).abs() <= 1e-12, "{} vs {best}", plan.partitions[0].cri);
    }
}
