//! Fixtures shared by the criterion benchmarks.

use qpart_core::circuits::corpus;
use qpart_core::experiment::{make_queues, QueueSpec, DEFAULT_QUEUE_DEPTH};
use qpart_core::{generate_topology, ErrorProfile, HardwareGraph, TopologyKind};

pub fn heavy_hex(seed: u64) -> HardwareGraph {
    generate_topology(TopologyKind::HeavyHex27, seed, ErrorProfile::default()).expect("template generates")
}

pub fn queues(count: u64, device_size: usize) -> Vec<QueueSpec> {
    let c = corpus();
    (0..count)
        .map(|s| make_queues(&c, DEFAULT_QUEUE_DEPTH, s, device_size))
        .collect()
}
