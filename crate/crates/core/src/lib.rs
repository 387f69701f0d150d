//! Community-based partitioning of multi-programmed quantum devices.
//!
//! A device is a coupling map with calibrated error rates
//! ([`HardwareGraph`]). Louvain communities over the error-weighted map form
//! a [`HierarchyTree`] that the allocators draw partitions from, scored by
//! the connectivity and reliability index ([`cri`]).

pub mod allocators;
pub mod circuits;
pub mod community;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod routing;
pub mod secure;
pub mod topology;

pub use allocators::{
    allocate_attractor, allocate_comdap, allocate_comdap_padded, allocate_cri_greedy, check_plan, densest_subset,
    AllocationPlan, CriGreedyConfig, Method, Partition,
};
pub use circuits::{load_qasm, parse_qasm, Gate, InteractionGraph, ProgramProfile};
pub use community::{build_hierarchy, find_candidates, HierarchyConfig, HierarchyTree, TreeNode};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentConfig, ExperimentReport, QueueSpec};
pub use metrics::{cfm, cri, cri_of_set, cri_single, PartitionMetrics, DEFAULT_ALPHA};
pub use routing::{initial_mapping, route, Mapping, RoutingReport};
pub use secure::{CrosstalkModel, Padding};
pub use topology::{
    generate_topology, load_snapshot, save_snapshot, ErrorProfile, HardwareGraph, Link, PartitionView, QubitId,
    TopologyKind,
};
