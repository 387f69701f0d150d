//! `qpart`: build community trees, score partitions, allocate queues, route
//! programs and run benchmark sweeps from the command line.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Settings;

#[derive(Parser, Debug)]
#[command(
    name = "qpart",
    version,
    about = "Community-based multi-programming allocation for quantum devices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the community hierarchy tree of a device.
    Tree {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        tree: TreeOpts,
        /// Output file for the tree JSON (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print density, compactness, mean errors and CRI of a qubit set.
    Metrics {
        #[command(flatten)]
        common: Common,
        /// Comma-separated physical qubit indices.
        #[arg(long, value_delimiter = ',', required = true)]
        qubits: Vec<usize>,
        /// Weight of the error term in CRI.
        #[arg(long)]
        alpha: Option<f64>,
        /// Print JSON instead of a CSV record.
        #[arg(long)]
        json: bool,
        /// Output file (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Allocate a program queue onto a device.
    Allocate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        tree: TreeOpts,
        #[command(flatten)]
        crosstalk: CrosstalkOpts,
        /// Queue file (JSON).
        #[arg(long)]
        queue: PathBuf,
        /// attractor, cri, comdap, secure-general or secure-smart.
        #[arg(long)]
        method: Option<String>,
        /// Subset enumeration cap for the cri method before falling back to sampling.
        #[arg(long)]
        enum_cap: Option<usize>,
        /// Weight of the error term in CRI.
        #[arg(long)]
        alpha: Option<f64>,
        /// Reuse a tree written by `qpart tree` instead of building one.
        #[arg(long = "tree")]
        tree_file: Option<PathBuf>,
        /// Output file for the plan JSON (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Map and route every partition of a plan.
    Route {
        #[command(flatten)]
        common: Common,
        /// Plan written by `qpart allocate`.
        #[arg(long)]
        plan: PathBuf,
        /// The queue file the plan was made from.
        #[arg(long)]
        queue: PathBuf,
        /// Output file for the routing JSON (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the allocation benchmark and write CSV reports.
    Bench {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        tree: TreeOpts,
        #[command(flatten)]
        crosstalk: CrosstalkOpts,
        /// Comma-separated backends: template names or snapshot paths.
        #[arg(long, value_delimiter = ',')]
        backends: Vec<String>,
        /// Number of synthetic queues.
        #[arg(long, default_value_t = 10)]
        queues: u64,
        /// Seed of the first synthetic queue; queue i uses seed + i.
        #[arg(long, default_value_t = 0)]
        queue_seed: u64,
        /// Minimum number of programs per synthetic queue.
        #[arg(long, default_value_t = qpart_core::experiment::DEFAULT_QUEUE_DEPTH)]
        queue_depth: usize,
        /// Extra queue files, benchmarked alongside the synthetic queues.
        #[arg(long = "queue-file")]
        queue_files: Vec<PathBuf>,
        /// `all` or a comma-separated list of methods.
        #[arg(long, default_value = "attractor,cri,comdap")]
        methods: String,
        /// Comma-separated run seeds (overrides --seed).
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Subset enumeration cap for the cri method before falling back to sampling.
        #[arg(long)]
        enum_cap: Option<usize>,
        /// Weight of the error term in CRI.
        #[arg(long)]
        alpha: Option<f64>,
        /// Time each allocation this many times and keep the fastest.
        #[arg(long, default_value_t = 1)]
        timing_repeats: usize,
        /// Skip routing.
        #[arg(long)]
        no_route: bool,
        /// Report directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic calibration snapshot.
    GenBackend {
        /// line-N, ring-N, grid-RxC or heavy-hex-27.
        #[arg(long)]
        template: String,
        /// Seed for the sampled error rates.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CNOT error range as lo,hi.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        cnot_error: Option<Vec<f64>>,
        /// Readout error range as lo,hi.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        readout_error: Option<Vec<f64>>,
        /// Output snapshot file (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a random crosstalk model for a device.
    GenCrosstalk {
        #[command(flatten)]
        common: Common,
        /// Number of crosstalk-prone one-hop link pairs.
        #[arg(long)]
        k: usize,
        /// Correlated errors above this multiple of the baseline are significant.
        #[arg(long)]
        threshold_factor: Option<f64>,
        /// Output model file (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML settings file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Calibration snapshot path or template name (heavy-hex-27, line-N, ring-N, grid-RxC).
    #[arg(long)]
    backend: Option<String>,
    /// Seed for calibrations generated from a template.
    #[arg(long)]
    calibration_seed: Option<u64>,
    /// Run seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Manifest path (defaults to a sidecar next to --out).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct TreeOpts {
    /// Louvain resolution.
    #[arg(long)]
    gamma: Option<f64>,
    /// Weight Louvain edges by raw CNOT error instead of fidelity.
    #[arg(long)]
    raw_error_weights: bool,
    /// Communities this small are split straight into single qubits.
    #[arg(long)]
    max_leaf: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct CrosstalkOpts {
    /// Crosstalk model file for secure-smart.
    #[arg(long)]
    crosstalk: Option<PathBuf>,
    /// Random crosstalk models: k=K[,count=C][,seed=S]; k may be a range A..B.
    #[arg(long)]
    crosstalk_random: Option<String>,
    /// Significance threshold as a multiple of the baseline error.
    #[arg(long)]
    threshold_factor: Option<f64>,
}

impl Common {
    fn settings(&self) -> Settings {
        Settings {
            backend: self.backend.clone(),
            calibration_seed: self.calibration_seed,
            seed: self.seed,
            ..Settings::default()
        }
    }
}

impl TreeOpts {
    fn apply(&self, s: Settings) -> Settings {
        Settings {
            gamma: self.gamma,
            max_leaf: self.max_leaf,
            raw_error_weights: self.raw_error_weights.then_some(true),
            ..Settings::default()
        }
        .over(s)
    }
}

impl CrosstalkOpts {
    fn apply(&self, s: Settings) -> Settings {
        Settings {
            crosstalk: self.crosstalk.clone(),
            crosstalk_random: self.crosstalk_random.clone(),
            threshold_factor: self.threshold_factor,
            ..Settings::default()
        }
        .over(s)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for filesystem failures, 1 for everything else.
fn exit_code(e: &anyhow::Error) -> u8 {
    let io = e.chain().any(|c| {
        c.is::<std::io::Error>()
            || c.downcast_ref::<qpart_core::Error>()
                .is_some_and(qpart_core::Error::is_io)
    });
    if io {
        2
    } else {
        1
    }
}
