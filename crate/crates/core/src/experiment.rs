//! Fair-share queues, the multi-queue experiment harness, and its CSV/JSON
//! reports.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::allocators::{
    allocate_attractor, allocate_comdap_padded, allocate_cri_greedy, check_plan, AllocationPlan, CriGreedyConfig,
    Method, DEFAULT_ENUM_CAP,
};
use crate::circuits::{corpus_program, load_qasm, ProgramProfile};
use crate::community::{build_hierarchy, HierarchyConfig, HierarchyTree};
use crate::error::{Error, Result};
use crate::routing::{map_and_route, RoutingReport, CX_PER_SWAP};
use crate::secure::{check_security, generate_crosstalk_configs, CrosstalkModel, Padding};
use crate::topology::HardwareGraph;

pub const DEFAULT_QUEUE_DEPTH: usize = 9;
pub const DEFAULT_GROUP: &str = "default";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueueEntry {
    pub program: ProgramProfile,
    pub group: String,
    pub priority: u32,
    pub arrival_index: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueueSpec {
    pub name: String,
    pub entries: Vec<QueueEntry>,
    /// Consumed share per group; missing groups count as 0.
    #[serde(default)]
    pub usage: BTreeMap<String, f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QueueFile {
    #[serde(default)]
    name: Option<String>,
    programs: Vec<QueueFileEntry>,
    #[serde(default)]
    usage: BTreeMap<String, f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QueueFileEntry {
    program: String,
    #[serde(default)]
    group: Option<String>,
    #[serde(default)]
    priority: u32,
    #[serde(default)]
    arrival_index: Option<usize>,
}

impl QueueSpec {
    pub fn new(name: impl Into<String>, entries: Vec<QueueEntry>) -> Result<Self> {
        let q = QueueSpec {
            name: name.into(),
            entries,
            usage: BTreeMap::new(),
        };
        q.validate()?;
        Ok(q)
    }

    /// FIFO queue in a single group.
    pub fn fifo(name: impl Into<String>, programs: Vec<ProgramProfile>) -> Self {
        let entries = programs
            .into_iter()
            .enumerate()
            .map(|(i, p)| QueueEntry {
                program: p.with_arrival(i),
                group: DEFAULT_GROUP.into(),
                priority: 0,
                arrival_index: i,
            })
            .collect();
        QueueSpec {
            name: name.into(),
            entries,
            usage: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for w in self.entries.windows(2) {
            if w[1].arrival_index <= w[0].arrival_index {
                return Err(Error::InvalidArgument(format!(
                    "queue `{}`: arrival indices must strictly increase ({} then {})",
                    self.name, w[0].arrival_index, w[1].arrival_index
                )));
            }
        }
        for (g, s) in &self.usage {
            if !s.is_finite() || *s < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "queue `{}`: group `{g}` has share {s}",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// Reads a queue file. Each `program` is either a bundled benchmark name
    /// or a path to a `.qasm` file relative to the queue file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: QueueFile = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("queue file: {e}")))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let mut entries = Vec::with_capacity(file.programs.len());
        for (i, e) in file.programs.into_iter().enumerate() {
            let arrival = e.arrival_index.unwrap_or(i);
            let program = match corpus_program(&e.program) {
                Some(p) if !e.program.ends_with(".qasm") => p,
                _ => load_qasm(base.join(&e.program))?,
            };
            entries.push(QueueEntry {
                program: program.with_priority(e.priority).with_arrival(arrival),
                group: e.group.unwrap_or_else(|| DEFAULT_GROUP.into()),
                priority: e.priority,
                arrival_index: arrival,
            });
        }
        let name = file.name.unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "queue".into())
        });
        let q = QueueSpec {
            name,
            entries,
            usage: file.usage,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn total_demand(&self) -> usize {
        self.entries.iter().map(|e| e.program.logical_qubits).sum()
    }

    /// Programs in fair-share order using the queue's own usage table.
    pub fn ordered(&self) -> Vec<ProgramProfile> {
        fair_share_order(self, &self.usage)
    }
}

/// Least-consumed group first, FIFO by arrival inside a group and across
/// groups with equal shares.
pub fn fair_share_order(q: &QueueSpec, usage: &BTreeMap<String, f64>) -> Vec<ProgramProfile> {
    let share = |g: &str| usage.get(g).copied().unwrap_or(0.0);
    let mut entries: Vec<&QueueEntry> = q.entries.iter().collect();
    entries.sort_by(|a, b| {
        share(&a.group)
            .total_cmp(&share(&b.group))
            .then(a.arrival_index.cmp(&b.arrival_index))
    });
    entries.into_iter().map(|e| e.program.clone()).collect()
}

/// Random queue of at least `depth` programs drawn from `corpus`, extended
/// until its total demand exceeds `device_size`. Programs are spread over
/// three groups with random shares.
pub fn make_queues(corpus: &[ProgramProfile], depth: usize, seed: u64, device_size: usize) -> QueueSpec {
    assert!(!corpus.is_empty(), "corpus must not be empty");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups = ["a", "b", "c"];
    let mut entries = Vec::new();
    let mut demand = 0;
    while entries.len() < depth || demand <= device_size {
        let p = &corpus[rng.gen_range(0..corpus.len())];
        let i = entries.len();
        demand += p.logical_qubits;
        entries.push(QueueEntry {
            program: p.clone().with_arrival(i),
            group: groups[rng.gen_range(0..groups.len())].into(),
            priority: 0,
            arrival_index: i,
        });
    }
    let usage = groups
        .iter()
        .map(|g| (g.to_string(), rng.gen_range(0.0..1.0)))
        .collect();
    QueueSpec {
        name: format!("queue-seed{seed}"),
        entries,
        usage,
    }
}

/// Crosstalk inputs for the secure methods.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrosstalkPlan {
    /// Smart padding runs with an empty model.
    #[default]
    None,
    Fixed(CrosstalkModel),
    /// `count` random models for every `k`.
    Sweep {
        ks: Vec<usize>,
        count: usize,
        seed: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub hierarchy: HierarchyConfig,
    pub enum_cap: usize,
    pub crosstalk: CrosstalkPlan,
    pub route: bool,
    /// Each allocation is timed this many times and the fastest run kept.
    pub timing_repeats: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            methods: vec![Method::Attractor, Method::CriGreedy, Method::Comdap],
            seeds: vec![0],
            hierarchy: HierarchyConfig::default(),
            enum_cap: DEFAULT_ENUM_CAP,
            crosstalk: CrosstalkPlan::None,
            route: true,
            timing_repeats: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoutedProgram {
    pub program: String,
    pub program_index: usize,
    pub report: RoutingReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub backend: String,
    pub seed: u64,
    pub queue: String,
    pub method: Method,
    /// Crosstalk-prone pair count and config index, for sweep runs.
    pub k: Option<usize>,
    pub config: Option<usize>,
    pub plan: AllocationPlan,
    pub routing: Vec<RoutedProgram>,
    pub alloc_seconds: f64,
}

impl RunRecord {
    pub fn utilization(&self) -> f64 {
        self.plan.utilization
    }

    pub fn mean_delta_cx(&self) -> Option<f64> {
        mean(self.routing.iter().map(|r| r.report.delta_cx_ratio))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeRecord {
    pub backend: String,
    pub seed: u64,
    pub nodes: usize,
    pub depth: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub runs: Vec<RunRecord>,
    pub trees: Vec<TreeRecord>,
    /// Double-entry failures: plan rechecks, security checks, CX accounting.
    pub check_failures: Vec<String>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl ExperimentReport {
    pub fn runs_of(&self, method: Method) -> impl Iterator<Item = &RunRecord> + '_ {
        self.runs.iter().filter(move |r| r.method == method)
    }

    pub fn mean_utilization(&self, method: Method) -> Option<f64> {
        mean(self.runs_of(method).map(RunRecord::utilization))
    }

    pub fn mean_utilization_at(&self, method: Method, k: usize) -> Option<f64> {
        mean(
            self.runs_of(method)
                .filter(|r| r.k == Some(k))
                .map(RunRecord::utilization),
        )
    }

    pub fn mean_delta_cx(&self, method: Method) -> Option<f64> {
        mean(
            self.runs_of(method)
                .flat_map(|r| r.routing.iter().map(|p| p.report.delta_cx_ratio)),
        )
    }

    pub fn median_alloc_seconds(&self, method: Method) -> Option<f64> {
        let mut t: Vec<f64> = self.runs_of(method).map(|r| r.alloc_seconds).collect();
        if t.is_empty() {
            return None;
        }
        t.sort_by(f64::total_cmp);
        let m = t.len() / 2;
        Some(if t.len().is_multiple_of(2) {
            (t[m - 1] + t[m]) / 2.0
        } else {
            t[m]
        })
    }
}

struct Cell<'a> {
    g: &'a HardwareGraph,
    tree: &'a HierarchyTree,
    seed: u64,
    queue: &'a QueueSpec,
    programs: &'a [ProgramProfile],
}

/// Runs every (backend, seed, queue, method) cell, plus one cell per
/// crosstalk config for the smart-padded method.
pub fn run_experiment(
    backends: &[HardwareGraph],
    queues: &[QueueSpec],
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::default();
    if queues.is_empty() {
        return Ok(report);
    }
    for g in backends {
        let sweep: Vec<(Option<usize>, Option<usize>, CrosstalkModel)> = match &cfg.crosstalk {
            CrosstalkPlan::None => vec![(None, None, CrosstalkModel::default())],
            CrosstalkPlan::Fixed(m) => {
                m.validate(g)?;
                vec![(None, None, m.clone())]
            }
            CrosstalkPlan::Sweep { ks, count, seed } => {
                let mut out = Vec::new();
                for &k in ks {
                    let models = generate_crosstalk_configs(g, k, *count, seed.wrapping_add(k as u64))?;
                    out.extend(models.into_iter().enumerate().map(|(i, m)| (Some(k), Some(i), m)));
                }
                out
            }
        };
        for &seed in &cfg.seeds {
            let hcfg = HierarchyConfig { seed, ..cfg.hierarchy };
            let start = Instant::now();
            let tree = build_hierarchy(g, &hcfg)?;
            report.trees.push(TreeRecord {
                backend: g.calibration_id().into(),
                seed,
                nodes: tree.len(),
                depth: tree.depth(),
                seconds: start.elapsed().as_secs_f64(),
            });
            for queue in queues {
                let programs = queue.ordered();
                let cell = Cell {
                    g,
                    tree: &tree,
                    seed,
                    queue,
                    programs: &programs,
                };
                for &method in &cfg.methods {
                    if method == Method::ComdapSecureSmart {
                        for (k, config, model) in &sweep {
                            let rec = run_cell(&cell, method, Padding::Smart(model), cfg, *k, *config, &mut report)?;
                            if let Err(e) = check_security(&rec.plan, model) {
                                report.check_failures.push(format!("{}: {e}", describe(&rec)));
                            }
                            report.runs.push(rec);
                        }
                    } else {
                        let padding = match method {
                            Method::ComdapSecureGeneral => Padding::General,
                            _ => Padding::None,
                        };
                        let rec = run_cell(&cell, method, padding, cfg, None, None, &mut report)?;
                        report.runs.push(rec);
                    }
                }
            }
        }
    }
    Ok(report)
}

fn describe(r: &RunRecord) -> String {
    format!("{}/seed{}/{}/{}", r.backend, r.seed, r.queue, r.method)
}

fn allocate(cell: &Cell<'_>, method: Method, padding: Padding<'_>, cfg: &ExperimentConfig) -> Result<AllocationPlan> {
    match method {
        Method::Attractor => allocate_attractor(cell.programs, cell.g),
        Method::CriGreedy => allocate_cri_greedy(
            cell.programs,
            cell.g,
            &CriGreedyConfig {
                enum_cap: cfg.enum_cap,
                seed: cell.seed,
                alpha: cfg.hierarchy.alpha,
            },
        ),
        Method::Comdap | Method::ComdapSecureGeneral | Method::ComdapSecureSmart => {
            allocate_comdap_padded(cell.programs, cell.tree, cell.g, padding)
        }
    }
}

fn run_cell(
    cell: &Cell<'_>,
    method: Method,
    padding: Padding<'_>,
    cfg: &ExperimentConfig,
    k: Option<usize>,
    config: Option<usize>,
    report: &mut ExperimentReport,
) -> Result<RunRecord> {
    let mut best = f64::INFINITY;
    let mut plan = None;
    for _ in 0..cfg.timing_repeats.max(1) {
        let start = Instant::now();
        let p = allocate(cell, method, padding, cfg)?;
        best = best.min(start.elapsed().as_secs_f64());
        plan = Some(p);
    }
    let plan = plan.expect("at least one allocation ran");
    let mut rec = RunRecord {
        backend: cell.g.calibration_id().into(),
        seed: cell.seed,
        queue: cell.queue.name.clone(),
        method,
        k,
        config,
        plan,
        routing: Vec::new(),
        alloc_seconds: best,
    };
    if let Err(e) = check_plan(&rec.plan, cell.programs, cell.g) {
        report.check_failures.push(format!("{}: {e}", describe(&rec)));
    }
    if cfg.route {
        for part in &rec.plan.partitions {
            let program = &cell.programs[part.program_index];
            let r = map_and_route(program, &part.qubits, cell.g)?;
            if r.cx_after != r.cx_before + CX_PER_SWAP * r.swaps_inserted {
                report
                    .check_failures
                    .push(format!("{}: CX accounting broken for {}", describe(&rec), part.program));
            }
            rec.routing.push(RoutedProgram {
                program: part.program.clone(),
                program_index: part.program_index,
                report: r,
            });
        }
    }
    Ok(rec)
}

#[derive(Serialize)]
struct UtilizationRow<'a> {
    backend: &'a str,
    seed: u64,
    queue: &'a str,
    method: &'static str,
    k: Option<usize>,
    config: Option<usize>,
    utilization: f64,
    allocated: usize,
    unallocated: usize,
    padded: usize,
}

#[derive(Serialize)]
struct CriRow<'a> {
    backend: &'a str,
    seed: u64,
    queue: &'a str,
    method: &'static str,
    k: Option<usize>,
    config: Option<usize>,
    program: &'a str,
    program_index: usize,
    size: usize,
    cri: f64,
}

#[derive(Serialize)]
struct RoutingRow<'a> {
    backend: &'a str,
    seed: u64,
    queue: &'a str,
    method: &'static str,
    k: Option<usize>,
    config: Option<usize>,
    program: &'a str,
    program_index: usize,
    swaps_inserted: usize,
    cx_before: usize,
    cx_after: usize,
    depth_before: usize,
    depth_after: usize,
    delta_cx_ratio: f64,
    delta_depth_ratio: f64,
}

#[derive(Serialize)]
struct TimingRow<'a> {
    backend: &'a str,
    seed: u64,
    queue: &'a str,
    method: &'static str,
    k: Option<usize>,
    config: Option<usize>,
    alloc_seconds: f64,
}

#[derive(Serialize)]
struct MethodSummary {
    method: &'static str,
    runs: usize,
    mean_utilization: Option<f64>,
    mean_delta_cx_ratio: Option<f64>,
    median_alloc_seconds: Option<f64>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    run_config: &'a serde_json::Value,
    backends: Vec<&'a str>,
    queues: Vec<QueueManifest<'a>>,
    trees: &'a [TreeRecord],
    summary: Vec<MethodSummary>,
    check_failures: &'a [String],
    files: [&'static str; 4],
}

#[derive(Serialize)]
struct QueueManifest<'a> {
    name: &'a str,
    programs: Vec<&'a str>,
    total_demand: usize,
}

pub const REPORT_FILES: [&str; 4] = ["utilization.csv", "cri.csv", "routing.csv", "timing.csv"];

/// Writes `manifest.json` and the four CSV tables into `dir`.
pub fn write_report(
    report: &ExperimentReport,
    queues: &[QueueSpec],
    run_config: &serde_json::Value,
    dir: impl AsRef<Path>,
) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let open = |name: &str| {
        let path = dir.join(name);
        csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))
    };
    let mut util = open(REPORT_FILES[0])?;
    let mut cri = open(REPORT_FILES[1])?;
    let mut routing = open(REPORT_FILES[2])?;
    let mut timing = open(REPORT_FILES[3])?;
    for r in &report.runs {
        let method = r.method.report_name();
        let (backend, queue) = (r.backend.as_str(), r.queue.as_str());
        util.serialize(UtilizationRow {
            backend,
            seed: r.seed,
            queue,
            method,
            k: r.k,
            config: r.config,
            utilization: r.plan.utilization,
            allocated: r.plan.partitions.len(),
            unallocated: r.plan.unallocated.len(),
            padded: r.plan.padded_qubits.len(),
        })
        .map_err(|e| csv_err(&dir.join(REPORT_FILES[0]), e))?;
        for p in &r.plan.partitions {
            cri.serialize(CriRow {
                backend,
                seed: r.seed,
                queue,
                method,
                k: r.k,
                config: r.config,
                program: &p.program,
                program_index: p.program_index,
                size: p.qubits.len(),
                cri: p.cri,
            })
            .map_err(|e| csv_err(&dir.join(REPORT_FILES[1]), e))?;
        }
        for rp in &r.routing {
            let x = &rp.report;
            routing
                .serialize(RoutingRow {
                    backend,
                    seed: r.seed,
                    queue,
                    method,
                    k: r.k,
                    config: r.config,
                    program: &rp.program,
                    program_index: rp.program_index,
                    swaps_inserted: x.swaps_inserted,
                    cx_before: x.cx_before,
                    cx_after: x.cx_after,
                    depth_before: x.depth_before,
                    depth_after: x.depth_after,
                    delta_cx_ratio: x.delta_cx_ratio,
                    delta_depth_ratio: x.delta_depth_ratio,
                })
                .map_err(|e| csv_err(&dir.join(REPORT_FILES[2]), e))?;
        }
        timing
            .serialize(TimingRow {
                backend,
                seed: r.seed,
                queue,
                method,
                k: r.k,
                config: r.config,
                alloc_seconds: r.alloc_seconds,
            })
            .map_err(|e| csv_err(&dir.join(REPORT_FILES[3]), e))?;
    }
    for (w, name) in [(util, 0), (cri, 1), (routing, 2), (timing, 3)] {
        let mut w = w;
        w.flush().map_err(|e| Error::io(dir.join(REPORT_FILES[name]), e))?;
    }

    let mut backends: Vec<&str> = report.trees.iter().map(|t| t.backend.as_str()).collect();
    backends.dedup();
    let methods: Vec<Method> = Method::ALL
        .into_iter()
        .filter(|m| report.runs.iter().any(|r| r.method == *m))
        .collect();
    let manifest = Manifest {
        run_config,
        backends,
        queues: queues
            .iter()
            .map(|q| QueueManifest {
                name: &q.name,
                programs: q.entries.iter().map(|e| e.program.name.as_str()).collect(),
                total_demand: q.total_demand(),
            })
            .collect(),
        trees: &report.trees,
        summary: methods
            .into_iter()
            .map(|m| MethodSummary {
                method: m.report_name(),
                runs: report.runs_of(m).count(),
                mean_utilization: report.mean_utilization(m),
                mean_delta_cx_ratio: report.mean_delta_cx(m),
                median_alloc_seconds: report.median_alloc_seconds(m),
            })
            .collect(),
        check_failures: &report.check_failures,
        files: REPORT_FILES,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialization is infallible");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse(format!("{}: {other:?}", path.display())),
    }
}
