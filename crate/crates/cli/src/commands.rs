use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use qpart_core::allocators::{
    allocate_attractor, allocate_comdap_padded, allocate_cri_greedy, check_plan, AllocationPlan, CriGreedyConfig,
    Method,
};
use qpart_core::circuits::corpus;
use qpart_core::community::{build_hierarchy, HierarchyConfig, HierarchyTree};
use qpart_core::experiment::{make_queues, run_experiment, write_report, CrosstalkPlan, ExperimentConfig, QueueSpec};
use qpart_core::metrics::partition_metrics;
use qpart_core::routing::{initial_mapping, route};
use qpart_core::secure::{check_security, generate_crosstalk_configs, CrosstalkModel, Padding};
use qpart_core::topology::{
    generate_topology, load_snapshot, subgraph, ErrorProfile, HardwareGraph, QubitId, TopologyKind,
};
use qpart_core::RoutingReport;

use crate::config::{CrosstalkSource, RunConfig, Settings};
use crate::{Command, Common};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Tree { common, tree, out } => {
            let cfg = resolve(&common, tree.apply(common.settings()))?;
            cmd_tree(&common, cfg, out)
        }
        Command::Metrics {
            common,
            qubits,
            alpha,
            json,
            out,
        } => {
            let s = Settings {
                alpha,
                ..Settings::default()
            }
            .over(common.settings());
            let cfg = resolve(&common, s)?;
            cmd_metrics(&common, cfg, &qubits, json, out)
        }
        Command::Allocate {
            common,
            tree,
            crosstalk,
            queue,
            method,
            enum_cap,
            alpha,
            tree_file,
            out,
        } => {
            let s = Settings {
                method,
                enum_cap,
                alpha,
                ..Settings::default()
            }
            .over(crosstalk.apply(tree.apply(common.settings())));
            let cfg = resolve(&common, s)?;
            cmd_allocate(&common, cfg, &queue, tree_file.as_deref(), out)
        }
        Command::Route {
            common,
            plan,
            queue,
            out,
        } => {
            let cfg = resolve(&common, common.settings())?;
            cmd_route(&common, cfg, &plan, &queue, out)
        }
        Command::Bench {
            common,
            tree,
            crosstalk,
            backends,
            queues,
            queue_seed,
            queue_depth,
            queue_files,
            methods,
            seeds,
            enum_cap,
            alpha,
            timing_repeats,
            no_route,
            out,
        } => {
            let s = Settings {
                seeds,
                enum_cap,
                alpha,
                ..Settings::default()
            }
            .over(crosstalk.apply(tree.apply(common.settings())));
            let cfg = resolve(&common, s)?;
            let bench = Bench {
                backends,
                queues,
                queue_seed,
                queue_depth,
                queue_files,
                methods: parse_methods(&methods)?,
                timing_repeats,
                route: !no_route,
            };
            cmd_bench(cfg, bench, out)
        }
        Command::GenBackend {
            template,
            seed,
            cnot_error,
            readout_error,
            out,
        } => cmd_gen_backend(&template, seed, cnot_error, readout_error, out),
        Command::GenCrosstalk {
            common,
            k,
            threshold_factor,
            out,
        } => {
            let s = Settings {
                threshold_factor,
                ..Settings::default()
            }
            .over(common.settings());
            let cfg = resolve(&common, s)?;
            cmd_gen_crosstalk(&common, cfg, k, out)
        }
    }
}

fn resolve(common: &Common, flags: Settings) -> Result<RunConfig> {
    RunConfig::resolve(flags, common.config.as_deref())
}

/// Template names win unless a file with that name exists.
fn load_backend(spec: &str, calibration_seed: u64) -> Result<HardwareGraph> {
    match spec.parse::<TopologyKind>() {
        Ok(kind) if !Path::new(spec).exists() => {
            Ok(generate_topology(kind, calibration_seed, ErrorProfile::default())?)
        }
        _ => Ok(load_snapshot(spec)?),
    }
}

fn backend(cfg: &RunConfig) -> Result<HardwareGraph> {
    load_backend(cfg.backend()?, cfg.calibration_seed)
}

fn hierarchy_config(cfg: &RunConfig) -> HierarchyConfig {
    HierarchyConfig {
        gamma: cfg.gamma,
        seed: cfg.seeds[0],
        max_leaf_community: cfg.max_leaf,
        alpha: cfg.alpha,
        weighting: cfg.weighting,
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("failed to read {}", path.display()))
}

/// Refuses to write over any input file.
fn guard(out: Option<&Path>, inputs: &[&Path]) -> Result<()> {
    let Some(out) = out else { return Ok(()) };
    let Ok(target) = out.canonicalize() else {
        return Ok(());
    };
    for input in inputs {
        if input.canonicalize().is_ok_and(|p| p == target) {
            bail!("output {} would overwrite an input file", out.display());
        }
    }
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("failed to create {}", dir.display()))?;
            }
            let mut text = text.to_string();
            if !text.ends_with('\n') {
                text.push('\n');
            }
            std::fs::write(path, text).with_context(|| format!("failed to write {}", path.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).context("failed to write to stdout")?;
            if !text.ends_with('\n') {
                stdout.write_all(b"\n").context("failed to write to stdout")?;
            }
            Ok(())
        }
    }
}

fn sidecar(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

fn manifest(command: &str, cfg: &RunConfig, inputs: &[&Path], summary: Value) -> Value {
    json!({
        "tool": "qpart",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": cfg,
        "inputs": inputs,
        "summary": summary,
    })
}

/// Writes the payload, then the manifest beside it (or where `--manifest` says).
fn finish(
    common: &Common,
    mut cfg: RunConfig,
    command: &str,
    out: Option<PathBuf>,
    inputs: &[&Path],
    payload: &str,
    summary: Value,
) -> Result<()> {
    guard(out.as_deref(), inputs)?;
    if let Some(m) = &common.manifest {
        guard(Some(m), inputs)?;
    }
    emit(out.as_deref(), payload)?;
    let target = common.manifest.clone().or_else(|| out.as_deref().map(sidecar));
    if let Some(path) = target {
        cfg.outputs = out.into_iter().collect();
        let text = serde_json::to_string_pretty(&manifest(command, &cfg, inputs, summary))?;
        emit(Some(&path), &text)?;
    }
    Ok(())
}

fn backend_input(cfg: &RunConfig) -> Option<&Path> {
    let spec = cfg.backend.as_deref()?;
    let p = Path::new(spec);
    p.exists().then_some(p)
}

fn cmd_tree(common: &Common, cfg: RunConfig, out: Option<PathBuf>) -> Result<()> {
    let g = backend(&cfg)?;
    let tree = build_hierarchy(&g, &hierarchy_config(&cfg))?;
    eprintln!(
        "{}: {} tree nodes over {} levels",
        g.calibration_id(),
        tree.len(),
        tree.depth()
    );
    let summary = json!({
        "calibration_id": g.calibration_id(),
        "nodes": tree.len(),
        "depth": tree.depth(),
    });
    let inputs: Vec<&Path> = backend_input(&cfg).into_iter().collect();
    finish(common, cfg.clone(), "tree", out, &inputs, &tree.to_json(), summary)
}

fn cmd_metrics(common: &Common, cfg: RunConfig, qubits: &[usize], as_json: bool, out: Option<PathBuf>) -> Result<()> {
    let g = backend(&cfg)?;
    let set: BTreeSet<QubitId> = qubits.iter().copied().map(QubitId).collect();
    if set.len() != qubits.len() {
        bail!("--qubits lists a qubit more than once");
    }
    let view = subgraph(&g, &set)?;
    let m = partition_metrics(&view, &g, cfg.alpha)?;
    let list: Vec<String> = set.iter().map(|q| q.index().to_string()).collect();
    let text = if as_json {
        serde_json::to_string_pretty(&json!({ "qubits": set, "metrics": m }))?
    } else {
        format!(
            "qubits,density,compactness,avg_cnot_error,avg_readout_error,cri,alpha\n{},{},{},{},{},{},{}\n",
            list.join(" "),
            m.density,
            m.compactness,
            m.avg_cnot_error,
            m.avg_readout_error,
            m.cri,
            m.alpha
        )
    };
    let inputs: Vec<&Path> = backend_input(&cfg).into_iter().collect();
    let summary = serde_json::to_value(m)?;
    finish(common, cfg.clone(), "metrics", out, &inputs, &text, summary)
}

/// The one crosstalk model a single allocation uses.
fn single_model(cfg: &RunConfig, g: &HardwareGraph) -> Result<Option<CrosstalkModel>> {
    let mut model = match &cfg.crosstalk {
        None => return Ok(None),
        Some(CrosstalkSource::File(path)) => CrosstalkModel::load(path, g)?,
        Some(CrosstalkSource::Random(r)) => {
            if r.ks.len() != 1 || r.count != 1 {
                bail!("a single allocation needs one random model: use k=K,count=1");
            }
            generate_crosstalk_configs(g, r.ks[0], 1, r.seed)?.remove(0)
        }
    };
    if cfg.threshold_overridden {
        model.threshold_factor = cfg.threshold_factor;
    }
    Ok(Some(model))
}

fn load_tree(path: &Path, g: &HardwareGraph) -> Result<HierarchyTree> {
    HierarchyTree::from_json(&read(path)?, g).with_context(|| format!("invalid tree file {}", path.display()))
}

fn cmd_allocate(
    common: &Common,
    cfg: RunConfig,
    queue_path: &Path,
    tree_file: Option<&Path>,
    out: Option<PathBuf>,
) -> Result<()> {
    let g = backend(&cfg)?;
    let queue = QueueSpec::load(queue_path)?;
    let programs = queue.ordered();
    let method = cfg.method.unwrap_or(Method::Comdap);
    let model = single_model(&cfg, &g)?;
    if model.is_some() && method != Method::ComdapSecureSmart {
        eprintln!("warning: crosstalk model is only used by secure-smart; ignoring it");
    }
    let plan = match method {
        Method::Attractor => allocate_attractor(&programs, &g)?,
        Method::CriGreedy => allocate_cri_greedy(
            &programs,
            &g,
            &CriGreedyConfig {
                enum_cap: cfg.enum_cap,
                seed: cfg.seeds[0],
                alpha: cfg.alpha,
            },
        )?,
        Method::Comdap | Method::ComdapSecureGeneral | Method::ComdapSecureSmart => {
            let tree = match tree_file {
                Some(p) => load_tree(p, &g)?,
                None => build_hierarchy(&g, &hierarchy_config(&cfg))?,
            };
            let empty = CrosstalkModel::default();
            let padding = match method {
                Method::Comdap => Padding::None,
                Method::ComdapSecureGeneral => Padding::General,
                _ => {
                    if model.is_none() {
                        eprintln!("warning: secure-smart without a crosstalk model pads nothing");
                    }
                    Padding::Smart(model.as_ref().unwrap_or(&empty))
                }
            };
            allocate_comdap_padded(&programs, &tree, &g, padding)?
        }
    };
    check_plan(&plan, &programs, &g).map_err(|e| anyhow!("plan failed its consistency check: {e}"))?;
    if let (Method::ComdapSecureSmart, Some(m)) = (method, &model) {
        check_security(&plan, m).map_err(|e| anyhow!("plan failed its security check: {e}"))?;
    }
    eprintln!(
        "{}: placed {}/{} programs with {}, utilization {:.3}",
        queue.name,
        plan.partitions.len(),
        programs.len(),
        method.cli_name(),
        plan.utilization
    );
    let summary = json!({
        "queue": queue.name,
        "placed": plan.partitions.len(),
        "unallocated": plan.unallocated.len(),
        "utilization": plan.utilization,
    });
    let mut inputs: Vec<&Path> = backend_input(&cfg).into_iter().collect();
    inputs.push(queue_path);
    inputs.extend(tree_file);
    if let Some(CrosstalkSource::File(p)) = &cfg.crosstalk {
        inputs.push(p);
    }
    let mut cfg2 = cfg.clone();
    cfg2.method = Some(method);
    finish(common, cfg2, "allocate", out, &inputs, &plan.to_json(), summary)
}

#[derive(Serialize)]
struct RoutedPartition<'a> {
    program: &'a str,
    program_index: usize,
    qubits: &'a [QubitId],
    /// `mapping[l]` is the physical qubit hosting logical qubit `l`.
    mapping: Vec<QubitId>,
    #[serde(flatten)]
    report: RoutingReport,
}

fn cmd_route(common: &Common, cfg: RunConfig, plan_path: &Path, queue_path: &Path, out: Option<PathBuf>) -> Result<()> {
    let g = backend(&cfg)?;
    let plan = AllocationPlan::from_json(&read(plan_path)?)
        .with_context(|| format!("invalid plan {}", plan_path.display()))?;
    let queue = QueueSpec::load(queue_path)?;
    let programs = queue.ordered();
    check_plan(&plan, &programs, &g).map_err(|e| anyhow!("plan does not fit this queue and backend: {e}"))?;
    let mut routed = Vec::with_capacity(plan.partitions.len());
    for part in &plan.partitions {
        let program = &programs[part.program_index];
        if program.name != part.program {
            bail!(
                "plan places `{}` at queue position {}, but the queue has `{}` there",
                part.program,
                part.program_index,
                program.name
            );
        }
        let mapping = initial_mapping(program, &part.qubits, &g)?;
        let report = route(program, &mapping, &part.qubits, &g)?;
        routed.push(RoutedPartition {
            program: &part.program,
            program_index: part.program_index,
            qubits: &part.qubits,
            mapping: mapping.physical,
            report,
        });
    }
    let mean = |f: fn(&RoutingReport) -> f64| {
        (!routed.is_empty()).then(|| routed.iter().map(|r| f(&r.report)).sum::<f64>() / routed.len() as f64)
    };
    let summary = json!({
        "programs": routed.len(),
        "swaps": routed.iter().map(|r| r.report.swaps_inserted).sum::<usize>(),
        "mean_delta_cx_ratio": mean(|r| r.delta_cx_ratio),
        "mean_delta_depth_ratio": mean(|r| r.delta_depth_ratio),
    });
    eprintln!("routed {} programs, {} swaps", routed.len(), summary["swaps"]);
    let text = serde_json::to_string_pretty(&json!({ "method": plan.method, "programs": routed }))?;
    let mut inputs: Vec<&Path> = backend_input(&cfg).into_iter().collect();
    inputs.extend([plan_path, queue_path]);
    finish(common, cfg.clone(), "route", out, &inputs, &text, summary)
}

struct Bench {
    backends: Vec<String>,
    queues: u64,
    queue_seed: u64,
    queue_depth: usize,
    queue_files: Vec<PathBuf>,
    methods: Vec<Method>,
    timing_repeats: usize,
    route: bool,
}

fn parse_methods(s: &str) -> Result<Vec<Method>> {
    if s.trim() == "all" {
        return Ok(Method::ALL.to_vec());
    }
    let mut out = Vec::new();
    for name in s.split(',').map(str::trim).filter(|n| !n.is_empty()) {
        let m: Method = name.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        bail!("--methods names no method");
    }
    Ok(out)
}

fn cmd_bench(cfg: RunConfig, bench: Bench, out: PathBuf) -> Result<()> {
    let specs = if bench.backends.is_empty() {
        vec![cfg.backend.clone().unwrap_or_else(|| "heavy-hex-27".into())]
    } else {
        bench.backends.clone()
    };
    let backends = specs
        .iter()
        .map(|s| load_backend(s, cfg.calibration_seed))
        .collect::<Result<Vec<_>>>()?;
    let device = backends.iter().map(HardwareGraph::qubit_count).max().unwrap_or(0);
    let corpus = corpus();
    let mut queues: Vec<QueueSpec> = (0..bench.queues)
        .map(|i| make_queues(&corpus, bench.queue_depth, bench.queue_seed + i, device))
        .collect();
    for path in &bench.queue_files {
        queues.push(QueueSpec::load(path)?);
    }
    let crosstalk = match &cfg.crosstalk {
        None => CrosstalkPlan::None,
        Some(CrosstalkSource::File(p)) => {
            let mut m = CrosstalkModel::from_json(&read(p)?)?;
            if cfg.threshold_overridden {
                m.threshold_factor = cfg.threshold_factor;
            }
            CrosstalkPlan::Fixed(m)
        }
        Some(CrosstalkSource::Random(r)) => {
            if cfg.threshold_overridden {
                eprintln!("warning: --threshold-factor does not apply to generated crosstalk models");
            }
            CrosstalkPlan::Sweep {
                ks: r.ks.clone(),
                count: r.count,
                seed: r.seed,
            }
        }
    };
    let exp = ExperimentConfig {
        methods: bench.methods.clone(),
        seeds: cfg.seeds.clone(),
        hierarchy: hierarchy_config(&cfg),
        enum_cap: cfg.enum_cap,
        crosstalk,
        route: bench.route,
        timing_repeats: bench.timing_repeats.max(1),
    };
    let report = run_experiment(&backends, &queues, &exp)?;
    let mut cfg = cfg;
    cfg.outputs = vec![out.clone()];
    let run_config = json!({
        "tool": "qpart",
        "version": env!("CARGO_PKG_VERSION"),
        "command": "bench",
        "config": cfg,
        "backends": specs,
        "queues": bench.queues,
        "queue_seed": bench.queue_seed,
        "queue_depth": bench.queue_depth,
        "queue_files": bench.queue_files,
        "experiment": exp,
    });
    write_report(&report, &queues, &run_config, &out)?;
    for &m in &bench.methods {
        let Some(u) = report.mean_utilization(m) else { continue };
        let dcx = report
            .mean_delta_cx(m)
            .map_or_else(|| "-".to_string(), |d| format!("{d:.3}"));
        let t = report.median_alloc_seconds(m).unwrap_or(0.0);
        eprintln!(
            "{:<15} utilization {u:.3}  mean dCX {dcx}  median alloc {:.1}us",
            m.cli_name(),
            t * 1e6
        );
    }
    eprintln!("wrote {} runs to {}", report.runs.len(), out.display());
    if !report.check_failures.is_empty() {
        for f in &report.check_failures {
            eprintln!("check failed: {f}");
        }
        bail!("{} consistency checks failed", report.check_failures.len());
    }
    Ok(())
}

fn range(v: Option<Vec<f64>>, default: (f64, f64)) -> (f64, f64) {
    match v.as_deref() {
        Some([lo, hi]) => (*lo, *hi),
        _ => default,
    }
}

fn cmd_gen_backend(
    template: &str,
    seed: u64,
    cnot: Option<Vec<f64>>,
    readout: Option<Vec<f64>>,
    out: Option<PathBuf>,
) -> Result<()> {
    let kind: TopologyKind = template.parse()?;
    let d = ErrorProfile::default();
    let profile = ErrorProfile {
        cnot: range(cnot, d.cnot),
        readout: range(readout, d.readout),
    };
    let g = generate_topology(kind, seed, profile)?;
    emit(out.as_deref(), &g.to_snapshot().to_json())?;
    if let Some(out) = out {
        let m = json!({
            "tool": "qpart",
            "version": env!("CARGO_PKG_VERSION"),
            "command": "gen-backend",
            "config": { "template": template, "seed": seed, "profile": profile },
            "outputs": [&out],
        });
        emit(Some(&sidecar(&out)), &serde_json::to_string_pretty(&m)?)?;
    }
    Ok(())
}

fn cmd_gen_crosstalk(common: &Common, cfg: RunConfig, k: usize, out: Option<PathBuf>) -> Result<()> {
    let g = backend(&cfg)?;
    let mut model = generate_crosstalk_configs(&g, k, 1, cfg.seeds[0])?.remove(0);
    model.threshold_factor = cfg.threshold_factor;
    let summary = json!({ "calibration_id": g.calibration_id(), "k": k });
    let inputs: Vec<&Path> = backend_input(&cfg).into_iter().collect();
    finish(
        common,
        cfg.clone(),
        "gen-crosstalk",
        out,
        &inputs,
        &model.to_json(),
        summary,
    )
}
