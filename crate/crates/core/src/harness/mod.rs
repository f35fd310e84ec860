//! Experiment driver: workload, selection, concatenation, install, replay,
//! baselines and the report, plus the CSV artifacts of each stage.

mod config;
pub mod io;
mod metrics;

use std::fs;
use std::path::Path as FsPath;

use rayon::prelude::*;
use thiserror::Error;

pub use config::{ExperimentConfig, DEFAULT_M_MAX, DEFAULT_SELECTION_M_MAX};
pub use io::{ConcatRecord, SimRecord};
pub use metrics::{
    build_report, compare_schemes, emit_ccdf, intermediate_nodes, MetricsReport, ReportInputs, SchemeRow,
};

use crate::baselines::hop_by_hop_rules;
use crate::concat::{construct_all, ConcatError};
use crate::lagrangian::{select_pathlets, CandidateSource, SelectionOutcome, SubpathSampler};
use crate::path::{parse_path_file, write_path_file, Path, PathletSet};
use crate::ruleplane::{
    assign_pids, install_pathlets, simulate_forward, synthesize_flow_rules, table_load, write_rules_csv, LoadReport,
    RuleTable,
};
use crate::topology::Topology;
use crate::workload::{build_desired_set, gen_flows_weighted, parse_flows, write_flows, DesiredPathSet};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("empty input")]
    EmptyInput,
    #[error("config: {0}")]
    Config(String),
    #[error("row {row}: {reason}")]
    Format { row: usize, reason: String },
    #[error("path {tag}: replay failed: {reason}")]
    TraceMismatch { tag: String, reason: String },
    #[error("rule tables exceed free capacity at {}", .0.join(", "))]
    Overflow(Vec<String>),
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub topology: Topology,
    pub desired: DesiredPathSet,
    pub selection: SelectionOutcome,
    /// Selected pathlets plus the representatives nesting minted, with pids.
    pub pathlets: PathletSet,
    pub records: Vec<ConcatRecord>,
    pub table: RuleTable,
    pub load: LoadReport,
    pub sims: Vec<SimRecord>,
    pub report: MetricsReport,
}

/// Concatenates every desired path over `set` (minting representatives as
/// needed). Paths with no concatenation get an empty record.
pub fn concat_stage(set: &mut PathletSet, desired: &DesiredPathSet, m_max: usize) -> crate::Result<Vec<ConcatRecord>> {
    let paths = desired.paths();
    let results = construct_all(set, &paths, m_max);
    let mut out = Vec::with_capacity(paths.len());
    for (i, r) in results.into_iter().enumerate() {
        let conc = match r {
            Ok(c) => Some(c),
            Err(ConcatError::NotConcatenable(_)) => None,
            Err(e) => return Err(e.into()),
        };
        out.push(ConcatRecord::new(i, &desired.entries[i].tag, &paths[i], conc.as_ref()));
    }
    Ok(out)
}

/// Installs all pathlet rules and one ingress/egress pair per concatenated
/// record. Pids must be assigned.
pub fn install_stage(topology: &Topology, set: &PathletSet, records: &[ConcatRecord]) -> crate::Result<RuleTable> {
    let mut table = RuleTable::new(topology.node_count());
    install_pathlets(topology, set, &mut table)?;
    for r in records {
        if let Some(c) = r.concatenation(set) {
            table.install_all(synthesize_flow_rules(set, &r.tag, &c)?)?;
        }
    }
    Ok(table)
}

/// Replays every concatenated record from its head.
pub fn simulate_stage(topology: &Topology, table: &RuleTable, records: &[ConcatRecord]) -> Vec<SimRecord> {
    records
        .par_iter()
        .filter(|r| !r.parts.is_empty())
        .map(|r| {
            let base = SimRecord {
                index: r.index,
                tag: r.tag.clone(),
                ok: false,
                lookups: 0,
                max_depth: 0,
                trace: Vec::new(),
                error: String::new(),
            };
            match simulate_forward(topology, table, &r.tag, r.path.head()) {
                Err(e) => SimRecord {
                    error: e.to_string(),
                    ..base
                },
                Ok(tr) => {
                    let error = if tr.nodes != r.path.nodes() {
                        format!("trace {} differs from desired path", topology.format_nodes(&tr.nodes))
                    } else if !tr.final_stack.is_empty() {
                        format!("{} labels left on delivery", tr.final_stack.len())
                    } else {
                        String::new()
                    };
                    SimRecord {
                        ok: error.is_empty(),
                        lookups: tr.lookups,
                        max_depth: tr.max_depth,
                        trace: tr.nodes,
                        error,
                        ..base
                    }
                }
            }
        })
        .collect()
}

/// First failed replay as an error.
pub fn check_sims(sims: &[SimRecord]) -> Result<(), HarnessError> {
    match sims.iter().find(|s| !s.ok) {
        Some(s) => Err(HarnessError::TraceMismatch {
            tag: s.tag.clone(),
            reason: s.error.clone(),
        }),
        None => Ok(()),
    }
}

fn check_capacity(topology: &Topology, load: &LoadReport) -> Result<(), HarnessError> {
    if load.overflow.is_empty() {
        Ok(())
    } else {
        Err(HarnessError::Overflow(
            load.overflow.iter().map(|&v| topology.name(v).to_string()).collect(),
        ))
    }
}

/// The sampler a config describes.
pub fn sampler(config: &ExperimentConfig) -> SubpathSampler {
    SubpathSampler {
        max_len: config.max_len,
        k: config.k,
        per_pair: config.sample_per_pair,
        label_budget: config.selection_m_max,
        seed: config.seed,
    }
}

/// Full pipeline on an in-memory topology and desired set. Fails if any
/// replay disagrees with its desired path or a table overflows.
pub fn run_pipeline(
    topology: &Topology,
    desired: DesiredPathSet,
    config: &ExperimentConfig,
    source: &mut dyn CandidateSource,
) -> crate::Result<Experiment> {
    let paths = desired.paths();
    let selection = select_pathlets(&paths, topology, &config.solver(), config.selection_m_max, source)?;
    let mut set = selection.selected.clone();
    let records = concat_stage(&mut set, &desired, config.m_max)?;
    let pids = assign_pids(&set, config.pid_space)?;
    set.apply_pids(&pids);
    let table = install_stage(topology, &set, &records)?;
    let load = table_load(topology, &table);
    check_capacity(topology, &load)?;
    let sims = simulate_stage(topology, &table, &records);
    check_sims(&sims)?;

    let inputs = ReportInputs {
        flows: desired.flows.len(),
        labels_pre: records.iter().map(|r| r.labels_pre).collect(),
        labels_post: records.iter().map(|r| r.labels_post).collect(),
        coverage: Some(selection.coverage()),
        pathlets: set.len(),
        representatives: set.iter().filter(|s| s.is_representative()).count(),
        trace: selection
            .rounds
            .iter()
            .flat_map(|r| r.trace.iter().map(move |row| (r.round, row.clone())))
            .collect(),
        max_segments: config.max_segments,
    };
    let report = build_report(topology, &paths, &load, inputs);
    Ok(Experiment {
        topology: topology.clone(),
        desired,
        selection,
        pathlets: set,
        records,
        table,
        load,
        sims,
        report,
    })
}

pub fn load_topology(config: &ExperimentConfig) -> crate::Result<Topology> {
    let t = Topology::parse(&fs::read_to_string(&config.topology)?)?;
    Ok(match config.capacity {
        Some(c) => t.with_uniform_capacity(c),
        None => t,
    })
}

/// Desired paths per the config: a path file, a flow file, or generated
/// flows, in that order of preference.
pub fn load_desired(topology: &Topology, config: &ExperimentConfig) -> crate::Result<DesiredPathSet> {
    if let Some(p) = &config.paths_file {
        return Ok(DesiredPathSet::from_paths(parse_path_file(
            topology,
            &fs::read_to_string(p)?,
        )?));
    }
    let flows = match &config.flows_file {
        Some(f) => parse_flows(topology, &fs::read_to_string(f)?)?,
        None => gen_flows_weighted(topology, config.m, config.seed, config.weights),
    };
    Ok(build_desired_set(topology, &flows))
}

/// Loads the inputs a config names and runs [`run_pipeline`], writing the
/// artifacts when `out_dir` is set.
pub fn run_experiment(config: &ExperimentConfig) -> crate::Result<Experiment> {
    config.validate()?;
    let topology = load_topology(config)?;
    let desired = load_desired(&topology, config)?;
    let exp = match &config.pathlets_file {
        Some(f) => {
            let pool = parse_path_file(&topology, &fs::read_to_string(f)?)?;
            let mut fixed = move |_: usize, _: &[Path], _: &Topology| pool.clone();
            run_pipeline(&topology, desired, config, &mut fixed)?
        }
        None => run_pipeline(&topology, desired, config, &mut sampler(config))?,
    };
    if let Some(dir) = &config.out_dir {
        write_artifacts(&exp, dir)?;
    }
    Ok(exp)
}

/// Writes every stage's output into `dir`.
pub fn write_artifacts(exp: &Experiment, dir: &FsPath) -> crate::Result<()> {
    fs::create_dir_all(dir)?;
    let t = &exp.topology;
    let paths = exp.desired.paths();
    let hbh = hop_by_hop_rules(&paths, t.node_count());
    let (compare_csv, compare_txt) = compare_schemes(&exp.report);
    let files: Vec<(&str, String)> = vec![
        ("flows.txt", write_flows(t, &exp.desired.flows)),
        ("paths.txt", write_path_file(t, &paths)),
        ("paths_meta.csv", io::write_paths_meta(t, &exp.desired)?),
        (
            "pathlets.txt",
            write_path_file(t, exp.selection.selected.iter().map(|s| s.route())),
        ),
        ("pathlet_table.csv", io::write_pathlet_table(t, &exp.pathlets)?),
        ("concat.csv", io::write_concat_csv(t, &exp.records)?),
        ("concat.txt", io::concat_dump(t, &exp.pathlets, &exp.records)),
        ("rules.csv", write_rules_csv(t, &exp.table)?),
        ("sim.csv", io::write_sim_csv(t, &exp.sims)?),
        (
            "occupancy.csv",
            io::write_occupancy_csv(t, &exp.load.core, &exp.load.edge, &hbh),
        ),
        ("baselines.csv", io::write_baselines_csv(&exp.report)),
        ("metrics.csv", exp.report.metrics_csv()),
        ("ccdf.csv", exp.report.ccdf_csv()),
        ("compare.csv", compare_csv),
        ("compare.txt", compare_txt),
        ("trace.csv", exp.report.trace_csv()),
    ];
    for (name, body) in files {
        fs::write(dir.join(name), body)?;
    }
    Ok(())
}

/// Runs `config` once per seed. Returns the reports and a CSV with one row
/// per seed followed by a `mean` row.
pub fn run_sweep(config: &ExperimentConfig, seeds: &[u64]) -> crate::Result<(Vec<MetricsReport>, String)> {
    if seeds.is_empty() {
        return Err(HarnessError::EmptyInput.into());
    }
    let mut reports = Vec::new();
    for &seed in seeds {
        let mut c = config.clone();
        c.seed = seed;
        c.out_dir = config.out_dir.as_ref().map(|d| d.join(format!("seed_{seed}")));
        reports.push(run_experiment(&c)?.report);
    }
    let keys: Vec<&str> = reports[0].summary().iter().map(|(k, _)| *k).collect();
    let mut csv = format!("seed,{}\n", keys.join(","));
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| r.summary().into_iter().map(|(_, v)| v).collect())
        .collect();
    for (seed, row) in seeds.iter().zip(&rows) {
        csv.push_str(&format!("{seed},{}\n", row.join(",")));
    }
    let means: Vec<String> = (0..keys.len())
        .map(|j| {
            let vals: Option<Vec<f64>> = rows.iter().map(|r| r[j].parse::<f64>().ok()).collect();
            vals.map_or("na".to_string(), |v| {
                metrics::fmt_f(v.iter().sum::<f64>() / v.len() as f64)
            })
        })
        .collect();
    csv.push_str(&format!("mean,{}\n", means.join(",")));
    if let Some(dir) = &config.out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("sweep.csv"), &csv)?;
    }
    Ok((reports, csv))
}

/// Connected `n`-node subgraph grown breadth-first from `start`.
pub fn topo_subset(topology: &Topology, start: &str, n: usize) -> crate::Result<Topology> {
    if n == 0 {
        return Err(HarnessError::Config("subset size must be at least 1".into()).into());
    }
    Ok(topology.bfs_subgraph(topology.id(start)?, n))
}
