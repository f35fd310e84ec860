//! `pathlet`: staged and end-to-end pathlet routing experiments.

use std::fs;
use std::path::{Path as FsPath, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use pathlet_core::harness::{
    self, build_report, check_sims, compare_schemes, concat_stage, install_stage, io, run_experiment, run_sweep,
    simulate_stage, ExperimentConfig, ReportInputs,
};
use pathlet_core::lagrangian::{select_pathlets, SubpathSampler};
use pathlet_core::path::{parse_path_file, write_path_file, PathletSet};
use pathlet_core::ruleplane::{assign_pids, parse_rules_csv, table_load, write_rules_csv};
use pathlet_core::workload::{build_desired_set, gen_flows_weighted, write_flows, DesiredPathSet, KindWeights};
use pathlet_core::{Path, Topology};

#[derive(Parser)]
#[command(
    name = "pathlet",
    version,
    about = "Pathlet selection, concatenation and rule-plane experiments"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Extract a connected subgraph by BFS from a node.
    GenTopoSubset {
        #[arg(long)]
        topology: PathBuf,
        #[arg(long)]
        start: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate flows and their desired paths.
    GenWorkload {
        #[arg(long)]
        topology: PathBuf,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Kind weights: protected,suspicious,bulk,time_sensitive.
        #[arg(long)]
        weights: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Select pathlets for a desired path file.
    Select {
        #[arg(long)]
        topology: PathBuf,
        #[arg(long)]
        paths: PathBuf,
        /// Fixed candidate pool; the sub-path sampler is used otherwise.
        #[arg(long)]
        pool: Option<PathBuf>,
        #[command(flatten)]
        opts: Overrides,
        #[arg(long)]
        out: PathBuf,
    },
    /// Concatenate desired paths over selected pathlets and assign pids.
    Concat {
        #[arg(long)]
        topology: PathBuf,
        #[arg(long)]
        paths: PathBuf,
        /// `paths_meta.csv` supplying flow tags; `p<i>` otherwise.
        #[arg(long)]
        meta: Option<PathBuf>,
        #[arg(long)]
        pathlets: PathBuf,
        #[arg(long, default_value_t = harness::DEFAULT_M_MAX)]
        m_max: usize,
        #[arg(long, default_value_t = pathlet_core::ruleplane::DEFAULT_PID_SPACE)]
        pid_space: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize and install rules; fails on capacity overflow.
    Install {
        #[arg(long)]
        topology: PathBuf,
        #[arg(long)]
        pathlet_table: PathBuf,
        #[arg(long)]
        concat: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay every concatenated path; fails unless all match.
    Simulate {
        #[arg(long)]
        topology: PathBuf,
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        concat: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Metrics, CCDFs and the scheme comparison from staged outputs.
    Report {
        #[arg(long)]
        topology: PathBuf,
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        concat: PathBuf,
        #[arg(long)]
        pathlet_table: Option<PathBuf>,
        #[arg(long, default_value_t = pathlet_core::baselines::DEFAULT_MAX_SEGMENTS)]
        max_segments: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full pipeline from a config file and/or flags.
    Run {
        /// `key = value` config; relative paths resolve against its directory.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        topology: Option<PathBuf>,
        #[arg(long)]
        flows: Option<PathBuf>,
        #[arg(long)]
        paths: Option<PathBuf>,
        #[arg(long)]
        pathlets: Option<PathBuf>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        weights: Option<String>,
        #[command(flatten)]
        opts: Overrides,
        #[arg(long)]
        m_max: Option<usize>,
        #[arg(long)]
        pid_space: Option<u32>,
        #[arg(long)]
        max_segments: Option<usize>,
        /// Comma-separated seeds; writes one sub-directory per seed plus sweep.csv.
        #[arg(long)]
        sweep: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Solver and candidate flags shared by `select` and `run`.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    capacity: Option<u32>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    sample_per_pair: Option<usize>,
    #[arg(long)]
    epsilon_star: Option<f64>,
    #[arg(long)]
    t_prime: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    hard_cap: Option<usize>,
    #[arg(long)]
    selection_m_max: Option<usize>,
}

impl Overrides {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        macro_rules! push {
            ($($f:ident),*) => {
                $(if let Some(x) = &self.$f { v.push((stringify!($f), x.to_string())); })*
            };
        }
        push!(
            seed,
            capacity,
            k,
            max_len,
            sample_per_pair,
            epsilon_star,
            t_prime,
            rounds,
            hard_cap,
            selection_m_max
        );
        v
    }

    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        for (k, v) in self.pairs() {
            cfg.set(k, &v, FsPath::new("."))?;
        }
        Ok(())
    }
}

fn read(path: &FsPath) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_topology(path: &FsPath) -> Result<Topology> {
    Topology::parse(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn write(dir: &FsPath, name: &str, body: impl AsRef<[u8]>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let p = dir.join(name);
    fs::write(&p, body).with_context(|| format!("writing {}", p.display()))
}

fn read_paths(t: &Topology, path: &FsPath) -> Result<Vec<Path>> {
    parse_path_file(t, &read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn desired_from(paths: Vec<Path>, meta: Option<&PathBuf>) -> Result<DesiredPathSet> {
    let mut set = DesiredPathSet::from_paths(paths);
    if let Some(m) = meta {
        let tags = io::parse_paths_meta_tags(&read(m)?)?;
        if tags.len() != set.len() {
            bail!(
                "{} lists {} paths, path file has {}",
                m.display(),
                tags.len(),
                set.len()
            );
        }
        for (e, tag) in set.entries.iter_mut().zip(tags) {
            e.tag = tag;
        }
    }
    Ok(set)
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::GenTopoSubset {
            topology,
            start,
            n,
            out,
        } => {
            let t = read_topology(&topology)?;
            let sub = harness::topo_subset(&t, &start, n)?;
            if let Some(dir) = out.parent() {
                fs::create_dir_all(dir)?;
            }
            fs::write(&out, sub.to_text())?;
            println!("{} nodes, {} links", sub.node_count(), sub.link_count());
        }
        Cmd::GenWorkload {
            topology,
            m,
            seed,
            weights,
            out,
        } => {
            let t = read_topology(&topology)?;
            let mut cfg = ExperimentConfig::new(&topology);
            if let Some(w) = &weights {
                cfg.set("weights", w, FsPath::new("."))?;
            }
            let weights: KindWeights = cfg.weights;
            let flows = gen_flows_weighted(&t, m, seed, weights);
            let desired = build_desired_set(&t, &flows);
            write(&out, "flows.txt", write_flows(&t, &flows))?;
            write(&out, "paths.txt", write_path_file(&t, &desired.paths()))?;
            write(&out, "paths_meta.csv", io::write_paths_meta(&t, &desired)?)?;
            for w in &desired.warnings {
                eprintln!("warning: {w}");
            }
            println!("{} flows, {} desired paths", flows.len(), desired.len());
        }
        Cmd::Select {
            topology,
            paths,
            pool,
            opts,
            out,
        } => {
            let t = read_topology(&topology)?;
            let mut cfg = ExperimentConfig::new(&topology);
            opts.apply(&mut cfg)?;
            let t = match cfg.capacity {
                Some(c) => t.with_uniform_capacity(c),
                None => t,
            };
            let desired = read_paths(&t, &paths)?;
            let outcome = match pool {
                Some(p) => {
                    let pool = read_paths(&t, &p)?;
                    let mut fixed = move |_: usize, _: &[Path], _: &Topology| pool.clone();
                    select_pathlets(&desired, &t, &cfg.solver(), cfg.selection_m_max, &mut fixed)?
                }
                None => {
                    let mut s: SubpathSampler = harness::sampler(&cfg);
                    select_pathlets(&desired, &t, &cfg.solver(), cfg.selection_m_max, &mut s)?
                }
            };
            write(
                &out,
                "pathlets.txt",
                write_path_file(&t, outcome.selected.iter().map(|s| s.route())),
            )?;
            let mut trace = format!("round,{}\n", pathlet_core::lagrangian::TRACE_HEADER);
            let mut rounds = String::from("round,candidates,paths,newly_covered,z_up,z_lb,iterations\n");
            for r in &outcome.rounds {
                for row in &r.trace {
                    trace.push_str(&format!("{},{}\n", r.round, row.csv()));
                }
                rounds.push_str(&format!(
                    "{},{},{},{},{:.6},{:.6},{}\n",
                    r.round,
                    r.candidates,
                    r.paths,
                    r.newly_covered,
                    r.z_up,
                    r.z_lb,
                    r.trace.len()
                ));
            }
            write(&out, "trace.csv", trace)?;
            write(&out, "rounds.csv", rounds)?;
            println!(
                "{} pathlets, coverage {:.6} over {} rounds",
                outcome.selected.len(),
                outcome.coverage(),
                outcome.rounds.len()
            );
        }
        Cmd::Concat {
            topology,
            paths,
            meta,
            pathlets,
            m_max,
            pid_space,
            out,
        } => {
            let t = read_topology(&topology)?;
            let desired = desired_from(read_paths(&t, &paths)?, meta.as_ref())?;
            let mut set = PathletSet::from_routes(read_paths(&t, &pathlets)?);
            let records = concat_stage(&mut set, &desired, m_max)?;
            set.apply_pids(&assign_pids(&set, pid_space)?);
            write(&out, "pathlet_table.csv", io::write_pathlet_table(&t, &set)?)?;
            write(&out, "concat.csv", io::write_concat_csv(&t, &records)?)?;
            write(&out, "concat.txt", io::concat_dump(&t, &set, &records))?;
            let done = records.iter().filter(|r| !r.parts.is_empty()).count();
            println!("{done} of {} paths concatenated", records.len());
        }
        Cmd::Install {
            topology,
            pathlet_table,
            concat,
            out,
        } => {
            let t = read_topology(&topology)?;
            let set = io::parse_pathlet_table(&t, &read(&pathlet_table)?)?;
            let records = io::parse_concat_csv(&t, &read(&concat)?)?;
            let table = install_stage(&t, &set, &records)?;
            let load = table_load(&t, &table);
            write(&out, "rules.csv", write_rules_csv(&t, &table)?)?;
            let hbh = pathlet_core::baselines::hop_by_hop_rules(
                &records.iter().map(|r| r.path.clone()).collect::<Vec<_>>(),
                t.node_count(),
            );
            write(
                &out,
                "occupancy.csv",
                io::write_occupancy_csv(&t, &load.core, &load.edge, &hbh),
            )?;
            if !load.overflow.is_empty() {
                bail!("rule tables exceed free capacity at {}", t.format_nodes(&load.overflow));
            }
            println!("{} rules installed", table.len());
        }
        Cmd::Simulate {
            topology,
            rules,
            concat,
            out,
        } => {
            let t = read_topology(&topology)?;
            let table = parse_rules_csv(&t, &read(&rules)?)?;
            let records = io::parse_concat_csv(&t, &read(&concat)?)?;
            let sims = simulate_stage(&t, &table, &records);
            write(&out, "sim.csv", io::write_sim_csv(&t, &sims)?)?;
            check_sims(&sims)?;
            println!("{} paths replayed exactly", sims.len());
        }
        Cmd::Report {
            topology,
            rules,
            concat,
            pathlet_table,
            max_segments,
            out,
        } => {
            let t = read_topology(&topology)?;
            let table = parse_rules_csv(&t, &read(&rules)?)?;
            let records = io::parse_concat_csv(&t, &read(&concat)?)?;
            let (pathlets, reps) = match &pathlet_table {
                Some(p) => {
                    let set = io::parse_pathlet_table(&t, &read(p)?)?;
                    (set.len(), set.iter().filter(|s| s.is_representative()).count())
                }
                None => (0, 0),
            };
            let paths: Vec<Path> = records.iter().map(|r| r.path.clone()).collect();
            let inputs = ReportInputs {
                flows: records.len(),
                labels_pre: records.iter().map(|r| r.labels_pre).collect(),
                labels_post: records.iter().map(|r| r.labels_post).collect(),
                coverage: None,
                pathlets,
                representatives: reps,
                trace: Vec::new(),
                max_segments,
            };
            let report = build_report(&t, &paths, &table_load(&t, &table), inputs);
            emit_report(&out, &report)?;
        }
        Cmd::Run {
            config,
            topology,
            flows,
            paths,
            pathlets,
            m,
            weights,
            opts,
            m_max,
            pid_space,
            max_segments,
            sweep,
            out,
        } => {
            let mut cfg = match &config {
                Some(c) => {
                    let base = c.parent().unwrap_or(FsPath::new("."));
                    ExperimentConfig::from_kv(&read(c)?, base)?
                }
                None => {
                    let t = topology.clone().context("either --config or --topology is required")?;
                    ExperimentConfig::new(t)
                }
            };
            let here = FsPath::new(".");
            let mut set = |k: &str, v: Option<String>| -> Result<()> {
                if let Some(v) = v {
                    cfg.set(k, &v, here)?;
                }
                Ok(())
            };
            let disp = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
            set("topology", disp(&topology))?;
            set("flows_file", disp(&flows))?;
            set("paths_file", disp(&paths))?;
            set("pathlets_file", disp(&pathlets))?;
            set("m", m.map(|x| x.to_string()))?;
            set("weights", weights)?;
            set("m_max", m_max.map(|x| x.to_string()))?;
            set("pid_space", pid_space.map(|x| x.to_string()))?;
            set("max_segments", max_segments.map(|x| x.to_string()))?;
            opts.apply(&mut cfg)?;
            cfg.out_dir = Some(out.clone());
            cfg.validate()?;
            match sweep {
                Some(list) => {
                    let seeds: Vec<u64> = list
                        .split(',')
                        .map(|s| s.trim().parse().with_context(|| format!("bad seed `{s}`")))
                        .collect::<Result<_>>()?;
                    let (_, csv) = run_sweep(&cfg, &seeds)?;
                    print!("{csv}");
                }
                None => {
                    let exp = run_experiment(&cfg)?;
                    print!("{}", compare_schemes(&exp.report).1);
                    if exp.report.success < 1.0 {
                        eprintln!(
                            "warning: {} of {} paths concatenated",
                            exp.report.concatenated, exp.report.paths
                        );
                    }
                }
            }
        }
    }
    Ok(())
}

fn emit_report(out: &FsPath, report: &harness::MetricsReport) -> Result<()> {
    let (csv, text) = compare_schemes(report);
    write(out, "metrics.csv", report.metrics_csv())?;
    write(out, "ccdf.csv", report.ccdf_csv())?;
    write(out, "baselines.csv", io::write_baselines_csv(report))?;
    write(out, "compare.csv", csv)?;
    write(out, "compare.txt", &text)?;
    print!("{text}");
    Ok(())
}
